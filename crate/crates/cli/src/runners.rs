//! Subcommand runners: Monte Carlo orchestration and bit-exact artifact
//! emission. Replications execute in parallel but are aggregated in
//! replication-index order, so every output byte is a pure function of
//! (config, master seed).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use phcf_core::integrator::{simulate, SimulationConfig, Trajectory};
use phcf_core::invariant::{
    convergence_bound, convergence_bound_sigma_squared, stationary_covariance,
};
use phcf_core::model::{equilibrium_state, spacings, to_perturbation, ModelParams};
use phcf_core::observables::{acf_of_series, gaussian_w2, perturbed_hamiltonian};
use phcf_core::spectral::{spectrum, stability_margin};

use crate::config::ScenarioConfig;
use crate::format;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("i/o error on `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] phcf_core::Error),
}

pub type Result<T> = std::result::Result<T, RunnerError>;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn sim_config(cfg: &ScenarioConfig, seed: u64) -> SimulationConfig {
    SimulationConfig {
        dt: cfg.dt_s,
        n_steps: cfg.n_steps,
        burn_in_steps: cfg.effective_burn_in(),
        seed,
        record_every: cfg.record_every,
    }
}

/// One line of the simulate summary NDJSON.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct SummaryRecord {
    pub alpha: f64,
    pub replication: usize,
    pub seed: u64,
    pub status: String,
    pub failure_step: Option<usize>,
    pub mean_perturbed_hamiltonian: Option<f64>,
    pub speed_variance: Option<f64>,
    pub spacing_variance: Option<f64>,
    pub negative_spacings: Option<u64>,
}

pub struct SimulateOutcome {
    pub summary_path: PathBuf,
    pub failed_replications: usize,
}

struct ReplicationStats {
    mean_h: f64,
    speed_variance: f64,
    spacing_variance: f64,
}

fn replication_stats(params: &ModelParams, traj: &Trajectory, burn_in: usize) -> ReplicationStats {
    let start = traj.first_sample_at_or_after(burn_in);
    let kept = &traj.states[start..];
    let times = &traj.times[start..];

    let mut h_sum = 0.0;
    let mut speed = (0.0, 0.0, 0usize);
    let mut gap = (0.0, 0.0, 0usize);
    for (state, &t) in kept.iter().zip(times) {
        let pert = to_perturbation(state, params, t);
        h_sum += perturbed_hamiltonian(&pert, params.alpha);
        for &p in &state.momenta {
            speed = (speed.0 + p, speed.1 + p * p, speed.2 + 1);
        }
        for q in spacings(state, params.ring_length) {
            gap = (gap.0 + q, gap.1 + q * q, gap.2 + 1);
        }
    }
    let variance = |(s, s2, n): (f64, f64, usize)| {
        let m = s / n as f64;
        (s2 / n as f64 - m * m).max(0.0)
    };
    ReplicationStats {
        mean_h: h_sum / kept.len() as f64,
        speed_variance: variance(speed),
        spacing_variance: variance(gap),
    }
}

fn trajectory_csv(params: &ModelParams, traj: &Trajectory, window_s: Option<f64>) -> String {
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let t_min = window_s.map_or(f64::NEG_INFINITY, |w| t_end - w);
    let mut out = String::from("step,time_s,vehicle,position_m,speed_mps,spacing_m\n");
    for ((state, &t), &step) in traj.states.iter().zip(&traj.times).zip(&traj.steps) {
        if t < t_min {
            continue;
        }
        let gaps = spacings(state, params.ring_length);
        for v in 0..state.len() {
            out.push_str(&format!(
                "{step},{},{v},{},{},{}\n",
                format::float(t),
                format::float(state.positions[v]),
                format::float(state.momenta[v]),
                format::float(gaps[v]),
            ));
        }
    }
    out
}

/// Monte Carlo sweep over `alpha_sweep`: summary NDJSON plus optional
/// per-replication trajectory CSVs. Replication `r` uses seed
/// `master_seed + r`; a blowup marks that replication failed without
/// aborting the sweep.
pub fn run_simulate(cfg: &ScenarioConfig, out: &Path) -> Result<SimulateOutcome> {
    ensure_dir(out)?;
    let burn_in = cfg.effective_burn_in();
    let mut lines = Vec::new();
    let mut failed = 0usize;

    for (alpha_idx, &alpha) in cfg.alpha_sweep.iter().enumerate() {
        let params = cfg.model_params(alpha);
        params.validate()?;
        let init = equilibrium_state(&params);

        let results: Vec<(SummaryRecord, Option<String>)> = (0..cfg.n_replications)
            .into_par_iter()
            .map(|r| {
                let seed = cfg.seed + r as u64;
                let config = sim_config(cfg, seed);
                match simulate(&params, &init, &config) {
                    Ok(traj) => {
                        let stats = replication_stats(&params, &traj, burn_in);
                        let csv = cfg
                            .emit_trajectory
                            .then(|| trajectory_csv(&params, &traj, cfg.window_s));
                        let record = SummaryRecord {
                            alpha,
                            replication: r,
                            seed,
                            status: "ok".into(),
                            failure_step: None,
                            mean_perturbed_hamiltonian: Some(stats.mean_h),
                            speed_variance: Some(stats.speed_variance),
                            spacing_variance: Some(stats.spacing_variance),
                            negative_spacings: Some(traj.negative_spacings),
                        };
                        (record, csv)
                    }
                    Err(phcf_core::Error::NumericalBlowup { step }) => {
                        let record = SummaryRecord {
                            alpha,
                            replication: r,
                            seed,
                            status: "failed".into(),
                            failure_step: Some(step),
                            mean_perturbed_hamiltonian: None,
                            speed_variance: None,
                            spacing_variance: None,
                            negative_spacings: None,
                        };
                        (record, None)
                    }
                    Err(e) => panic!("replication {r} failed unexpectedly: {e}"),
                }
            })
            .collect();

        for (r, (record, csv)) in results.into_iter().enumerate() {
            if record.status == "failed" {
                failed += 1;
            }
            lines.push(serde_json::to_string(&record).expect("summary record serializes"));
            if let Some(csv) = csv {
                let path = out.join(format!("trajectory_a{alpha_idx}_r{r}.csv"));
                write_file(&path, &csv)?;
            }
        }
    }

    let summary_path = out.join("summary.ndjson");
    write_file(&summary_path, &(lines.join("\n") + "\n"))?;
    Ok(SimulateOutcome { summary_path, failed_replications: failed })
}

/// Stability sweep over the configured parameter grid. Row order is the
/// nested loop gamma > beta > time gap > alpha, matching the header below.
pub fn run_stability(cfg: &ScenarioConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let gammas = cfg.gamma_sweep.clone().unwrap_or_else(|| vec![cfg.gamma_per_s]);
    let betas = cfg.beta_sweep.clone().unwrap_or_else(|| vec![cfg.beta_per_s]);
    let gaps = cfg.time_gap_sweep.clone().unwrap_or_else(|| vec![cfg.time_gap_s]);

    let mut csv = String::from(
        "n_vehicles,gamma_per_s,beta_per_s,time_gap_s,alpha,margin,abar,max_nonzero_real_part,long_wave_stable,all_modes_hurwitz\n",
    );
    for &gamma in &gammas {
        for &beta in &betas {
            for &time_gap in &gaps {
                for &alpha in &cfg.alpha_sweep {
                    let mut params = cfg.model_params(alpha);
                    params.gamma = gamma;
                    params.beta = beta;
                    params.time_gap = time_gap;
                    let margin = stability_margin(&params)?;
                    let report = spectrum(&params)?;
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        params.n_vehicles,
                        format::float(gamma),
                        format::float(beta),
                        format::float(time_gap),
                        format::float(alpha),
                        format::float(margin),
                        format::float(report.spectral_bound),
                        format::float(report.max_nonzero_real_part),
                        report.long_wave_stable,
                        report.all_modes_hurwitz,
                    ));
                }
            }
        }
    }
    let path = out.join("stability.csv");
    write_file(&path, &csv)?;
    Ok(path)
}

/// Scalar section of the invariant report, next to the two matrix CSVs.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct InvariantReport {
    pub abar: f64,
    pub relative_frobenius_gap: f64,
    pub gaussian_w2: f64,
    pub horizon_s: f64,
    pub convergence_bound_as_printed: f64,
    pub convergence_bound_sigma_squared: f64,
    pub n_samples: usize,
    pub n_replications: usize,
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format::float(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Stationary covariance versus a fresh simulated ensemble at the scalar
/// `alpha`: writes both matrices and a scalar report.
pub fn run_invariant(cfg: &ScenarioConfig, out: &Path) -> Result<InvariantReport> {
    ensure_dir(out)?;
    let params = cfg.model_params(cfg.alpha);
    params.validate()?;
    let stationary = stationary_covariance(&params)?;
    let dim = 2 * params.n_vehicles;
    let projector = stationary.projector.clone();
    let q = DMatrix::identity(dim, dim) - &projector;

    let burn_in = cfg.effective_burn_in();
    let init = equilibrium_state(&params);

    // per-replication first and second moments of the projected samples
    let partials: Vec<(DVector<f64>, DMatrix<f64>, usize)> = (0..cfg.n_replications)
        .into_par_iter()
        .map(|r| {
            let config = sim_config(cfg, cfg.seed + r as u64);
            let traj = simulate(&params, &init, &config).expect("invariant ensemble run");
            let start = traj.first_sample_at_or_after(burn_in);
            let mut s1 = DVector::zeros(dim);
            let mut s2 = DMatrix::zeros(dim, dim);
            let mut count = 0usize;
            for (state, &t) in traj.states[start..].iter().zip(&traj.times[start..]) {
                let z = DVector::from_vec(to_perturbation(state, &params, t).interleaved());
                let pz = &q * z;
                s2 += &pz * pz.transpose();
                s1 += pz;
                count += 1;
            }
            (s1, s2, count)
        })
        .collect();

    let mut s1 = DVector::zeros(dim);
    let mut s2 = DMatrix::zeros(dim, dim);
    let mut n_samples = 0usize;
    for (p1, p2, c) in partials {
        s1 += p1;
        s2 += p2;
        n_samples += c;
    }
    let mean = &s1 / n_samples as f64;
    let empirical = &s2 / n_samples as f64 - &mean * mean.transpose();
    let empirical = (&empirical + empirical.transpose()) * 0.5;

    let gap = (&empirical - &stationary.sigma_inf).norm() / stationary.sigma_inf.norm();
    let w2 = gaussian_w2(&stationary.sigma_inf, &empirical)?;
    let horizon = cfg.n_steps as f64 * cfg.dt_s;
    let x0 = vec![0.0; dim];
    let report = InvariantReport {
        abar: stationary.abar,
        relative_frobenius_gap: gap,
        gaussian_w2: w2,
        horizon_s: horizon,
        convergence_bound_as_printed: convergence_bound(&params, &x0, horizon)?,
        convergence_bound_sigma_squared: convergence_bound_sigma_squared(&params, &x0, horizon)?,
        n_samples,
        n_replications: cfg.n_replications,
    };

    write_file(&out.join("sigma_inf.csv"), &matrix_csv(&stationary.sigma_inf))?;
    write_file(&out.join("empirical_covariance.csv"), &matrix_csv(&empirical))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&out.join("invariant_report.json"), &(json + "\n"))?;
    Ok(report)
}

/// Speed autocorrelation per sweep alpha, pooled over vehicles and
/// replications, in long CSV format.
pub fn run_acf(cfg: &ScenarioConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let burn_in = cfg.effective_burn_in();
    let dt_sample = cfg.dt_s * cfg.record_every as f64;
    let max_lag = (cfg.max_lag_s / dt_sample).round() as usize;

    let mut csv = String::from("alpha,lag_s,acf\n");
    for &alpha in &cfg.alpha_sweep {
        let params = cfg.model_params(alpha);
        params.validate()?;
        let init = equilibrium_state(&params);

        let per_rep: Vec<Vec<Vec<f64>>> = (0..cfg.n_replications)
            .into_par_iter()
            .map(|r| {
                let config = sim_config(cfg, cfg.seed + r as u64);
                let traj = simulate(&params, &init, &config).expect("acf ensemble run");
                let start = traj.first_sample_at_or_after(burn_in);
                (0..params.n_vehicles)
                    .map(|v| traj.states[start..].iter().map(|s| s.momenta[v]).collect())
                    .collect()
            })
            .collect();
        let series: Vec<Vec<f64>> = per_rep.into_iter().flatten().collect();

        let curve = acf_of_series(&series, max_lag, dt_sample)?;
        for (lag, value) in curve.lags.iter().zip(&curve.values) {
            csv.push_str(&format!(
                "{},{},{}\n",
                format::float(alpha),
                format::float(*lag),
                format::float(*value),
            ));
        }
    }
    let path = out.join("acf.csv");
    write_file(&path, &csv)?;
    Ok(path)
}
