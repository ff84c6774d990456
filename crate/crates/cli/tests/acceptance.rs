//! Acceptance gate: twelve criteria, one test and one pass/fail line each.
//! Run with `--nocapture` to see the verdict lines for passing criteria;
//! failing criteria always print theirs.

use nalgebra::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use phcf_cli::config::parse_config;
use phcf_cli::runners::{run_acf, run_invariant, run_simulate, SummaryRecord};
use phcf_core::dynamics::{build_matrices, drift_carfollowing, drift_phs, perturbation_drift};
use phcf_core::integrator::{simulate, simulate_analysis, SimulationConfig};
use phcf_core::invariant::{covariance_at, stationary_covariance};
use phcf_core::model::{
    equilibrium_state, from_perturbation, ModelParams, OvfKind, PerturbationState, RingState,
};
use phcf_core::observables::{energy_balance_drift, hamiltonian};
use phcf_core::spectral::{spectrum, stability_margin};

fn verdict(n: usize, description: &str, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    eprintln!("criterion {n:2}: {word} - {description} [{detail}]");
    assert!(pass, "criterion {n} failed: {description} [{detail}]");
}

fn reference_params(n: usize, alpha: f64) -> ModelParams {
    ModelParams {
        n_vehicles: n,
        ring_length: 20.0 * n as f64,
        gamma: 1.0,
        beta: 0.5,
        alpha,
        sigma: 1.0,
        vehicle_length: 5.0,
        time_gap: 1.0,
        desired_speed: 30.0,
        ovf_kind: OvfKind::Affine,
    }
}

fn random_params(rng: &mut StdRng, n: usize) -> ModelParams {
    let mut p = reference_params(n, rng.random_range(0.0..1.5));
    p.gamma = rng.random_range(0.2..3.0);
    p.beta = rng.random_range(0.0..1.5);
    p.time_gap = rng.random_range(0.5..2.0);
    p
}

fn random_state(rng: &mut StdRng, p: &ModelParams) -> RingState {
    let spacing = p.ring_length / p.n_vehicles as f64;
    RingState::new(
        (0..p.n_vehicles)
            .map(|i| i as f64 * spacing + rng.random_range(-0.3 * spacing..0.3 * spacing))
            .collect(),
        (0..p.n_vehicles).map(|_| rng.random_range(-10.0..10.0)).collect(),
    )
}

#[test]
fn criterion_01_formulation_equivalence() {
    let mut rng = StdRng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..=64usize);
        let p = random_params(&mut rng, n);
        let state = random_state(&mut rng, &p);
        let (dq_a, dp_a) = drift_carfollowing(&p, &state).unwrap();
        let (dq_b, dp_b) = drift_phs(&p, &state).unwrap();
        for i in 0..n {
            worst = worst.max((dq_a[i] - dq_b[i]).abs()).max((dp_a[i] - dp_b[i]).abs());
        }
    }
    verdict(
        1,
        "car-following and port-Hamiltonian drifts agree over 1000 draws",
        worst <= 1e-12,
        &format!("max abs gap {worst:.3e}, tol 1e-12"),
    );
}

#[test]
fn criterion_02_linearization_fidelity() {
    let step = 1e-6;
    let mut worst = 0.0f64;
    for n in 3..=8usize {
        let p = reference_params(n, 0.3);
        let a = build_matrices(&p).unwrap().drift_matrix().unwrap().clone();
        let dim = 2 * n;
        for j in 0..dim {
            let mut plus = vec![0.0; dim];
            let mut minus = vec![0.0; dim];
            plus[j] = step;
            minus[j] = -step;
            let f = |z: &[f64]| -> Vec<f64> {
                let pert = PerturbationState::from_interleaved(z);
                let (dx, dy) = perturbation_drift(&p, &pert).unwrap();
                PerturbationState { x: dx, y: dy }.interleaved()
            };
            let fp = f(&plus);
            let fm = f(&minus);
            for i in 0..dim {
                let fd = (fp[i] - fm[i]) / (2.0 * step);
                worst = worst.max((a[(i, j)] - fd).abs());
            }
        }
    }
    verdict(
        2,
        "drift matrix matches the finite-difference Jacobian at equilibrium",
        worst <= 1e-6,
        &format!("max abs gap {worst:.3e}, tol 1e-6, N in 3..8"),
    );
}

#[test]
fn criterion_03_spectrum_oracle() {
    let mut rng = StdRng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(3..=16usize);
        let p = random_params(&mut rng, n);
        let a = build_matrices(&p).unwrap().drift_matrix().unwrap().clone();
        let mut dense: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
        let scale = dense.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        for mode in &spectrum(&p).unwrap().modes {
            for root in mode.roots {
                let (idx, gap) = dense
                    .iter()
                    .enumerate()
                    .map(|(i, z)| (i, (z - root).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                worst = worst.max(gap / scale);
                dense.swap_remove(idx);
            }
        }
    }
    verdict(
        3,
        "closed-form mode roots equal dense eigenvalues as multisets",
        worst <= 1e-8,
        &format!("max relative mismatch {worst:.3e}, tol 1e-8, 200 draws"),
    );
}

#[test]
fn criterion_04_stability_condition_soundness() {
    let mut rng = StdRng::seed_from_u64(104);
    let mut checked = 0usize;
    let mut counterexamples = 0usize;
    let mut draws = 0usize;
    while draws < 1000 {
        draws += 1;
        let n = rng.random_range(4..=32usize);
        let mut p = reference_params(n, rng.random_range(0.0..=2.0));
        p.gamma = rng.random_range(0.0..5.0) + f64::EPSILON;
        p.beta = rng.random_range(0.0..=3.0);
        p.time_gap = rng.random_range(0.3..=3.0);
        if stability_margin(&p).unwrap() > 0.0 {
            checked += 1;
            let report = spectrum(&p).unwrap();
            if !(report.max_nonzero_real_part < 0.0) {
                counterexamples += 1;
            }
        }
    }
    verdict(
        4,
        "strict long-wave condition implies a strictly stable nonzero spectrum",
        counterexamples == 0 && checked > 0,
        &format!("{checked} strict cases of 1000 draws, {counterexamples} counterexamples"),
    );
}

#[test]
fn criterion_05_critical_case() {
    let critical = reference_params(50, 0.0);
    let margin = stability_margin(&critical).unwrap();
    let nudged = reference_params(50, 0.05);
    let abar = spectrum(&nudged).unwrap().spectral_bound;
    verdict(
        5,
        "reference scenario is exactly critical at zero stiffness and stable at 0.05",
        margin == 0.0 && abar > 0.0,
        &format!("margin {margin:e}, abar {abar:.4e}"),
    );
}

#[test]
fn criterion_06_energy_conservation_order() {
    let mut p = reference_params(8, 1.0);
    p.gamma = 0.0;
    p.beta = 0.0;
    p.sigma = 0.0;

    let mut rng = StdRng::seed_from_u64(106);
    let mut pert = PerturbationState::zero(8);
    for i in 0..8 {
        pert.x[i] = rng.random_range(-0.5..0.5);
        pert.y[i] = rng.random_range(-0.5..0.5);
    }
    let init = from_perturbation(&pert, &p, 0.0);
    let h0 = hamiltonian(&init, &p.potential(), p.ring_length);

    let horizon = 5.0;
    let drift_at = |dt: f64| -> f64 {
        let steps = (horizon / dt).round() as usize;
        let config = SimulationConfig {
            dt,
            n_steps: steps,
            burn_in_steps: 0,
            seed: 0,
            record_every: steps,
        };
        let traj = simulate_analysis(&p, &init, &config).unwrap();
        let h = hamiltonian(traj.states.last().unwrap(), &p.potential(), p.ring_length);
        (h - h0).abs()
    };
    let ratio = drift_at(0.01) / drift_at(0.005);
    verdict(
        6,
        "pure-Hamiltonian energy drift halves with the step",
        (1.7..=2.3).contains(&ratio),
        &format!("drift ratio {ratio:.3}, required [1.7, 2.3]"),
    );
}

#[test]
fn criterion_07_energy_balance() {
    let p = reference_params(6, 0.2);
    let dt = 0.005;
    let n_runs = 10_000usize;

    let equilibrium = equilibrium_state(&p);
    let mut rng = StdRng::seed_from_u64(107);
    let perturb = |rng: &mut StdRng, scale: f64| {
        let mut s = equilibrium_state(&p);
        for i in 0..6 {
            s.positions[i] += rng.random_range(-scale..scale);
            s.momenta[i] += rng.random_range(-scale..scale);
        }
        s
    };
    let states = [equilibrium, perturb(&mut rng, 1.0), perturb(&mut rng, 3.0)];

    let mut detail = String::new();
    let mut all_within = true;
    for (si, state) in states.iter().enumerate() {
        let h0 = hamiltonian(state, &p.potential(), p.ring_length);
        let predicted = energy_balance_drift(&p, state).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for r in 0..n_runs {
            let config = SimulationConfig {
                dt,
                n_steps: 1,
                burn_in_steps: 0,
                seed: 70_000 + (si * n_runs + r) as u64,
                record_every: 1,
            };
            let traj = simulate(&p, state, &config).unwrap();
            let dh =
                (hamiltonian(traj.states.last().unwrap(), &p.potential(), p.ring_length) - h0) / dt;
            sum += dh;
            sum_sq += dh * dh;
        }
        let mean = sum / n_runs as f64;
        let var = (sum_sq / n_runs as f64 - mean * mean).max(0.0);
        let se = (var / n_runs as f64).sqrt();
        let z = (mean - predicted).abs() / se;
        all_within &= z <= 3.0;
        detail.push_str(&format!("state {si}: z {z:.2}; "));
    }
    verdict(
        7,
        "Monte Carlo single-step energy increment matches the balance drift",
        all_within,
        detail.trim_end_matches("; "),
    );
}

#[test]
fn criterion_08_invariant_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        "n_vehicles = 6\n\
         ring_length_m = 120\n\
         gamma_per_s = 1\n\
         beta_per_s = 0.5\n\
         time_gap_s = 1\n\
         alpha = 0.2\n\
         sigma = 1\n\
         dt_s = 0.01\n\
         n_steps = 100000\n\
         burn_in_steps = 50000\n\
         record_every = 10\n\
         n_replications = 200\n\
         seed = 0\n",
    )
    .unwrap();
    let report = run_invariant(&cfg, dir.path()).unwrap();
    verdict(
        8,
        "ensemble covariance matches the stationary covariance within 5%",
        report.relative_frobenius_gap <= 0.05,
        &format!(
            "relative Frobenius gap {:.4}, W2 {:.4}, {} samples",
            report.relative_frobenius_gap, report.gaussian_w2, report.n_samples
        ),
    );
}

#[test]
fn criterion_09_convergence_rate() {
    let p = reference_params(6, 0.2);
    let stationary = stationary_covariance(&p).unwrap();
    let abar = stationary.abar;

    let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5 / abar).collect();
    let points: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let gap = (covariance_at(&p, t).unwrap() - &stationary.sigma_inf).norm();
            (t, gap.ln())
        })
        .collect();

    // least-squares slope of log gap versus time
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(t, _)| t).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(t, _)| t * t).sum();
    let sxy: f64 = points.iter().map(|(t, y)| t * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    verdict(
        9,
        "covariance gap decays at least at 1.8 times the spectral bound",
        slope <= -1.8 * abar,
        &format!("slope {slope:.4}, threshold {:.4}", -1.8 * abar),
    );
}

fn desk_scale_config(extra: &str) -> String {
    format!(
        "n_vehicles = 50\n\
         ring_length_m = 1000\n\
         sigma = 5\n\
         dt_s = 0.01\n\
         n_steps = 50000\n\
         record_every = 10\n\
         n_replications = 20\n\
         seed = 0\n\
         {extra}"
    )
}

struct AlphaEnergy {
    alpha: f64,
    mean: f64,
    half_width: f64,
}

fn energy_by_alpha(records: &[SummaryRecord]) -> Vec<AlphaEnergy> {
    let mut alphas: Vec<f64> = records.iter().map(|r| r.alpha).collect();
    alphas.dedup();
    alphas
        .into_iter()
        .map(|alpha| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.alpha == alpha)
                .map(|r| r.mean_perturbed_hamiltonian.unwrap())
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            AlphaEnergy { alpha, mean, half_width: 1.96 * (var / n).sqrt() }
        })
        .collect()
}

#[test]
fn criterion_10_energy_reduction_trend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&desk_scale_config("alpha_sweep = 0, 0.05, 0.1, 0.2, 0.5, 1\n")).unwrap();
    let outcome = run_simulate(&cfg, dir.path()).unwrap();
    assert_eq!(outcome.failed_replications, 0);

    let records: Vec<SummaryRecord> = std::fs::read_to_string(&outcome.summary_path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let levels = energy_by_alpha(&records);
    assert_eq!(levels.len(), 6);

    let first = &levels[0];
    let last = &levels[5];
    let separated = first.mean - last.mean > first.half_width + last.half_width;
    let mut monotone_within_ci = true;
    for pair in levels.windows(2) {
        if pair[1].mean > pair[0].mean + pair[0].half_width + pair[1].half_width {
            monotone_within_ci = false;
        }
    }
    let detail: Vec<String> = levels
        .iter()
        .map(|l| format!("alpha {}: {:.1} +- {:.1}", l.alpha, l.mean, l.half_width))
        .collect();
    verdict(
        10,
        "mean stationary energy falls with stiffness beyond the 95% intervals",
        separated && monotone_within_ci,
        &detail.join("; "),
    );
}

#[test]
fn criterion_11_acf_smoothing_trend() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&desk_scale_config("alpha_sweep = 0, 1\nmax_lag_s = 25\n")).unwrap();
    let path = run_acf(&cfg, dir.path()).unwrap();

    let mut curves: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
    for line in std::fs::read_to_string(&path).unwrap().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let alpha: f64 = cols[0].parse().unwrap();
        curves.entry(alpha.to_bits()).or_default().push(cols[2].parse().unwrap());
    }
    let first_local_min = |values: &[f64]| -> Option<f64> {
        (1..values.len() - 1)
            .find(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
            .map(|i| values[i])
    };
    let at_zero = first_local_min(&curves[&0.0f64.to_bits()]);
    let at_one = first_local_min(&curves[&1.0f64.to_bits()]);
    let pass = matches!((at_zero, at_one), (Some(a), Some(b)) if b.abs() < a.abs());
    verdict(
        11,
        "first speed-ACF local minimum is shallower at stiffness 1 than at 0",
        pass,
        &format!("alpha 0 min {at_zero:?}, alpha 1 min {at_one:?}"),
    );
}

#[test]
fn criterion_12_reproducibility() {
    let cfg = parse_config(
        "n_vehicles = 50\n\
         ring_length_m = 1000\n\
         sigma = 5\n\
         n_steps = 2000\n\
         n_replications = 2\n\
         alpha_sweep = 0, 1\n\
         emit_trajectory = true\n\
         record_every = 100\n\
         seed = 7\n",
    )
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_simulate(&cfg, a.path()).unwrap();
    run_simulate(&cfg, b.path()).unwrap();

    let mut identical = true;
    let mut compared = 0usize;
    for name in [
        "summary.ndjson",
        "trajectory_a0_r0.csv",
        "trajectory_a0_r1.csv",
        "trajectory_a1_r0.csv",
        "trajectory_a1_r1.csv",
    ] {
        let left = std::fs::read(a.path().join(name)).unwrap();
        let right = std::fs::read(b.path().join(name)).unwrap();
        identical &= left == right;
        compared += 1;
    }
    verdict(
        12,
        "identical config and seed give byte-identical outputs",
        identical && compared == 5,
        &format!("{compared} files compared"),
    );
}
