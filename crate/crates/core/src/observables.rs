//! Energy bookkeeping, the energy-balance drift, speed autocorrelation,
//! empirical covariance, and a Gaussian-law comparison diagnostic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::integrator::Trajectory;
use crate::model::{spacings, ModelParams, PerturbationState, QuadraticPotential, RingState};
use crate::{Error, Result};

/// Energy sample of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct EnergyRecord {
    pub time: f64,
    pub hamiltonian: f64,
    pub perturbed_hamiltonian: f64,
    /// Predicted `E[dH]/dt` at this state.
    pub balance_drift: f64,
}

/// Total energy `H = sum V(Q_n) + 1/2 sum p_n^2`.
pub fn hamiltonian(state: &RingState, potential: &QuadraticPotential, ring_length: f64) -> f64 {
    let q = spacings(state, ring_length);
    q.iter().map(|&x| potential.value(x)).sum::<f64>()
        + 0.5 * state.momenta.iter().map(|&p| p * p).sum::<f64>()
}

/// Energy of the perturbed system:
/// `1/2 sum y_n^2 + sum V(x_{n+1} - x_n)` with ring-closed differences.
pub fn perturbed_hamiltonian(pert: &PerturbationState, alpha: f64) -> f64 {
    let n = pert.x.len();
    let v = QuadraticPotential { alpha };
    let kinetic = 0.5 * pert.y.iter().map(|&y| y * y).sum::<f64>();
    let potential: f64 = (0..n)
        .map(|i| v.value(pert.x[(i + 1) % n] - pert.x[i]))
        .sum();
    kinetic + potential
}

/// Energy-balance drift
/// `gamma sum p_n (F(Q_n) - p_n) + beta sum p_n (p_{n+1} - p_n) + N sigma^2 / 2`.
/// The potential term cancels by the block skew symmetry of the structure
/// matrix, so `alpha` does not appear.
pub fn energy_balance_drift(params: &ModelParams, state: &RingState) -> Result<f64> {
    let q = spacings(state, params.ring_length);
    let f = params.ovf();
    let p = &state.momenta;
    let n = p.len();
    let mut relaxation = 0.0;
    let mut alignment = 0.0;
    for i in 0..n {
        relaxation += p[i] * (f.eval(q[i])? - p[i]);
        alignment += p[i] * (p[(i + 1) % n] - p[i]);
    }
    Ok(params.gamma * relaxation
        + params.beta * alignment
        + n as f64 * params.sigma * params.sigma / 2.0)
}

/// Normalised speed autocorrelation, value 1 at lag 0.
#[derive(Debug, Clone)]
pub struct AcfCurve {
    /// Lags [s].
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

/// Index and value of the first strict local minimum past lag 0, if any.
pub fn first_local_minimum(curve: &AcfCurve) -> Option<(usize, f64)> {
    let v = &curve.values;
    (1..v.len().saturating_sub(1))
        .find(|&i| v[i] < v[i - 1] && v[i] < v[i + 1])
        .map(|i| (i, v[i]))
}

/// ACF of per-series data sampled at spacing `dt_sample`: biased
/// (divide-by-n) autocovariance per series, averaged over series, then
/// normalised by the averaged lag-0 value. The biased form keeps the
/// autocovariance sequence PSD.
pub fn acf_of_series(series: &[Vec<f64>], max_lag: usize, dt_sample: f64) -> Result<AcfCurve> {
    let n_samples = series.first().map_or(0, Vec::len);
    if n_samples < 10 * max_lag.max(1) {
        return Err(Error::TooFewSamples { got: n_samples, need: 10 * max_lag.max(1) });
    }
    let mut avg = vec![0.0; max_lag + 1];
    for s in series {
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        for (lag, slot) in avg.iter_mut().enumerate() {
            let mut c = 0.0;
            for t in 0..s.len() - lag {
                c += (s[t] - mean) * (s[t + lag] - mean);
            }
            *slot += c / s.len() as f64;
        }
    }
    let c0 = avg[0];
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::DegenerateSeries);
    }
    Ok(AcfCurve {
        lags: (0..=max_lag).map(|l| l as f64 * dt_sample).collect(),
        values: avg.iter().map(|c| c / c0).collect(),
    })
}

/// Speed ACF of a trajectory: per-vehicle temporal autocovariance averaged
/// over vehicles. Samples before `burn_in_step` are excluded; lags are in
/// recorded-sample units.
pub fn speed_acf(traj: &Trajectory, burn_in_step: usize, max_lag_samples: usize) -> Result<AcfCurve> {
    let start = traj.first_sample_at_or_after(burn_in_step);
    let kept = &traj.states[start..];
    if kept.len() < 2 {
        return Err(Error::TooFewSamples { got: kept.len(), need: 2 });
    }
    let n_vehicles = kept[0].len();
    let series: Vec<Vec<f64>> = (0..n_vehicles)
        .map(|v| kept.iter().map(|s| s.momenta[v]).collect())
        .collect();
    let dt_sample = if traj.times.len() > 1 { traj.times[1] - traj.times[0] } else { 0.0 };
    acf_of_series(&series, max_lag_samples, dt_sample)
}

/// Projected, mean-removed second-moment matrix of interleaved
/// perturbation samples: symmetric PSD by construction.
pub fn empirical_covariance(samples: &[DVector<f64>], projector: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { got: samples.len(), need: 2 });
    }
    let dim = samples[0].len();
    let eye = DMatrix::identity(dim, dim);
    let q = &eye - projector;

    let projected: Vec<DVector<f64>> = samples.iter().map(|s| &q * s).collect();
    let mut mean = DVector::zeros(dim);
    for s in &projected {
        mean += s;
    }
    mean /= projected.len() as f64;

    let mut cov = DMatrix::zeros(dim, dim);
    for s in &projected {
        let centered = s - &mean;
        cov += &centered * centered.transpose();
    }
    Ok(cov / projected.len() as f64)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = m.amax().max(1.0);
    let eig = SymmetricEigen::new(m.clone());
    let mut roots = DVector::zeros(eig.eigenvalues.len());
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < -1e-8 * scale {
            return Err(Error::NotPsd { min_eigenvalue: v });
        }
        roots[i] = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// 2-Wasserstein distance between centered Gaussians with covariances
/// `a` and `b`:
/// `W2^2 = tr a + tr b - 2 tr (a^{1/2} b a^{1/2})^{1/2}`.
pub fn gaussian_w2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let sqrt_a = psd_sqrt(a)?;
    // validates PSD of b as well
    let _ = psd_sqrt(b)?;
    let inner = psd_sqrt(&(&sqrt_a * b * &sqrt_a))?;
    let w2_sq = a.trace() + b.trace() - 2.0 * inner.trace();
    Ok(w2_sq.max(0.0).sqrt())
}
