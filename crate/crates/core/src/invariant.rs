//! Stationary covariance of the limiting Gaussian law, finite-time
//! covariance, the zero-mode spectral projector, and the exponential
//! convergence bound.
//!
//! The linearised drift matrix `A` has a simple zero eigenvalue (uniform
//! translation). Its spectral projector `P = v w^T / (w^T v)` splits the
//! dynamics into the neutral direction and the stable remainder
//! `A_1 = (I - P) A (I - P)`. The stationary covariance is computed in the
//! eigenbasis of `A_1`: with projected noise `Ltilde = (I - P) Lambda`,
//! the transformed covariance has entries
//! `(W Ltilde Ltilde^T W^H)_ij / (-lambda_i - conj(lambda_j))` over the
//! nonzero modes.
//!
//! The noise is projected before integrating: the left null vector `w`
//! satisfies `w^T Lambda Lambda^T w = N sigma^2 > 0`, so the unprojected
//! integral diverges along the zero-mode direction. Spacings and speeds are
//! insensitive to that direction, and the projected law is the stationary
//! law of those observables.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dynamics::build_matrices;
use crate::model::ModelParams;
use crate::spectral::{characteristic_roots, spectrum};
use crate::{Error, Result};

/// Stationary covariance with the projector and spectral bound it used.
#[derive(Debug, Clone)]
pub struct StationaryCovariance {
    /// `Sigma(infinity)`: symmetric PSD, supported on the stable subspace
    /// (zero-mode directions carry 0).
    pub sigma_inf: DMatrix<f64>,
    /// Spectral projector onto the zero eigendirection.
    pub projector: DMatrix<f64>,
    /// Spectral bound `abar` of the nonzero eigenvalues.
    pub abar: f64,
}

/// Spectral projector `P = v w^T / (w^T v)` onto the zero eigendirection of
/// `a`, with the null vectors extracted by SVD. Errors when the zero
/// eigenvalue is not simple.
pub fn zero_mode_projector(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[i].partial_cmp(&s[j]).unwrap());
    let scale = s[order[s.len() - 1]].max(1.0);
    let second = s[order[1]];
    if second <= 1e-9 * scale {
        return Err(Error::DegenerateKernel { second_singular_value: second });
    }

    let k = order[0];
    let v: DVector<f64> = v_t.row(k).transpose();
    let w: DVector<f64> = u.column(k).into();
    let wv = w.dot(&v);
    if wv.abs() <= 1e-12 {
        return Err(Error::DegenerateKernel { second_singular_value: second });
    }
    Ok(v * w.transpose() / wv)
}

/// Analytic eigenvector matrix of `A`: column `(k, l)` is the Fourier
/// vector `exp(i n theta_k)` in the x-slots and `lambda exp(i n theta_k)`
/// in the y-slots, normalised. Returns the columns' eigenvalues alongside;
/// column 0 is the zero mode.
fn eigenbasis(params: &ModelParams) -> Result<(DMatrix<Complex64>, Vec<Complex64>)> {
    let n = params.n_vehicles;
    let mut v = DMatrix::zeros(2 * n, 2 * n);
    let mut eigenvalues = Vec::with_capacity(2 * n);
    let mut col = 0;
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let (r1, r2) = characteristic_roots(params, theta)?;
        // the zero root of mode k = 0 lands in column 0
        for lambda in [r1, r2] {
            let norm = (n as f64 * (1.0 + lambda.norm_sqr())).sqrt();
            for vehicle in 0..n {
                let phase = Complex64::from_polar(1.0, theta * vehicle as f64) / norm;
                v[(2 * vehicle, col)] = phase;
                v[(2 * vehicle + 1, col)] = lambda * phase;
            }
            eigenvalues.push(lambda);
            col += 1;
        }
    }
    Ok((v, eigenvalues))
}

fn require_stable(params: &ModelParams) -> Result<f64> {
    let report = spectrum(params)?;
    if !(report.long_wave_stable || report.all_modes_hurwitz) {
        return Err(Error::Unstable {
            margin: crate::spectral::stability_margin(params)?,
        });
    }
    Ok(report.spectral_bound)
}

/// Projected noise covariance `Ltilde Ltilde^T` with
/// `Ltilde = (I - P) Lambda`.
fn projected_noise_covariance(params: &ModelParams, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = params.n_vehicles;
    let eye = DMatrix::identity(2 * n, 2 * n);
    let mut lambda = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        lambda[(2 * k + 1, 2 * k + 1)] = params.sigma;
    }
    let lt = (&eye - p) * lambda;
    &lt * lt.transpose()
}

/// Stationary covariance of the projected linearised stochastic system.
pub fn stationary_covariance(params: &ModelParams) -> Result<StationaryCovariance> {
    let abar = require_stable(params)?;
    let matrices = build_matrices(params)?;
    let a = matrices.drift_matrix()?;
    let projector = zero_mode_projector(a)?;

    let (v, eigenvalues) = eigenbasis(params)?;
    let w = v.clone().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let cond = v.norm() * w.norm();
    if cond > 1e12 {
        return Err(Error::IllConditioned { cond });
    }

    let d = projected_noise_covariance(params, &projector);
    let dc = d.map(|x| Complex64::new(x, 0.0));
    let c = &w * dc * w.adjoint();

    let dim = 2 * params.n_vehicles;
    let zero_tol = crate::spectral::zero_root_tolerance(params);
    let mut g = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        if i == 0 || eigenvalues[i].norm() <= zero_tol {
            continue;
        }
        for j in 0..dim {
            if j == 0 || eigenvalues[j].norm() <= zero_tol {
                continue;
            }
            g[(i, j)] = c[(i, j)] / (-eigenvalues[i] - eigenvalues[j].conj());
        }
    }

    let s_complex = &v * g * v.adjoint();
    let s_real = s_complex.map(|z| z.re);
    let symmetrized = (&s_real + s_real.transpose()) * 0.5;
    let eye = DMatrix::identity(dim, dim);
    let q = &eye - &projector;
    let sigma_inf = &q * symmetrized * q.transpose();

    Ok(StationaryCovariance { sigma_inf, projector, abar })
}

/// Finite-time covariance `Sigma(t)` by composite Simpson quadrature of
/// `exp(s A_1) Ltilde Ltilde^T exp(s A_1^T)`. This route is independent of
/// the eigenbasis solve above and serves as its cross-check.
pub fn covariance_at(params: &ModelParams, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be >= 0, got {t}"),
        });
    }
    require_stable(params)?;
    let matrices = build_matrices(params)?;
    let a = matrices.drift_matrix()?;
    let p = zero_mode_projector(a)?;
    let dim = a.nrows();
    if t == 0.0 {
        return Ok(DMatrix::zeros(dim, dim));
    }

    let eye = DMatrix::identity(dim, dim);
    let q = &eye - &p;
    let a1 = &q * a * &q;
    let d = projected_noise_covariance(params, &p);

    // step small on the fastest timescale present in the spectrum
    let report = spectrum(params)?;
    let rate = report
        .modes
        .iter()
        .flat_map(|m| m.roots)
        .map(|r| r.norm())
        .fold(1e-6, f64::max);
    let mut intervals = ((t * rate / 0.02).ceil() as usize).clamp(16, 200_000);
    if intervals % 2 == 1 {
        intervals += 1;
    }
    let h = t / intervals as f64;
    let step: DMatrix<f64> = (&a1 * h).exp();

    let mut propagator = eye.clone();
    let mut acc = DMatrix::zeros(dim, dim);
    for i in 0..=intervals {
        let weight = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let term = &propagator * &d * propagator.transpose();
        acc += term * weight;
        if i < intervals {
            propagator = &propagator * &step;
        }
    }
    Ok(acc * (h / 3.0))
}

/// Convergence-rate bound `(|x0|^2 + N sigma / abar) exp(-2 abar t)`, as
/// printed. See [`convergence_bound_sigma_squared`] for the dimensionally
/// consistent variant with `sigma^2`.
pub fn convergence_bound(params: &ModelParams, x0: &[f64], t: f64) -> Result<f64> {
    bound_impl(params, x0, t, params.sigma)
}

/// Variant of [`convergence_bound`] using `N sigma^2 / abar`. The printed
/// bound carries `sigma` where the dimensions call for `sigma^2`; both are
/// exposed, neither silently corrected.
pub fn convergence_bound_sigma_squared(params: &ModelParams, x0: &[f64], t: f64) -> Result<f64> {
    bound_impl(params, x0, t, params.sigma * params.sigma)
}

fn bound_impl(params: &ModelParams, x0: &[f64], t: f64, noise_term: f64) -> Result<f64> {
    let abar = require_stable(params)?;
    let norm_sq: f64 = x0.iter().map(|v| v * v).sum();
    Ok((norm_sq + params.n_vehicles as f64 * noise_term / abar) * (-2.0 * abar * t).exp())
}
