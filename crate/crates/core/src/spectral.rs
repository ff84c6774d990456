//! Mode-by-mode characteristic roots of the linearised ring system,
//! the spectral bound, and the stability predicates.
//!
//! The linearised drift matrix is block-circulant, so its 2N eigenvalues
//! come in pairs indexed by the Fourier angles `theta_k = 2 pi k / N`: the
//! pair at angle `theta` solves the complex quadratic
//! `lambda^2 + (mu + i sigma) lambda + (nu + i rho) = 0` with
//! `mu = beta (1 - cos theta) + gamma`, `sigma = -beta sin theta`,
//! `nu = (1 - cos theta)(gamma / T + 2 alpha)`, `rho = -sin theta gamma / T`.
//! At `theta = 0` the pair is exactly `{0, -gamma}`; the zero root is the
//! uniform-translation mode.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::model::ModelParams;
use crate::{Error, Result};

/// Coefficient quadruple of the per-mode characteristic quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub rho: f64,
}

/// One Fourier mode of the spectrum report.
#[derive(Debug, Clone)]
pub struct ModeReport {
    pub k: usize,
    pub theta: f64,
    pub coefficients: ModeCoefficients,
    pub roots: [Complex64; 2],
}

/// The 2N characteristic roots with the derived stability summary.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub modes: Vec<ModeReport>,
    /// `abar = min over nonzero roots of -Re(lambda)` [1/s]; positive iff
    /// every nonzero root lies strictly in the left half-plane.
    pub spectral_bound: f64,
    /// Signed maximum real part over the nonzero roots; the non-strict
    /// counterpart of `spectral_bound` for callers that want it.
    pub max_nonzero_real_part: f64,
    /// The sufficient long-wave condition `gamma/2 + beta + T alpha > 1/T`.
    pub long_wave_stable: bool,
    /// Exact per-mode Hurwitz test over all nonzero modes.
    pub all_modes_hurwitz: bool,
    /// Nonzero-mode roots within the zero-classification tolerance of 0.
    /// Flagged as marginal rather than folded into the zero mode.
    pub marginal_roots: usize,
    /// Pairs of roots closer than 1e-9; eigenbasis-based solvers should be
    /// treated with suspicion when this is nonzero.
    pub degenerate_pairs: usize,
}

fn require_affine(params: &ModelParams, operation: &'static str) -> Result<()> {
    if params.is_affine() {
        Ok(())
    } else {
        Err(Error::UnsupportedOvf { operation })
    }
}

/// Coefficients of the characteristic quadratic at angle `theta`.
pub fn mode_coefficients(params: &ModelParams, theta: f64) -> ModeCoefficients {
    let (c, s) = (theta.cos(), theta.sin());
    let inv_t = 1.0 / params.time_gap;
    ModeCoefficients {
        mu: params.beta * (1.0 - c) + params.gamma,
        sigma: -params.beta * s,
        nu: (1.0 - c) * (params.gamma * inv_t + 2.0 * params.alpha),
        rho: -s * params.gamma * inv_t,
    }
}

/// Roots of `lambda^2 + b lambda + c = 0` via the sign-adjusted branch
/// `q = -(b + sgn * sqrt(b^2 - 4c)) / 2`, roots `q` and `c / q`, which
/// avoids cancellation between `b` and the discriminant root.
fn stable_quadratic_roots(b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    if c.norm() == 0.0 {
        return (Complex64::ZERO, -b);
    }
    let mut sq = (b * b - 4.0 * c).sqrt();
    if (b.conj() * sq).re < 0.0 {
        sq = -sq;
    }
    let q = -(b + sq) / 2.0;
    (q, c / q)
}

/// The complex root pair of the characteristic equation at angle `theta`.
pub fn characteristic_roots(params: &ModelParams, theta: f64) -> Result<(Complex64, Complex64)> {
    require_affine(params, "characteristic_roots")?;
    if theta == 0.0 {
        // exact pair {0, -gamma} at the zero mode
        return Ok((Complex64::ZERO, Complex64::new(-params.gamma, 0.0)));
    }
    let co = mode_coefficients(params, theta);
    Ok(stable_quadratic_roots(
        Complex64::new(co.mu, co.sigma),
        Complex64::new(co.nu, co.rho),
    ))
}

/// Tolerance below which a root is treated as the zero eigenvalue.
pub fn zero_root_tolerance(params: &ModelParams) -> f64 {
    1e-10 * params.gamma.abs().max(1.0)
}

/// Collect all 2N roots over the Fourier modes and derive the stability
/// summary.
pub fn spectrum(params: &ModelParams) -> Result<SpectrumReport> {
    require_affine(params, "spectrum")?;
    params.validate_analysis()?;
    let n = params.n_vehicles;
    let tol = zero_root_tolerance(params);

    let mut modes = Vec::with_capacity(n);
    let mut spectral_bound = f64::INFINITY;
    let mut max_real = f64::NEG_INFINITY;
    let mut marginal = 0;
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let (r1, r2) = characteristic_roots(params, theta)?;
        for (idx, root) in [r1, r2].into_iter().enumerate() {
            let is_zero_mode = k == 0 && idx == 0;
            if is_zero_mode {
                continue;
            }
            if root.norm() <= tol {
                marginal += 1;
            }
            spectral_bound = spectral_bound.min(-root.re);
            max_real = max_real.max(root.re);
        }
        modes.push(ModeReport {
            k,
            theta,
            coefficients: mode_coefficients(params, theta),
            roots: [r1, r2],
        });
    }

    let all_roots: Vec<Complex64> = modes.iter().flat_map(|m| m.roots).collect();
    let mut degenerate_pairs = 0;
    for i in 0..all_roots.len() {
        for j in i + 1..all_roots.len() {
            if (all_roots[i] - all_roots[j]).norm() <= 1e-9 {
                degenerate_pairs += 1;
            }
        }
    }

    let all_modes_hurwitz = (1..n).all(|k| {
        hurwitz_mode(params, 2.0 * PI * k as f64 / n as f64).unwrap_or(false)
    });

    Ok(SpectrumReport {
        modes,
        spectral_bound,
        max_nonzero_real_part: max_real,
        long_wave_stable: long_wave_stable(params)?,
        all_modes_hurwitz,
        marginal_roots: marginal,
        degenerate_pairs,
    })
}

/// The sufficient stability condition: `gamma > 0` and, strictly,
/// `gamma/2 + beta + T alpha > 1/T`.
pub fn long_wave_stable(params: &ModelParams) -> Result<bool> {
    require_affine(params, "long_wave_stable")?;
    Ok(params.gamma > 0.0 && stability_margin(params)? > 0.0)
}

/// Signed distance to the stability boundary:
/// `gamma/2 + beta + T alpha - 1/T`.
pub fn stability_margin(params: &ModelParams) -> Result<f64> {
    require_affine(params, "stability_margin")?;
    Ok(params.gamma / 2.0 + params.beta + params.time_gap * params.alpha - 1.0 / params.time_gap)
}

/// Diagnostic polynomial `h(x)` whose endpoint derivative produces the
/// long-wave condition; the per-mode Hurwitz determinant at `cos theta = x`
/// equals `(1 - x) h(x)`.
pub fn boundary_polynomial(params: &ModelParams, x: f64) -> f64 {
    let (alpha, beta, gamma, inv_t) = (params.alpha, params.beta, params.gamma, 1.0 / params.time_gap);
    let m = beta * (1.0 - x) + gamma;
    m * (m * (gamma * inv_t + 2.0 * alpha) + beta * gamma * inv_t * (1.0 + x))
        - (gamma * inv_t).powi(2) * (1.0 + x)
}

/// Exact per-mode Hurwitz test for a nonzero mode: both roots at angle
/// `theta` have strictly negative real part iff `mu > 0` and
/// `mu (nu mu + rho sigma) - rho^2 > 0`.
pub fn hurwitz_mode(params: &ModelParams, theta: f64) -> Result<bool> {
    require_affine(params, "hurwitz_mode")?;
    if theta == 0.0 {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: "theta = 0 carries the zero root; use spectrum".into(),
        });
    }
    let co = mode_coefficients(params, theta);
    Ok(co.mu > 0.0 && co.mu * (co.nu * co.mu + co.rho * co.sigma) - co.rho * co.rho > 0.0)
}

/// Stability of the constant-input variant (optimal-velocity function
/// frozen to a constant): `alpha (beta + gamma) > 0`.
pub fn constant_input_stable(params: &ModelParams) -> bool {
    params.alpha * (params.beta + params.gamma) > 0.0
}
