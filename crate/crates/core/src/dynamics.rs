//! System matrices and the deterministic drift in both its component form
//! and its port-Hamiltonian form.
//!
//! Two coordinate systems are in play:
//! - the physical variables `z = (Q, p)` (spacings then momenta, block
//!   layout), in which `J`, `R` and the noise map live;
//! - the perturbation variables interleaved as `(x_1, y_1, ..., x_N, y_N)`,
//!   in which the linearised drift matrix `A` is written. Every module in
//!   the crate adopts this interleaved ordering.
//!
//! Storage is dense throughout; `N` stays in the tens to hundreds and dense
//! matrices keep the eigen-solvers and Lyapunov algebra simple.

use nalgebra::{DMatrix, DVector};

use crate::model::{spacings, ModelParams, QuadraticPotential, RingState};
use crate::{Error, Result};

/// The matrices of the model for one parameter set.
///
/// `m` is the circulant difference matrix, `j` the block skew-symmetric
/// structure matrix, `r` the dissipation matrix and `lambda` the diagonal
/// noise matrix `diag(0, sigma, 0, sigma, ...)` in interleaved ordering.
/// The linearised drift matrix `a` exists only for the affine
/// optimal-velocity function.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub m: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    a: Option<DMatrix<f64>>,
}

impl SystemMatrices {
    /// Linearised drift matrix `A` in interleaved ordering.
    pub fn drift_matrix(&self) -> Result<&DMatrix<f64>> {
        self.a
            .as_ref()
            .ok_or(Error::UnsupportedOvf { operation: "drift matrix A" })
    }
}

/// Build `M`, `J`, `R`, `Lambda` and, for the affine optimal-velocity
/// function, the linearised drift matrix `A`.
pub fn build_matrices(params: &ModelParams) -> Result<SystemMatrices> {
    params.validate_analysis()?;
    let n = params.n_vehicles;

    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = -1.0;
        m[(i, (i + 1) % n)] = 1.0;
    }

    let mut j = DMatrix::zeros(2 * n, 2 * n);
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for row in 0..n {
        for col in 0..n {
            j[(row, n + col)] = m[(row, col)];
            j[(n + row, col)] = -m[(col, row)];
            r[(n + row, n + col)] =
                params.gamma * f64::from(u8::from(row == col)) - params.beta * m[(row, col)];
        }
    }

    let mut lambda = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        lambda[(2 * k + 1, 2 * k + 1)] = params.sigma;
    }

    let a = params.is_affine().then(|| linearized_drift_matrix(params));

    Ok(SystemMatrices { m, j, r, lambda, a })
}

/// Entry table of `A`, cyclic in the vehicle index. The `x`-row unit entry
/// sits in the own `y`-column, consistent with `dx_n = y_n dt`; this is
/// validated against the finite-difference Jacobian of the perturbation
/// drift.
fn linearized_drift_matrix(params: &ModelParams) -> DMatrix<f64> {
    let n = params.n_vehicles;
    let (alpha, beta, gamma, inv_t) = (params.alpha, params.beta, params.gamma, 1.0 / params.time_gap);
    let x_col = |k: usize| 2 * (k % n);
    let y_col = |k: usize| 2 * (k % n) + 1;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        a[(x_col(k), y_col(k))] = 1.0;
        let row = y_col(k);
        a[(row, x_col(k))] = -2.0 * alpha - gamma * inv_t;
        a[(row, x_col(k + n - 1))] += alpha;
        a[(row, x_col(k + 1))] += alpha + gamma * inv_t;
        a[(row, y_col(k))] += -(beta + gamma);
        a[(row, y_col(k + 1))] += beta;
    }
    a
}

/// Component form of the deterministic drift in the `(Q, p)` variables:
/// `dQ_n = p_{n+1} - p_n`,
/// `dp_n = gamma (F(Q_n) - p_n) + beta (p_{n+1} - p_n) + V'(Q_n) - V'(Q_{n-1})`.
pub fn drift_qp(params: &ModelParams, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = q.len();
    let f = params.ovf();
    let v = params.potential();
    let mut dq = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    for i in 0..n {
        let p_next = p[(i + 1) % n];
        let q_prev = q[(i + n - 1) % n];
        dq.push(p_next - p[i]);
        dp.push(
            params.gamma * (f.eval(q[i])? - p[i])
                + params.beta * (p_next - p[i])
                + (v.derivative(q[i]) - v.derivative(q_prev)),
        );
    }
    Ok((dq, dp))
}

/// [`drift_qp`] evaluated on a ring state.
pub fn drift_carfollowing(params: &ModelParams, state: &RingState) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = spacings(state, params.ring_length);
    drift_qp(params, &q, &state.momenta)
}

/// Port-Hamiltonian form of the drift: `(J - R) grad H(z) + gamma g(z)`
/// with `grad H = (V'(Q), p)` and `g = (0, F(Q))`, assembled from the
/// system matrices. Agrees with [`drift_qp`] to rounding.
pub fn drift_phs_qp(
    matrices: &SystemMatrices,
    params: &ModelParams,
    q: &[f64],
    p: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = q.len();
    let f = params.ovf();
    let (grad_v, _) = hamiltonian_gradient_qp(q, p, &params.potential());
    let mut grad_h = DVector::zeros(2 * n);
    let mut input = DVector::zeros(2 * n);
    for i in 0..n {
        grad_h[i] = grad_v[i];
        grad_h[n + i] = p[i];
        input[n + i] = f.eval(q[i])?;
    }
    let dz = (&matrices.j - &matrices.r) * grad_h + params.gamma * input;
    Ok((dz.as_slice()[..n].to_vec(), dz.as_slice()[n..].to_vec()))
}

/// [`drift_phs_qp`] evaluated on a ring state.
pub fn drift_phs(params: &ModelParams, state: &RingState) -> Result<(Vec<f64>, Vec<f64>)> {
    let matrices = build_matrices(params)?;
    let q = spacings(state, params.ring_length);
    drift_phs_qp(&matrices, params, &q, &state.momenta)
}

/// Hamiltonian gradient `(V'(Q), p)` componentwise.
pub fn hamiltonian_gradient_qp(
    q: &[f64],
    p: &[f64],
    potential: &QuadraticPotential,
) -> (Vec<f64>, Vec<f64>) {
    (q.iter().map(|&x| potential.derivative(x)).collect(), p.to_vec())
}

/// Hamiltonian gradient of a ring state.
pub fn hamiltonian_gradient(
    state: &RingState,
    potential: &QuadraticPotential,
    ring_length: f64,
) -> (Vec<f64>, Vec<f64>) {
    let q = spacings(state, ring_length);
    hamiltonian_gradient_qp(&q, &state.momenta, potential)
}

/// Output port `h = g^T grad H = sum_n F(Q_n) p_n`.
pub fn output_port(params: &ModelParams, state: &RingState) -> Result<f64> {
    let q = spacings(state, params.ring_length);
    let f = params.ovf();
    let mut h = 0.0;
    for (qi, pi) in q.iter().zip(&state.momenta) {
        h += f.eval(*qi)? * pi;
    }
    Ok(h)
}

/// Drift in perturbation coordinates: `dx_n = y_n`, `dy_n = dp_n` of the
/// state mapped back to physical coordinates. This route goes through the
/// nonlinear component drift and is the independent reference that the
/// linearised matrix `A` is checked against.
pub fn perturbation_drift(
    params: &ModelParams,
    pert: &crate::model::PerturbationState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let state = crate::model::from_perturbation(pert, params, 0.0);
    let (_, dp) = drift_carfollowing(params, &state)?;
    Ok((pert.y.clone(), dp))
}
