//! Model parameters, ring topology, optimal-velocity function, interaction
//! potential, and the transformation between physical and perturbation
//! coordinates.
//!
//! Positions are stored unwrapped (never reduced modulo the ring length);
//! only the last spacing uses the ring closure `Q_N = L + q_1 - q_N`. This
//! keeps trajectories free of wraparound jumps and makes the telescoping
//! identity `sum(Q) = L` exact.

use crate::{Error, Result};

/// Shape of the optimal-velocity function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OvfKind {
    /// `F(s) = (s - l) / T`. Analysis grade: the stability and invariant
    /// modules only accept this form. May be negative for `s < l`.
    Affine,
    /// `F(s) = min(v0, max(0, (s - l) / T))`. Simulation grade only.
    PiecewiseLinear,
}

/// Optimal-velocity function: maps spacing to target speed.
#[derive(Debug, Clone, Copy)]
pub struct OptimalVelocityFn {
    pub kind: OvfKind,
    /// Vehicle length `l` [m].
    pub vehicle_length: f64,
    /// Desired time gap `T` [s].
    pub time_gap: f64,
    /// Desired speed `v0` [m/s]; ignored by the affine form.
    pub desired_speed: f64,
}

impl OptimalVelocityFn {
    /// Evaluate the target speed for a given spacing.
    pub fn eval(&self, spacing: f64) -> Result<f64> {
        if !spacing.is_finite() {
            return Err(Error::NonFiniteInput { what: "spacing" });
        }
        let raw = (spacing - self.vehicle_length) / self.time_gap;
        Ok(match self.kind {
            OvfKind::Affine => raw,
            OvfKind::PiecewiseLinear => raw.clamp(0.0, self.desired_speed),
        })
    }
}

/// Quadratic interaction potential `V(x) = alpha x^2 / 2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticPotential {
    /// Stiffness `alpha` [1/s^2].
    pub alpha: f64,
}

impl QuadraticPotential {
    pub fn value(&self, x: f64) -> f64 {
        0.5 * self.alpha * x * x
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.alpha * x
    }
}

/// All physical and model constants. Vehicle mass is normalised to 1, so
/// momentum and speed coincide throughout.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Number of vehicles `N` on the ring.
    pub n_vehicles: usize,
    /// Ring length `L` [m].
    pub ring_length: f64,
    /// Speed relaxation rate `gamma` [1/s].
    pub gamma: f64,
    /// Speed-difference relaxation rate `beta` [1/s].
    pub beta: f64,
    /// Potential stiffness `alpha` [1/s^2].
    pub alpha: f64,
    /// Noise amplitude `sigma` [m s^-3/2].
    pub sigma: f64,
    /// Vehicle length `l` [m].
    pub vehicle_length: f64,
    /// Desired time gap `T` [s].
    pub time_gap: f64,
    /// Desired speed `v0` [m/s] (piecewise form only).
    pub desired_speed: f64,
    pub ovf_kind: OvfKind,
}

impl ModelParams {
    /// Validate the full constraint set for simulation entry points
    /// (`gamma > 0`).
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be > 0, got {}", self.gamma),
            });
        }
        self.validate_analysis()
    }

    /// Constraint set with `gamma >= 0`. The relaxed entry point exists for
    /// conservation checks of the purely Hamiltonian case
    /// (`beta = gamma = sigma = 0`); simulation configs keep `gamma > 0`.
    pub fn validate_analysis(&self) -> Result<()> {
        fn check(name: &'static str, ok: bool, value: f64) -> Result<()> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("constraint violated, got {value}"),
                })
            }
        }
        if self.n_vehicles <= 2 {
            return Err(Error::InvalidParameter {
                name: "n_vehicles",
                reason: format!("must be > 2, got {}", self.n_vehicles),
            });
        }
        check("ring_length", self.ring_length > 0.0, self.ring_length)?;
        check("gamma", self.gamma >= 0.0, self.gamma)?;
        check("beta", self.beta >= 0.0, self.beta)?;
        check("alpha", self.alpha >= 0.0, self.alpha)?;
        check("sigma", self.sigma >= 0.0, self.sigma)?;
        check("vehicle_length", self.vehicle_length >= 0.0, self.vehicle_length)?;
        check("time_gap", self.time_gap > 0.0, self.time_gap)?;
        check("desired_speed", self.desired_speed >= 0.0, self.desired_speed)?;
        Ok(())
    }

    pub fn ovf(&self) -> OptimalVelocityFn {
        OptimalVelocityFn {
            kind: self.ovf_kind,
            vehicle_length: self.vehicle_length,
            time_gap: self.time_gap,
            desired_speed: self.desired_speed,
        }
    }

    pub fn potential(&self) -> QuadraticPotential {
        QuadraticPotential { alpha: self.alpha }
    }

    /// Equilibrium spacing `L / N`.
    pub fn equilibrium_spacing(&self) -> f64 {
        self.ring_length / self.n_vehicles as f64
    }

    /// Equilibrium speed `v_H = F(L / N)`. May be negative for the affine
    /// form when `L / N < l`; this is permitted and only flagged in run
    /// diagnostics.
    pub fn equilibrium_speed(&self) -> f64 {
        self.ovf()
            .eval(self.equilibrium_spacing())
            .expect("L/N is finite")
    }

    /// True when the stability and invariant machinery applies.
    pub fn is_affine(&self) -> bool {
        self.ovf_kind == OvfKind::Affine
    }
}

/// Unwrapped curvilinear positions `q` and momenta `p` of the `N` vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct RingState {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
}

impl RingState {
    pub fn new(positions: Vec<f64>, momenta: Vec<f64>) -> Self {
        assert_eq!(positions.len(), momenta.len());
        Self { positions, momenta }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.momenta).all(|v| v.is_finite())
    }
}

/// Deviations `(x, y)` from the uniform configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PerturbationState {
    pub fn zero(n: usize) -> Self {
        Self { x: vec![0.0; n], y: vec![0.0; n] }
    }

    /// Interleaved vector `(x_1, y_1, ..., x_N, y_N)`; the ordering every
    /// matrix in this crate uses.
    pub fn interleaved(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(2 * self.x.len());
        for (xi, yi) in self.x.iter().zip(&self.y) {
            z.push(*xi);
            z.push(*yi);
        }
        z
    }

    pub fn from_interleaved(z: &[f64]) -> Self {
        assert!(z.len() % 2 == 0);
        let n = z.len() / 2;
        Self {
            x: (0..n).map(|i| z[2 * i]).collect(),
            y: (0..n).map(|i| z[2 * i + 1]).collect(),
        }
    }
}

/// Spacings `Q_n = q_{n+1} - q_n` with the ring closure
/// `Q_N = L + q_1 - q_N`. Their sum telescopes to `L` exactly.
pub fn spacings(state: &RingState, ring_length: f64) -> Vec<f64> {
    let n = state.len();
    let q = &state.positions;
    let mut out = Vec::with_capacity(n);
    for i in 0..n - 1 {
        out.push(q[i + 1] - q[i]);
    }
    out.push(ring_length + q[0] - q[n - 1]);
    out
}

/// Number of negative spacings in a state. The linear model has no
/// collision mechanics, so these are permitted; runs report the count as a
/// diagnostic.
pub fn negative_spacing_count(state: &RingState, ring_length: f64) -> usize {
    spacings(state, ring_length).iter().filter(|&&s| s < 0.0).count()
}

/// The uniform configuration: spacing `L/N`, common speed `F(L/N)`,
/// reference positions `q_n(0) = (n-1) L / N`.
pub fn equilibrium_state(params: &ModelParams) -> RingState {
    let n = params.n_vehicles;
    let spacing = params.equilibrium_spacing();
    let v_h = params.equilibrium_speed();
    RingState {
        positions: (0..n).map(|i| i as f64 * spacing).collect(),
        momenta: vec![v_h; n],
    }
}

/// Uniform reference position of vehicle `n` (0-based) at time `t`.
fn reference_position(params: &ModelParams, n: usize, t: f64) -> f64 {
    n as f64 * params.equilibrium_spacing() + params.equilibrium_speed() * t
}

/// Deviations from the uniform configuration advected to time `t`.
pub fn to_perturbation(state: &RingState, params: &ModelParams, t: f64) -> PerturbationState {
    let v_h = params.equilibrium_speed();
    PerturbationState {
        x: state
            .positions
            .iter()
            .enumerate()
            .map(|(n, q)| q - reference_position(params, n, t))
            .collect(),
        y: state.momenta.iter().map(|p| p - v_h).collect(),
    }
}

/// Inverse of [`to_perturbation`] at the same time `t`.
pub fn from_perturbation(pert: &PerturbationState, params: &ModelParams, t: f64) -> RingState {
    let v_h = params.equilibrium_speed();
    RingState {
        positions: pert
            .x
            .iter()
            .enumerate()
            .map(|(n, x)| x + reference_position(params, n, t))
            .collect(),
        momenta: pert.y.iter().map(|y| y + v_h).collect(),
    }
}
