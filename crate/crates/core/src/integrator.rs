//! Euler-Maruyama time stepping with a reproducible noise contract.
//!
//! The scheme is the fully explicit update
//! `q_n <- q_n + dt p_n`,
//! `p_n <- p_n + dt [gamma (F(Q_n) - p_n) + beta (p_{n+1} - p_n)
//!                   + V'(Q_n) - V'(Q_{n-1})] + sigma sqrt(dt) xi_n`,
//! with the positions advanced by the pre-step momenta.
//!
//! Noise contract: each vehicle owns an independent ChaCha8 substream
//! derived from the master seed (`stream = vehicle index`), and draws one
//! standard normal (ziggurat) per step. A simulation is therefore a pure
//! function of `(params, init, config)`, and changing the record stride or
//! observer set cannot perturb the noise sequence.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::build_matrices;
use crate::model::{
    negative_spacing_count, spacings, ModelParams, PerturbationState, RingState,
};
use crate::{Error, Result};

/// Time-stepping configuration.
#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig {
    /// Time step [s].
    pub dt: f64,
    /// Total number of steps.
    pub n_steps: usize,
    /// Steps discarded before stationary statistics.
    pub burn_in_steps: usize,
    /// Master seed; vehicle substreams derive from it.
    pub seed: u64,
    /// Stride between recorded trajectory samples.
    pub record_every: usize,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be > 0, got {}", self.dt),
            });
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                reason: "must be >= 1".into(),
            });
        }
        if self.burn_in_steps >= self.n_steps {
            return Err(Error::InvalidParameter {
                name: "burn_in_steps",
                reason: format!(
                    "must be < n_steps, got {} >= {}",
                    self.burn_in_steps, self.n_steps
                ),
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Recorded samples of one simulation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times, strictly increasing with spacing `record_every * dt`.
    pub times: Vec<f64>,
    /// State snapshots, one per sample time; the first is the initial state.
    pub states: Vec<RingState>,
    /// Step indices of the samples.
    pub steps: Vec<usize>,
    /// Count of (step, vehicle) events with negative spacing over the run.
    pub negative_spacings: u64,
}

impl Trajectory {
    /// Index of the first sample at or after the given step.
    pub fn first_sample_at_or_after(&self, step: usize) -> usize {
        self.steps.partition_point(|&s| s < step)
    }
}

/// One Euler-Maruyama step. `noise` holds one standard normal draw per
/// vehicle. A non-finite result yields a blowup error whose step index is
/// filled in by [`simulate`] (0 when called directly).
pub fn em_step(
    params: &ModelParams,
    state: &RingState,
    dt: f64,
    noise: &[f64],
) -> Result<RingState> {
    let n = state.len();
    assert_eq!(noise.len(), n, "need one noise draw per vehicle");
    let q = spacings(state, params.ring_length);
    let f = params.ovf();
    let v = params.potential();
    let sqrt_dt = dt.sqrt();

    let mut positions = Vec::with_capacity(n);
    let mut momenta = Vec::with_capacity(n);
    for i in 0..n {
        let p_i = state.momenta[i];
        let p_next = state.momenta[(i + 1) % n];
        let q_prev = q[(i + n - 1) % n];
        positions.push(state.positions[i] + dt * p_i);
        momenta.push(
            p_i + dt
                * (params.gamma * (f.eval(q[i])? - p_i)
                    + params.beta * (p_next - p_i)
                    + (v.derivative(q[i]) - v.derivative(q_prev)))
                + params.sigma * sqrt_dt * noise[i],
        );
    }
    let next = RingState { positions, momenta };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NumericalBlowup { step: 0 })
    }
}

/// Per-vehicle noise substreams. Stream `n` of the ChaCha8 generator seeded
/// with the master seed feeds vehicle `n` one standard normal per step.
struct NoiseStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl NoiseStreams {
    fn new(seed: u64, n_vehicles: usize) -> Self {
        let rngs = (0..n_vehicles)
            .map(|n| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(n as u64);
                rng
            })
            .collect();
        Self { rngs }
    }

    fn fill(&mut self, noise: &mut [f64]) {
        for (slot, rng) in noise.iter_mut().zip(&mut self.rngs) {
            *slot = StandardNormal.sample(rng);
        }
    }
}

/// Simulate the stochastic system. Strict parameter validation
/// (`gamma > 0`); see [`simulate_analysis`] for the relaxed entry point.
pub fn simulate(
    params: &ModelParams,
    init: &RingState,
    config: &SimulationConfig,
) -> Result<Trajectory> {
    params.validate()?;
    run(params, init, config)
}

/// Simulation entry point that permits `gamma = 0`, for conservation checks
/// of the purely Hamiltonian case.
pub fn simulate_analysis(
    params: &ModelParams,
    init: &RingState,
    config: &SimulationConfig,
) -> Result<Trajectory> {
    params.validate_analysis()?;
    run(params, init, config)
}

fn run(params: &ModelParams, init: &RingState, config: &SimulationConfig) -> Result<Trajectory> {
    config.validate()?;
    if init.len() != params.n_vehicles {
        return Err(Error::InvalidParameter {
            name: "init",
            reason: format!("state has {} vehicles, params say {}", init.len(), params.n_vehicles),
        });
    }
    if !init.is_finite() {
        return Err(Error::NonFiniteInput { what: "initial state" });
    }

    let n = params.n_vehicles;
    let mut streams = NoiseStreams::new(config.seed, n);
    let mut noise = vec![0.0; n];

    let n_samples = config.n_steps / config.record_every + 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut states = Vec::with_capacity(n_samples);
    let mut steps = Vec::with_capacity(n_samples);
    let mut negative_spacings =
        negative_spacing_count(init, params.ring_length) as u64;

    times.push(0.0);
    states.push(init.clone());
    steps.push(0);

    let mut state = init.clone();
    for step in 1..=config.n_steps {
        streams.fill(&mut noise);
        state = em_step(params, &state, config.dt, &noise).map_err(|e| match e {
            Error::NumericalBlowup { .. } => Error::NumericalBlowup { step },
            other => other,
        })?;
        negative_spacings += negative_spacing_count(&state, params.ring_length) as u64;
        if step % config.record_every == 0 {
            times.push(step as f64 * config.dt);
            states.push(state.clone());
            steps.push(step);
        }
    }

    Ok(Trajectory { times, states, steps, negative_spacings })
}

/// Deterministic part of the Duhamel solution in perturbation coordinates:
/// the matrix exponential of `t A` applied to the interleaved perturbation
/// vector. Used as a weak-error reference for the integrator.
pub fn mean_at(params: &ModelParams, pert0: &PerturbationState, t: f64) -> Result<PerturbationState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be >= 0, got {t}"),
        });
    }
    let a = build_matrices(params)?.drift_matrix()?.clone();
    let propagator: DMatrix<f64> = (a * t).exp();
    let z0 = DVector::from_vec(pert0.interleaved());
    let z = propagator * z0;
    Ok(PerturbationState::from_interleaved(z.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::drift_carfollowing;
    use crate::model::{equilibrium_state, OvfKind};
    use approx::assert_relative_eq;

    fn params(sigma: f64) -> ModelParams {
        ModelParams {
            n_vehicles: 10,
            ring_length: 200.0,
            gamma: 1.0,
            beta: 0.5,
            alpha: 0.2,
            sigma,
            vehicle_length: 5.0,
            time_gap: 1.0,
            desired_speed: 30.0,
            ovf_kind: OvfKind::Affine,
        }
    }

    fn config(seed: u64, n_steps: usize) -> SimulationConfig {
        SimulationConfig { dt: 0.01, n_steps, burn_in_steps: 0, seed, record_every: 1 }
    }

    #[test]
    fn deterministic_step_at_equilibrium_advects() {
        let p = params(0.0);
        let s = equilibrium_state(&p);
        let next = em_step(&p, &s, 0.01, &vec![1.0; 10]).unwrap();
        let v_h = p.equilibrium_speed();
        for (q1, q0) in next.positions.iter().zip(&s.positions) {
            assert_relative_eq!(q1 - q0, 0.01 * v_h, max_relative = 1e-13);
        }
        assert_eq!(next.momenta, s.momenta);
    }

    #[test]
    fn zero_dt_is_identity() {
        let p = params(3.0);
        let s = equilibrium_state(&p);
        let next = em_step(&p, &s, 0.0, &vec![2.5; 10]).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn noiseless_step_equals_drift_update() {
        let p = params(0.0);
        let mut s = equilibrium_state(&p);
        for (i, q) in s.positions.iter_mut().enumerate() {
            *q += (i as f64 * 0.9).sin();
        }
        for (i, v) in s.momenta.iter_mut().enumerate() {
            *v += 0.5 * (i as f64 * 1.7).cos();
        }
        let dt = 0.004;
        let next = em_step(&p, &s, dt, &vec![0.0; 10]).unwrap();
        let (_, dp) = drift_carfollowing(&p, &s).unwrap();
        for i in 0..10 {
            assert_relative_eq!(
                next.positions[i],
                s.positions[i] + dt * s.momenta[i],
                max_relative = 1e-14
            );
            assert_relative_eq!(next.momenta[i], s.momenta[i] + dt * dp[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_trajectories() {
        let p = params(5.0);
        let init = equilibrium_state(&p);
        let c = config(1234, 500);
        let t1 = simulate(&p, &init, &c).unwrap();
        let t2 = simulate(&p, &init, &c).unwrap();
        assert_eq!(t1.states.len(), t2.states.len());
        for (a, b) in t1.states.iter().zip(&t2.states) {
            assert_eq!(a, b);
        }
        let t3 = simulate(&p, &init, &config(1235, 500)).unwrap();
        assert_ne!(t1.states.last(), t3.states.last());
    }

    #[test]
    fn record_stride_does_not_change_the_dynamics() {
        let p = params(5.0);
        let init = equilibrium_state(&p);
        let mut c = config(7, 400);
        let dense = simulate(&p, &init, &c).unwrap();
        c.record_every = 40;
        let sparse = simulate(&p, &init, &c).unwrap();
        assert_eq!(sparse.states.last(), dense.states.last());
        assert_eq!(sparse.times.len(), 11);
    }

    #[test]
    fn noiseless_equilibrium_keeps_spacings() {
        let p = params(0.0);
        let init = equilibrium_state(&p);
        let mut c = config(0, 10_000);
        c.record_every = 1000;
        let traj = simulate(&p, &init, &c).unwrap();
        let q0 = p.equilibrium_spacing();
        for state in &traj.states {
            for s in spacings(state, p.ring_length) {
                assert!((s - q0).abs() <= 1e-9);
            }
        }
        assert_eq!(traj.negative_spacings, 0);
    }

    #[test]
    fn mean_at_zero_time_is_identity() {
        let p = params(1.0);
        let pert = PerturbationState {
            x: (0..10).map(|i| (i as f64).sin()).collect(),
            y: (0..10).map(|i| (i as f64).cos()).collect(),
        };
        let out = mean_at(&p, &pert, 0.0).unwrap();
        for (a, b) in out.x.iter().zip(&pert.x).chain(out.y.iter().zip(&pert.y)) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_at_fixes_the_zero_mode() {
        let p = params(1.0);
        let pert = PerturbationState { x: vec![2.5; 10], y: vec![0.0; 10] };
        let out = mean_at(&p, &pert, 3.0).unwrap();
        for x in &out.x {
            assert_relative_eq!(*x, 2.5, max_relative = 1e-9);
        }
        for y in &out.y {
            assert_relative_eq!(*y, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn mean_at_rejects_piecewise() {
        let mut p = params(1.0);
        p.ovf_kind = OvfKind::PiecewiseLinear;
        assert!(mean_at(&p, &PerturbationState::zero(10), 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = config(0, 10);
        assert!(ok.validate().is_ok());
        assert!(SimulationConfig { dt: 0.0, ..ok }.validate().is_err());
        assert!(SimulationConfig { n_steps: 0, ..ok }.validate().is_err());
        assert!(SimulationConfig { burn_in_steps: 10, ..ok }.validate().is_err());
        assert!(SimulationConfig { record_every: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn simulate_rejects_gamma_zero_but_analysis_allows_it() {
        let mut p = params(0.0);
        p.gamma = 0.0;
        p.beta = 0.0;
        let init = equilibrium_state(&p);
        let c = config(0, 10);
        assert!(simulate(&p, &init, &c).is_err());
        assert!(simulate_analysis(&p, &init, &c).is_ok());
    }
}
