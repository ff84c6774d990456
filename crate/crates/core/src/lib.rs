//! Stochastic port-Hamiltonian car-following model on a ring road.
//!
//! `N` vehicles drive on a closed loop of length `L`. Each vehicle relaxes
//! its speed towards an optimal velocity of the spacing ahead (rate `gamma`),
//! towards the speed of its predecessor (rate `beta`), and is coupled to both
//! neighbours through a quadratic interaction potential (stiffness `alpha`),
//! all under additive Brownian forcing of amplitude `sigma`.
//!
//! The crate provides:
//! - the model itself and its port-Hamiltonian formulation ([`model`], [`dynamics`]),
//! - an Euler-Maruyama integrator with a reproducible per-vehicle noise
//!   stream contract ([`integrator`]),
//! - exact mode-by-mode linear stability analysis of the linearised system
//!   ([`spectral`]),
//! - the stationary Gaussian covariance of the stable stochastic system and
//!   its exponential convergence bound ([`invariant`]),
//! - energy, autocorrelation and covariance observables ([`observables`]).

pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod invariant;
pub mod model;
pub mod observables;
pub mod spectral;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
