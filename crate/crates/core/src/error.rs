use thiserror::Error;

/// Errors produced by the model, analysis and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or simulation parameter violates its constraint.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation requires the affine optimal-velocity function.
    #[error("{operation} requires the affine optimal-velocity function")]
    UnsupportedOvf { operation: &'static str },

    /// A non-finite value was passed where a finite one is required.
    #[error("non-finite input: {what}")]
    NonFiniteInput { what: &'static str },

    /// A state coordinate became non-finite during time stepping.
    #[error("numerical blowup at step {step}")]
    NumericalBlowup { step: usize },

    /// The stationary law does not exist for the given parameters.
    #[error("parameters are not stable (margin {margin}); no stationary law")]
    Unstable { margin: f64 },

    /// The zero eigenvalue of the drift matrix is not simple.
    #[error("degenerate kernel: second singular value {second_singular_value} below tolerance")]
    DegenerateKernel { second_singular_value: f64 },

    /// The eigenbasis is too ill-conditioned to trust the solve.
    #[error("ill-conditioned eigenbasis (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    /// A time series has no variance, so its ACF is undefined.
    #[error("degenerate series: zero variance, ACF undefined")]
    DegenerateSeries,

    /// Too few samples for the requested statistic.
    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    /// A matrix that must be positive semi-definite is not.
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
}
