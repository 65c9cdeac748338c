//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while building states, assembling closures,
/// inverting singular matrices, or stepping the relaxation solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),

    #[error("molar mass of species {index} must be positive, got {value}")]
    NonPositiveMolarMass { index: usize, value: f64 },

    #[error("mass fraction of species {index} is negative: {value}")]
    NegativeFraction { index: usize, value: f64 },

    #[error("mass fractions sum to {0}, outside 1 +/- 1e-9")]
    FractionSumOutOfRange(f64),

    #[error("need at least two species, got {0}")]
    TooFewSpecies(usize),

    #[error("species {0} has a vanishing fraction")]
    ZeroFraction(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficiency hypotheses violated: {0}")]
    KernelMismatch(String),

    #[error("group inverse undefined: D0 = {d0}, threshold {threshold}")]
    SingularD0 { d0: f64, threshold: f64 },

    #[error("matrix is not symmetric, deviation {0}")]
    NotSymmetric(f64),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("friction coefficients are not symmetric, deviation {0}")]
    AsymmetricFriction(f64),

    #[error("operation needs at least three species")]
    BinaryMixture,

    #[error("closure carries no structural decomposition")]
    MissingStructure,

    #[error("diffusivity must be positive, got {0}")]
    NonPositiveDiffusivity(f64),

    #[error("ternary friction matrix is numerically degenerate, det = {0}")]
    DegenerateTernary(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {dt} exceeds the stability bound {bound}")]
    StabilityViolation { dt: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
