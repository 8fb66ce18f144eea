use thiserror::Error;

/// Failures raised by the numerical pipeline.
///
/// Variants map onto the process exit codes used by the command-line tool:
/// mathematical precondition failures (`NoUnstableNeutralMode`, `NoBoundState`)
/// are distinguished from invariant violations (`ImagNotPositive`,
/// `WindingMismatch`) and from plain usage errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("y = {y} lies outside the profile domain [{lo}, {hi}]")]
    OutOfDomain { y: f64, lo: f64, hi: f64 },
    #[error("derivative order {order} exceeds the available order {available}")]
    UnsupportedOrder { order: usize, available: usize },
    #[error("the ratio -U''/U has no continuous extension at the zero (U'(a) = 0)")]
    RatioUndefined,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("tridiagonal operator is singular (pivot {pivot} underflowed)")]
    SingularOperator { pivot: usize },
    #[error("singularity at {x0} lies on or too close to the boundary of [{lo}, {hi}]")]
    SingularityOnBoundary { x0: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge (last refinement difference {difference:e})")]
    NoConvergence { difference: f64 },
    #[error("no unstable neutral mode: maximal eigenvalue {alpha_sq} is not positive")]
    NoUnstableNeutralMode { alpha_sq: f64 },
    #[error("no bound state: maximal eigenvalue {beta_sq} is not positive")]
    NoBoundState { beta_sq: f64 },
    #[error("eigenvalue sequence is not converging: {0}")]
    NotConverging(String),
    #[error("Re c = {c_r} is outside the local range of U")]
    NoCrossing { c_r: f64 },
    #[error("Im lambda = {imag} is not positive")]
    ImagNotPositive { imag: f64 },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("coefficient U''/(U - c) diverges at y = {y}")]
    DivergentCoefficient { y: f64 },
    #[error("operator T is numerically singular")]
    SingularT,
    #[error("Neumann series diverging (term ratio {ratio})")]
    NeumannDiverging { ratio: f64 },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("winding certificate returned {winding}, expected 1")]
    WindingMismatch { winding: i64 },
    #[error("phase jump of {jump} rad between samples; more samples needed")]
    PhaseUnwrapAmbiguous { jump: f64 },
    #[error("eigenvalue iteration landed on the real axis (c = {re} + {im}i)")]
    ConvergedToRealAxis { re: f64, im: f64 },
    #[error("cutoff derivative bound violated: {0}")]
    BoundViolation(String),
    #[error("block system is not contracting (update ratio {ratio})")]
    BlockNotContracting { ratio: f64 },
    #[error("output: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
