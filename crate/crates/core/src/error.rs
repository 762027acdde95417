use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frame is not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },

    #[error("frame or subspace is not isotropic (defect {defect:.3e})")]
    NotIsotropic { defect: f64 },

    #[error("basis is rank deficient (smallest singular value {smallest:.3e})")]
    RankDeficient { smallest: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient {name} must be positive, found {value} at x = {x}")]
    NonPositiveCoefficient { name: &'static str, x: f64, value: f64 },

    #[error("local structure defect {defect:.3e} at x = {x} exceeds the per-step limit")]
    StepTooLarge { x: f64, defect: f64 },

    #[error("propagated state became non-finite at x = {x}")]
    NonFiniteState { x: f64 },

    #[error("frame columns became numerically dependent at x = {x}")]
    RankCollapse { x: f64 },

    #[error("lambda = {lambda} is not an eigenvalue (smallest singular value {sigma:.3e})")]
    NotAnEigenvalue { lambda: f64, sigma: f64 },

    #[error("path has zero weighted norm")]
    ZeroHNorm,

    #[error("sampled paths live on different grids")]
    GridMismatch,

    #[error("pencil has no asymptotic limit on the {side} side (defect {defect:.3e})")]
    NoAsymptoticLimit { side: &'static str, defect: f64 },

    #[error("lambda = {re}{im:+}i lies on the essential spectrum")]
    OnEssentialSpectrum { re: f64, im: f64 },

    #[error("decaying subspace on the {side} side has dimension {found}, expected {expected}")]
    UnbalancedDimensions { side: &'static str, found: usize, expected: usize },

    #[error("contour passes within the essential-spectrum margin at lambda = {re}{im:+}i")]
    ContourTouchesEssentialSpectrum { re: f64, im: f64 },

    #[error("phase jump {jump:.3} rad along the contour with {n_samples} samples per side")]
    PhaseJumpTooLarge { jump: f64, n_samples: usize },

    #[error("operation requires {expected} geometry")]
    UnsupportedGeometry { expected: &'static str },

    #[error("operation requires a soliton problem")]
    NotSolitonProblem,

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("problem file: {0}")]
    ProblemFile(String),
}
