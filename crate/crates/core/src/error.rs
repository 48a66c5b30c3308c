use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("cutoff level {level} does not fit: 2^(k+1) = {outer} must be < l_t/2 = {half_period}")]
    CutoffDoesNotFit {
        level: u32,
        outer: f64,
        half_period: f64,
    },

    #[error("coefficients violate ellipticity at sample {index}: {reason}")]
    Ellipticity { index: usize, reason: String },

    #[error("checkerboard amplitude {requested} breaks ellipticity; maximal admissible amplitude is {max_admissible}")]
    EpsilonTooLarge { requested: f64, max_admissible: f64 },

    #[error("structure tag {tag} inconsistent with data: variation {variation:e} along {axis}")]
    TagMismatch {
        tag: String,
        axis: String,
        variation: f64,
    },

    #[error("operator symbol vanishes on a mode carrying data ({detail})")]
    SingularMode { detail: String },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("cylinder contains no grid samples")]
    EmptyCylinder,

    #[error("cylinder out of range: {0}")]
    CylinderOutOfRange(String),

    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
