use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrsError {
    #[error("degenerate aperture: {0}")]
    DegenerateAperture(String),

    #[error("invalid aperture grid: {0}")]
    InvalidGrid(String),

    #[error("invalid propagation context: {0}")]
    InvalidContext(String),

    #[error("invalid observation grid: {0}")]
    InvalidObservationGrid(String),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    /// Source and observation point coincide, the Green's function is singular there.
    #[error("singular kernel: source {source_index} at {source_point} coincides with target {target_index} at {target_point}")]
    Singularity {
        source_index: usize,
        target_index: usize,
        source_point: String,
        target_point: String,
    },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice index ({m}, {n}) out of range for {count_x}x{count_y} grid")]
    IndexOutOfRange {
        m: usize,
        n: usize,
        count_x: usize,
        count_y: usize,
    },

    #[error("harmonic {0} is even and carries no energy")]
    EvenHarmonic(i32),

    #[error("link plan has no {0} frame")]
    MissingSymbol(&'static str),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, IrsError>;
