use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("pixel ({u}, {v}) is outside a {width}x{height} image")]
    OutOfBounds {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("normal at pixel {pixel} has norm {norm}, expected unit length")]
    NonUnitNormal { pixel: usize, norm: f64 },

    #[error("linear system has no rows")]
    EmptySystem,

    #[error("system is singular or indefinite at unknown {unknown}{}", fmt_pixel(.pixel))]
    SingularSystem {
        unknown: usize,
        pixel: Option<(usize, usize)>,
    },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("missing required input: {0}")]
    MissingMap(&'static str),

    #[error("no pixels to evaluate")]
    EmptyEvaluation,

    #[error("depth {0} m cannot be stored as 16-bit millimetres")]
    DepthOutOfRange(f64),

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    PngDecode(#[from] png::DecodingError),

    #[error(transparent)]
    PngEncode(#[from] png::EncodingError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}

fn fmt_pixel(pixel: &Option<(usize, usize)>) -> String {
    match pixel {
        Some((u, v)) => format!(" (pixel {u}, {v})"),
        None => String::new(),
    }
}
