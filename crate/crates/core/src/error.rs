use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("DegenerateFrame: |det| = {det_abs:e} is below {threshold:e}")]
    DegenerateFrame { det_abs: f64, threshold: f64 },

    #[error("AsymmetricCone: pairwise generator distances spread by {spread:e}")]
    AsymmetricCone { spread: f64 },

    #[error("InvalidWeight: c1 = {c1}, c2 = {c2} (both must be positive)")]
    InvalidWeight { c1: f64, c2: f64 },

    #[error("NotUnitVector: norm {norm} differs from 1")]
    NotUnitVector { norm: f64 },

    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("GridMismatch: {0}")]
    GridMismatch(String),

    #[error("FrameMismatch: {0}")]
    FrameMismatch(String),

    #[error("StencilTooSmall: t = {t} is below grid spacing {spacing}")]
    StencilTooSmall { t: f64, spacing: f64 },

    #[error("NotUpwardFrame: axis ({0}, {1}) is not (0, 1)")]
    NotUpwardFrame(f64, f64),

    #[error("InvalidAngle: {0} rad is outside (0, pi/2)")]
    InvalidAngle(f64),

    #[error("NegativeSinogram: minimum value {min:e} is below -{tolerance:e}")]
    NegativeSinogram { min: f64, tolerance: f64 },

    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),

    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),

    #[error("FormatError: {0}")]
    Format(String),

    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by unreadable or malformed files rather than bad parameters.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Format(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
