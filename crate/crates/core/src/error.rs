use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not skew-Hermitian (max |X + X^H| = {residual:e})")]
    NotSkewHermitian { residual: f64 },
    #[error("matrix is not traceless (|tr X| = {residual:e})")]
    NotTraceless { residual: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is numerically singular")]
    SingularInput,
    #[error("trace invariant has imaginary residual {residual:e}")]
    NonRealResult { residual: f64 },
    #[error("spectra differ by {deviation:e} (tolerance {tol:e})")]
    SpectraDiffer { deviation: f64, tol: f64 },
    #[error("eigenspace alignment failed for a cluster of size {cluster}")]
    DegenerateAlignmentFailed { cluster: usize },
    #[error("continuation diverged: residual {residual:e} after {iterations} Newton iterations")]
    ContinuationDiverged { residual: f64, iterations: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point is not on the unit sphere (| |x|^2 - 1 | = {residual:e})")]
    NotOnSphere { residual: f64 },
    #[error("vector is not tangent to the sphere (residual {residual:e})")]
    NotTangent { residual: f64 },
    #[error("scalar is not of unit modulus (| |s| - 1 | = {residual:e})")]
    NotUnitScalar { residual: f64 },
    #[error("tangent vectors live at different base points")]
    BasePointMismatch,
    #[error("frame is degenerate (Gram determinant {det:e})")]
    DegenerateFrame { det: f64 },
    #[error("point is not regular: {0}")]
    SingularPoint(String),
    #[error("argument outside the admissible domain: {0}")]
    DomainError(String),
    #[error("Gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("finite-difference surface leaves the regular stratum")]
    StepTooLarge,
    #[error("schema error in field `{field}`: {message}")]
    SchemaError { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
