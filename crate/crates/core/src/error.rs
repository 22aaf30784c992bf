use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is empty")]
    Empty,

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: |A[{row},{col}] - conj(A[{col},{row}])| = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigendecomposition of a {dim}x{dim} matrix did not converge (Frobenius norm {frobenius:e}, max |entry| {max_abs:e})")]
    NoConvergence {
        dim: usize,
        frobenius: f64,
        max_abs: f64,
    },

    #[error("{function} is undefined at eigenvalue {eigenvalue:e} (index {index})")]
    Domain {
        function: &'static str,
        eigenvalue: f64,
        index: usize,
    },

    #[error("operator is not positive definite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("regularized mean has imaginary residue {residue:e}; input is not Hermitian")]
    ImaginaryResidue { residue: f64 },

    #[error("tangent vector is not centered at this state: regularized mean {mean:e} exceeds {tolerance:e}")]
    NotCentered { mean: f64, tolerance: f64 },

    #[error("bound witness (a={a}, b={b}) is violated: |<psi,X psi>| = {lhs:e} > {rhs:e}")]
    InvalidWitness { a: f64, b: f64, lhs: f64, rhs: f64 },

    #[error(
        "perturbation rejected: relative norm {norm} is not below the patch threshold {threshold}"
    )]
    Admission { norm: f64, threshold: f64 },

    #[error("manifold points have different base models")]
    BaseMismatch,

    #[error("total perturbations differ by {difference:e} in Frobenius norm")]
    TotalsDiffer { difference: f64 },

    #[error("Gram matrix is rank deficient (min eigenvalue {min_eigenvalue:e}); null combination {null_combination:?}")]
    RankDeficient {
        gram: Vec<Vec<f64>>,
        min_eigenvalue: f64,
        null_combination: Vec<f64>,
    },

    #[error("bisection failed: {reason}; samples (r, f(r)) = {samples:?}")]
    Bisection {
        reason: String,
        samples: Vec<(f64, f64)>,
    },

    #[error("(+1)-mixture failed an admission gate at level {level}: {reason}")]
    Falsified { level: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
