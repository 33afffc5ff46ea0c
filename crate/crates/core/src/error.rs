use thiserror::Error;

/// Errors raised by the field pipeline.
///
/// Variants split into two families: hypothesis/validation failures
/// (rejected inputs, malformed files) and numerical degeneracies detected
/// mid-computation. The CLI maps the first family to exit code 1 and the
/// second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error(
        "matrix is not positive definite (det = {det:.3e}, trace = {trace:.3e}); \
         a symmetric 2x2 matrix is positive definite iff det > 0 and trace > 0"
    )]
    NotPositiveDefinite { det: f64, trace: f64 },

    #[error("matrix is numerically singular (det = {det:.3e} <= {eps:.1e})")]
    SingularMatrix { det: f64, eps: f64 },

    #[error(
        "cannot project to a proper rotation: det = {det:.3e} <= 0 \
         (frame degeneracy during integration)"
    )]
    NonPositiveDeterminant { det: f64 },

    #[error("grid must have at least 3 nodes per side for finite differences, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("grid spacing must be positive and finite, got {h}")]
    BadSpacing { h: f64 },

    #[error(
        "interior margin {margin} empties a {nx}x{ny} grid \
         (need 2*margin < min(nx, ny) - 2)"
    )]
    MarginTooLarge { margin: usize, nx: usize, ny: usize },

    #[error("fields live on different grids: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("node index ({i}, {j}) out of range for a {nx}x{ny} grid")]
    NodeOutOfRange {
        i: usize,
        j: usize,
        nx: usize,
        ny: usize,
    },

    #[error(
        "metric eigenvalue floor violated at node ({i}, {j}): smallest eigenvalue \
         {min_eig:.3e} < {floor:.1e}; the metric must stay uniformly positive definite \
         over the whole grid"
    )]
    EigenvalueFloor {
        i: usize,
        j: usize,
        min_eig: f64,
        floor: f64,
    },

    #[error(
        "tangent vectors degenerate at node ({i}, {j}): |f1 x f2| = {cross_norm:.3e} \
         < {floor:.1e}; the reconstructed map stops being an immersion there"
    )]
    FrameDegeneracy {
        i: usize,
        j: usize,
        cross_norm: f64,
        floor: f64,
    },

    #[error(
        "point covariance has rank < 2 (eigenvalues {eigs:?}); \
         rigid alignment is not determined by the data"
    )]
    DegenerateAlignment { eigs: [f64; 3] },

    #[error(
        "corpus case '{case}' is undefined outside {admissible}; requested grid spans {requested}"
    )]
    DomainOutOfRange {
        case: String,
        admissible: String,
        requested: String,
    },

    #[error("unknown corpus case '{0}'")]
    UnknownCase(String),

    #[error("rotation check failed: orthogonality defect {ortho:.3e}, det defect {det:.3e} (tolerance 1e-10)")]
    NotARotation { ortho: f64, det: f64 },

    #[error("grid file {path}: {message}")]
    Format { path: String, message: String },

    #[error("grid file {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for degeneracies detected mid-computation, as opposed to
    /// rejected inputs. Drives the CLI's exit-code contract.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::SingularMatrix { .. }
                | Error::NonPositiveDeterminant { .. }
                | Error::FrameDegeneracy { .. }
                | Error::DegenerateAlignment { .. }
                | Error::NotARotation { .. }
        )
    }
}
