use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain mask is disconnected")]
    DisconnectedDomain,

    #[error("row {row} violates single-run convexity in x1")]
    ConvexityViolated { row: usize },

    #[error("row {row} is not symmetric about x1 = 0")]
    AsymmetricRow { row: usize },

    #[error("lambda = {lambda} is not a half-grid multiple (h/2 = {half_step})")]
    NotOnHalfGrid { lambda: f64, half_step: f64 },

    #[error("lambda index {k} out of range 0..={max}")]
    LambdaOutOfRange { k: i64, max: usize },

    #[error("field has {got} values but domain has {expected} interior nodes")]
    FieldLengthMismatch { got: usize, expected: usize },

    #[error("field contains a non-finite value at interior index {index}")]
    NonFiniteField { index: usize },

    #[error("instance too large for exhaustive scan: {nodes} interior nodes (limit {limit})")]
    InstanceTooLarge { nodes: usize, limit: usize },

    #[error("unknown catalog name `{0}`")]
    UnknownCatalogName(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearSolveFailed { residual: f64, iterations: usize },

    #[error("numerical blow-up: sup norm {norm:.3e} exceeded ceiling {ceiling:.3e} at t = {t}")]
    BlowUp { norm: f64, ceiling: f64, t: f64 },

    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("steady-state solve did not converge: residual {residual:.3e} after {iterations} Newton iterations")]
    NewtonFailed { residual: f64, iterations: usize },

    #[error("residual {residual:.3e} above classification threshold {threshold:.3e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },

    #[error(
        "classification conflict (grid too coarse?): lambda-based class {lambda_class} but \
         interior minimum {interior_min:.3e} vs nodal tolerance {tol_nodal:.3e}"
    )]
    ClassificationConflict {
        lambda_class: &'static str,
        interior_min: f64,
        tol_nodal: f64,
    },

    #[error("power iteration did not converge within {0} iterations")]
    PowerIterationFailed(usize),

    #[error("no unstable direction: leading eigenvalue {0:.6e} <= 0")]
    NoUnstableDirection(f64),

    #[error("trajectory norms are not positive and decaying: {0}")]
    NotDecaying(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    MalformedFile(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
