use thiserror::Error;

/// Errors raised by library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("unknown point id `{0}`")]
    UnknownPoint(String),
    #[error("empty relation")]
    EmptyRelation,
    #[error("density violated: point `{point}` is farther than {radius} from the relation")]
    DensityViolation { point: String, radius: f64 },
    #[error("size cap exceeded: {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid bracket table: {0}")]
    InvalidBrackets(String),
    #[error("no logarithm: residual {residual:e}")]
    NoLog { residual: f64 },
    #[error("nesting radius collapsed at letter {step}")]
    Nesting { step: usize },
    #[error("solver stagnated with residual {residual:e}")]
    Stagnation { residual: f64 },
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("tangent model construction failed: {0}")]
    ConstructionFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
