use thiserror::Error;

/// Coarse classification used by callers (and the CLI) to map failures to
/// exit codes without matching on every variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// A caller-supplied certificate or precondition was violated.
    Contract,
    /// A configured resource cap (enumeration depth, iteration budget) was hit.
    Resource,
    /// The requested value is mathematically undefined or not representable
    /// in the requested direction.
    Unsupported,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("Cauchy contract breach: stages {m} and {n} give disjoint enclosures")]
    CauchyViolation { m: u32, n: u32 },

    #[error("cylinder depth {requested} exceeds oracle cap {cap} (set RIGORSTOCH_ORACLE_DEPTH)")]
    OracleDepth { requested: u32, cap: u32 },

    #[error("stage budget {budget} exhausted: certified mass {achieved} below target {target}")]
    MassStalled {
        budget: u32,
        achieved: String,
        target: String,
    },

    #[error("operation needs an effectively finite valuation (exact total mass unknown)")]
    TotalMassUnknown,

    #[error("conditional valuation undefined: denominator upper bound reached 0 by stage {stage}")]
    UndefinedConditional { stage: u32 },

    #[error("certified bounds violated: {what}")]
    BoundsBreach { what: String },

    #[error("argument {t} outside [0,1]")]
    TimeOutOfRange { t: String },

    #[error("quantile argument touches {{0,1}}; stratify or clamp before decoding")]
    QuantileEdge,

    #[error("stratification level {m} below 6; the tail estimate starts at m = 6")]
    StratumTooLow { m: u32 },

    #[error("could not certify image re-indexing within budget; best delta = {best_delta}")]
    ImageReindex { best_delta: String },

    #[error("grid mismatch: {what}")]
    GridMismatch { what: String },

    #[error("nonanticipativity violation: {what}")]
    Anticipation { what: String },

    #[error("bit-block reuse across trajectory steps: {what}")]
    BlockReuse { what: String },

    #[error("enclosure width {width} exceeded cap {cap} at step {step}")]
    EnclosureBlowup {
        width: String,
        cap: String,
        step: usize,
    },

    #[error("iteration cap {cap} reached before tolerance {tol}; best gap {gap}")]
    ToleranceUnreachable { cap: u32, tol: String, gap: String },

    #[error("expression error: {0}")]
    Expr(#[from] ExprError),

    #[error("bit index overflow while slicing the base space (copy {copy}, bit {bit})")]
    BitIndexOverflow { copy: u32, bit: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            OracleDepth { .. }
            | MassStalled { .. }
            | ImageReindex { .. }
            | ToleranceUnreachable { .. }
            | EnclosureBlowup { .. }
            | BitIndexOverflow { .. } => ErrorKind::Resource,
            TotalMassUnknown | UndefinedConditional { .. } | Unsupported(_) | Expr(_) => {
                ErrorKind::Unsupported
            }
            _ => ErrorKind::Contract,
        }
    }
}

/// Parse and evaluation errors for the expression DSL.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdent { name: String, offset: usize },

    #[error("node `{node}` has no exact rational evaluator")]
    NoRationalEval { node: String },
}

pub type Result<T> = std::result::Result<T, Error>;
