use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate point at indices {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("requested {requested} points but the class has only {available}")]
    TooFewPoints { requested: usize, available: usize },

    #[error("instance too large for exhaustive enumeration: {size} > {limit}")]
    InstanceTooLarge { size: usize, limit: usize },

    #[error(
        "Lipschitz precondition violated by samples {i} and {j}: \
         ratio {ratio} exceeds budget {gamma}"
    )]
    LipschitzViolation {
        i: usize,
        j: usize,
        ratio: f64,
        gamma: f64,
    },

    #[error("ball-intersection solver stopped after {iterations} iterations with residual {residual:e}")]
    KirszbraunNotConverged { iterations: usize, residual: f64 },

    #[error("strategy {strategy} requires {requirement}")]
    StrategyMismatch {
        strategy: &'static str,
        requirement: &'static str,
    },

    #[error("no projection satisfied the distortion bounds after {attempts} attempts (best ratio spread {worst:.4})")]
    JlRetriesExhausted { attempts: usize, worst: f64 },

    #[error("point is not an atom of the diagonal class")]
    NotAnAtom,

    #[error("eps {eps} lies below every measured width (min {min})")]
    PhiUndefined { eps: f64, min: f64 },

    #[error("RIP constant {0} is not below 1")]
    RipTooLarge(f64),

    #[error("l1 solver hit the iteration cap: primal residual {primal:e}, change {change:e}")]
    L1NotConverged { primal: f64, change: f64 },

    #[error("no support of size <= {k} fits the measurements exactly")]
    NoExactFit { k: usize },

    #[error("grid spacing {spacing} is too coarse for mollifier scale {m} (need <= {limit})")]
    GridTooCoarse { spacing: f64, m: f64, limit: f64 },

    #[error("mesh refinement budget exhausted at h = {h:e}: sup error {sup_error:e}, Lipschitz excess {lip_excess:e}")]
    MeshBudgetExhausted {
        h: f64,
        sup_error: f64,
        lip_excess: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
