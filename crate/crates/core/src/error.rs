use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("subcriticality violated: spectral radius {spectral_radius} >= 1")]
    SubcriticalityViolation { spectral_radius: f64 },

    #[error("tail indices of B[{first}] and B[{second}] coincide ({alpha})")]
    DuplicateTailIndex {
        first: String,
        second: String,
        alpha: f64,
    },

    #[error("full connectivity violated: E S_{root},{component} = {value}")]
    ConnectivityViolation {
        root: usize,
        component: usize,
        value: f64,
    },

    #[error("negative coordinate {value} at index {index}")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("index set is empty")]
    EmptySet,

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("invalid rare-event set: {0}")]
    InvalidSet(String),

    #[error("linear program did not converge: {0}")]
    LpNonConvergence(String),

    #[error("the rare-event set misses every cone, including the full one")]
    NoConeIntersects,

    #[error("argmin over cones is not unique: {first} and {second} both reach alpha = {alpha}")]
    NonUniqueArgmin {
        first: String,
        second: String,
        alpha: f64,
    },

    #[error("set is not bounded away from the cheaper cones: {0}")]
    NotBoundedAway(String),

    #[error("node cap {cap} exceeded")]
    CapExceeded { cap: u64 },

    #[error("decomposition depth cap {cap} exceeded")]
    DepthCapExceeded { cap: usize },

    #[error("truncation parameter must be positive")]
    ZeroDelta,

    #[error("depth-0 type carries no limiting measure")]
    DepthZeroType,

    #[error("insufficient hits: {0}")]
    InsufficientHits(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("model precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
