use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected: no path between vertices {0} and {1}")]
    Disconnected(usize, usize),

    #[error("unknown point {0:?}")]
    UnknownPoint(String),

    #[error("invalid cover: {0}")]
    InvalidCover(String),

    #[error("Lebesgue number {measured} is below the required {required}")]
    LebesgueTooSmall { measured: f64, required: f64 },

    #[error("invalid complex: {0}")]
    InvalidComplex(String),

    #[error("complex is disconnected")]
    DisconnectedComplex,

    #[error("class C0 violation: {0}")]
    NotClassC0(String),

    #[error("no admissible star vertex for domain vertex {vertex}")]
    StarCondition { vertex: usize },

    #[error("subdivision mesh {mesh} is not below the required {required}")]
    MeshTooCoarse { mesh: f64, required: f64 },

    #[error("n*d = {n}*{d} must be even")]
    Parity { n: usize, d: usize },

    #[error("random regular graph: need d >= 3 and n > d (got n={n}, d={d})")]
    RegularParams { n: usize, d: usize },

    #[error("no simple connected graph after {0} attempts")]
    RetryCapExceeded(usize),

    #[error("map is constant; the Poincaré ratio is undefined")]
    ConstantMap,

    #[error("map is not 1-Lipschitz: pair ({0}, {1}) is stretched by {2}")]
    NotLipschitz(usize, usize, f64),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot parse {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this failure: 2 config, 3 graph, 4 parse,
    /// 5 approximation, 6 assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parity { .. } | Error::RegularParams { .. } | Error::Io(_) => 2,
            Error::InvalidGraph(_) | Error::Disconnected(..) | Error::RetryCapExceeded(_) => 3,
            Error::Parse { .. } => 4,
            Error::StarCondition { .. } | Error::MeshTooCoarse { .. } | Error::LebesgueTooSmall { .. } => 5,
            Error::Assertion(_) | Error::NotLipschitz(..) | Error::NotClassC0(_) | Error::ConstantMap => 6,
            Error::InvalidMetric(_)
            | Error::UnknownPoint(_)
            | Error::InvalidCover(_)
            | Error::InvalidComplex(_)
            | Error::DisconnectedComplex => 2,
        }
    }
}
