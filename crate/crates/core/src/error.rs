use crate::interval::Interval;

/// Errors produced by pipeline construction, execution and inference.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid pipeline graph: {0}")]
    GraphInvalid(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("hypothesis is not testable: {0}")]
    Untestable(String),

    #[error("degenerate test direction (sigma_T = {0:e})")]
    DegenerateDirection(f64),

    #[error("precision failure: {0}")]
    Precision(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("sweep stagnated at z = {z} after {steps} steps ({detail})")]
    Stagnation { z: f64, steps: usize, detail: String },

    #[error("sweep exceeded the budget of {0} intervals")]
    Budget(usize),

    /// A component failed on a state that is constant over `interval`.
    #[error("node `{node}`: {source}")]
    Component {
        node: String,
        interval: Option<Interval>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Component { source, .. } => source.exit_code(),
            Error::Config(_)
            | Error::GraphInvalid(_)
            | Error::InvalidData(_)
            | Error::Untestable(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::DegenerateInput(_)
            | Error::DegenerateDirection(_)
            | Error::Precision(_)
            | Error::Inconsistent(_)
            | Error::Stagnation { .. }
            | Error::Budget(_) => 3,
        }
    }

    /// Interval over which a component failure is known to persist.
    pub fn failure_interval(&self) -> Option<Interval> {
        match self {
            Error::Component { interval, .. } => *interval,
            _ => None,
        }
    }

    pub(crate) fn in_node(self, node: &str, interval: Option<Interval>) -> Error {
        match self {
            e @ Error::Component { .. } => e,
            other => Error::Component {
                node: node.to_string(),
                interval,
                source: Box::new(other),
            },
        }
    }
}
