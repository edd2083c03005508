use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a lattice decode could not produce a legal trace.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasibility {
    #[error("{frames} frames cannot hold {required} mandatory states")]
    TooFewFrames { frames: usize, required: usize },
    #[error("every reachable state has zero probability at frame {frame}")]
    Unreachable { frame: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("inventory error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Inventory { line: Option<usize>, message: String },

    #[error("unknown IPA symbol {symbol:?} at position {position}")]
    UnknownSymbol { symbol: String, position: usize },

    #[error("target sequence contains no phonemes")]
    EmptyTargets,

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("posteriorgram format error: {0}")]
    Format(String),

    #[error("non-finite entry at frame {frame}, class {class}")]
    NonFinite { frame: usize, class: usize },

    #[error("frame {frame} is not normalized (logsumexp = {logsumexp:.6})")]
    Normalization { frame: usize, logsumexp: f64 },

    #[error("class {label} is out of range for a posteriorgram with {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("infeasible alignment: {0}")]
    Infeasible(Infeasibility),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("TextGrid error at line {line}: {message}")]
    TextGrid { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<Infeasibility> for Error {
    fn from(e: Infeasibility) -> Self {
        Error::Infeasible(e)
    }
}

impl Error {
    pub(crate) fn inventory(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Inventory { line, message: message.into() }
    }
}
