use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("expected {expected} {what}, got {got}")]
    Count {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("malformed asset: {0}")]
    Asset(String),

    #[error("{format}: line {line}: {msg}")]
    Parse {
        format: &'static str,
        line: usize,
        msg: String,
    },

    #[error("point lies at or behind the camera plane (z = {0})")]
    BehindCamera(f64),

    #[error("non-manifold mesh: {0}")]
    NonManifold(String),

    #[error("image has zero area")]
    ZeroArea,

    #[error("rendered foreground is empty; the model is off-screen")]
    EmptyForeground,

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("residual evaluation failed while differentiating parameter {index} ({name}): {source}")]
    Jacobian {
        index: usize,
        name: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("normal equations are singular")]
    Singular,

    #[error("gaze target lies inside an eyeball")]
    TargetInsideEyeball,

    #[error("reflection map id {0} is out of range")]
    InvalidReflectionMap(usize),

    #[error("missing per-vertex attributes: {0}")]
    MissingAttributes(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::EmptyForeground | Error::Singular | Error::BehindCamera(_) => true,
            Error::Jacobian { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn parse(format: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            format,
            line,
            msg: msg.into(),
        }
    }
}
