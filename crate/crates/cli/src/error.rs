use gkw_core::Error as CoreError;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_SOLUTION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("expression error at {pointer}, position {position}: {message}")]
    Expression {
        pointer: String,
        position: usize,
        message: String,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } | Self::Expression { .. } | Self::Usage(_) | Self::Io { .. } => {
                EXIT_CONFIG
            }
            Self::Core(e) => match e {
                CoreError::InvalidGrid(_)
                | CoreError::ShapeMismatch(_)
                | CoreError::NegativeCoefficient { .. }
                | CoreError::ZeroMeanViolation { .. }
                | CoreError::NotBasicData { .. }
                | CoreError::AsymmetricData(_)
                | CoreError::InvalidArgument(_)
                | CoreError::Format(_)
                | CoreError::Json(_)
                | CoreError::Io(_) => EXIT_CONFIG,
                CoreError::NonFinite { .. }
                | CoreError::ExponentOverflow { .. }
                | CoreError::LpNumericalFailure { .. }
                | CoreError::NearBoundary { .. }
                | CoreError::InconsistencyDetected(_) => EXIT_NUMERICAL,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Schema { .. } => "SchemaError",
            Self::Expression { .. } => "ExpressionParseError",
            Self::Io { .. } => "IoError",
            Self::Usage(_) => "UsageError",
            Self::Core(e) => match e {
                CoreError::InvalidGrid(_) => "InvalidGrid",
                CoreError::ShapeMismatch(_) => "ShapeMismatch",
                CoreError::NonFinite { .. } => "NonFinite",
                CoreError::ZeroMeanViolation { .. } => "ZeroMeanViolation",
                CoreError::NegativeCoefficient { .. } => "NegativeCoefficient",
                CoreError::ExponentOverflow { .. } => "ExponentOverflow",
                CoreError::LpNumericalFailure { .. } => "LPNumericalFailure",
                CoreError::NearBoundary { .. } => "NearBoundary",
                CoreError::NotBasicData { .. } => "NotBasicData",
                CoreError::AsymmetricData(_) => "AsymmetricData",
                CoreError::InconsistencyDetected(_) => "InconsistencyDetected",
                CoreError::InvalidArgument(_) => "InvalidArgument",
                CoreError::Format(_) => "FormatError",
                CoreError::Io(_) => "IoError",
                CoreError::Json(_) => "JsonError",
            },
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (pointer, position) = match self {
            Self::Schema { pointer, .. } => (Some(pointer.clone()), None),
            Self::Expression {
                pointer, position, ..
            } => (Some(pointer.clone()), Some(*position)),
            _ => (None, None),
        };
        ErrorReport {
            kind: self.kind(),
            message: self.to_string(),
            pointer,
            position,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}
