use thiserror::Error;

pub type Result<T, E = LnnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LnnError {
    #[error("truth value {0} outside [0, 1]")]
    TruthRange(f64),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no feasible parameters exist for a {arity}-ary conjunction at alpha = {alpha}")]
    Infeasible { arity: usize, alpha: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown model '{name}'; valid names: {valid}")]
    UnknownModel { name: String, valid: String },

    #[error("ingestion error{}: {message}", location(.row, .column))]
    Ingest {
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("model document error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(row: &Option<usize>, column: &Option<String>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!(" at row {r}, column '{c}'"),
        (Some(r), None) => format!(" at row {r}"),
        (None, Some(c)) => format!(" in column '{c}'"),
        (None, None) => String::new(),
    }
}

impl LnnError {
    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        LnnError::Structure(msg.into())
    }

    pub(crate) fn ingest(row: Option<usize>, column: Option<&str>, msg: impl Into<String>) -> Self {
        LnnError::Ingest {
            row,
            column: column.map(str::to_owned),
            message: msg.into(),
        }
    }
}
