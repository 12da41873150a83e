use thiserror::Error;

use crate::pedigree::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{} invalid families (first: {})", .0.len(), first_family(.0))]
    InvalidFamilies(Vec<(String, Vec<Violation>)>),

    #[error("member index {index} out of range for family of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pedigree {family_id} contains a loop; peeling requires a loop-free pedigree")]
    LoopDetected { family_id: String },

    #[error("family {family_id} has {size} members; brute-force enumeration supports at most {max}")]
    FamilyTooLarge { family_id: String, size: usize, max: usize },

    #[error("onset age {age} outside the penetrance support 1..={max}")]
    OnsetOutOfSupport { age: u32, max: u32 },

    #[error("cannot predict: {0}")]
    Prediction(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("censoring survival is zero at time {time}")]
    ZeroCensoringSurvival { time: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("stage {stage} failed{}: {source}", families_suffix(.families))]
    Stage {
        stage: String,
        families: Vec<String>,
        source: Box<Error>,
    },
}

fn families_suffix(families: &[String]) -> String {
    match families.len() {
        0 => String::new(),
        1..=5 => format!(" for families {}", families.join(", ")),
        n => format!(" for {n} families including {}", families[..5].join(", ")),
    }
}

fn first_family(families: &[(String, Vec<Violation>)]) -> String {
    families
        .first()
        .map(|(id, v)| {
            let first = v.first().map(|x| x.to_string()).unwrap_or_default();
            format!("{id}: {first}")
        })
        .unwrap_or_default()
}

impl Error {
    /// True for numeric failures: degenerate inputs, diverging training,
    /// vanishing censoring survival.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_numeric(),
            Error::Degenerate(_) | Error::NonFiniteLoss { .. } | Error::ZeroCensoringSurvival { .. } => true,
            _ => false,
        }
    }

    /// True for errors caused by invalid input data or configuration, as
    /// opposed to numeric failures.
    pub fn is_validation(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidFamilies(_)
                | Error::IndexOutOfRange { .. }
                | Error::Config(_)
                | Error::LoopDetected { .. }
                | Error::FamilyTooLarge { .. }
                | Error::OnsetOutOfSupport { .. }
                | Error::Prediction(_)
                | Error::Shape { .. }
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Checkpoint(_)
        )
    }
}

/// Tags an error with the pipeline stage it came from.
pub(crate) fn in_stage<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: stage.to_string(),
            families: Vec::new(),
            source: Box::new(other),
        },
    })
}
