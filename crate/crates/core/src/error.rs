use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("assembly error in element {element}: {reason}")]
    Assembly { element: usize, reason: String },

    #[error("step error at t = {t:.6} s: {reason}")]
    Step { t: f64, reason: String },

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("distance error: {0}")]
    Distance(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (solver breakdown, non-finite
    /// fields, diverging training) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Assembly { .. } | Error::Step { .. } | Error::Training(_)
        )
    }

    /// True for malformed or inconsistent input data.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Data(_) | Error::Csv(_) | Error::Json(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
