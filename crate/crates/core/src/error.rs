use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error. Each variant maps onto one exit-code class of the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Basis(#[from] crate::basis::BasisError),
    #[error(transparent)]
    Gam(#[from] crate::gam::GamError),
    #[error(transparent)]
    Selection(#[from] crate::selection::SelectionError),
    #[error(transparent)]
    Gamla(#[from] crate::gamla::GamlaError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Evaluation(#[from] crate::evaluation::EvalError),
    #[error(transparent)]
    Simulation(#[from] crate::simulation::SimulationError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Broad error class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Fitting,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Data(_) | Error::Io(_) | Error::Json(_) => ErrorClass::Data,
            Error::Evaluation(e) if e.is_data_error() => ErrorClass::Data,
            Error::Fold { source, .. } => source.class(),
            _ => ErrorClass::Fitting,
        }
    }
}
