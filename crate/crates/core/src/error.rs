use thiserror::Error;

use crate::bench::BenchError;
use crate::cohort::CohortError;
use crate::estim::EstimError;
use crate::fitkit::FitError;
use crate::genmodel::GenError;
use crate::graph::GraphError;
use crate::intervene::SpecError;
use crate::sim::SimError;

/// Process exit status for each class of failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Config = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Model(#[from] GenError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Estim(#[from] EstimError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn gen_code(e: &GenError) -> ExitCode {
    match e {
        GenError::InsufficientData { .. } | GenError::Fit { .. } | GenError::Io(_) => ExitCode::Data,
        _ => ExitCode::Config,
    }
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Graph(_) | Self::Spec(_) | Self::Config(_) | Self::Json(_) => ExitCode::Config,
            Self::Model(e) => gen_code(e),
            Self::Sim(e) => match e {
                SimError::BankGraphMismatch(_) | SimError::Config(_) | SimError::Spec(_) | SimError::Json(_) => {
                    ExitCode::Config
                }
                _ => ExitCode::Data,
            },
            Self::Cohort(CohortError::Model(e)) => gen_code(e),
            Self::Fit(_) | Self::Cohort(_) | Self::Io(_) => ExitCode::Data,
            Self::Estim(EstimError::DivergedLoss { .. }) => ExitCode::Internal,
            Self::Estim(_) => ExitCode::Data,
            Self::Bench(BenchError::Sim(e)) => Self::Sim(SimError::Config(e.to_string())).exit_code(),
            Self::Bench(BenchError::ConfigInvalid(_) | BenchError::Json(_)) => ExitCode::Config,
            Self::Bench(_) => ExitCode::Data,
        }
    }
}
