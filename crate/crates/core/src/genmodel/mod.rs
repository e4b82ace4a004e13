//! Conditional model bank: baseline (`t = 0`) and stationary autoregressive
//! (`t >= 1`) models for every observed variable.

mod bank;
mod encode;
mod fit;

use thiserror::Error;

use crate::fitkit::FitError;
use crate::graph::GraphError;

pub use bank::{
    compile_models, BankMetadata, CompiledBank, CompiledFamily, CompiledModel, ConditionalModel, ModelBank,
    BANK_VERSION,
};
pub use encode::Encoder;
pub use fit::{
    fit_bank, fit_baseline_complete_case, fit_variable, split_patients, stationarity_check, FitOptions, FitRow,
    FitTable, Stage, StationarityReport, StationarityRow,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("bank version {found:?} is not supported (expected {expected})")]
    VersionMismatch { found: Option<u64>, expected: u32 },
    #[error("bank was fit against graph {bank}, but the provided graph hashes to {graph}")]
    ChecksumMismatch { bank: String, graph: String },
    #[error("no {stage} model for `{variable}`")]
    MissingModel { variable: String, stage: &'static str },
    #[error("bank has a model for `{0}` that the graph does not call for")]
    UnexpectedModel(String),
    #[error("features of `{variable}` do not match the graph: expected {expected:?}, found {found:?}")]
    FeatureMismatch { variable: String, expected: Vec<String>, found: Vec<String> },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{stage} fit of `{variable}`: {rows} usable rows, need at least {needed}")]
    InsufficientData { variable: String, stage: &'static str, rows: usize, needed: usize },
    #[error("{stage} fit of `{variable}`: {source}")]
    Fit { variable: String, stage: &'static str, source: FitError },
    #[error("invalid option: {0}")]
    BadOption(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("bank json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
