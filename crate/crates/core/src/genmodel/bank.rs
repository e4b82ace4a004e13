use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Encoder, GenError};
use crate::graph::{CausalGraph, VariableKind};
use crate::{Gmm, LinearModel, LogisticModel};

pub const BANK_VERSION: u32 = 1;

/// A fitted conditional distribution for one variable given its parents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ConditionalModel {
    Linear(LinearModel),
    Logistic(LogisticModel),
}

impl ConditionalModel {
    /// Design columns, intercept first.
    pub fn features(&self) -> &[String] {
        match self {
            Self::Linear(m) => &m.features,
            Self::Logistic(m) => &m.features,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            Self::Linear(m) => Some(m),
            Self::Logistic(_) => None,
        }
    }

    pub fn as_logistic(&self) -> Option<&LogisticModel> {
        match self {
            Self::Logistic(m) => Some(m),
            Self::Linear(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankMetadata {
    /// Which split the accompanying fit report was computed on, or
    /// `reference` for a hand-specified bank.
    pub split: String,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub n_patients: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Baseline (`t = 0`) and autoregressive (`t >= 1`) conditional models for
/// every observed variable, plus the subtype mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBank {
    pub version: u32,
    pub graph_hash: String,
    pub gmm: Gmm,
    pub baseline: BTreeMap<String, ConditionalModel>,
    pub autoregressive: BTreeMap<String, ConditionalModel>,
    pub metadata: BankMetadata,
}

impl ModelBank {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bank serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, GenError> {
        let raw: serde_json::Value = serde_json::from_str(s)?;
        let found = raw.get("version").and_then(|v| v.as_u64());
        if found != Some(u64::from(BANK_VERSION)) {
            return Err(GenError::VersionMismatch { found, expected: BANK_VERSION });
        }
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GenError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Reads a bank and checks it against `graph`.
    pub fn load(path: impl AsRef<Path>, graph: &CausalGraph) -> Result<Self, GenError> {
        let bank = Self::from_json(&std::fs::read_to_string(path)?)?;
        bank.validate(graph)?;
        Ok(bank)
    }

    pub fn validate(&self, graph: &CausalGraph) -> Result<(), GenError> {
        if self.version != BANK_VERSION {
            return Err(GenError::VersionMismatch {
                found: Some(u64::from(self.version)),
                expected: BANK_VERSION,
            });
        }
        let hash = graph.hash();
        if self.graph_hash != hash {
            return Err(GenError::ChecksumMismatch { bank: self.graph_hash.clone(), graph: hash });
        }
        for spec in graph.observed() {
            let base = self
                .baseline
                .get(&spec.name)
                .ok_or_else(|| GenError::MissingModel { variable: spec.name.clone(), stage: "baseline" })?;
            check_model(graph, &spec.name, 0, base)?;
            match (spec.is_dynamic(), self.autoregressive.get(&spec.name)) {
                (true, Some(m)) => check_model(graph, &spec.name, 1, m)?,
                (true, None) => {
                    return Err(GenError::MissingModel {
                        variable: spec.name.clone(),
                        stage: "autoregressive",
                    })
                }
                (false, Some(_)) => return Err(GenError::UnexpectedModel(spec.name.clone())),
                (false, None) => {}
            }
        }
        let known: Vec<&str> = graph.observed().map(|v| v.name.as_str()).collect();
        for name in self.baseline.keys().chain(self.autoregressive.keys()) {
            if !known.contains(&name.as_str()) {
                return Err(GenError::UnexpectedModel(name.clone()));
            }
        }
        Ok(())
    }

    /// Validates the bank and resolves every model against the graph layout.
    pub fn compile(&self, graph: &CausalGraph) -> Result<CompiledBank, GenError> {
        self.validate(graph)?;
        let mut order = Vec::new();
        for name in graph.topological_order()? {
            if name != graph.latent {
                order.push(graph.index_of(&name).expect("ordered names are declared"));
            }
        }
        Ok(CompiledBank {
            order,
            latent: graph.index_of(&graph.latent).expect("validated"),
            outcome: graph.index_of(&graph.outcome().name).expect("validated"),
            diagnosis: graph.index_of(&graph.diagnosis().name).expect("validated"),
            dynamic: graph.variables.iter().map(|v| v.is_dynamic()).collect(),
            baseline: compile_stage(graph, &self.baseline, 0)?,
            autoregressive: compile_stage(graph, &self.autoregressive, 1)?,
        })
    }
}

fn check_model(
    graph: &CausalGraph,
    name: &str,
    t: usize,
    model: &ConditionalModel,
) -> Result<(), GenError> {
    let spec = graph.variable(name)?;
    let expected = Encoder::for_variable(graph, name, t).column_names();
    if model.features() != expected.as_slice() {
        return Err(GenError::FeatureMismatch {
            variable: name.to_string(),
            expected,
            found: model.features().to_vec(),
        });
    }
    let width = expected.len();
    match (&spec.kind, model) {
        (VariableKind::Continuous, ConditionalModel::Linear(m)) => {
            if m.coefficients.len() != width || !(m.noise_sd >= 0.0 && m.noise_sd.is_finite()) {
                return Err(GenError::InvalidModel(format!("{name}: malformed linear model")));
            }
        }
        (VariableKind::Categorical { levels, .. }, ConditionalModel::Logistic(m)) => {
            if m.class_labels.is_empty()
                || m.class_labels.iter().any(|c| !levels.contains(c))
                || m.weights.len() + 1 != m.class_labels.len()
                || m.weights.iter().any(|w| w.len() != width)
            {
                return Err(GenError::InvalidModel(format!("{name}: malformed logistic model")));
            }
        }
        _ => return Err(GenError::InvalidModel(format!("{name}: model family does not match kind"))),
    }
    Ok(())
}

fn compile_stage(
    graph: &CausalGraph,
    models: &BTreeMap<String, ConditionalModel>,
    t: usize,
) -> Result<Vec<Option<CompiledModel>>, GenError> {
    graph
        .variables
        .iter()
        .map(|spec| match models.get(&spec.name) {
            Some(m) => {
                check_model(graph, &spec.name, t, m)?;
                Ok(Some(CompiledModel::new(graph, &spec.name, t, m)))
            }
            None => Ok(None),
        })
        .collect()
}

/// Compiles a partial set of models (for example baseline-only) for one stage.
pub fn compile_models(
    graph: &CausalGraph,
    models: &BTreeMap<String, ConditionalModel>,
    t: usize,
) -> Result<Vec<Option<CompiledModel>>, GenError> {
    compile_stage(graph, models, t)
}

#[derive(Debug, Clone)]
pub enum CompiledFamily {
    Linear { coefficients: Vec<f64>, noise_sd: f64 },
    Logistic { model: LogisticModel, class_levels: Vec<usize> },
}

/// A conditional model bound to its encoder and to graph level indices.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub encoder: Encoder,
    pub family: CompiledFamily,
}

impl CompiledModel {
    fn new(graph: &CausalGraph, name: &str, t: usize, model: &ConditionalModel) -> Self {
        let encoder = Encoder::for_variable(graph, name, t);
        let family = match model {
            ConditionalModel::Linear(m) => CompiledFamily::Linear {
                coefficients: m.coefficients.clone(),
                noise_sd: m.noise_sd,
            },
            ConditionalModel::Logistic(m) => {
                let spec = graph.variable(name).expect("checked");
                let class_levels =
                    m.class_labels.iter().map(|c| spec.level_index(c).expect("checked")).collect();
                CompiledFamily::Logistic { model: m.clone(), class_levels }
            }
        };
        Self { encoder, family }
    }

    /// Conditional mean for continuous variables, level index of the modal
    /// class for categorical ones.
    pub fn point(&self, current: &[f64], lag: Option<&[f64]>) -> f64 {
        let row = self.encoder.row(current, lag);
        match &self.family {
            CompiledFamily::Linear { coefficients, .. } => crate::fitkit::dot(coefficients, &row),
            CompiledFamily::Logistic { model, class_levels } => class_levels[model.predict_class(&row)] as f64,
        }
    }

    /// Draws a value: mean plus Gaussian noise, or a class from the predicted
    /// probabilities (one uniform).
    pub fn sample<R: Rng + ?Sized>(&self, current: &[f64], lag: Option<&[f64]>, rng: &mut R) -> f64 {
        let row = self.encoder.row(current, lag);
        match &self.family {
            CompiledFamily::Linear { coefficients, noise_sd } => {
                let e: f64 = rng.sample(StandardNormal);
                crate::fitkit::dot(coefficients, &row) + noise_sd * e
            }
            CompiledFamily::Logistic { model, class_levels } => {
                let p = model.probabilities(&row);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        return class_levels[k] as f64;
                    }
                }
                class_levels[p.len() - 1] as f64
            }
        }
    }

    pub fn noise_sd(&self) -> Option<f64> {
        match &self.family {
            CompiledFamily::Linear { noise_sd, .. } => Some(*noise_sd),
            CompiledFamily::Logistic { .. } => None,
        }
    }
}

/// A validated bank laid out by graph variable index for fast sampling.
#[derive(Debug, Clone)]
pub struct CompiledBank {
    /// Observed variables in topological order.
    pub order: Vec<usize>,
    pub latent: usize,
    pub outcome: usize,
    pub diagnosis: usize,
    pub dynamic: Vec<bool>,
    pub baseline: Vec<Option<CompiledModel>>,
    pub autoregressive: Vec<Option<CompiledModel>>,
}
