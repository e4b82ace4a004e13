use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{BankMetadata, ConditionalModel, Encoder, GenError, ModelBank, BANK_VERSION};
use crate::cohort::{LabeledCohort, Patient};
use crate::fitkit::{
    classification_report, fit_linear, fit_logistic, regression_report, DesignMatrix, FitReport, LogisticOptions,
    MultinomialLogisticModel,
};
use crate::graph::CausalGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Baseline,
    Autoregressive,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Baseline => "baseline",
            Stage::Autoregressive => "autoregressive",
        }
    }

    fn t(self) -> usize {
        match self {
            Stage::Baseline => 0,
            Stage::Autoregressive => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Compute the report on training patients instead of the holdout.
    pub report_on_train: bool,
    pub logistic: LogisticOptions<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { holdout_fraction: 0.2, seed: 0, report_on_train: false, logistic: LogisticOptions::default() }
    }
}

/// Patient-level split: returns `(train, holdout)` index lists, each sorted.
pub fn split_patients(n: usize, holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = (holdout_fraction * n as f64).round() as usize;
    let mut hold = idx[..n_hold].to_vec();
    let mut train = idx[n_hold..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    (train, hold)
}

/// `(current, lag)` row pairs for one stage: `t = 0` rows for the baseline,
/// every `t - 1 → t` transition for the autoregression. `parity` keeps only
/// transitions whose target step has that parity.
fn stage_rows<'a>(
    patients: impl Iterator<Item = &'a Patient>,
    stage: Stage,
    parity: Option<usize>,
) -> Vec<(&'a [f64], Option<&'a [f64]>)> {
    let mut out = Vec::new();
    for p in patients {
        match stage {
            Stage::Baseline => {
                if let Some(r) = p.visits.first() {
                    out.push((r.as_slice(), None));
                }
            }
            Stage::Autoregressive => {
                for t in 1..p.visits.len() {
                    if parity.is_none_or(|k| t % 2 == k) {
                        out.push((p.visits[t].as_slice(), Some(p.visits[t - 1].as_slice())));
                    }
                }
            }
        }
    }
    out
}

/// Fits the conditional model of `name` for one stage on the given rows.
/// Rows with a missing target or input are skipped.
pub fn fit_variable(
    graph: &CausalGraph,
    name: &str,
    stage: Stage,
    rows: &[(&[f64], Option<&[f64]>)],
    options: &LogisticOptions<f64>,
) -> Result<ConditionalModel, GenError> {
    let spec = graph.variable(name)?;
    let j = graph.index_of(name).expect("declared");
    let encoder = Encoder::for_variable(graph, name, stage.t());
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for (cur, lag) in rows {
        if cur[j].is_nan() {
            continue;
        }
        let f = encoder.features(cur, *lag);
        if f.iter().any(|v| !v.is_finite()) {
            continue;
        }
        x.push(f);
        y.push(cur[j]);
    }
    let needed = encoder.width() + 2;
    if x.len() < needed {
        return Err(GenError::InsufficientData {
            variable: name.to_string(),
            stage: stage.name(),
            rows: x.len(),
            needed,
        });
    }
    let fit_err = |source| GenError::Fit { variable: name.to_string(), stage: stage.name(), source };
    let design = DesignMatrix::new(encoder.feature_names().to_vec(), &x).map_err(fit_err)?;
    match spec.levels() {
        None => Ok(ConditionalModel::Linear(fit_linear(&design, &y).map_err(fit_err)?)),
        Some(levels) => {
            let labels: Vec<usize> = y.iter().map(|v| *v as usize).collect();
            let first = labels[0];
            if labels.iter().all(|l| *l == first) {
                return Ok(ConditionalModel::Logistic(MultinomialLogisticModel {
                    features: design.column_names().to_vec(),
                    class_labels: vec![levels[first].clone()],
                    weights: Vec::new(),
                }));
            }
            let fit = fit_logistic(&design, &labels, levels, options).map_err(fit_err)?;
            if !fit.converged {
                log::warn!("{} model of `{name}` stopped at gradient max-norm {:e}", stage.name(), fit.grad_norm);
            }
            Ok(ConditionalModel::Logistic(fit.model))
        }
    }
}

/// Baseline models fit on complete cases at every visit: a row is used for
/// a variable when the variable and all of its same-time parents are present.
pub fn fit_baseline_complete_case(
    patients: &[Patient],
    graph: &CausalGraph,
) -> Result<BTreeMap<String, ConditionalModel>, GenError> {
    let rows: Vec<(&[f64], Option<&[f64]>)> =
        patients.iter().flat_map(|p| p.visits.iter()).map(|r| (r.as_slice(), None)).collect();
    let names: Vec<&str> = graph.observed().map(|v| v.name.as_str()).collect();
    let opts = LogisticOptions::default();
    let fitted: Result<Vec<_>, _> = names
        .par_iter()
        .map(|n| fit_variable(graph, n, Stage::Baseline, &rows, &opts).map(|m| (n.to_string(), m)))
        .collect();
    Ok(fitted?.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub variable: String,
    pub baseline: FitReport<f64>,
    pub autoregressive: Option<FitReport<f64>>,
}

/// Fit quality per dynamic variable: classifiers first, then regressions,
/// each in graph declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTable {
    pub split: String,
    pub rows: Vec<FitRow>,
}

fn fmt_report(r: Option<&FitReport<f64>>) -> [String; 3] {
    match r {
        Some(FitReport::Classifier { accuracy, macro_f1, n_classes, .. }) => {
            [format!("{:.0}%", accuracy * 100.0), format!("{macro_f1:.2}"), n_classes.to_string()]
        }
        Some(FitReport::Regression { r2, rmse, sd_y, .. }) => {
            [format!("{r2:.2}"), format!("{rmse:.4}"), format!("{sd_y:.4}")]
        }
        None => Default::default(),
    }
}

impl FitTable {
    /// Delimited text laid out like the published fit table, with a section
    /// header before the classifiers and before the regressions.
    pub fn to_delimited(&self, sep: char) -> String {
        let line = |cells: &[&str]| cells.join(&sep.to_string()) + "\n";
        let mut out = line(&["Target variable", "Baseline", "", "", "Autoregression", "", ""]);
        let is_clf = |r: &FitRow| matches!(r.baseline, FitReport::Classifier { .. });
        for (title, cols, clf) in [
            ("Classifiers", ["Acc", "F1", "# Classes"], true),
            ("Regressions", ["R2", "RMSE", "sigma_Y"], false),
        ] {
            out += &line(&[title, cols[0], cols[1], cols[2], cols[0], cols[1], cols[2]]);
            for r in self.rows.iter().filter(|r| is_clf(r) == clf) {
                let b = fmt_report(Some(&r.baseline));
                let a = fmt_report(r.autoregressive.as_ref());
                out += &line(&[&r.variable, &b[0], &b[1], &b[2], &a[0], &a[1], &a[2]]);
            }
        }
        out
    }
}

fn report_for(
    graph: &CausalGraph,
    name: &str,
    model: &ConditionalModel,
    stage: Stage,
    rows: &[(&[f64], Option<&[f64]>)],
) -> Option<FitReport<f64>> {
    let compiled =
        super::compile_models(graph, &BTreeMap::from([(name.to_string(), model.clone())]), stage.t()).ok()?;
    let j = graph.index_of(name)?;
    let m = compiled[j].as_ref()?;
    let (pred, truth): (Vec<f64>, Vec<f64>) = rows.iter().map(|(c, l)| (m.point(c, *l), c[j])).unzip();
    if truth.is_empty() {
        return None;
    }
    if graph.variables[j].is_categorical() {
        let p: Vec<usize> = pred.iter().map(|v| *v as usize).collect();
        let t: Vec<usize> = truth.iter().map(|v| *v as usize).collect();
        classification_report(&p, &t).ok()
    } else {
        regression_report(&pred, &truth).ok()
    }
}

/// Fits the full bank on a labeled cohort and reports fit quality on the
/// holdout patients (or the training patients when requested or when the
/// holdout is empty).
pub fn fit_bank(
    cohort: &LabeledCohort,
    graph: &CausalGraph,
    options: &FitOptions,
) -> Result<(ModelBank, FitTable), GenError> {
    if !(0.0..=0.5).contains(&options.holdout_fraction) {
        return Err(GenError::BadOption(format!(
            "holdout fraction {} is outside [0, 0.5]",
            options.holdout_fraction
        )));
    }
    graph.validate()?;
    let (train, hold) = split_patients(cohort.patients.len(), options.holdout_fraction, options.seed);
    let train_p: Vec<&Patient> = train.iter().map(|&i| &cohort.patients[i]).collect();
    let eval_on_train = options.report_on_train || hold.is_empty();
    let eval_p: Vec<&Patient> =
        if eval_on_train { train_p.clone() } else { hold.iter().map(|&i| &cohort.patients[i]).collect() };

    let mut jobs = Vec::new();
    for v in graph.observed() {
        jobs.push((v.name.clone(), Stage::Baseline));
        if v.is_dynamic() {
            jobs.push((v.name.clone(), Stage::Autoregressive));
        }
    }
    let train_rows = [Stage::Baseline, Stage::Autoregressive].map(|s| stage_rows(train_p.iter().copied(), s, None));
    let eval_rows = [Stage::Baseline, Stage::Autoregressive].map(|s| stage_rows(eval_p.iter().copied(), s, None));
    let fitted: Vec<(String, Stage, ConditionalModel, Option<FitReport<f64>>)> = jobs
        .par_iter()
        .map(|(name, stage)| {
            let k = stage.t();
            let m = fit_variable(graph, name, *stage, &train_rows[k], &options.logistic)?;
            let rep = report_for(graph, name, &m, *stage, &eval_rows[k]);
            Ok((name.clone(), *stage, m, rep))
        })
        .collect::<Result<_, GenError>>()?;

    let mut baseline = BTreeMap::new();
    let mut autoregressive = BTreeMap::new();
    let mut reports: BTreeMap<(String, Stage), FitReport<f64>> = BTreeMap::new();
    for (name, stage, m, rep) in fitted {
        if let Some(r) = rep {
            reports.insert((name.clone(), stage), r);
        }
        match stage {
            Stage::Baseline => baseline.insert(name, m),
            Stage::Autoregressive => autoregressive.insert(name, m),
        };
    }
    let dynamic: Vec<_> = graph.observed().filter(|v| v.is_dynamic()).collect();
    let mut rows = Vec::new();
    for clf in [true, false] {
        for v in dynamic.iter().filter(|v| v.is_categorical() == clf) {
            if let Some(b) = reports.get(&(v.name.clone(), Stage::Baseline)) {
                rows.push(FitRow {
                    variable: v.name.clone(),
                    baseline: b.clone(),
                    autoregressive: reports.get(&(v.name.clone(), Stage::Autoregressive)).cloned(),
                });
            }
        }
    }
    let split = if eval_on_train { "train" } else { "holdout" }.to_string();
    let bank = ModelBank {
        version: BANK_VERSION,
        graph_hash: graph.hash(),
        gmm: cohort.gmm.clone(),
        baseline,
        autoregressive,
        metadata: BankMetadata {
            split: split.clone(),
            holdout_fraction: options.holdout_fraction,
            seed: options.seed,
            n_patients: cohort.patients.len(),
            note: None,
        },
    };
    Ok((bank, FitTable { split, rows }))
}

impl Ord for Stage {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.t().cmp(&other.t())
    }
}

impl PartialOrd for Stage {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityRow {
    pub variable: String,
    /// Largest `|b_even - b_odd| / sqrt(se_even² + se_odd²)` over coefficients.
    pub max_z: f64,
    pub worst_feature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub alpha: f64,
    /// Bonferroni-corrected two-sided normal threshold.
    pub threshold: f64,
    pub rows: Vec<StationarityRow>,
    pub passed: bool,
}

/// Refits each continuous autoregression separately on even-step and
/// odd-step transitions and tests every coefficient pair for equality.
pub fn stationarity_check(
    cohort: &LabeledCohort,
    graph: &CausalGraph,
    alpha: f64,
) -> Result<StationarityReport, GenError> {
    let opts = LogisticOptions::default();
    let even = stage_rows(cohort.patients.iter(), Stage::Autoregressive, Some(0));
    let odd = stage_rows(cohort.patients.iter(), Stage::Autoregressive, Some(1));
    let mut fits = Vec::new();
    for v in graph.observed().filter(|v| v.is_dynamic() && !v.is_categorical()) {
        let a = fit_variable(graph, &v.name, Stage::Autoregressive, &even, &opts)?;
        let b = fit_variable(graph, &v.name, Stage::Autoregressive, &odd, &opts)?;
        fits.push((v.name.clone(), a, b));
    }
    let mut rows = Vec::new();
    let mut tests = 0usize;
    for (name, a, b) in &fits {
        let (a, b) = (a.as_linear().expect("continuous"), b.as_linear().expect("continuous"));
        let mut worst = (0.0f64, String::new());
        for k in 0..a.coefficients.len() {
            if let (Some(Some(sa)), Some(Some(sb))) = (a.std_errors.get(k), b.std_errors.get(k)) {
                let z = (a.coefficients[k] - b.coefficients[k]).abs() / (sa * sa + sb * sb).sqrt();
                if z.is_finite() {
                    tests += 1;
                    if z >= worst.0 {
                        worst = (z, a.features[k].clone());
                    }
                }
            }
        }
        rows.push(StationarityRow { variable: name.clone(), max_z: worst.0, worst_feature: worst.1 });
    }
    let threshold = Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * tests.max(1) as f64));
    let passed = rows.iter().all(|r| r.max_z <= threshold);
    Ok(StationarityReport { alpha, threshold, rows, passed })
}
