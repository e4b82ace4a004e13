//! Knob sweeps over simulated datasets, score aggregation and text reports.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::Patient;
use crate::estim::{
    s_learner, score, seq_t_learner, t_learner, CateEstimate, EstimError, Estimator, FeatureView, Observational,
    OracleTruth, RnnOptions, SequenceView, ViewOptions,
};
use crate::genmodel::ModelBank;
use crate::graph::{CausalGraph, Role};
use crate::intervene::{EffectSpec, PolicyKind};
use crate::sim::{sample_dataset, SimConfig, SimError};

/// Worker budget for sweeps; unset means all cores.
pub const WORKERS_ENV: &str = "ADSIM_WORKERS";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep: {0}")]
    ConfigInvalid(String),
    #[error("no records to summarize")]
    EmptyResult,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Knob {
    N,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "policy")]
    Policy,
    T,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::Gamma => "gamma",
            Self::Epsilon => "epsilon",
            Self::Policy => "policy",
            Self::T => "T",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Number(f64),
    Name(String),
}

impl std::fmt::Display for GridValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Number(v) => write!(f, "{v}"),
            Self::Name(s) => f.write_str(s),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: SimConfig,
    pub knob: Knob,
    pub grid: Vec<GridValue>,
    pub estimators: Vec<Estimator>,
    pub seeds: Vec<u64>,
    /// Evaluation step; defaults to the last step of each dataset.
    #[serde(default)]
    pub t_s: Option<usize>,
    #[serde(default = "default_true")]
    pub include_z: bool,
    #[serde(default)]
    pub rnn: RnnOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::ConfigInvalid(m));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return bad(format!("seed {s} is listed twice"));
        }
        for v in &self.grid {
            self.config_at(v, self.seeds[0])?;
        }
        Ok(())
    }

    /// The simulation config of one grid cell.
    pub fn config_at(&self, value: &GridValue, seed: u64) -> Result<SimConfig, BenchError> {
        let mut c = self.base.clone();
        c.seed = seed;
        let bad = || BenchError::ConfigInvalid(format!("`{value}` is not a valid {} value", self.knob.name()));
        let count = |v: &GridValue| match v {
            GridValue::Number(x) if *x >= 1.0 && x.fract() == 0.0 => Ok(*x as usize),
            _ => Err(bad()),
        };
        let real = |v: &GridValue| match v {
            GridValue::Number(x) => Ok(*x),
            GridValue::Name(_) => Err(bad()),
        };
        match self.knob {
            Knob::N => c.n_patients = count(value)?,
            Knob::T => c.horizon = count(value)?,
            Knob::Gamma => c.gamma = real(value)?,
            Knob::Epsilon => c.epsilon = real(value)?,
            Knob::Policy => {
                c.policy = match value {
                    GridValue::Name(s) if s == "random" => PolicyKind::Random,
                    GridValue::Name(s) if s == "covariate" => PolicyKind::Covariate,
                    _ => return Err(bad()),
                }
            }
        }
        let t_s = self.t_s.unwrap_or(c.horizon.saturating_sub(1));
        if t_s >= c.horizon {
            return Err(BenchError::ConfigInvalid(format!("t_s = {t_s} is beyond horizon {}", c.horizon)));
        }
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Vec<Self>, BenchError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(Box<SweepSpec>),
            Many(Vec<SweepSpec>),
        }
        Ok(match serde_json::from_str(s)? {
            OneOrMany::One(s) => vec![*s],
            OneOrMany::Many(v) => v,
        })
    }
}

/// The shipped sweeps: one per knob, S- and T-learners, seeds 0..10.
pub fn default_sweeps() -> Vec<SweepSpec> {
    let num = |v: &[f64]| v.iter().map(|x| GridValue::Number(*x)).collect::<Vec<_>>();
    let mk = |knob, grid, base: SimConfig| SweepSpec {
        base,
        knob,
        grid,
        estimators: vec![Estimator::S, Estimator::T],
        seeds: (0..10).collect(),
        t_s: None,
        include_z: true,
        rnn: RnnOptions::default(),
    };
    vec![
        mk(Knob::N, num(&[200.0, 1000.0, 5000.0, 20000.0]), SimConfig::default()),
        mk(Knob::Gamma, num(&[1.0, 2.0, 4.0, 8.0]), SimConfig::default()),
        mk(Knob::Epsilon, num(&[0.0, 0.25, 0.5, 1.0]), SimConfig::default()),
        mk(
            Knob::Policy,
            vec![GridValue::Name("random".into()), GridValue::Name("covariate".into())],
            SimConfig { epsilon: 0.25, ..SimConfig::default() },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub knob: String,
    pub value: String,
    pub estimator: String,
    pub seed: u64,
    pub action: usize,
    pub pehe: f64,
    pub ate_error: f64,
    pub n: usize,
    pub config_hash: String,
    pub error: Option<String>,
    /// Wall time of the whole cell; the only nondeterministic column.
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchResult {
    pub records: Vec<Record>,
}

impl BenchResult {
    pub fn write_csv<W: Write>(&self, writer: W, with_wall_time: bool) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header =
            vec!["knob", "value", "estimator", "seed", "action", "pehe", "ate_error", "n", "config_hash", "error"];
        if with_wall_time {
            header.push("wall_ms");
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.knob.clone(),
                r.value.clone(),
                r.estimator.clone(),
                r.seed.to_string(),
                r.action.to_string(),
                r.pehe.to_string(),
                r.ate_error.to_string(),
                r.n.to_string(),
                r.config_hash.clone(),
                r.error.clone().unwrap_or_default(),
            ];
            if with_wall_time {
                row.push(r.wall_ms.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self, BenchError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let col = |n: &str| {
            header.iter().position(|h| h == n).ok_or_else(|| BenchError::ConfigInvalid(format!("missing column `{n}`")))
        };
        let cols = ["knob", "value", "estimator", "seed", "action", "pehe", "ate_error", "n", "config_hash", "error"]
            .map(col);
        let [k, v, e, s, a, p, ae, n, h, err] = cols;
        let (k, v, e, s, a, p, ae, n, h, err) = (k?, v?, e?, s?, a?, p?, ae?, n?, h?, err?);
        let wall = header.iter().position(|x| x == "wall_ms");
        let bad = |c: &str, x: &str| BenchError::ConfigInvalid(format!("bad {c} `{x}`"));
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            records.push(Record {
                knob: rec[k].to_string(),
                value: rec[v].to_string(),
                estimator: rec[e].to_string(),
                seed: rec[s].parse().map_err(|_| bad("seed", &rec[s]))?,
                action: rec[a].parse().map_err(|_| bad("action", &rec[a]))?,
                pehe: rec[p].parse().map_err(|_| bad("pehe", &rec[p]))?,
                ate_error: rec[ae].parse().map_err(|_| bad("ate_error", &rec[ae]))?,
                n: rec[n].parse().map_err(|_| bad("n", &rec[n]))?,
                config_hash: rec[h].to_string(),
                error: Some(rec[err].to_string()).filter(|x| !x.is_empty()),
                wall_ms: wall.and_then(|w| rec[w].parse().ok()).unwrap_or(0),
            });
        }
        Ok(Self { records })
    }
}

fn estimate_cell(
    est: Estimator,
    obs: &Observational,
    graph: &CausalGraph,
    view: ViewOptions,
    rnn: &RnnOptions,
    seed: u64,
) -> Result<CateEstimate, EstimError> {
    match est {
        Estimator::S => s_learner(&FeatureView::build(obs, graph, view)?),
        Estimator::T => t_learner(&FeatureView::build(obs, graph, view)?),
        Estimator::SeqT => seq_t_learner(&SequenceView::build(obs, graph, view)?, &RnnOptions { seed, ..*rnn }),
    }
}

/// Runs every (grid value × seed) cell: simulate, fit each estimator on the
/// observational view, score against the oracle at `t_s`.
pub fn run_sweep(spec: &SweepSpec, bank: &ModelBank, graph: &CausalGraph) -> Result<BenchResult, BenchError> {
    spec.validate()?;
    bank.validate(graph).map_err(SimError::from)?;
    let cells: Vec<(&GridValue, u64)> =
        spec.grid.iter().flat_map(|v| spec.seeds.iter().map(move |s| (v, *s))).collect();
    let run = || -> Vec<Record> {
        cells
            .par_iter()
            .map(|(value, seed)| run_cell(spec, value, *seed, bank, graph))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    let records = match std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::ConfigInvalid(e.to_string()))?
            .install(run),
        _ => run(),
    };
    Ok(BenchResult { records })
}

fn run_cell(spec: &SweepSpec, value: &GridValue, seed: u64, bank: &ModelBank, graph: &CausalGraph) -> Vec<Record> {
    let started = Instant::now();
    let config = spec.config_at(value, seed).expect("validated");
    let hash = config.hash();
    let k = config.effect_spec().n_actions();
    let record = |est: Estimator, action, pehe, ate_error, n, error: Option<String>, wall: u64| Record {
        knob: spec.knob.name().to_string(),
        value: value.to_string(),
        estimator: est.name().to_string(),
        seed,
        action,
        pehe,
        ate_error,
        n,
        config_hash: hash.clone(),
        error,
        wall_ms: wall,
    };
    let failed = |est, msg: String, wall| {
        (1..k).map(|a| record(est, a, f64::INFINITY, f64::INFINITY, 0, Some(msg.clone()), wall)).collect::<Vec<_>>()
    };
    let ds = match sample_dataset(&config, bank, graph) {
        Ok(ds) => ds,
        Err(e) => {
            let wall = started.elapsed().as_millis() as u64;
            return spec.estimators.iter().flat_map(|est| failed(*est, e.to_string(), wall)).collect();
        }
    };
    let t_s = spec.t_s.unwrap_or(config.horizon - 1);
    let obs = Observational::from_dataset(&ds, graph);
    let oracle = OracleTruth::from_dataset(&ds);
    let view = ViewOptions { t_s, include_z: spec.include_z };
    let mut out = Vec::new();
    for est in &spec.estimators {
        let scored = estimate_cell(*est, &obs, graph, view, &spec.rnn, seed)
            .and_then(|e| score(est.name(), &e, &oracle, &ds.effect));
        let wall = started.elapsed().as_millis() as u64;
        match scored {
            Ok(rows) => out.extend(rows.into_iter().map(|s| record(*est, s.action, s.pehe, s.ate_error, s.n, None, wall))),
            Err(e) => {
                log::warn!("{}={value} seed {seed} {est}: {e}", spec.knob.name());
                out.extend(failed(*est, e.to_string(), wall));
            }
        }
    }
    out
}

/// Type-7 sample quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || frac == 0.0 || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub knob: String,
    pub value: String,
    pub estimator: String,
    pub seeds: usize,
    pub failed: usize,
    pub pehe_median: f64,
    pub pehe_iqr: f64,
    pub ate_error_median: f64,
    pub ate_error_iqr: f64,
}

/// Macro scores of one (value, estimator, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub knob: String,
    pub value: String,
    pub estimator: String,
    pub seed: u64,
    pub pehe: f64,
    pub ate_error: f64,
}

/// Means over the estimated arms of every cell; a failed cell scores `+inf`.
pub fn cell_scores(result: &BenchResult) -> Vec<CellScore> {
    let mut out = Vec::new();
    let mut i = 0;
    let recs = &result.records;
    while i < recs.len() {
        let r = &recs[i];
        let mut j = i;
        while j < recs.len()
            && recs[j].value == r.value
            && recs[j].estimator == r.estimator
            && recs[j].seed == r.seed
            && recs[j].knob == r.knob
        {
            j += 1;
        }
        let group = &recs[i..j];
        let mean_finite = |f: fn(&Record) -> f64| {
            let v: Vec<f64> = group.iter().map(f).filter(|x| x.is_finite()).collect();
            if v.is_empty() || group.iter().any(|r| r.error.is_some()) {
                f64::INFINITY
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        out.push(CellScore {
            knob: r.knob.clone(),
            value: r.value.clone(),
            estimator: r.estimator.clone(),
            seed: r.seed,
            pehe: mean_finite(|r| r.pehe),
            ate_error: mean_finite(|r| r.ate_error),
        });
        i = j;
    }
    out
}

/// Median and IQR of the macro scores per (value, estimator), in first-seen
/// order.
pub fn summarize(result: &BenchResult) -> Result<Vec<SummaryRow>, BenchError> {
    if result.records.is_empty() {
        return Err(BenchError::EmptyResult);
    }
    let cells = cell_scores(result);
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for c in &cells {
        let key = (c.knob.clone(), c.value.clone(), c.estimator.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    Ok(keys
        .into_iter()
        .map(|(knob, value, estimator)| {
            let sel: Vec<&CellScore> =
                cells.iter().filter(|c| c.knob == knob && c.value == value && c.estimator == estimator).collect();
            let stats = |f: fn(&CellScore) -> f64| {
                let mut v: Vec<f64> = sel.iter().map(|c| f(c)).collect();
                v.sort_by(f64::total_cmp);
                let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
                let iqr = if q1 == q3 { 0.0 } else { q3 - q1 };
                (quantile(&v, 0.5), iqr)
            };
            let (pm, pi) = stats(|c| c.pehe);
            let (am, ai) = stats(|c| c.ate_error);
            SummaryRow {
                knob,
                value,
                estimator,
                seeds: sel.len(),
                failed: sel.iter().filter(|c| c.pehe.is_infinite()).count(),
                pehe_median: pm,
                pehe_iqr: pi,
                ate_error_median: am,
                ate_error_iqr: ai,
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>10} {:<6} {:>5} {:>6} {:>12} {:>10} {:>12} {:>10}", "knob", "value", "est", "seeds", "failed", "pehe_med", "pehe_iqr", "ate_med", "ate_iqr");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:<6} {:>5} {:>6} {:>12.4} {:>10.4} {:>12.4} {:>10.4}",
            r.knob, r.value, r.estimator, r.seeds, r.failed, r.pehe_median, r.pehe_iqr, r.ate_error_median, r.ate_error_iqr
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReportRow {
    Section(String),
    Continuous { variable: String, mean: f64, sd: f64, n: usize },
    Categorical { variable: String, levels: Vec<(String, usize, f64)> },
}

/// First-visit statistics: mean (sd) for continuous variables, count
/// (percent) per level for categoricals, and the subtype share when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n: usize,
    pub rows: Vec<ReportRow>,
}

impl CohortReport {
    pub fn continuous(&self, name: &str) -> Option<(f64, f64)> {
        self.rows.iter().find_map(|r| match r {
            ReportRow::Continuous { variable, mean, sd, .. } if variable == name => Some((*mean, *sd)),
            _ => None,
        })
    }

    pub fn categorical(&self, name: &str) -> Option<&[(String, usize, f64)]> {
        self.rows.iter().find_map(|r| match r {
            ReportRow::Categorical { variable, levels } if variable == name => Some(levels.as_slice()),
            _ => None,
        })
    }

    /// Subtype-1 share in percent.
    pub fn subtype_percent(&self) -> Option<f64> {
        self.categorical("Subtype").and_then(|l| l.iter().find(|x| x.0 == "1").map(|x| x.2))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N = {}", self.n);
        for r in &self.rows {
            match r {
                ReportRow::Section(name) => {
                    let _ = writeln!(s, "{name}");
                }
                ReportRow::Continuous { variable, mean, sd, .. } => {
                    let _ = writeln!(s, "  {variable:<24} {mean:.1} ({sd:.1})");
                }
                ReportRow::Categorical { variable, levels } => {
                    let _ = writeln!(s, "  {variable}");
                    for (l, c, p) in levels {
                        let _ = writeln!(s, "    {l:<22} {c} ({p:.1}%)");
                    }
                }
            }
        }
        s
    }
}

fn variable_row(graph: &CausalGraph, patients: &[Patient], j: usize) -> ReportRow {
    let spec = &graph.variables[j];
    let values: Vec<f64> = patients.iter().filter_map(|p| p.visits.first()).map(|v| v[j]).filter(|v| !v.is_nan()).collect();
    match spec.levels() {
        Some(levels) => {
            let mut counts = vec![0usize; levels.len()];
            for v in &values {
                counts[*v as usize] += 1;
            }
            let n = values.len().max(1) as f64;
            ReportRow::Categorical {
                variable: spec.name.clone(),
                levels: levels.iter().zip(counts).map(|(l, c)| (l.clone(), c, 100.0 * c as f64 / n)).collect(),
            }
        }
        None => {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n.max(1) as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.saturating_sub(1).max(1) as f64;
            ReportRow::Continuous { variable: spec.name.clone(), mean, sd: var.sqrt(), n }
        }
    }
}

pub fn cohort_report(graph: &CausalGraph, patients: &[Patient]) -> CohortReport {
    let mut rows = vec![ReportRow::Section("Covariates".into())];
    let idx = |role| graph.variables.iter().enumerate().filter(move |(_, v)| v.role == role).map(|(j, _)| j);
    rows.extend(idx(Role::Covariate).map(|j| variable_row(graph, patients, j)));
    rows.push(ReportRow::Section("Outcomes".into()));
    rows.extend(idx(Role::Outcome).chain(idx(Role::Diagnosis)).map(|j| variable_row(graph, patients, j)));
    let labeled: Vec<u8> = patients.iter().filter_map(|p| p.z).collect();
    if !labeled.is_empty() {
        rows.push(ReportRow::Section("Subtype".into()));
        let n = labeled.len() as f64;
        let ones = labeled.iter().filter(|z| **z == 1).count();
        rows.push(ReportRow::Categorical {
            variable: "Subtype".into(),
            levels: vec![
                ("0".into(), labeled.len() - ones, 100.0 * (labeled.len() - ones) as f64 / n),
                ("1".into(), ones, 100.0 * ones as f64 / n),
            ],
        });
    }
    CohortReport { n: patients.len(), rows }
}

/// The action table: name and average effect per action.
pub fn ate_report<T: std::fmt::Display>(effect: &EffectSpec<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<4} {:<22} {:>8}", "a", "action", "ate");
    for (a, (name, ate)) in effect.actions.names.iter().zip(&effect.ate).enumerate() {
        let _ = writeln!(s, "{a:<4} {name:<22} {ate:>8}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(value: &str, est: &str, seed: u64, action: usize, pehe: f64) -> Record {
        Record {
            knob: "N".into(),
            value: value.into(),
            estimator: est.into(),
            seed,
            action,
            pehe,
            ate_error: pehe / 2.0,
            n: 10,
            config_hash: String::new(),
            error: None,
            wall_ms: 0,
        }
    }

    #[test]
    fn quantiles_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
        assert_eq!(quantile(&[1.0, f64::INFINITY], 0.0), 1.0);
        assert_eq!(quantile(&[1.0, f64::INFINITY, f64::INFINITY], 0.5), f64::INFINITY);
    }

    #[test]
    fn single_record_summary() {
        let r = BenchResult { records: vec![rec("200", "t", 0, 1, 0.7)] };
        let s = summarize(&r).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].pehe_median, 0.7);
        assert_eq!(s[0].pehe_iqr, 0.0);
    }

    #[test]
    fn identical_seeds_have_zero_iqr_and_row_count() {
        let mut records = Vec::new();
        for v in ["200", "1000"] {
            for e in ["s", "t"] {
                for seed in 0..10 {
                    records.push(rec(v, e, seed, 1, 0.5));
                    records.push(rec(v, e, seed, 2, 1.5));
                }
            }
        }
        let s = summarize(&BenchResult { records }).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|r| r.pehe_iqr == 0.0 && r.pehe_median == 1.0 && r.seeds == 10));
    }

    #[test]
    fn failed_cells_rank_last() {
        let mut bad = rec("0", "t", 1, 1, f64::INFINITY);
        bad.error = Some("arms without enough samples".into());
        let r = BenchResult { records: vec![rec("0", "t", 0, 1, 0.3), bad] };
        let s = summarize(&r).unwrap();
        assert_eq!(s[0].failed, 1);
        assert_eq!(s[0].pehe_median, f64::INFINITY);
        assert!(summarize(&BenchResult::default()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut r = BenchResult { records: vec![rec("200", "s", 3, 1, 0.25), rec("200", "s", 3, 2, f64::INFINITY)] };
        r.records[1].error = Some("boom, with comma".into());
        let mut buf = Vec::new();
        r.write_csv(&mut buf, true).unwrap();
        assert_eq!(BenchResult::read_csv(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn spec_validation() {
        let mut spec = default_sweeps().remove(0);
        assert!(spec.validate().is_ok());
        spec.seeds = vec![1, 1];
        assert!(spec.validate().is_err());
        let mut spec = default_sweeps().remove(3);
        spec.grid.push(GridValue::Name("greedy".into()));
        assert!(spec.validate().is_err());
        let json = serde_json::to_string(&default_sweeps()).unwrap();
        assert_eq!(SweepSpec::from_json(&json).unwrap(), default_sweeps());
    }
}
