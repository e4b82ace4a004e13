use std::io::Read;

use super::EstimError;
use crate::cohort::parse_cell;
use crate::genmodel::Encoder;
use crate::graph::{CausalGraph, ParentRef, UnrolledParents};
use crate::sim::{covariate_indices, Dataset, Trajectory};

/// Column names that only the oracle export may carry.
fn is_oracle_column(name: &str) -> bool {
    let indexed = |prefix: &str| name.strip_prefix(prefix).is_some_and(|r| !r.is_empty() && r.bytes().all(|b| b.is_ascii_digit()));
    indexed("y") || indexed("delta") || name == "noise" || name == crate::cohort::ABETA
}

/// Rejects a header that exposes potential outcomes, effects or noise.
pub fn check_schema<S: AsRef<str>>(header: &[S]) -> Result<(), EstimError> {
    let leaked: Vec<String> =
        header.iter().map(AsRef::as_ref).filter(|h| is_oracle_column(h)).map(String::from).collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(EstimError::Leakage(leaked))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObsStep {
    /// Graph-indexed row; only covariate slots are meaningful.
    pub x: Vec<f64>,
    pub z: u8,
    /// Diagnosis level index.
    pub d: usize,
    pub a: usize,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObsUnit {
    pub patient_id: usize,
    pub steps: Vec<ObsStep>,
}

/// What an estimator may see: covariates, subtype, diagnosis, action and the
/// observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Observational {
    pub units: Vec<ObsUnit>,
    pub n_actions: usize,
}

impl Observational {
    pub fn from_dataset(ds: &Dataset, graph: &CausalGraph) -> Self {
        let diag = graph.index_of(&graph.diagnosis().name).expect("validated");
        let clamp = ds.provenance.config.clamp_adas;
        let units = ds
            .trajectories
            .iter()
            .map(|tr| ObsUnit {
                patient_id: tr.patient_id,
                steps: tr
                    .steps
                    .iter()
                    .map(|s| {
                        let y = if clamp { s.y().clamp(crate::sim::ADAS_RANGE.0, crate::sim::ADAS_RANGE.1) } else { s.y() };
                        ObsStep { x: s.x.clone(), z: tr.z, d: s.x[diag] as usize, a: s.action, y }
                    })
                    .collect(),
            })
            .collect();
        Self { units, n_actions: ds.effect.n_actions() }
    }

    /// Reads an observational export. Fails on any oracle-only column.
    pub fn read_csv<R: Read>(reader: R, graph: &CausalGraph, n_actions: usize) -> Result<Self, EstimError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        check_schema(&header)?;
        let col = |name: &str| {
            header.iter().position(|h| h == name).ok_or_else(|| EstimError::Format(format!("missing column `{name}`")))
        };
        let (pid, tcol, zcol, dcol, acol, ycol) = (col("patient_id")?, col("t")?, col("z")?, col("d")?, col("a")?, col("y")?);
        let cov: Vec<(usize, usize)> = covariate_indices(graph)
            .into_iter()
            .map(|j| col(&graph.variables[j].name).map(|c| (j, c)))
            .collect::<Result<_, _>>()?;
        let diag = graph.diagnosis();
        let bad = |line: u64, what: &str, v: &str| EstimError::Format(format!("line {line}: bad {what} `{v}`"));
        let mut units: Vec<ObsUnit> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let id: usize = rec[pid].parse().map_err(|_| bad(line, "patient_id", &rec[pid]))?;
            let t: usize = rec[tcol].parse().map_err(|_| bad(line, "t", &rec[tcol]))?;
            let z: u8 = match &rec[zcol] {
                "0" => 0,
                "1" => 1,
                v => return Err(bad(line, "z", v)),
            };
            let mut x = vec![f64::NAN; graph.variables.len()];
            for &(j, c) in &cov {
                x[j] = parse_cell(&graph.variables[j], &rec[c]).map_err(|m| bad(line, &graph.variables[j].name, &m))?;
            }
            let d = parse_cell(diag, &rec[dcol]).map_err(|m| bad(line, "d", &m))? as usize;
            let a: usize = rec[acol].parse().map_err(|_| bad(line, "a", &rec[acol]))?;
            if a >= n_actions {
                return Err(bad(line, "a", &rec[acol]));
            }
            let y: f64 = rec[ycol].parse().map_err(|_| bad(line, "y", &rec[ycol]))?;
            let step = ObsStep { x, z, d, a, y };
            match units.last_mut() {
                Some(u) if u.patient_id == id && u.steps.len() == t => u.steps.push(step),
                _ if t == 0 => units.push(ObsUnit { patient_id: id, steps: vec![step] }),
                _ => return Err(EstimError::Format(format!("line {line}: rows of patient {id} are out of order"))),
            }
        }
        if units.is_empty() {
            return Err(EstimError::InsufficientData("no rows".into()));
        }
        Ok(Self { units, n_actions })
    }

    /// Steps common to every unit.
    pub fn horizon(&self) -> usize {
        self.units.iter().map(|u| u.steps.len()).min().unwrap_or(0)
    }

    fn check_step(&self, t_s: usize) -> Result<(), EstimError> {
        let horizon = self.horizon();
        if t_s >= horizon {
            return Err(EstimError::BadStep { t_s, horizon });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewOptions {
    pub t_s: usize,
    /// Expose the subtype as a feature.
    pub include_z: bool,
}

impl Default for ViewOptions {
    fn default() -> Self {
        Self { t_s: 0, include_z: true }
    }
}

struct StepEncoder {
    covariates: Encoder,
    include_z: bool,
    diag_levels: usize,
    names: Vec<String>,
}

impl StepEncoder {
    fn new(graph: &CausalGraph, include_z: bool) -> Self {
        let parents = UnrolledParents {
            child: String::new(),
            time: 0,
            parents: covariate_indices(graph)
                .into_iter()
                .map(|j| ParentRef { name: graph.variables[j].name.clone(), offset: 0 })
                .collect(),
        };
        let covariates = Encoder::new(graph, &parents);
        let diag = graph.diagnosis();
        let levels = diag.levels().expect("diagnosis is categorical");
        let mut names = covariates.feature_names().to_vec();
        if include_z {
            names.push(format!("{}=1", graph.latent));
        }
        names.extend(levels[1..].iter().map(|l| format!("d_prev={l}")));
        Self { covariates, include_z, diag_levels: levels.len(), names }
    }

    /// Features of step `t`: covariates, subtype, and the diagnosis that
    /// drove the action (`d_{t-1}`, or `d_0` at the first step).
    fn encode(&self, unit: &ObsUnit, t: usize, out: &mut Vec<f64>) {
        let s = &unit.steps[t];
        self.covariates.encode_into(&s.x, None, out);
        if self.include_z {
            out.push(f64::from(s.z));
        }
        let d_prev = unit.steps[t.saturating_sub(1)].d;
        out.extend((1..self.diag_levels).map(|k| if k == d_prev { 1.0 } else { 0.0 }));
    }
}

/// Per-step design for single-step learners. Training pools steps
/// `0..=t_s`; evaluation units are the patients at `t_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView {
    pub names: Vec<String>,
    pub n_actions: usize,
    pub train_x: Vec<Vec<f64>>,
    pub train_a: Vec<usize>,
    pub train_y: Vec<f64>,
    pub units: Vec<usize>,
    pub eval_x: Vec<Vec<f64>>,
    pub eval_a: Vec<usize>,
    pub eval_y: Vec<f64>,
}

impl FeatureView {
    pub fn build(obs: &Observational, graph: &CausalGraph, opts: ViewOptions) -> Result<Self, EstimError> {
        obs.check_step(opts.t_s)?;
        let enc = StepEncoder::new(graph, opts.include_z);
        let mut v = Self {
            names: enc.names.clone(),
            n_actions: obs.n_actions,
            train_x: Vec::new(),
            train_a: Vec::new(),
            train_y: Vec::new(),
            units: Vec::new(),
            eval_x: Vec::new(),
            eval_a: Vec::new(),
            eval_y: Vec::new(),
        };
        for u in &obs.units {
            for t in 0..=opts.t_s {
                let mut row = Vec::with_capacity(v.names.len());
                enc.encode(u, t, &mut row);
                let s = &u.steps[t];
                if t == opts.t_s {
                    v.units.push(u.patient_id);
                    v.eval_x.push(row.clone());
                    v.eval_a.push(s.a);
                    v.eval_y.push(s.y);
                }
                v.train_x.push(row);
                v.train_a.push(s.a);
                v.train_y.push(s.y);
            }
        }
        Ok(v)
    }
}

/// Histories `X_0..X_{t_s}` per patient, each step extended by the previous
/// observed outcome (zero at the first step).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceView {
    pub names: Vec<String>,
    pub n_actions: usize,
    pub units: Vec<usize>,
    pub sequences: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<usize>,
    pub outcomes: Vec<f64>,
}

impl SequenceView {
    pub fn build(obs: &Observational, graph: &CausalGraph, opts: ViewOptions) -> Result<Self, EstimError> {
        obs.check_step(opts.t_s)?;
        let enc = StepEncoder::new(graph, opts.include_z);
        let mut names = enc.names.clone();
        names.push("y_prev".into());
        let mut v = Self {
            names,
            n_actions: obs.n_actions,
            units: Vec::new(),
            sequences: Vec::new(),
            actions: Vec::new(),
            outcomes: Vec::new(),
        };
        for u in &obs.units {
            let seq = (0..=opts.t_s)
                .map(|t| {
                    let mut row = Vec::with_capacity(v.names.len());
                    enc.encode(u, t, &mut row);
                    row.push(if t == 0 { 0.0 } else { u.steps[t - 1].y });
                    row
                })
                .collect();
            let s = &u.steps[opts.t_s];
            v.units.push(u.patient_id);
            v.sequences.push(seq);
            v.actions.push(s.a);
            v.outcomes.push(s.y);
        }
        Ok(v)
    }
}

/// True effects `Δ(a, z_i)` of each evaluation unit.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTruth {
    pub units: Vec<usize>,
    /// `delta[i][a]`.
    pub delta: Vec<Vec<f64>>,
}

impl OracleTruth {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            units: ds.trajectories.iter().map(|t| t.patient_id).collect(),
            delta: ds
                .trajectories
                .iter()
                .map(|t| (0..ds.effect.n_actions()).map(|a| ds.delta(a, t.z)).collect())
                .collect(),
        }
    }

    /// Effects at step `t_s` recovered from the oracle's potential outcomes.
    pub fn from_trajectories(trajectories: &[Trajectory], t_s: usize) -> Result<Self, EstimError> {
        let mut units = Vec::with_capacity(trajectories.len());
        let mut delta = Vec::with_capacity(trajectories.len());
        for tr in trajectories {
            let s = tr.steps.get(t_s).ok_or(EstimError::BadStep { t_s, horizon: tr.steps.len() })?;
            units.push(tr.patient_id);
            delta.push(s.potential.iter().map(|y| y - s.y0()).collect());
        }
        Ok(Self { units, delta })
    }

    /// Effect rows in the order of `units`.
    pub(super) fn align(&self, units: &[usize]) -> Result<Vec<&[f64]>, EstimError> {
        if units.len() != self.units.len() {
            return Err(EstimError::UnitMismatch);
        }
        let index: std::collections::HashMap<usize, usize> =
            self.units.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        units
            .iter()
            .map(|u| index.get(u).map(|i| self.delta[*i].as_slice()).ok_or(EstimError::UnitMismatch))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leakage_guard() {
        assert!(check_schema(&["patient_id", "t", "Tau", "z", "d", "a", "y"]).is_ok());
        for bad in ["y0", "y7", "delta3", "noise", "abeta_ratio"] {
            match check_schema(&["patient_id", "y", bad]) {
                Err(EstimError::Leakage(cols)) => assert_eq!(cols, vec![bad.to_string()]),
                other => panic!("{bad}: {other:?}"),
            }
        }
        assert!(check_schema(&["year", "y_prev", "deltaX"]).is_ok());
    }
}
