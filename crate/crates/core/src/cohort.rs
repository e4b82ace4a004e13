//! Longitudinal cohort ingestion, subtype labeling and graph-chained
//! imputation.
//!
//! Input CSV columns: `patient_id`, `visit`, `abeta_ratio`, then one column per
//! observed graph variable (any order). An optional `z` column carries known
//! subtypes. Empty fields are missing. Visits are 12-month steps; each
//! patient's visits are shifted to start at 0 and gaps become all-missing rows.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fitkit::{fit_gmm2, FitError};
use crate::genmodel::{compile_models, fit_baseline_complete_case, ConditionalModel, GenError};
use crate::graph::{CausalGraph, VariableKind, VariableSpec};
use crate::Gmm;

pub const PATIENT_ID: &str = "patient_id";
pub const VISIT: &str = "visit";
pub const ABETA: &str = "abeta_ratio";
pub const Z_COLUMN: &str = "z";

const MAX_SWEEPS: usize = 20;
const SWEEP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub column: Option<String>,
    pub message: String,
}

impl std::fmt::Display for RowIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.column {
            Some(c) => write!(f, "line {}, column `{c}`: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("schema mismatch: missing columns [{}], unexpected columns [{}]", .missing.join(", "), .extra.join(", "))]
    SchemaMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("{} invalid record(s):\n{}", .0.len(), .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<RowIssue>),
    #[error("baseline abeta ratio present for {0} patients, need at least 4")]
    InsufficientBaseline(usize),
    #[error("subtype mixture: {0}")]
    Fit(#[from] FitError),
    #[error("no baseline model for `{0}`, which has missing cells")]
    NoModelForVariable(String),
    #[error("patient `{0}` has no subtype label")]
    Unlabeled(String),
    #[error("empty cohort")]
    Empty,
    #[error(transparent)]
    Model(#[from] Box<GenError>),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<GenError> for CohortError {
    fn from(e: GenError) -> Self {
        Self::Model(Box::new(e))
    }
}

/// One patient's visits. Each visit row is indexed like `graph.variables`;
/// categorical cells hold the level index and `NaN` marks a missing cell. The
/// latent slot holds `z` once labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Patient {
    pub id: String,
    pub z: Option<u8>,
    pub visits: Vec<Vec<f64>>,
    pub abeta: Vec<f64>,
}

impl Patient {
    pub fn horizon(&self) -> usize {
        self.visits.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawCohort {
    pub patients: Vec<Patient>,
}

impl RawCohort {
    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn missing_cells(&self, graph: &CausalGraph) -> usize {
        let latent = graph.index_of(&graph.latent);
        self.patients
            .iter()
            .flat_map(|p| p.visits.iter())
            .map(|row| row.iter().enumerate().filter(|(j, v)| Some(*j) != latent && v.is_nan()).count())
            .sum()
    }
}

/// A fully observed cohort with subtypes attached. `mask[p][t][j]` is true
/// where cell `j` of visit `t` of patient `p` was imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCohort {
    pub patients: Vec<Patient>,
    pub mask: Vec<Vec<Vec<bool>>>,
    pub gmm: Gmm,
}

impl LabeledCohort {
    pub fn imputed_cells(&self) -> usize {
        self.mask.iter().flatten().flatten().filter(|m| **m).count()
    }
}

pub(crate) fn parse_cell(spec: &VariableSpec, raw: &str) -> Result<f64, String> {
    match &spec.kind {
        VariableKind::Continuous => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{raw}` is not a finite number")),
        },
        VariableKind::Categorical { levels, ordinal } => {
            if let Some(i) = levels.iter().position(|l| l == raw) {
                return Ok(i as f64);
            }
            if *ordinal {
                if let Ok(v) = raw.parse::<f64>() {
                    if let Some(i) = levels.iter().position(|l| l.parse::<f64>() == Ok(v)) {
                        return Ok(i as f64);
                    }
                }
            }
            Err(format!("`{raw}` is not one of [{}]", levels.join(", ")))
        }
    }
}

/// Formats a cell for CSV output; missing cells are empty.
pub fn format_cell(spec: &VariableSpec, v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    match spec.levels() {
        Some(levels) => levels[v as usize].clone(),
        None => format!("{v}"),
    }
}

pub fn ingest_path(path: impl AsRef<Path>, graph: &CausalGraph) -> Result<RawCohort, CohortError> {
    ingest(std::fs::File::open(path)?, graph)
}

pub fn ingest<R: Read>(reader: R, graph: &CausalGraph) -> Result<RawCohort, CohortError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let latent = graph.index_of(&graph.latent).expect("validated graph");

    let mut missing = Vec::new();
    let col = |name: &str| header.iter().position(|h| h == name);
    for name in [PATIENT_ID, VISIT, ABETA] {
        if col(name).is_none() {
            missing.push(name.to_string());
        }
    }
    let mut var_cols = Vec::new();
    for (j, spec) in graph.variables.iter().enumerate() {
        if j == latent {
            continue;
        }
        match col(&spec.name) {
            Some(c) => var_cols.push((j, c)),
            None => missing.push(spec.name.clone()),
        }
    }
    let z_col = col(Z_COLUMN);
    let known = |h: &str| {
        [PATIENT_ID, VISIT, ABETA, Z_COLUMN].contains(&h) || graph.observed().any(|v| v.name == h)
    };
    let extra: Vec<String> = header.iter().filter(|h| !known(h)).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CohortError::SchemaMismatch { missing, extra });
    }
    let (id_col, visit_col, abeta_col) = (col(PATIENT_ID).unwrap(), col(VISIT).unwrap(), col(ABETA).unwrap());

    struct Rec {
        line: u64,
        visit: i64,
        row: Vec<f64>,
        abeta: f64,
        z: Option<u8>,
    }
    let mut issues = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<Rec>> = HashMap::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            issues.push(RowIssue {
                line,
                column: None,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
            continue;
        }
        let id = record[id_col].trim();
        let visit = record[visit_col].trim().parse::<i64>();
        if id.is_empty() || visit.is_err() {
            issues.push(RowIssue {
                line,
                column: None,
                message: format!(
                    "row rejected: unparseable patient_id `{}` or visit `{}`",
                    &record[id_col], &record[visit_col]
                ),
            });
            continue;
        }
        let mut row = vec![f64::NAN; graph.variables.len()];
        for &(j, c) in &var_cols {
            let raw = record[c].trim();
            if raw.is_empty() {
                continue;
            }
            match parse_cell(&graph.variables[j], raw) {
                Ok(v) => row[j] = v,
                Err(message) => {
                    issues.push(RowIssue { line, column: Some(graph.variables[j].name.clone()), message })
                }
            }
        }
        let raw_ab = record[abeta_col].trim();
        let abeta = if raw_ab.is_empty() {
            f64::NAN
        } else {
            match raw_ab.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    issues.push(RowIssue {
                        line,
                        column: Some(ABETA.into()),
                        message: format!("`{raw_ab}` is not a finite number"),
                    });
                    f64::NAN
                }
            }
        };
        let z = match z_col.map(|c| record[c].trim()) {
            None | Some("") => None,
            Some("0") => Some(0),
            Some("1") => Some(1),
            Some(other) => {
                issues.push(RowIssue {
                    line,
                    column: Some(Z_COLUMN.into()),
                    message: format!("`{other}` is not 0 or 1"),
                });
                None
            }
        };
        let entry = by_id.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            Vec::new()
        });
        entry.push(Rec { line, visit: visit.unwrap(), row, abeta, z });
    }

    let mut patients = Vec::with_capacity(order.len());
    for id in order {
        let mut recs = by_id.remove(&id).expect("grouped");
        recs.sort_by_key(|r| r.visit);
        if let Some(w) = recs.windows(2).find(|w| w[0].visit == w[1].visit) {
            issues.push(RowIssue {
                line: w[1].line,
                column: None,
                message: format!("duplicate visit {} for patient `{id}`", w[1].visit),
            });
            continue;
        }
        let mut z = None;
        for r in &recs {
            match (z, r.z) {
                (Some(a), Some(b)) if a != b => issues.push(RowIssue {
                    line: r.line,
                    column: Some(Z_COLUMN.into()),
                    message: format!("subtype changes within patient `{id}`"),
                }),
                (None, Some(b)) => z = Some(b),
                _ => {}
            }
        }
        let first = recs[0].visit;
        let span = (recs.last().unwrap().visit - first) as usize + 1;
        let mut visits = vec![vec![f64::NAN; graph.variables.len()]; span];
        let mut abeta = vec![f64::NAN; span];
        for r in recs {
            let t = (r.visit - first) as usize;
            visits[t] = r.row;
            abeta[t] = r.abeta;
        }
        if let Some(zv) = z {
            for row in &mut visits {
                row[latent] = f64::from(zv);
            }
        }
        patients.push(Patient { id, z, visits, abeta });
    }
    if !issues.is_empty() {
        issues.sort_by_key(|i| i.line);
        return Err(CohortError::Invalid(issues));
    }
    if patients.is_empty() {
        return Err(CohortError::Empty);
    }
    Ok(RawCohort { patients })
}

/// Writes patients in the ingest format. Subtypes are written when every
/// patient has one.
pub fn write_csv<W: Write>(writer: W, graph: &CausalGraph, patients: &[Patient]) -> Result<(), CohortError> {
    let latent = graph.index_of(&graph.latent).expect("validated graph");
    let with_z = patients.iter().all(|p| p.z.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![PATIENT_ID.to_string(), VISIT.to_string(), ABETA.to_string()];
    header.extend(graph.observed().map(|v| v.name.clone()));
    if with_z {
        header.push(Z_COLUMN.into());
    }
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for p in patients {
        for (t, row) in p.visits.iter().enumerate() {
            rec.clear();
            rec.push(p.id.clone());
            rec.push(t.to_string());
            rec.push(if p.abeta[t].is_nan() { String::new() } else { format!("{}", p.abeta[t]) });
            for (j, spec) in graph.variables.iter().enumerate() {
                if j != latent {
                    rec.push(format_cell(spec, row[j]));
                }
            }
            if with_z {
                rec.push(p.z.unwrap().to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_path(path: impl AsRef<Path>, graph: &CausalGraph, patients: &[Patient]) -> Result<(), CohortError> {
    write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), graph, patients)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtypes {
    pub labels: Vec<u8>,
    /// Posterior of subtype 1 from the ratio used, `None` for coin-flipped
    /// patients.
    pub posterior: Vec<Option<f64>>,
    pub gmm: Gmm,
    pub log_likelihood: f64,
}

/// Fits the subtype mixture on baseline Aβ ratios and labels every patient.
///
/// Patients without a baseline ratio are labeled from their earliest observed
/// ratio; patients with none get a coin flip with the mixture weight of
/// subtype 1, drawn from a per-patient stream of `seed`.
pub fn infer_subtypes(cohort: &RawCohort, seed: u64) -> Result<Subtypes, CohortError> {
    let baseline: Vec<f64> =
        cohort.patients.iter().filter_map(|p| p.abeta.first().copied().filter(|v| v.is_finite())).collect();
    if baseline.len() < 4 {
        return Err(CohortError::InsufficientBaseline(baseline.len()));
    }
    let fit = fit_gmm2(&baseline, seed)?;
    let gmm = fit.model;
    let mut labels = Vec::with_capacity(cohort.len());
    let mut posterior = Vec::with_capacity(cohort.len());
    for (i, p) in cohort.patients.iter().enumerate() {
        match p.abeta.iter().copied().find(|v| v.is_finite()) {
            Some(r) => {
                labels.push(gmm.label(r));
                posterior.push(Some(gmm.posterior(r)));
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let u: f64 = rng.random();
                labels.push(u8::from(u < gmm.weights[1]));
                posterior.push(None);
            }
        }
    }
    Ok(Subtypes { labels, posterior, gmm, log_likelihood: fit.log_likelihood })
}

/// Attaches subtype labels, overwriting any carried in the input.
pub fn apply_labels(cohort: &mut RawCohort, graph: &CausalGraph, labels: &[u8]) {
    let latent = graph.index_of(&graph.latent).expect("validated graph");
    for (p, &z) in cohort.patients.iter_mut().zip(labels) {
        p.z = Some(z);
        for row in &mut p.visits {
            row[latent] = f64::from(z);
        }
    }
}

/// Fills every missing cell by chaining baseline models through the graph.
///
/// Missing cells start at the observed marginal mean (continuous) or mode
/// (categorical), then are repeatedly replaced, in topological order, by the
/// model's conditional mean or modal class given the current values at the
/// same visit. Sweeps stop once nothing changes by more than `1e-6` and no
/// label flips, or after 20 sweeps.
pub fn impute(
    cohort: &RawCohort,
    graph: &CausalGraph,
    baseline: &BTreeMap<String, ConditionalModel>,
    gmm: Gmm,
) -> Result<LabeledCohort, CohortError> {
    let latent = graph.index_of(&graph.latent).expect("validated graph");
    if let Some(p) = cohort.patients.iter().find(|p| p.z.is_none()) {
        return Err(CohortError::Unlabeled(p.id.clone()));
    }
    let nvars = graph.variables.len();
    let mut sums = vec![0.0; nvars];
    let mut counts = vec![0usize; nvars];
    let mut level_counts: Vec<Vec<usize>> =
        graph.variables.iter().map(|v| vec![0; v.levels().map_or(0, |l| l.len())]).collect();
    let mut has_missing = vec![false; nvars];
    for row in cohort.patients.iter().flat_map(|p| p.visits.iter()) {
        for j in 0..nvars {
            if j == latent {
                continue;
            }
            let v = row[j];
            if v.is_nan() {
                has_missing[j] = true;
            } else if graph.variables[j].is_categorical() {
                level_counts[j][v as usize] += 1;
            } else {
                sums[j] += v;
                counts[j] += 1;
            }
        }
    }
    let fill: Vec<f64> = (0..nvars)
        .map(|j| {
            if graph.variables[j].is_categorical() {
                let lc = &level_counts[j];
                let mut best = 0;
                for (k, c) in lc.iter().enumerate() {
                    if *c > lc[best] {
                        best = k;
                    }
                }
                best as f64
            } else if counts[j] > 0 {
                sums[j] / counts[j] as f64
            } else {
                0.0
            }
        })
        .collect();

    let models = compile_models(graph, baseline, 0)?;
    for j in 0..nvars {
        if has_missing[j] && models[j].is_none() {
            return Err(CohortError::NoModelForVariable(graph.variables[j].name.clone()));
        }
    }
    let order: Vec<usize> = graph
        .topological_order()
        .map_err(GenError::from)?
        .iter()
        .map(|n| graph.index_of(n).expect("declared"))
        .filter(|j| *j != latent)
        .collect();

    let (patients, mask): (Vec<Patient>, Vec<Vec<Vec<bool>>>) = cohort
        .patients
        .par_iter()
        .map(|p| {
            let mut p = p.clone();
            let mut pmask = Vec::with_capacity(p.visits.len());
            for row in &mut p.visits {
                let m: Vec<bool> = (0..nvars).map(|j| j != latent && row[j].is_nan()).collect();
                if m.iter().any(|b| *b) {
                    for j in 0..nvars {
                        if m[j] {
                            row[j] = fill[j];
                        }
                    }
                    for _ in 0..MAX_SWEEPS {
                        let mut changed = false;
                        for &j in &order {
                            if !m[j] {
                                continue;
                            }
                            let model = models[j].as_ref().expect("checked above");
                            let new = model.point(row, None);
                            let moved = if graph.variables[j].is_categorical() {
                                new != row[j]
                            } else {
                                (new - row[j]).abs() > SWEEP_TOL
                            };
                            changed |= moved;
                            row[j] = new;
                        }
                        if !changed {
                            break;
                        }
                    }
                }
                pmask.push(m);
            }
            (p, pmask)
        })
        .unzip();
    Ok(LabeledCohort { patients, mask, gmm })
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub cohort: LabeledCohort,
    pub subtypes: Subtypes,
    pub baseline: BTreeMap<String, ConditionalModel>,
}

/// Subtype inference, complete-case baseline fits and imputation.
pub fn prepare(raw: &RawCohort, graph: &CausalGraph, seed: u64) -> Result<Prepared, CohortError> {
    let subtypes = infer_subtypes(raw, seed)?;
    let mut labeled = raw.clone();
    apply_labels(&mut labeled, graph, &subtypes.labels);
    let baseline = fit_baseline_complete_case(&labeled.patients, graph)?;
    let cohort = impute(&labeled, graph, &baseline, subtypes.gmm.clone())?;
    Ok(Prepared { cohort, subtypes, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::default_graph;

    fn header(g: &CausalGraph) -> String {
        let mut h = vec![PATIENT_ID.to_string(), VISIT.into(), ABETA.into()];
        h.extend(g.observed().map(|v| v.name.clone()));
        h.join(",")
    }

    fn row(id: &str, visit: &str, abeta: &str, tau: &str) -> String {
        // Gender, Ethnicity, Race, APOE4, Education, Marital, Tau, PTau, FDG, AV45, ADAS13, Diagnosis
        format!(
            "{id},{visit},{abeta},Female,Not Hisp/Latino,White,1,16,Married,{tau},25,1.2,1.1,14,MCI"
        )
    }

    #[test]
    fn two_patients() {
        let g = default_graph();
        let csv = [header(&g), row("a", "0", "0.06", "300"), row("a", "1", "", "310"), row("b", "3", "0.11", "")]
            .join("\n");
        let c = ingest(csv.as_bytes(), &g).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.patients[0].horizon(), 2);
        assert_eq!(c.patients[1].horizon(), 1);
        let tau = g.index_of("Tau").unwrap();
        assert!(c.patients[1].visits[0][tau].is_nan());
        let edu = g.index_of("Education").unwrap();
        assert_eq!(c.patients[0].visits[0][edu], 8.0);
        assert!(c.patients[0].abeta[1].is_nan());
    }

    #[test]
    fn gaps_become_missing_rows() {
        let g = default_graph();
        let csv = [header(&g), row("a", "2", "0.06", "300"), row("a", "5", "", "310")].join("\n");
        let c = ingest(csv.as_bytes(), &g).unwrap();
        let p = &c.patients[0];
        assert_eq!(p.horizon(), 4);
        assert!(p.visits[1].iter().enumerate().all(|(j, v)| j == 0 || v.is_nan()));
        assert!(!p.visits[3][g.index_of("Tau").unwrap()].is_nan());
    }

    #[test]
    fn missing_column_is_named() {
        let g = default_graph();
        let h = header(&g).replace(",Tau,", ",");
        match ingest(h.as_bytes(), &g) {
            Err(CohortError::SchemaMismatch { missing, extra }) => {
                assert_eq!(missing, vec!["Tau"]);
                assert!(extra.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_are_collected_with_lines() {
        let g = default_graph();
        let csv = [
            header(&g),
            row("a", "0", "0.06", "abc"),
            row("a", "x", "0.06", "1"),
            row("b", "0", "0.06", "1").replace("MCI", "Severe"),
        ]
        .join("\n");
        let Err(CohortError::Invalid(issues)) = ingest(csv.as_bytes(), &g) else { panic!() };
        let lines: Vec<u64> = issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![2, 3, 4]);
        assert_eq!(issues[0].column.as_deref(), Some("Tau"));
        assert_eq!(issues[2].column.as_deref(), Some("Diagnosis"));
    }

    #[test]
    fn csv_round_trip() {
        let g = default_graph();
        let csv = [header(&g), row("a", "0", "0.06", "300.125"), row("a", "1", "", ""), row("b", "0", "0.11", "1e-3")]
            .join("\n");
        let c = ingest(csv.as_bytes(), &g).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &g, &c.patients).unwrap();
        let back = ingest(out.as_slice(), &g).unwrap();
        assert_eq!(format!("{c:?}"), format!("{back:?}"));
    }

    fn cohort_from_ratios(g: &CausalGraph, ratios: &[f64]) -> RawCohort {
        let n = g.variables.len();
        RawCohort {
            patients: ratios
                .iter()
                .enumerate()
                .map(|(i, r)| Patient { id: i.to_string(), z: None, visits: vec![vec![0.0; n]], abeta: vec![*r] })
                .collect(),
        }
    }

    #[test]
    fn subtypes_follow_clusters() {
        use rand_distr::{Distribution, Normal};
        let g = default_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (lo, hi) = (Normal::new(0.06, 0.005).unwrap(), Normal::new(0.11, 0.005).unwrap());
        let mut ratios = Vec::new();
        let mut truth = Vec::new();
        for i in 0..600 {
            let z = u8::from(i % 3 == 0);
            ratios.push(if z == 1 { hi.sample(&mut rng) } else { lo.sample(&mut rng) });
            truth.push(z);
        }
        let s = infer_subtypes(&cohort_from_ratios(&g, &ratios), 1).unwrap();
        for ((r, z), l) in ratios.iter().zip(&truth).zip(&s.labels) {
            let other = if *z == 1 { 0.06 } else { 0.11 };
            if (r - other).abs() >= 3.0 * 0.005 {
                assert_eq!(z, l);
            }
        }
        let again = infer_subtypes(&cohort_from_ratios(&g, &ratios), 1).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn equal_ratios_are_degenerate() {
        let g = default_graph();
        let r = infer_subtypes(&cohort_from_ratios(&g, &[0.1; 10]), 0);
        assert!(matches!(r, Err(CohortError::Fit(FitError::DegenerateInput(_)))));
    }

    #[test]
    fn fallback_ratios() {
        let g = default_graph();
        let mut c = cohort_from_ratios(&g, &[0.06, 0.061, 0.059, 0.11, 0.111, 0.109]);
        let n = g.variables.len();
        c.patients.push(Patient {
            id: "late".into(),
            z: None,
            visits: vec![vec![0.0; n]; 2],
            abeta: vec![f64::NAN, 0.112],
        });
        c.patients.push(Patient { id: "none".into(), z: None, visits: vec![vec![0.0; n]], abeta: vec![f64::NAN] });
        let s = infer_subtypes(&c, 5).unwrap();
        assert_eq!(s.labels[6], 1);
        assert!(s.posterior[6].is_some());
        assert!(s.posterior[7].is_none());
        assert_eq!(s.labels, infer_subtypes(&c, 5).unwrap().labels);
    }
}
