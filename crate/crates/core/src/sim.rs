//! Ancestral sampling of patient trajectories with every potential outcome.
//!
//! Each patient draws from its own ChaCha8 stream selected by the patient
//! index, so the data do not depend on scheduling or worker count.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cohort::{format_cell, Patient, ABETA};
use crate::genmodel::{CompiledBank, GenError, ModelBank};
use crate::graph::{CausalGraph, Role};
use crate::intervene::{PolicyKind, PolicySpec, SpecError};
use crate::Effect;

pub const OBSERVATIONAL_CSV: &str = "observational.csv";
pub const ORACLE_CSV: &str = "oracle.csv";
pub const COHORT_CSV: &str = "cohort.csv";
pub const PROVENANCE_JSON: &str = "provenance.json";

pub const ADAS_RANGE: (f64, f64) = (0.0, 85.0);

/// Outcomes and effects live on a grid of `2^-32` so that `y0 + Δ` and
/// `y(a) - y(0)` are exact in `f64` for any outcome below `2^20`.
const GRID: f64 = 4294967296.0;

pub fn on_grid(v: f64) -> f64 {
    (v * GRID).round() / GRID
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bank does not match graph: {0}")]
    BankGraphMismatch(#[from] GenError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("malformed export: {0}")]
    Format(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_patients: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    /// Overrides the shipped effect table; `gamma` above always applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<Effect>,
    /// Overrides the policy classes and diagnosis map; `policy` and `epsilon`
    /// above always apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_spec: Option<PolicySpec>,
    /// Multiplies the outcome model's noise. `0` gives outcomes that are a
    /// deterministic function of their parents.
    #[serde(default = "default_one")]
    pub outcome_noise_scale: f64,
    /// Clamps reported outcomes to the ADAS13 range in the observational
    /// export; the oracle keeps the unclamped values.
    #[serde(default)]
    pub clamp_adas: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_patients: 5000,
            horizon: 5,
            gamma: 2.0,
            epsilon: 0.5,
            policy: PolicyKind::Covariate,
            seed: 0,
            effect: None,
            policy_spec: None,
            outcome_noise_scale: 1.0,
            clamp_adas: false,
        }
    }
}

impl SimConfig {
    pub fn effect_spec(&self) -> Effect {
        let mut e = self.effect.clone().unwrap_or_default();
        e.gamma = self.gamma;
        e
    }

    pub fn policy_spec(&self, effect: &Effect) -> PolicySpec {
        let mut p = self.policy_spec.clone().unwrap_or_else(|| PolicySpec::new(self.policy, self.epsilon, &effect.ate));
        p.kind = self.policy;
        p.epsilon = self.epsilon;
        p
    }

    pub fn validate(&self, graph: &CausalGraph) -> Result<(Effect, PolicySpec), SimError> {
        if self.n_patients < 1 {
            return Err(SimError::Config("n_patients must be at least 1".into()));
        }
        if self.horizon < 1 {
            return Err(SimError::Config("horizon must be at least 1".into()));
        }
        if !(self.outcome_noise_scale >= 0.0 && self.outcome_noise_scale.is_finite()) {
            return Err(SimError::Config("outcome_noise_scale must be finite and non-negative".into()));
        }
        let effect = self.effect_spec();
        effect.validate()?;
        let policy = self.policy_spec(&effect);
        let levels = graph.diagnosis().levels().map(<[String]>::to_vec).unwrap_or_default();
        policy.validate(effect.n_actions(), &levels)?;
        Ok((effect, policy))
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// Full variable row in graph order (latent slot holds `z`; the outcome
    /// slot holds `y0`; the diagnosis slot holds `d`).
    pub x: Vec<f64>,
    pub abeta: f64,
    pub action: usize,
    /// `y(a)` for every action.
    pub potential: Vec<f64>,
    /// Outcome noise `ε_t` contained in `y0`.
    pub noise: f64,
}

impl Step {
    pub fn y0(&self) -> f64 {
        self.potential[0]
    }

    /// Observed outcome `y(a_t)`.
    pub fn y(&self) -> f64 {
        self.potential[self.action]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub patient_id: usize,
    pub z: u8,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: SimConfig,
    pub config_hash: String,
    pub graph_hash: String,
    pub bank_hash: String,
    pub effect: Effect,
    pub policy: PolicySpec,
    pub generator: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub effect: Effect,
    pub policy: PolicySpec,
    pub provenance: Provenance,
}

/// Samples `config.n_patients` trajectories of `config.horizon` steps.
pub fn sample_dataset(config: &SimConfig, bank: &ModelBank, graph: &CausalGraph) -> Result<Dataset, SimError> {
    sample_inner(config, bank, graph, None)
}

/// Like [`sample_dataset`] but with every patient's subtype given.
pub fn sample_dataset_with_subtypes(
    config: &SimConfig,
    bank: &ModelBank,
    graph: &CausalGraph,
    subtypes: &[u8],
) -> Result<Dataset, SimError> {
    if subtypes.len() != config.n_patients || subtypes.iter().any(|z| *z > 1) {
        return Err(SimError::Config("need one subtype in {0, 1} per patient".into()));
    }
    sample_inner(config, bank, graph, Some(subtypes))
}

fn sample_inner(
    config: &SimConfig,
    bank: &ModelBank,
    graph: &CausalGraph,
    subtypes: Option<&[u8]>,
) -> Result<Dataset, SimError> {
    let (effect, policy) = config.validate(graph)?;
    let compiled = bank.compile(graph)?;
    let trajectories: Vec<Trajectory> = (0..config.n_patients)
        .into_par_iter()
        .map(|i| sample_patient(i, subtypes.map(|z| z[i]), config, &compiled, bank, graph, &effect, &policy))
        .collect();
    let provenance = Provenance {
        config: config.clone(),
        config_hash: config.hash(),
        graph_hash: graph.hash(),
        bank_hash: sha256_hex(bank.to_json().as_bytes()),
        effect: effect.clone(),
        policy: policy.clone(),
        generator: concat!("adsim ", env!("CARGO_PKG_VERSION")).to_string(),
    };
    Ok(Dataset { trajectories, effect, policy, provenance })
}

/// Per-patient random stream: the run seed selects the key, the patient
/// index the stream.
pub fn patient_rng(seed: u64, patient: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(patient as u64);
    rng
}

#[allow(clippy::too_many_arguments)]
fn sample_patient(
    i: usize,
    forced_z: Option<u8>,
    config: &SimConfig,
    bank: &CompiledBank,
    raw: &ModelBank,
    graph: &CausalGraph,
    effect: &Effect,
    policy: &PolicySpec,
) -> Trajectory {
    let mut rng = patient_rng(config.seed, i);
    let u: f64 = rng.random();
    let z = forced_z.unwrap_or(u8::from(u < effect.z_prior));
    let zi = usize::from(z);
    let deltas: Vec<f64> = (0..effect.n_actions()).map(|a| on_grid(effect.delta(a, z))).collect();
    let diag_levels = graph.diagnosis().levels().expect("diagnosis is categorical");
    let nvars = graph.variables.len();
    let mut steps: Vec<Step> = Vec::with_capacity(config.horizon);
    let mut prev_d: Option<usize> = None;
    for t in 0..config.horizon {
        let e: f64 = rng.sample(StandardNormal);
        let abeta = raw.gmm.means[zi] + raw.gmm.sds[zi] * e;
        let mut x = vec![f64::NAN; nvars];
        x[bank.latent] = f64::from(z);
        let lag = steps.last().map(|s| s.x.as_slice());
        let mut noise = 0.0;
        for &j in &bank.order {
            if t > 0 && !bank.dynamic[j] {
                x[j] = lag.expect("t > 0")[j];
                continue;
            }
            let model = if t == 0 { &bank.baseline[j] } else { &bank.autoregressive[j] };
            let model = model.as_ref().expect("validated bank");
            x[j] = if j == bank.outcome {
                let mean = model.point(&x, lag);
                let e: f64 = rng.sample(StandardNormal);
                noise = config.outcome_noise_scale * model.noise_sd().unwrap_or(0.0) * e;
                on_grid(mean + noise)
            } else {
                model.sample(&x, lag, &mut rng)
            };
        }
        let d_now = x[bank.diagnosis] as usize;
        let d_policy = prev_d.unwrap_or(d_now);
        let action = policy.choose_action(effect.n_actions(), &diag_levels[d_policy], &mut rng);
        let y0 = x[bank.outcome];
        let potential = deltas.iter().map(|d| y0 + d).collect();
        steps.push(Step { x, abeta, action, potential, noise });
        prev_d = Some(d_now);
    }
    Trajectory { patient_id: i, z, steps }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.steps.len())
    }

    /// Patients in the cohort ingest format, with subtypes.
    pub fn to_patients(&self) -> Vec<Patient> {
        self.trajectories
            .iter()
            .map(|tr| Patient {
                id: tr.patient_id.to_string(),
                z: Some(tr.z),
                visits: tr.steps.iter().map(|s| s.x.clone()).collect(),
                abeta: tr.steps.iter().map(|s| s.abeta).collect(),
            })
            .collect()
    }

    /// The simulated effect `Δ(a, z)`, i.e. the effect table's value on the
    /// outcome grid.
    pub fn delta(&self, a: usize, z: u8) -> f64 {
        on_grid(self.effect.delta(a, z))
    }

    /// Checks the consistency and effect identities on every step.
    pub fn check_identities(&self) -> Result<(), String> {
        for tr in &self.trajectories {
            for (t, s) in tr.steps.iter().enumerate() {
                for a in 0..s.potential.len() {
                    if s.potential[a] - s.y0() != self.delta(a, tr.z) {
                        return Err(format!("patient {} step {t}: y({a}) - y(0) != delta", tr.patient_id));
                    }
                }
                if s.y() != s.potential[s.action] {
                    return Err(format!("patient {} step {t}: y != y(a)", tr.patient_id));
                }
            }
        }
        Ok(())
    }
}

/// Covariate columns of the observational export: observed covariates in
/// graph order (outcome and diagnosis are exported as `y` and `d`).
pub fn covariate_indices(graph: &CausalGraph) -> Vec<usize> {
    graph.variables.iter().enumerate().filter(|(_, v)| v.role == Role::Covariate).map(|(j, _)| j).collect()
}

pub fn oracle_columns(k: usize) -> Vec<String> {
    let mut cols: Vec<String> = (0..k).map(|a| format!("y{a}")).collect();
    cols.extend((0..k).map(|a| format!("delta{a}")));
    cols
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportMode {
    Observational,
    Oracle,
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes one CSV. Column order: `patient_id, t, <covariates>, z, d, a, y`;
/// the oracle adds `abeta_ratio, noise, y0..y{k-1}, delta0..delta{k-1}`.
pub fn write_export<W: Write>(
    writer: W,
    dataset: &Dataset,
    graph: &CausalGraph,
    mode: ExportMode,
    clamp: bool,
) -> Result<(), SimError> {
    let cov = covariate_indices(graph);
    let diag = graph.index_of(&graph.diagnosis().name).expect("validated");
    let diag_spec = graph.diagnosis();
    let k = dataset.effect.n_actions();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = vec!["patient_id".into(), "t".into()];
    header.extend(cov.iter().map(|j| graph.variables[*j].name.clone()));
    header.extend(["z", "d", "a", "y"].map(String::from));
    if mode == ExportMode::Oracle {
        header.extend([ABETA, "noise"].map(String::from));
        header.extend(oracle_columns(k));
    }
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for tr in &dataset.trajectories {
        for (t, s) in tr.steps.iter().enumerate() {
            rec.clear();
            rec.push(tr.patient_id.to_string());
            rec.push(t.to_string());
            rec.extend(cov.iter().map(|j| format_cell(&graph.variables[*j], s.x[*j])));
            rec.push(tr.z.to_string());
            rec.push(format_cell(diag_spec, s.x[diag]));
            rec.push(s.action.to_string());
            let y = if clamp && mode == ExportMode::Observational {
                s.y().clamp(ADAS_RANGE.0, ADAS_RANGE.1)
            } else {
                s.y()
            };
            rec.push(num(y));
            if mode == ExportMode::Oracle {
                rec.push(num(s.abeta));
                rec.push(num(s.noise));
                rec.extend(s.potential.iter().map(|v| num(*v)));
                rec.extend((0..k).map(|a| num(dataset.delta(a, tr.z))));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `observational.csv`, `oracle.csv`, `cohort.csv` and
/// `provenance.json` into `dir`.
pub fn export_dir(dataset: &Dataset, graph: &CausalGraph, dir: impl AsRef<Path>) -> Result<(), SimError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let clamp = dataset.provenance.config.clamp_adas;
    let open = |name: &str| -> Result<_, SimError> { Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?)) };
    write_export(open(OBSERVATIONAL_CSV)?, dataset, graph, ExportMode::Observational, clamp)?;
    write_export(open(ORACLE_CSV)?, dataset, graph, ExportMode::Oracle, clamp)?;
    crate::cohort::write_csv(open(COHORT_CSV)?, graph, &dataset.to_patients())
        .map_err(|e| SimError::Format(e.to_string()))?;
    let mut prov = serde_json::to_string_pretty(&dataset.provenance)?;
    prov.push('\n');
    std::fs::write(dir.join(PROVENANCE_JSON), prov)?;
    Ok(())
}

/// Rebuilds trajectories from an oracle export.
pub fn read_oracle<R: Read>(reader: R, graph: &CausalGraph) -> Result<Vec<Trajectory>, SimError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| SimError::Format(format!("missing column `{name}`")))
    };
    let k = header.iter().filter(|h| h.starts_with('y') && h[1..].parse::<usize>().is_ok()).count();
    let (pid, tcol, zcol, dcol, acol) = (col("patient_id")?, col("t")?, col("z")?, col("d")?, col("a")?);
    let (abcol, ncol) = (col(ABETA)?, col("noise")?);
    let ycols: Vec<usize> = (0..k).map(|a| col(&format!("y{a}"))).collect::<Result<_, _>>()?;
    let cov: Vec<(usize, usize)> = covariate_indices(graph)
        .into_iter()
        .map(|j| col(&graph.variables[j].name).map(|c| (j, c)))
        .collect::<Result<_, _>>()?;
    let latent = graph.index_of(&graph.latent).expect("validated");
    let outcome = graph.index_of(&graph.outcome().name).expect("validated");
    let diag = graph.index_of(&graph.diagnosis().name).expect("validated");
    let bad = |what: &str, v: &str| SimError::Format(format!("bad {what} `{v}`"));
    let parse = |v: &str| v.parse::<f64>().map_err(|_| bad("number", v));
    let cell = |j: usize, v: &str| -> Result<f64, SimError> {
        match graph.variables[j].level_index(v) {
            Some(i) => Ok(i as f64),
            None if !graph.variables[j].is_categorical() => parse(v),
            None => Err(bad("level", v)),
        }
    };
    let mut out: Vec<Trajectory> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id: usize = rec[pid].parse().map_err(|_| bad("patient_id", &rec[pid]))?;
        let t: usize = rec[tcol].parse().map_err(|_| bad("t", &rec[tcol]))?;
        let z: u8 = rec[zcol].parse().map_err(|_| bad("z", &rec[zcol]))?;
        let mut x = vec![f64::NAN; graph.variables.len()];
        for &(j, c) in &cov {
            x[j] = cell(j, &rec[c])?;
        }
        x[latent] = f64::from(z);
        x[diag] = cell(diag, &rec[dcol])?;
        let potential: Vec<f64> = ycols.iter().map(|c| parse(&rec[*c])).collect::<Result<_, _>>()?;
        x[outcome] = potential[0];
        let step = Step {
            x,
            abeta: parse(&rec[abcol])?,
            action: rec[acol].parse().map_err(|_| bad("a", &rec[acol]))?,
            potential,
            noise: parse(&rec[ncol])?,
        };
        match out.last_mut() {
            Some(tr) if tr.patient_id == id && tr.steps.len() == t => tr.steps.push(step),
            _ if t == 0 => out.push(Trajectory { patient_id: id, z, steps: vec![step] }),
            _ => return Err(SimError::Format(format!("rows of patient {id} are out of order"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn small(seed: u64) -> (SimConfig, ModelBank, CausalGraph) {
        let cfg = SimConfig { n_patients: 50, horizon: 3, seed, ..SimConfig::default() };
        (cfg, reference::reference_bank(), reference::default_graph())
    }

    #[test]
    fn identities_hold() {
        let (cfg, bank, g) = small(1);
        let ds = sample_dataset(&cfg, &bank, &g).unwrap();
        ds.check_identities().unwrap();
        assert_eq!(ds.len(), 50);
        assert!(ds.trajectories.iter().all(|t| t.steps.len() == 3));
    }

    #[test]
    fn gamma_one_gives_ate() {
        let g = reference::default_graph();
        let cfg = SimConfig { n_patients: 1, horizon: 1, gamma: 1.0, epsilon: 1.0, seed: 9, ..SimConfig::default() };
        let ds = sample_dataset(&cfg, &reference::reference_bank(), &g).unwrap();
        let s = &ds.trajectories[0].steps[0];
        for (a, tau) in crate::intervene::DEFAULT_ATE.iter().enumerate() {
            assert_eq!(s.potential[a] - s.y0(), on_grid(*tau));
            assert!((s.potential[a] - s.y0() - tau).abs() < 1e-9);
        }
    }

    #[test]
    fn static_variables_are_constant() {
        let (cfg, bank, g) = small(2);
        let ds = sample_dataset(&cfg, &bank, &g).unwrap();
        let statics: Vec<usize> = (0..g.variables.len()).filter(|j| !g.variables[*j].is_dynamic()).collect();
        for tr in &ds.trajectories {
            for s in &tr.steps {
                for &j in &statics {
                    assert_eq!(s.x[j], tr.steps[0].x[j]);
                }
            }
        }
    }

    #[test]
    fn oracle_round_trip() {
        let (cfg, bank, g) = small(3);
        let ds = sample_dataset(&cfg, &bank, &g).unwrap();
        let mut buf = Vec::new();
        write_export(&mut buf, &ds, &g, ExportMode::Oracle, false).unwrap();
        let back = read_oracle(buf.as_slice(), &g).unwrap();
        assert_eq!(back, ds.trajectories);
    }

    #[test]
    fn observational_hides_oracle_columns() {
        let (cfg, bank, g) = small(4);
        let ds = sample_dataset(&cfg, &bank, &g).unwrap();
        let mut buf = Vec::new();
        write_export(&mut buf, &ds, &g, ExportMode::Observational, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        for c in oracle_columns(8) {
            assert!(!header.contains(&c.as_str()), "{c}");
        }
        assert!(!header.contains(&"ADAS13"));
        assert_eq!(text.lines().count(), 50 * 3 + 1);
    }

    #[test]
    fn clamping_only_touches_observational_y() {
        let g = reference::default_graph();
        let cfg = SimConfig { n_patients: 300, horizon: 2, clamp_adas: true, seed: 5, ..SimConfig::default() };
        let ds = sample_dataset(&cfg, &reference::reference_bank(), &g).unwrap();
        let mut obs = Vec::new();
        write_export(&mut obs, &ds, &g, ExportMode::Observational, true).unwrap();
        let mut rdr = csv::Reader::from_reader(obs.as_slice());
        let yi = rdr.headers().unwrap().iter().position(|h| h == "y").unwrap();
        for r in rdr.records() {
            let y: f64 = r.unwrap()[yi].parse().unwrap();
            assert!((0.0..=85.0).contains(&y));
        }
        ds.check_identities().unwrap();
    }

    #[test]
    fn patient_streams_are_independent_of_population_size() {
        let (cfg, bank, g) = small(6);
        let a = sample_dataset(&cfg, &bank, &g).unwrap();
        let b = sample_dataset(&SimConfig { n_patients: 20, ..cfg }, &bank, &g).unwrap();
        assert_eq!(&a.trajectories[..20], &b.trajectories[..]);
    }
}
