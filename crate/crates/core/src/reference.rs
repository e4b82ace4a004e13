//! Shipped reference configuration: the default causal graph and a synthetic
//! model bank whose first-visit marginals are tuned to published cohort
//! statistics. The bank is not fit to real patients.

use std::collections::BTreeMap;

use rand::Rng;

use crate::cohort::Patient;
use crate::genmodel::{BankMetadata, ConditionalModel, Encoder, ModelBank, BANK_VERSION};
use crate::graph::CausalGraph;
use crate::sim::{self, SimConfig};
use crate::{Gmm, LinearModel, LogisticModel};

pub const DEFAULT_GRAPH_JSON: &str = include_str!("../data/graph.json");
pub const REFERENCE_BANK_JSON: &str = include_str!("../data/reference_bank.json");

pub const REFERENCE_COHORT_SIZE: usize = 870;
pub const REFERENCE_COHORT_HORIZON: usize = 5;
pub const REFERENCE_COHORT_SEED: u64 = 870;
pub const REFERENCE_MISSING_RATE: f64 = 0.1;

pub fn default_graph() -> CausalGraph {
    CausalGraph::from_json(DEFAULT_GRAPH_JSON).expect("shipped graph parses")
}

/// The bank as shipped in `data/reference_bank.json`.
pub fn shipped_reference_bank() -> ModelBank {
    ModelBank::from_json(REFERENCE_BANK_JSON).expect("shipped bank parses")
}

fn linear(graph: &CausalGraph, name: &str, t: usize, coefs: &[(&str, f64)], noise_sd: f64) -> ConditionalModel {
    let features = Encoder::for_variable(graph, name, t).column_names();
    let mut coefficients = vec![0.0; features.len()];
    for (f, c) in coefs {
        let k = features.iter().position(|n| n == f).unwrap_or_else(|| panic!("{name}: no feature {f}"));
        coefficients[k] = *c;
    }
    ConditionalModel::Linear(LinearModel { features, coefficients, noise_sd, std_errors: Vec::new() })
}

/// Softmax model from per-class logits `logit_k(x) = Σ coef · feature`; the
/// logits are shifted so the first class is the reference.
fn logistic(graph: &CausalGraph, name: &str, t: usize, logits: &[Vec<(String, f64)>]) -> ConditionalModel {
    let features = Encoder::for_variable(graph, name, t).column_names();
    let levels = graph.variable(name).expect("declared").levels().expect("categorical").to_vec();
    assert_eq!(levels.len(), logits.len(), "{name}");
    let dense: Vec<Vec<f64>> = logits
        .iter()
        .map(|terms| {
            let mut w = vec![0.0; features.len()];
            for (f, c) in terms {
                let k = features.iter().position(|n| n == f).unwrap_or_else(|| panic!("{name}: no feature {f}"));
                w[k] += c;
            }
            w
        })
        .collect();
    let weights = dense[1..].iter().map(|w| w.iter().zip(&dense[0]).map(|(a, b)| a - b).collect()).collect();
    ConditionalModel::Logistic(LogisticModel { features, class_labels: levels, weights })
}

fn prior_logits(probs: &[f64]) -> Vec<Vec<(String, f64)>> {
    let total: f64 = probs.iter().sum();
    probs.iter().map(|p| vec![("intercept".to_string(), (p / total).ln())]).collect()
}

/// Sticky transitions: the previous level gets `stay` extra logit on top of
/// the marginal log-frequencies.
fn sticky_nominal(name: &str, probs: &[f64], levels: &[String], stay: f64) -> Vec<Vec<(String, f64)>> {
    let mut logits = prior_logits(probs);
    for (k, terms) in logits.iter_mut().enumerate() {
        if k == 0 {
            for l in &levels[1..] {
                terms.push((format!("{name}[t-1]={l}"), -stay));
            }
            terms.push(("intercept".into(), stay));
        } else {
            terms.push((format!("{name}[t-1]={}", levels[k]), stay));
        }
    }
    logits
}

/// Near-copy of an ordinal lag: `logit_k = -c (x_k - lag)²`, expanded into
/// intercept and lag terms (the `lag²` part is common to all classes).
fn sticky_ordinal(name: &str, values: &[f64], c: f64) -> Vec<Vec<(String, f64)>> {
    values
        .iter()
        .map(|x| vec![("intercept".to_string(), -c * x * x), (format!("{name}[t-1]"), 2.0 * c * x)])
        .collect()
}

/// Discretized normal over consecutive integer levels, tails folded into
/// the end levels.
fn discretized_normal(values: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::new(mean, sd).expect("valid normal");
    let last = values.len() - 1;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let hi = if i == last { 1.0 } else { n.cdf(v + 0.5) };
            let lo = if i == 0 { 0.0 } else { n.cdf(v - 0.5) };
            hi - lo
        })
        .collect()
}

/// Autoregressive Gaussian update that relaxes towards the baseline mean:
/// `x_t = ρ x_{t-1} + (1 - ρ)(baseline) + drift + noise`, with the noise
/// scaled so the baseline spread is kept.
fn relax(
    graph: &CausalGraph,
    name: &str,
    base: &[(&str, f64)],
    noise_sd: f64,
    rho: f64,
    drift: f64,
) -> ConditionalModel {
    let mut coefs: Vec<(&str, f64)> = base
        .iter()
        .map(|(f, c)| if *f == "intercept" { (*f, (1.0 - rho) * c + drift) } else { (*f, (1.0 - rho) * c) })
        .collect();
    let lag = format!("{name}[t-1]");
    coefs.push((&lag, rho));
    linear(graph, name, 1, &coefs, noise_sd * (1.0 - rho * rho).sqrt())
}

fn s(v: &str) -> String {
    v.to_string()
}

const GENDER: [f64; 2] = [0.458, 0.542];
const MARITAL: [f64; 5] = [0.765, 0.032, 0.112, 0.084, 0.007];
const ETHNICITY: [f64; 3] = [0.034, 0.960, 0.006];
const RACE: [f64; 7] = [0.926, 0.037, 0.015, 0.002, 0.016, 0.003, 0.002];
const APOE4: [f64; 3] = [0.556, 0.352, 0.091];

/// Builds the synthetic reference bank for the default graph.
pub fn reference_bank() -> ModelBank {
    let g = default_graph();
    let mut baseline = BTreeMap::new();
    let mut ar = BTreeMap::new();
    let levels = |n: &str| g.variable(n).unwrap().levels().unwrap().to_vec();

    baseline.insert(s("Gender"), logistic(&g, "Gender", 0, &prior_logits(&GENDER)));
    baseline.insert(s("Ethnicity"), logistic(&g, "Ethnicity", 0, &prior_logits(&ETHNICITY)));
    baseline.insert(s("Race"), logistic(&g, "Race", 0, &prior_logits(&RACE)));

    let marital = levels("Marital status");
    baseline.insert(s("Marital status"), logistic(&g, "Marital status", 0, &prior_logits(&MARITAL)));
    ar.insert(
        s("Marital status"),
        logistic(&g, "Marital status", 1, &sticky_nominal("Marital status", &MARITAL, &marital, 7.8)),
    );

    let edu_values: Vec<f64> = levels("Education").iter().map(|l| l.parse().unwrap()).collect();
    let edu = discretized_normal(&edu_values, 13.2, 2.7);
    baseline.insert(s("Education"), logistic(&g, "Education", 0, &prior_logits(&edu)));
    ar.insert(s("Education"), logistic(&g, "Education", 1, &sticky_ordinal("Education", &edu_values, 8.0)));

    baseline.insert(s("APOE4"), logistic(&g, "APOE4", 0, &prior_logits(&APOE4)));
    ar.insert(s("APOE4"), logistic(&g, "APOE4", 1, &sticky_ordinal("APOE4", &[0.0, 1.0, 2.0], 8.0)));

    let tau = [
        ("intercept", 215.0),
        ("Z=1", 120.0),
        ("Race=Asian", -20.0),
        ("Race=Black", 10.0),
        ("APOE4", 40.0),
    ];
    baseline.insert(s("Tau"), linear(&g, "Tau", 0, &tau, 104.86));
    ar.insert(s("Tau"), relax(&g, "Tau", &tau, 104.86, 0.8, 5.0));

    let ptau = [("intercept", 10.50), ("Z=1", 6.0), ("Tau", 0.05)];
    baseline.insert(s("PTau"), linear(&g, "PTau", 0, &ptau, 10.24));
    ar.insert(s("PTau"), relax(&g, "PTau", &ptau, 10.24, 0.7, 0.0));

    let fdg = [("intercept", 1.2787), ("Z=1", -0.15), ("APOE4", -0.03)];
    baseline.insert(s("FDG"), linear(&g, "FDG", 0, &fdg, 0.1848));
    ar.insert(s("FDG"), relax(&g, "FDG", &fdg, 0.1848, 0.7, -0.01));

    let av45 = [("intercept", 1.0529), ("Z=1", 0.25), ("APOE4", 0.08)];
    baseline.insert(s("AV45"), linear(&g, "AV45", 0, &av45, 0.2684));
    ar.insert(s("AV45"), relax(&g, "AV45", &av45, 0.2684, 0.8, 0.01));

    let adas = [
        ("intercept", 12.839),
        ("Z=1", 7.0),
        ("Education", -0.3),
        ("Tau", 0.02),
        ("PTau", 0.08),
        ("FDG", -8.0),
        ("AV45", 5.0),
    ];
    baseline.insert(s("ADAS13"), linear(&g, "ADAS13", 0, &adas, 4.037));
    ar.insert(s("ADAS13"), relax(&g, "ADAS13", &adas, 4.037, 0.6, 1.0));

    let diag_base = |extra: f64| {
        vec![
            vec![],
            vec![(s("intercept"), -5.077 - extra), (s("ADAS13"), 0.4)],
            vec![(s("intercept"), -10.903 - extra), (s("ADAS13"), 0.8)],
        ]
    };
    baseline.insert(s("Diagnosis"), logistic(&g, "Diagnosis", 0, &diag_base(0.0)));
    let stay = 2.0;
    let mut diag_ar = diag_base(stay);
    for (k, l) in ["MCI", "Dementia"].iter().enumerate() {
        for (m, terms) in diag_ar.iter_mut().enumerate().skip(1) {
            terms.push((format!("Diagnosis[t-1]={l}"), if m == k + 1 { 2.0 * stay } else { stay }));
        }
    }
    ar.insert(s("Diagnosis"), logistic(&g, "Diagnosis", 1, &diag_ar));

    ModelBank {
        version: BANK_VERSION,
        graph_hash: g.hash(),
        gmm: Gmm::new([0.582, 0.418], [0.060, 0.110], [0.005, 0.005]),
        baseline,
        autoregressive: ar,
        metadata: BankMetadata {
            split: "reference".into(),
            holdout_fraction: 0.0,
            seed: 0,
            n_patients: 0,
            note: Some("synthetic reference bank; marginals tuned to published first-visit cohort statistics".into()),
        },
    }
}

/// The shipped synthetic cohort: 870 patients over five yearly visits with
/// an exact subtype share of 41.8% and 10% of cells (and Aβ ratios) deleted
/// completely at random.
pub fn reference_cohort() -> Vec<Patient> {
    let g = default_graph();
    let bank = reference_bank();
    let n = REFERENCE_COHORT_SIZE;
    let config = SimConfig {
        n_patients: n,
        horizon: REFERENCE_COHORT_HORIZON,
        seed: REFERENCE_COHORT_SEED,
        ..SimConfig::default()
    };
    let n1 = (n as f64 * crate::intervene::DEFAULT_Z_PRIOR).round() as usize;
    let mut z: Vec<u8> = (0..n).map(|i| u8::from(i < n1)).collect();
    {
        use rand::seq::SliceRandom;
        z.shuffle(&mut sim::patient_rng(REFERENCE_COHORT_SEED, usize::MAX));
    }
    let ds = sim::sample_dataset_with_subtypes(&config, &bank, &g, &z).expect("reference config is valid");
    let latent = g.index_of(&g.latent).unwrap();
    let mut patients = ds.to_patients();
    let mut rng = sim::patient_rng(REFERENCE_COHORT_SEED ^ 0x5eed, usize::MAX);
    for p in &mut patients {
        for (row, ab) in p.visits.iter_mut().zip(p.abeta.iter_mut()) {
            for (j, v) in row.iter_mut().enumerate() {
                if j != latent && rng.random::<f64>() < REFERENCE_MISSING_RATE {
                    *v = f64::NAN;
                }
            }
            if rng.random::<f64>() < REFERENCE_MISSING_RATE {
                *ab = f64::NAN;
            }
        }
        p.z = None;
        for row in &mut p.visits {
            row[latent] = f64::NAN;
        }
    }
    patients
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_bank_matches_builder() {
        assert_eq!(shipped_reference_bank(), reference_bank());
    }

    #[test]
    fn bank_validates() {
        reference_bank().validate(&default_graph()).unwrap();
    }

    #[test]
    fn diagnosis_stickiness() {
        let g = default_graph();
        let bank = reference_bank();
        let c = bank.compile(&g).unwrap();
        let d = g.index_of("Diagnosis").unwrap();
        let y = g.index_of("ADAS13").unwrap();
        let m = c.autoregressive[d].as_ref().unwrap();
        let CompiledFamily::Logistic { model, .. } = &m.family else { panic!() };
        let mut cur = vec![0.0; g.variables.len()];
        cur[y] = 15.0;
        let base = c.baseline[d].as_ref().unwrap();
        let CompiledFamily::Logistic { model: m0, .. } = &base.family else { panic!() };
        let p0 = m0.probabilities(&base.encoder.row(&cur, None));
        for lag_level in 0..3 {
            let mut lag = cur.clone();
            lag[d] = lag_level as f64;
            let p = model.probabilities(&m.encoder.row(&cur, Some(&lag)));
            // odds of staying versus each other class rise by e^2
            for k in 0..3 {
                if k != lag_level {
                    let r = (p[lag_level] / p[k]) / (p0[lag_level] / p0[k]);
                    assert!((r - 2f64.exp()).abs() < 1e-9, "{lag_level} {k} {r}");
                }
            }
        }
    }

    use crate::genmodel::CompiledFamily;
}
