//! Reference CATE estimators on observational exports, and scoring against
//! oracle ground truth.

mod learners;
mod rnn;
mod view;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitkit::FitError;
use crate::intervene::EffectSpec;

pub use learners::{difference_in_means, s_learner, t_learner, DiffInMeans};
pub use rnn::{seq_t_learner, RecurrentRegressor, RnnOptions};
pub use view::{
    check_schema, FeatureView, ObsStep, ObsUnit, Observational, OracleTruth, SequenceView, ViewOptions,
};

#[derive(Debug, Error)]
pub enum EstimError {
    #[error("oracle-only columns present in the estimator input: {}", .0.join(", "))]
    Leakage(Vec<String>),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("arms without enough samples: {0:?}")]
    ArmStarved(Vec<usize>),
    #[error("training loss became non-finite at epoch {epoch} (arm {arm})")]
    DivergedLoss { arm: usize, epoch: usize },
    #[error("estimate and oracle cover different units")]
    UnitMismatch,
    #[error("evaluation step {t_s} is outside the {horizon} observed steps")]
    BadStep { t_s: usize, horizon: usize },
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    S,
    T,
    SeqT,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::S => "s",
            Self::T => "t",
            Self::SeqT => "seq_t",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" => Ok(Self::S),
            "t" => Ok(Self::T),
            "seq_t" => Ok(Self::SeqT),
            other => Err(format!("unknown estimator `{other}` (expected s, t or seq_t)")),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-unit effect predictions `τ̂(a | x_i)` for the estimated arms.
#[derive(Debug, Clone, PartialEq)]
pub struct CateEstimate {
    pub units: Vec<usize>,
    pub n_actions: usize,
    /// Arms (actions ≥ 1) with estimates, ascending.
    pub arms: Vec<usize>,
    /// `tau_hat[k][i]` for arm `arms[k]` and unit `units[i]`.
    pub tau_hat: Vec<Vec<f64>>,
    /// Arms the estimator could not fit.
    pub skipped: Vec<usize>,
}

impl CateEstimate {
    /// `τ̂(a)` as the mean of the unit-level predictions.
    pub fn ate(&self) -> Vec<(usize, f64)> {
        self.arms
            .iter()
            .zip(&self.tau_hat)
            .map(|(a, v)| (*a, v.iter().sum::<f64>() / v.len().max(1) as f64))
            .collect()
    }

    /// The plug-in estimate that predicts `τ(a)` for every unit.
    pub fn constant(units: Vec<usize>, values: &[f64]) -> Self {
        let n = units.len();
        Self {
            units,
            n_actions: values.len(),
            arms: (1..values.len()).collect(),
            tau_hat: values[1..].iter().map(|v| vec![*v; n]).collect(),
            skipped: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeheReport {
    pub per_arm: Vec<(usize, f64)>,
    /// Mean over the estimated arms.
    pub macro_pehe: f64,
    pub skipped: Vec<usize>,
}

/// `PEHE(a) = sqrt(mean_i (τ̂(a|x_i) - Δ(a, z_i))²)` per arm and its mean.
pub fn pehe(estimate: &CateEstimate, oracle: &OracleTruth) -> Result<PeheReport, EstimError> {
    let aligned = oracle.align(&estimate.units)?;
    let mut per_arm = Vec::with_capacity(estimate.arms.len());
    for (a, pred) in estimate.arms.iter().zip(&estimate.tau_hat) {
        let n = pred.len() as f64;
        let mse = pred.iter().zip(&aligned).map(|(p, d)| (p - d[*a]).powi(2)).sum::<f64>() / n;
        per_arm.push((*a, mse.sqrt()));
    }
    let macro_pehe = if per_arm.is_empty() {
        f64::INFINITY
    } else {
        per_arm.iter().map(|(_, v)| v).sum::<f64>() / per_arm.len() as f64
    };
    Ok(PeheReport { per_arm, macro_pehe, skipped: estimate.skipped.clone() })
}

/// `|τ̂(a) - τ(a)|` per estimated arm.
pub fn ate_error(estimate: &CateEstimate, effect: &EffectSpec<f64>) -> Vec<(usize, f64)> {
    estimate.ate().into_iter().map(|(a, v)| (a, (v - effect.ate[a]).abs())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub estimator: String,
    pub action: usize,
    pub pehe: f64,
    pub ate_error: f64,
    pub n: usize,
}

/// Per-arm score rows; skipped arms get infinite errors.
pub fn score(
    name: &str,
    estimate: &CateEstimate,
    oracle: &OracleTruth,
    effect: &EffectSpec<f64>,
) -> Result<Vec<Score>, EstimError> {
    let p = pehe(estimate, oracle)?;
    let errs = ate_error(estimate, effect);
    let mut rows = Vec::new();
    for a in 1..estimate.n_actions {
        let pe = p.per_arm.iter().find(|(b, _)| *b == a).map_or(f64::INFINITY, |x| x.1);
        let ae = errs.iter().find(|(b, _)| *b == a).map_or(f64::INFINITY, |x| x.1);
        rows.push(Score { estimator: name.to_string(), action: a, pehe: pe, ate_error: ae, n: estimate.units.len() });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(z: &[u8], effect: &EffectSpec<f64>) -> OracleTruth {
        OracleTruth {
            units: (0..z.len()).collect(),
            delta: z.iter().map(|z| (0..effect.n_actions()).map(|a| effect.delta(a, *z)).collect()).collect(),
        }
    }

    #[test]
    fn exact_estimate_scores_zero() {
        let e = EffectSpec::default();
        let z = [0, 1, 1, 0, 1];
        let o = oracle(&z, &e);
        let est = CateEstimate {
            units: o.units.clone(),
            n_actions: 8,
            arms: (1..8).collect(),
            tau_hat: (1..8).map(|a| z.iter().map(|z| e.delta(a, *z)).collect()).collect(),
            skipped: vec![],
        };
        let p = pehe(&est, &o).unwrap();
        assert!(p.per_arm.iter().all(|(_, v)| *v == 0.0));
        let mut shifted = est.clone();
        shifted.tau_hat.iter_mut().flatten().for_each(|v| *v += 1.0);
        let p = pehe(&shifted, &o).unwrap();
        assert!(p.per_arm.iter().all(|(_, v)| (*v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pehe_is_order_invariant() {
        let e = EffectSpec::default();
        let z = [0, 1, 1, 0, 1, 0];
        let o = oracle(&z, &e);
        let est = CateEstimate::constant(o.units.clone(), &e.ate);
        let mut rev = est.clone();
        rev.units.reverse();
        let a = pehe(&est, &o).unwrap();
        let b = pehe(&rev, &o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plug_in_pehe_is_two_point_sd() {
        // Brute force over an exact population of 418 subtype-1 and 582
        // subtype-0 units.
        let e = EffectSpec::default();
        let z: Vec<u8> = (0..1000).map(|i| u8::from(i < 418)).collect();
        let o = oracle(&z, &e);
        let p = pehe(&CateEstimate::constant(o.units.clone(), &e.ate), &o).unwrap();
        let (hi, lo) = e.high_low(1);
        let analytic = (hi - lo).abs() * (0.418f64 * 0.582).sqrt();
        assert!((p.per_arm[0].1 - analytic).abs() < 1e-12);
        assert!((p.per_arm[0].1 - 0.6783).abs() < 1e-4);
    }

    #[test]
    fn unit_mismatch() {
        let e = EffectSpec::default();
        let o = oracle(&[0, 1], &e);
        let est = CateEstimate::constant(vec![0, 7], &e.ate);
        assert!(matches!(pehe(&est, &o), Err(EstimError::UnitMismatch)));
    }

    #[test]
    fn ate_error_of_plug_in_is_zero() {
        let e = EffectSpec::default();
        let est = CateEstimate::constant(vec![0, 1, 2], &e.ate);
        assert!(ate_error(&est, &e).iter().all(|(_, v)| *v < 1e-12));
    }
}
