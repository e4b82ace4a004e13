use rayon::prelude::*;

use super::{CateEstimate, EstimError, FeatureView};
use crate::fitkit::{fit_linear, DesignMatrix, LinearGaussianModel};

fn fit(names: &[String], rows: &[Vec<f64>], y: &[f64]) -> Result<LinearGaussianModel<f64>, EstimError> {
    let design = DesignMatrix::new(names.to_vec(), rows)?;
    Ok(fit_linear(&design, y)?)
}

fn predict(model: &LinearGaussianModel<f64>, x: &[f64]) -> f64 {
    model.coefficients[0] + model.coefficients[1..].iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
}

fn arm_counts(view: &FeatureView) -> Vec<usize> {
    let mut n = vec![0; view.n_actions];
    for a in &view.train_a {
        n[*a] += 1;
    }
    n
}

/// Single linear model on `[x, onehot(a)]`; `τ̂(a | x)` is the action
/// coefficient. Arms never observed in training are skipped.
pub fn s_learner(view: &FeatureView) -> Result<CateEstimate, EstimError> {
    let counts = arm_counts(view);
    if counts[0] == 0 {
        return Err(EstimError::ArmStarved(vec![0]));
    }
    let arms: Vec<usize> = (1..view.n_actions).filter(|a| counts[*a] > 0).collect();
    let skipped: Vec<usize> = (1..view.n_actions).filter(|a| counts[*a] == 0).collect();
    if arms.is_empty() {
        return Err(EstimError::ArmStarved(skipped));
    }
    let mut names = view.names.clone();
    names.extend(arms.iter().map(|a| format!("a={a}")));
    let p = view.names.len();
    let rows: Vec<Vec<f64>> = view
        .train_x
        .iter()
        .zip(&view.train_a)
        .map(|(x, a)| {
            let mut r = x.clone();
            r.extend(arms.iter().map(|b| if b == a { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let model = fit(&names, &rows, &view.train_y)?;
    let n = view.units.len();
    let tau_hat = (0..arms.len()).map(|k| vec![model.coefficients[1 + p + k]; n]).collect();
    Ok(CateEstimate { units: view.units.clone(), n_actions: view.n_actions, arms, tau_hat, skipped })
}

/// One linear model per action; `τ̂(a | x) = μ̂_a(x) - μ̂_0(x)`. Arms with
/// fewer than `features + 2` training rows are skipped.
pub fn t_learner(view: &FeatureView) -> Result<CateEstimate, EstimError> {
    let counts = arm_counts(view);
    let needed = view.names.len() + 2;
    if counts[0] < needed {
        return Err(EstimError::ArmStarved(vec![0]));
    }
    let fitted: Vec<Option<LinearGaussianModel<f64>>> = (0..view.n_actions)
        .into_par_iter()
        .map(|a| {
            if counts[a] < needed {
                log::warn!("t-learner: arm {a} has {} rows, need {needed}; skipped", counts[a]);
                return Ok(None);
            }
            let (rows, y): (Vec<Vec<f64>>, Vec<f64>) = view
                .train_x
                .iter()
                .zip(&view.train_a)
                .zip(&view.train_y)
                .filter(|((_, b), _)| **b == a)
                .map(|((x, _), y)| (x.clone(), *y))
                .unzip();
            fit(&view.names, &rows, &y).map(Some)
        })
        .collect::<Result<_, EstimError>>()?;
    let base = fitted[0].as_ref().expect("arm 0 checked");
    let mu0: Vec<f64> = view.eval_x.iter().map(|x| predict(base, x)).collect();
    let mut arms = Vec::new();
    let mut skipped = Vec::new();
    let mut tau_hat = Vec::new();
    for (a, m) in fitted.iter().enumerate().skip(1) {
        match m {
            Some(m) => {
                arms.push(a);
                tau_hat.push(view.eval_x.iter().zip(&mu0).map(|(x, m0)| predict(m, x) - m0).collect());
            }
            None => skipped.push(a),
        }
    }
    if arms.is_empty() {
        return Err(EstimError::ArmStarved(skipped));
    }
    Ok(CateEstimate { units: view.units.clone(), n_actions: view.n_actions, arms, tau_hat, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffInMeans {
    pub estimate: f64,
    pub std_error: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

/// `mean(y | a) - mean(y | 0)` over the evaluation units, per action;
/// `None` where either group has fewer than two units.
pub fn difference_in_means(view: &FeatureView) -> Vec<Option<DiffInMeans>> {
    let mut groups = vec![Vec::new(); view.n_actions];
    for (a, y) in view.eval_a.iter().zip(&view.eval_y) {
        groups[*a].push(*y);
    }
    let stats = |g: &[f64]| {
        let n = g.len() as f64;
        let m = g.iter().sum::<f64>() / n;
        let v = g.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v / n)
    };
    (0..view.n_actions)
        .map(|a| {
            if a == 0 || groups[a].len() < 2 || groups[0].len() < 2 {
                return None;
            }
            let (m1, v1) = stats(&groups[a]);
            let (m0, v0) = stats(&groups[0]);
            Some(DiffInMeans {
                estimate: m1 - m0,
                std_error: (v1 + v0).sqrt(),
                n_treated: groups[a].len(),
                n_control: groups[0].len(),
            })
        })
        .collect()
}
