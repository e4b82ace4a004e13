use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::FitError;
use crate::scalar::Real;

/// Fit-quality summary. `R² = 1 - SSE/SST` and `sd_y` is the population
/// standard deviation, so `R² = 1 - rmse² / sd_y²` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitReport<T> {
    Classifier { accuracy: T, macro_f1: T, n_classes: usize, n: usize },
    Regression { r2: T, rmse: T, sd_y: T, n: usize },
}

pub fn classification_report<T: Real, L: Ord + Clone>(
    predictions: &[L],
    truths: &[L],
) -> Result<FitReport<T>, FitError> {
    if predictions.len() != truths.len() {
        return Err(FitError::LengthMismatch {
            what: "predictions".into(),
            got: predictions.len(),
            expected: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(FitError::EmptyInput);
    }
    let n = truths.len();
    let correct = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    let classes: BTreeSet<&L> = truths.iter().collect();
    let mut f1_sum = T::zero();
    for c in &classes {
        let tp = predictions.iter().zip(truths).filter(|(p, t)| p == c && t == c).count();
        let fp = predictions.iter().zip(truths).filter(|(p, t)| p == c && t != c).count();
        let fn_ = predictions.iter().zip(truths).filter(|(p, t)| p != c && t == c).count();
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            f1_sum += T::from_usize_lossy(2 * tp) / T::from_usize_lossy(denom);
        }
    }
    Ok(FitReport::Classifier {
        accuracy: T::from_usize_lossy(correct) / T::from_usize_lossy(n),
        macro_f1: f1_sum / T::from_usize_lossy(classes.len()),
        n_classes: classes.len(),
        n,
    })
}

pub fn regression_report<T: Real>(predictions: &[T], truths: &[T]) -> Result<FitReport<T>, FitError> {
    if predictions.len() != truths.len() {
        return Err(FitError::LengthMismatch {
            what: "predictions".into(),
            got: predictions.len(),
            expected: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(FitError::EmptyInput);
    }
    let n = T::from_usize_lossy(truths.len());
    let mean = truths.iter().copied().sum::<T>() / n;
    let sst: T = truths.iter().map(|y| (*y - mean) * (*y - mean)).sum();
    let sse: T = predictions.iter().zip(truths).map(|(p, y)| (*p - *y) * (*p - *y)).sum();
    let r2 = if sse == T::zero() {
        T::one()
    } else if sst == T::zero() {
        T::neg_infinity()
    } else {
        T::one() - sse / sst
    };
    Ok(FitReport::Regression {
        r2,
        rmse: (sse / n).sqrt(),
        sd_y: (sst / n).sqrt(),
        n: truths.len(),
    })
}
