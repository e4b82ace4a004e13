use serde::{Deserialize, Serialize};

use super::{dot, linalg, DesignMatrix, FitError};
use crate::scalar::Real;

/// Softmax regression in reference-class form: class 0 has logit 0 and class
/// `k >= 1` has logit `weights[k - 1] · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialLogisticModel<T> {
    pub features: Vec<String>,
    pub class_labels: Vec<String>,
    pub weights: Vec<Vec<T>>,
}

impl<T: Real> MultinomialLogisticModel<T> {
    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn probabilities(&self, row: &[T]) -> Vec<T> {
        softmax_ref(&self.weights, row)
    }

    /// Most probable class index; ties go to the lower index.
    pub fn predict_class(&self, row: &[T]) -> usize {
        argmax(&self.probabilities(row))
    }

    pub fn predict_label(&self, row: &[T]) -> &str {
        &self.class_labels[self.predict_class(row)]
    }
}

pub(crate) fn argmax<T: Real>(p: &[T]) -> usize {
    let mut best = 0;
    for (k, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = k;
        }
    }
    best
}

fn softmax_ref<T: Real>(weights: &[Vec<T>], row: &[T]) -> Vec<T> {
    let mut logits = Vec::with_capacity(weights.len() + 1);
    logits.push(T::zero());
    logits.extend(weights.iter().map(|w| dot(w, row)));
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for l in logits.iter_mut() {
        *l = (*l - m).exp();
        s += *l;
    }
    for l in logits.iter_mut() {
        *l /= s;
    }
    logits
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions<T> {
    /// L2 strength on non-intercept weights (objective is the mean
    /// log-likelihood minus `lambda / 2 · ||W||²`).
    pub lambda: T,
    /// Convergence threshold on the gradient max-norm.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for LogisticOptions<T> {
    fn default() -> Self {
        Self { lambda: T::lit(1e-4), tol: T::lit(1e-6), max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit<T> {
    pub model: MultinomialLogisticModel<T>,
    pub converged: bool,
    pub grad_norm: T,
    pub iterations: usize,
    /// Penalized objective after each accepted step, starting at the origin.
    pub objective_trace: Vec<T>,
}

struct Problem<'a, T> {
    design: &'a DesignMatrix<T>,
    labels: &'a [usize],
    k1: usize,
    p: usize,
    lambda: T,
}

impl<T: Real> Problem<'_, T> {
    fn penalized(&self, j: usize) -> bool {
        j != 0
    }

    fn objective(&self, w: &[Vec<T>]) -> T {
        let n = T::from_usize_lossy(self.design.n_rows());
        let mut ll = T::zero();
        for (row, &y) in self.design.rows().zip(self.labels) {
            let p = softmax_ref(w, row);
            ll += p[y].max(T::min_positive_value()).ln();
        }
        let mut pen = T::zero();
        for wk in w {
            for (j, v) in wk.iter().enumerate() {
                if self.penalized(j) {
                    pen += *v * *v;
                }
            }
        }
        ll / n - self.lambda * pen / T::lit(2.0)
    }

    fn gradient(&self, w: &[Vec<T>]) -> Vec<T> {
        let (k1, p) = (self.k1, self.p);
        let n = T::from_usize_lossy(self.design.n_rows());
        let mut g = vec![T::zero(); k1 * p];
        for (row, &y) in self.design.rows().zip(self.labels) {
            let prob = softmax_ref(w, row);
            for k in 0..k1 {
                let ind = if y == k + 1 { T::one() } else { T::zero() };
                let r = ind - prob[k + 1];
                for j in 0..p {
                    g[k * p + j] += r * row[j];
                }
            }
        }
        for k in 0..k1 {
            for j in 0..p {
                g[k * p + j] /= n;
                if self.penalized(j) {
                    g[k * p + j] -= self.lambda * w[k][j];
                }
            }
        }
        g
    }

    /// Negative Hessian of the objective, row-major `(k1·p)²`.
    fn neg_hessian(&self, w: &[Vec<T>]) -> Vec<T> {
        let (k1, p) = (self.k1, self.p);
        let m = k1 * p;
        let n = T::from_usize_lossy(self.design.n_rows());
        let mut h = vec![T::zero(); m * m];
        for row in self.design.rows() {
            let prob = softmax_ref(w, row);
            for a in 0..k1 {
                for b in a..k1 {
                    let c = if a == b {
                        prob[a + 1] * (T::one() - prob[a + 1])
                    } else {
                        -prob[a + 1] * prob[b + 1]
                    };
                    if c == T::zero() {
                        continue;
                    }
                    for i in 0..p {
                        let ci = c * row[i];
                        let base = (a * p + i) * m + b * p;
                        for j in 0..p {
                            h[base + j] += ci * row[j];
                        }
                    }
                }
            }
        }
        for v in h.iter_mut() {
            *v /= n;
        }
        // mirror the upper block triangle
        for a in 0..k1 {
            for b in (a + 1)..k1 {
                for i in 0..p {
                    for j in 0..p {
                        h[(b * p + j) * m + a * p + i] = h[(a * p + i) * m + b * p + j];
                    }
                }
            }
        }
        for k in 0..k1 {
            for j in 0..p {
                if self.penalized(j) {
                    h[(k * p + j) * m + k * p + j] += self.lambda;
                }
            }
        }
        h
    }
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Fits a multinomial logistic regression by damped Newton ascent.
///
/// `labels[i]` indexes into `levels`. Only levels that occur in `labels` become
/// classes of the fitted model; their order follows `levels`. Non-convergence
/// is reported through [`LogisticFit::converged`] and logged, not returned as
/// an error.
pub fn fit_logistic<T: Real>(
    design: &DesignMatrix<T>,
    labels: &[usize],
    levels: &[String],
    options: &LogisticOptions<T>,
) -> Result<LogisticFit<T>, FitError> {
    let n = design.n_rows();
    if labels.len() != n {
        return Err(FitError::LengthMismatch { what: "labels".into(), got: labels.len(), expected: n });
    }
    if n == 0 {
        return Err(FitError::EmptyInput);
    }
    let mut present = vec![false; levels.len()];
    for &l in labels {
        if l >= levels.len() {
            return Err(FitError::LengthMismatch {
                what: "label index".into(),
                got: l,
                expected: levels.len(),
            });
        }
        present[l] = true;
    }
    let classes: Vec<usize> = (0..levels.len()).filter(|&i| present[i]).collect();
    if classes.len() < 2 {
        return Err(FitError::TooFewClasses(classes.len()));
    }
    let mut remap = vec![usize::MAX; levels.len()];
    for (k, &c) in classes.iter().enumerate() {
        remap[c] = k;
    }
    let y: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();

    let k1 = classes.len() - 1;
    let p = design.n_cols();
    let prob = Problem { design, labels: &y, k1, p, lambda: options.lambda };

    let mut w = vec![vec![T::zero(); p]; k1];
    let mut obj = prob.objective(&w);
    let mut trace = vec![obj];
    let mut g = prob.gradient(&w);
    let mut gnorm = max_abs(&g);
    let mut iterations = 0;

    while gnorm >= options.tol && iterations < options.max_iter {
        iterations += 1;
        let mut h = prob.neg_hessian(&w);
        let m = k1 * p;
        let dir = match linalg::cholesky_solve(&h, &g) {
            Some(d) => d,
            None => {
                let trace_h: T = (0..m).map(|i| h[i * m + i]).sum();
                let ridge = (trace_h / T::from_usize_lossy(m)).max(T::one()) * T::lit(1e-8);
                for i in 0..m {
                    h[i * m + i] += ridge;
                }
                linalg::cholesky_solve(&h, &g).unwrap_or_else(|| g.clone())
            }
        };
        let slope = dot(&g, &dir);
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<Vec<T>> = (0..k1)
                .map(|k| (0..p).map(|j| w[k][j] + step * dir[k * p + j]).collect())
                .collect();
            let c_obj = prob.objective(&cand);
            if c_obj.is_finite() && c_obj >= obj + T::lit(1e-4) * step * slope {
                w = cand;
                obj = c_obj;
                accepted = true;
                break;
            }
            step = step / T::lit(2.0);
        }
        if !accepted {
            break;
        }
        trace.push(obj);
        g = prob.gradient(&w);
        gnorm = max_abs(&g);
    }

    let converged = gnorm < options.tol;
    if !converged {
        log::warn!(
            "logistic regression did not converge after {iterations} iterations (gradient max-norm {:e})",
            gnorm.as_f64()
        );
    }
    Ok(LogisticFit {
        model: MultinomialLogisticModel {
            features: design.column_names().to_vec(),
            class_labels: classes.iter().map(|&c| levels[c].clone()).collect(),
            weights: w,
        },
        converged,
        grad_norm: gnorm,
        iterations,
        objective_trace: trace,
    })
}
