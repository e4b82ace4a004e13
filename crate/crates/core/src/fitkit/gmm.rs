use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FitError;
use crate::scalar::Real;

/// Two-component univariate Gaussian mixture, components ordered by mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm1D<T> {
    pub weights: [T; 2],
    pub means: [T; 2],
    pub sds: [T; 2],
}

impl<T: Real> Gmm1D<T> {
    pub fn new(weights: [T; 2], means: [T; 2], sds: [T; 2]) -> Self {
        let mut g = Self { weights, means, sds };
        g.sort();
        g
    }

    fn sort(&mut self) {
        if self.means[1] < self.means[0] {
            self.weights.swap(0, 1);
            self.means.swap(0, 1);
            self.sds.swap(0, 1);
        }
    }

    fn log_joint(&self, k: usize, x: T) -> T {
        let z = (x - self.means[k]) / self.sds[k];
        self.weights[k].ln() - self.sds[k].ln() - T::lit(0.5) * z * z - half_ln_2pi()
    }

    pub fn log_density(&self, x: T) -> T {
        log_sum_exp(self.log_joint(0, x), self.log_joint(1, x))
    }

    pub fn log_likelihood(&self, xs: &[T]) -> T {
        xs.iter().map(|x| self.log_density(*x)).sum()
    }

    /// Posterior probability that `x` came from component 1.
    pub fn posterior(&self, x: T) -> T {
        let a = self.log_joint(0, x);
        let b = self.log_joint(1, x);
        let post = (b - log_sum_exp(a, b)).exp();
        post.max(T::zero()).min(T::one())
    }

    /// Hard component label; ties go to component 0.
    pub fn label(&self, x: T) -> u8 {
        u8::from(self.posterior(x) > T::lit(0.5))
    }
}

/// Posterior probability of component 1 for `value`.
pub fn posterior_z<T: Real>(model: &Gmm1D<T>, value: T) -> T {
    model.posterior(value)
}

fn half_ln_2pi<T: Real>() -> T {
    T::lit(0.918_938_533_204_672_7)
}

fn log_sum_exp<T: Real>(a: T, b: T) -> T {
    let m = a.max(b);
    if m == T::neg_infinity() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, Copy)]
pub struct GmmOptions<T> {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the mean per-point log-likelihood improves by less than this.
    pub tol: T,
    /// Component sds are floored at `sd_floor · sd(values)`.
    pub sd_floor: T,
}

impl<T: Real> Default for GmmOptions<T> {
    fn default() -> Self {
        Self { restarts: 5, max_iter: 1000, tol: T::lit(1e-8), sd_floor: T::lit(1e-6) }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit<T> {
    pub model: Gmm1D<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    /// Total log-likelihood after each EM iteration of the selected restart.
    pub trace: Vec<T>,
}

/// Fits a two-component mixture by EM, keeping the best of several restarts
/// seeded with k-means++-style centers.
pub fn fit_gmm2<T: Real>(values: &[T], seed: u64) -> Result<GmmFit<T>, FitError> {
    fit_gmm2_with(values, seed, &GmmOptions::default())
}

pub fn fit_gmm2_with<T: Real>(
    values: &[T],
    seed: u64,
    options: &GmmOptions<T>,
) -> Result<GmmFit<T>, FitError> {
    let n = values.len();
    if n < 4 {
        return Err(FitError::DegenerateInput(format!("need at least 4 values, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite("mixture input".into()));
    }
    let nt = T::from_usize_lossy(n);
    let mean = values.iter().copied().sum::<T>() / nt;
    let var = values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / nt;
    if values.iter().all(|v| *v == values[0]) || var.is_nan() || var <= T::zero() {
        return Err(FitError::DegenerateInput("all values are equal".into()));
    }
    let floor = options.sd_floor * var.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<GmmFit<T>> = None;
    for _ in 0..options.restarts.max(1) {
        let init = init_plus_plus(values, floor, &mut rng);
        let fit = run_em(values, init, floor, options);
        if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn init_plus_plus<T: Real>(xs: &[T], floor: T, rng: &mut ChaCha8Rng) -> Gmm1D<T> {
    let n = xs.len();
    let c0 = xs[rng.random_range(0..n)];
    let d2: Vec<T> = xs.iter().map(|x| (*x - c0) * (*x - c0)).collect();
    let total: T = d2.iter().copied().sum();
    let c1 = if total > T::zero() {
        let u = T::lit(rng.random::<f64>()) * total;
        let mut acc = T::zero();
        let mut pick = xs[n - 1];
        for (x, d) in xs.iter().zip(&d2) {
            acc += *d;
            if acc >= u && *d > T::zero() {
                pick = *x;
                break;
            }
        }
        pick
    } else {
        c0
    };
    let centers = [c0, c1];
    let mut sum = [T::zero(); 2];
    let mut sq = [T::zero(); 2];
    let mut cnt = [0usize; 2];
    for x in xs {
        let k = usize::from((*x - c1).abs() < (*x - c0).abs());
        sum[k] += *x;
        sq[k] += *x * *x;
        cnt[k] += 1;
    }
    let mut means = centers;
    let mut sds = [floor; 2];
    let mut weights = [T::lit(0.5); 2];
    for k in 0..2 {
        if cnt[k] > 0 {
            let c = T::from_usize_lossy(cnt[k]);
            means[k] = sum[k] / c;
            let v = (sq[k] / c - means[k] * means[k]).max(T::zero());
            sds[k] = v.sqrt().max(floor);
            weights[k] = c / T::from_usize_lossy(xs.len());
        }
    }
    // keep both components alive
    for w in weights.iter_mut() {
        *w = w.max(T::lit(1e-3));
    }
    let s = weights[0] + weights[1];
    Gmm1D::new([weights[0] / s, weights[1] / s], means, sds)
}

fn run_em<T: Real>(xs: &[T], mut g: Gmm1D<T>, floor: T, options: &GmmOptions<T>) -> GmmFit<T> {
    let nt = T::from_usize_lossy(xs.len());
    let mut ll = g.log_likelihood(xs);
    let mut trace = Vec::new();
    let mut resp = vec![T::zero(); xs.len()];
    let mut iterations = 0;
    for _ in 0..options.max_iter {
        iterations += 1;
        for (r, x) in resp.iter_mut().zip(xs) {
            *r = g.posterior(*x);
        }
        let n1: T = resp.iter().copied().sum();
        let n0 = nt - n1;
        if n0 <= T::zero() || n1 <= T::zero() {
            break;
        }
        let m1 = resp.iter().zip(xs).map(|(r, x)| *r * *x).sum::<T>() / n1;
        let m0 = resp.iter().zip(xs).map(|(r, x)| (T::one() - *r) * *x).sum::<T>() / n0;
        let v1 = resp.iter().zip(xs).map(|(r, x)| *r * (*x - m1) * (*x - m1)).sum::<T>() / n1;
        let v0 = resp
            .iter()
            .zip(xs)
            .map(|(r, x)| (T::one() - *r) * (*x - m0) * (*x - m0))
            .sum::<T>()
            / n0;
        let next = Gmm1D {
            weights: [n0 / nt, n1 / nt],
            means: [m0, m1],
            sds: [v0.sqrt().max(floor), v1.sqrt().max(floor)],
        };
        let next_ll = next.log_likelihood(xs);
        g = next;
        trace.push(next_ll);
        let gain = (next_ll - ll) / nt;
        ll = next_ll;
        if gain < options.tol {
            break;
        }
    }
    g.sort();
    GmmFit { model: g, log_likelihood: ll, iterations, trace }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    fn bimodal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Normal::new(0.0, 1.0).unwrap();
        let b = Normal::new(10.0, 1.0).unwrap();
        (0..n)
            .map(|_| if rng.random::<bool>() { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect()
    }

    #[test]
    fn recovers_separated_mixture() {
        let xs = bimodal(5000, 1);
        let fit = fit_gmm2(&xs, 7).unwrap();
        let g = &fit.model;
        assert!((g.means[0] - 0.0).abs() < 0.1 && (g.means[1] - 10.0).abs() < 0.1);
        assert!((g.weights[0] - 0.5).abs() < 0.05);
        // responsibilities at the modes are essentially hard
        assert!(g.posterior(0.0) < 1e-6 && g.posterior(10.0) > 1.0 - 1e-6);
    }

    #[test]
    fn em_is_monotone() {
        let xs = bimodal(2000, 2);
        let fit = fit_gmm2(&xs, 3).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn nests_single_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nrm = Normal::new(2.0, 3.0).unwrap();
        let xs: Vec<f64> = (0..1000).map(|_| nrm.sample(&mut rng)).collect();
        let fit = fit_gmm2(&xs, 0).unwrap();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        let single: f64 = xs
            .iter()
            .map(|x| -0.5 * ((x - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
            .sum();
        assert!(fit.log_likelihood >= single - 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_gmm2(&[1.0; 10], 0), Err(FitError::DegenerateInput(_))));
        assert!(matches!(fit_gmm2(&[0.1; 10], 0), Err(FitError::DegenerateInput(_))));
        assert!(matches!(fit_gmm2(&[1.0, 2.0], 0), Err(FitError::DegenerateInput(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let xs = bimodal(500, 8);
        assert_eq!(fit_gmm2(&xs, 5).unwrap().model, fit_gmm2(&xs, 5).unwrap().model);
    }

    #[test]
    fn posterior_anchors() {
        let g = Gmm1D::new([0.5, 0.5], [0.0, 10.0], [1.0, 1.0]);
        assert_relative_eq!(posterior_z(&g, 5.0), 0.5, epsilon = 1e-15);
        assert!(posterior_z(&g, 0.0) < 1e-10);
        assert_eq!(g.label(5.0), 0);
        assert_eq!(g.label(5.0001), 1);
        // unequal weights shift the equal-posterior point
        let h = Gmm1D::new([0.25, 0.75], [0.0, 2.0], [1.0, 1.0]);
        let x = 1.0 - 0.5 * 3f64.ln();
        assert_relative_eq!(posterior_z(&h, x), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn components_sorted_by_mean() {
        let g = Gmm1D::new([0.3, 0.7], [5.0, -1.0], [1.0, 2.0]);
        assert_eq!(g.means, [-1.0, 5.0]);
        assert_eq!(g.weights, [0.7, 0.3]);
    }

    proptest::proptest! {
        #[test]
        fn posterior_in_unit_interval(x in -1e6f64..1e6, m in -10f64..10.0, s in 0.01f64..5.0) {
            let g = Gmm1D::new([0.4, 0.6], [m, m + 3.0], [s, 1.0]);
            let p = g.posterior(x);
            proptest::prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
