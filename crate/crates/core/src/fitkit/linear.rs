use serde::{Deserialize, Serialize};

use super::{dot, linalg, DesignMatrix, FitError};
use crate::scalar::Real;

/// `y = coefficients · x + noise_sd · e`, `e ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianModel<T> {
    pub features: Vec<String>,
    pub coefficients: Vec<T>,
    pub noise_sd: T,
    /// Coefficient standard errors from the fit; `None` where the column was
    /// dropped as linearly dependent or the model was specified by hand.
    #[serde(default)]
    pub std_errors: Vec<Option<T>>,
}

impl<T: Real> LinearGaussianModel<T> {
    pub fn predict(&self, row: &[T]) -> T {
        dot(&self.coefficients, row)
    }

    pub fn predict_all(&self, design: &DesignMatrix<T>) -> Vec<T> {
        design.rows().map(|r| self.predict(r)).collect()
    }
}

/// Ordinary least squares on a design that already carries its intercept.
///
/// Dependent columns receive zero weight. `noise_sd` is the residual standard
/// deviation with `n - rank` degrees of freedom.
pub fn fit_linear<T: Real>(
    design: &DesignMatrix<T>,
    target: &[T],
) -> Result<LinearGaussianModel<T>, FitError> {
    let n = design.n_rows();
    if n < 1 {
        return Err(FitError::DegenerateDesign("no rows".into()));
    }
    if target.len() != n {
        return Err(FitError::LengthMismatch {
            what: "target".into(),
            got: target.len(),
            expected: n,
        });
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite("target".into()));
    }

    let ls = linalg::lstsq(&design.columns_owned(), target);
    let sse: T = design
        .rows()
        .zip(target)
        .map(|(r, y)| {
            let e = *y - dot(&ls.coef, r);
            e * e
        })
        .sum();
    let dof = n.saturating_sub(ls.rank).max(1);
    let sigma2 = sse / T::from_usize_lossy(dof);
    let std_errors = ls
        .unscaled_var
        .iter()
        .map(|v| v.map(|d| (sigma2 * d).sqrt()))
        .collect();
    Ok(LinearGaussianModel {
        features: design.column_names().to_vec(),
        coefficients: ls.coef,
        noise_sd: sigma2.sqrt(),
        std_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn design(xs: &[f64]) -> DesignMatrix<f64> {
        DesignMatrix::new(vec!["x".into()], &xs.iter().map(|x| vec![*x]).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn noiseless_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let m = fit_linear(&design(&xs), &ys).unwrap();
        assert_relative_eq!(m.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.coefficients[1], 2.0, epsilon = 1e-12);
        assert!(m.noise_sd < 1e-12);
        assert_eq!(m.features, vec!["intercept", "x"]);
    }

    #[test]
    fn constant_target() {
        let xs: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let m = fit_linear(&design(&xs), &[5.0; 7]).unwrap();
        assert_relative_eq!(m.coefficients[0], 5.0, epsilon = 1e-12);
        assert!(m.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn recovers_slope_and_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64) / 1000.0 - 5.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + noise.sample(&mut rng)).collect();
        let m = fit_linear(&design(&xs), &ys).unwrap();
        let se = m.std_errors[1].unwrap();
        assert!((m.coefficients[1] - 3.0).abs() < 3.0 * se);
        assert!((m.noise_sd - 0.5).abs() < 0.025);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> =
            (0..500).map(|_| vec![n.sample(&mut rng), 100.0 * n.sample(&mut rng)]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r[0] - 0.01 * r[1] + n.sample(&mut rng)).collect();
        let d = DesignMatrix::new(vec!["a".into(), "b".into()], &rows).unwrap();
        let m = fit_linear(&d, &ys).unwrap();
        let resid: Vec<f64> = d.rows().zip(&ys).map(|(r, y)| y - m.predict(r)).collect();
        for j in 0..d.n_cols() {
            let col = d.column(j);
            let scale = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let ip: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
            assert!(ip.abs() < 1e-8 * 500.0 * scale, "column {j}: {ip}");
        }
    }

    #[test]
    fn works_in_f32() {
        let xs: Vec<f32> = (0..10).map(|i| i as f32).collect();
        let rows: Vec<Vec<f32>> = xs.iter().map(|x| vec![*x]).collect();
        let d = DesignMatrix::new(vec!["x".into()], &rows).unwrap();
        let ys: Vec<f32> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let m = fit_linear(&d, &ys).unwrap();
        assert!((m.coefficients[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn empty_design_rejected() {
        let d = DesignMatrix::<f64>::new(vec!["x".into()], &[]).unwrap();
        assert!(matches!(fit_linear(&d, &[]), Err(FitError::DegenerateDesign(_))));
    }
}
