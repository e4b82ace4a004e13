//! Small dense solvers: Householder QR with column pivoting and Cholesky.

use crate::scalar::Real;

/// Result of a rank-revealing least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    /// Coefficients; columns judged linearly dependent get exactly zero.
    pub coef: Vec<T>,
    pub rank: usize,
    /// Diagonal of `(X'X)^-1` restricted to the retained columns; `None` for
    /// dropped columns.
    pub unscaled_var: Vec<Option<T>>,
}

/// Minimizes `||X b - y||²` where `cols[j]` is column `j` of `X`.
///
/// Uses Householder QR with column pivoting. A column is retained while its
/// remaining norm exceeds `max(n, p) * eps * |R₀₀|`.
pub fn lstsq<T: Real>(cols: &[Vec<T>], y: &[T]) -> LeastSquares<T> {
    let p = cols.len();
    let n = y.len();
    let mut a: Vec<Vec<T>> = cols.to_vec();
    let mut b = y.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut rdiag = vec![T::zero(); p];
    let steps = n.min(p);
    let mut rank = 0;
    let mut tol = T::zero();

    for k in 0..steps {
        // pick the column with largest remaining norm
        let mut best = k;
        let mut best_norm = T::neg_infinity();
        for j in k..p {
            let s: T = a[j][k..].iter().map(|v| *v * *v).sum();
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        a.swap(k, best);
        perm.swap(k, best);
        let norm = best_norm.sqrt();
        if k == 0 {
            tol = norm * T::from_usize_lossy(n.max(p)) * T::epsilon();
        }
        if norm <= tol || norm == T::zero() {
            break;
        }

        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for col in a.iter_mut().skip(k + 1) {
                let dot: T = v.iter().zip(&col[k..]).map(|(vi, ci)| *vi * *ci).sum();
                let f = two * dot / vnorm2;
                for (ci, vi) in col[k..].iter_mut().zip(&v) {
                    *ci -= f * *vi;
                }
            }
            let dot: T = v.iter().zip(&b[k..]).map(|(vi, bi)| *vi * *bi).sum();
            let f = two * dot / vnorm2;
            for (bi, vi) in b[k..].iter_mut().zip(&v) {
                *bi -= f * *vi;
            }
        }
        rdiag[k] = alpha;
        a[k][k] = alpha;
        rank = k + 1;
    }

    // R is stored as a[j][i] for i <= j < rank (column j, row i).
    let r = |i: usize, j: usize| -> T { if i == j { rdiag[i] } else { a[j][i] } };

    let mut x = vec![T::zero(); rank];
    for i in (0..rank).rev() {
        let mut s = b[i];
        for (j, xj) in x.iter().enumerate().skip(i + 1) {
            s -= r(i, j) * *xj;
        }
        x[i] = s / r(i, i);
    }

    // R^-1 (upper triangular) by back substitution, one column at a time.
    let mut rinv = vec![vec![T::zero(); rank]; rank];
    for c in 0..rank {
        for i in (0..=c).rev() {
            let mut s = if i == c { T::one() } else { T::zero() };
            for (j, row) in rinv.iter().enumerate().take(c + 1).skip(i + 1) {
                s -= r(i, j) * row[c];
            }
            rinv[i][c] = s / r(i, i);
        }
    }

    let mut coef = vec![T::zero(); p];
    let mut unscaled_var = vec![None; p];
    for i in 0..rank {
        coef[perm[i]] = x[i];
        let d: T = rinv[i].iter().map(|v| *v * *v).sum();
        unscaled_var[perm[i]] = Some(d);
    }
    LeastSquares { coef, rank, unscaled_var }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `m × m`).
/// Returns `None` if a non-positive pivot is met.
pub fn cholesky_solve<T: Real>(a: &[T], b: &[T]) -> Option<Vec<T>> {
    let m = b.len();
    let mut l = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s.is_nan() || s <= T::zero() {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut z = vec![T::zero(); m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * z[k];
        }
        z[i] = s / l[i * m + i];
    }
    let mut x = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut s = z[i];
        for k in i + 1..m {
            s -= l[k * m + i] * x[k];
        }
        x[i] = s / l[i * m + i];
    }
    Some(x)
}
