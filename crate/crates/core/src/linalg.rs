//! Small dense solvers used by the regression and time-series code.
//!
//! Problems here are at most a few hundred unknowns, so plain Cholesky and
//! partial-pivot elimination over `ndarray` are sufficient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Lower Cholesky factor of a symmetric matrix.
///
/// Returns `None` when a pivot falls below `rel_tol` times the matching
/// diagonal entry of `a`, i.e. when the matrix is numerically singular.
pub fn cholesky(a: ArrayView2<f64>, rel_tol: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        let scale = a[[j, j]].abs();
        if !(d > rel_tol * scale) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut z = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut e = Array1::<f64>::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, e.view());
        inv.column_mut(j).assign(&col);
    }
    inv
}

/// Gram matrix `XᵀX`.
pub fn gram(x: ArrayView2<f64>) -> Array2<f64> {
    x.t().dot(&x)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` if a pivot is exactly zero.
pub fn solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut rhs = b.to_owned();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .expect("nonempty range");
        if m[[piv, col]] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap([piv, k], [col, k]);
            }
            rhs.swap(piv, col);
        }
        for row in (col + 1)..n {
            let f = m[[row, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..n {
            s -= m[[i, k]] * x[k];
        }
        x[i] = s / m[[i, i]];
    }
    Some(x)
}

/// Prepends a column of ones.
pub fn with_intercept(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, k) = x.dim();
    let mut out = Array2::<f64>::ones((n, k + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(&x);
    out
}

/// Least squares with intercept for one or more responses sharing a design.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// One intercept per response column.
    pub intercept: Array1<f64>,
    /// `k × m` slope matrix (regressor × response).
    pub slopes: Array2<f64>,
    /// `n × m` residuals.
    pub residuals: Array2<f64>,
    /// `(XcᵀXc)⁻¹` for the centered regressors.
    pub xtx_inv: Array2<f64>,
}

/// OLS of every column of `y` on `x` plus an intercept, via the normal
/// equations of the centered design. Returns `None` when the centered Gram
/// matrix has a relative pivot below `rel_tol` (collinear regressors).
pub fn ols_centered(x: ArrayView2<f64>, y: ArrayView2<f64>, rel_tol: f64) -> Option<OlsFit> {
    let n = x.nrows() as f64;
    let xm = x.sum_axis(ndarray::Axis(0)) / n;
    let ym = y.sum_axis(ndarray::Axis(0)) / n;
    let xc = &x - &xm;
    let yc = &y - &ym;
    let l = cholesky(gram(xc.view()).view(), rel_tol)?;
    let xty = xc.t().dot(&yc);
    let mut slopes = Array2::<f64>::zeros((x.ncols(), y.ncols()));
    for j in 0..y.ncols() {
        slopes.column_mut(j).assign(&cholesky_solve(&l, xty.column(j)));
    }
    let intercept = &ym - &xm.dot(&slopes);
    let residuals = &yc - &xc.dot(&slopes);
    Some(OlsFit { intercept, slopes, residuals, xtx_inv: cholesky_inverse(&l) })
}
