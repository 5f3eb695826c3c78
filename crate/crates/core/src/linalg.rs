//! Small dense kernels: cyclic Jacobi eigensolver, matrix exponential,
//! compensated summation and π-weighted operator helpers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` and targets the
//! state counts this crate is meant for (a handful to a few dozen states).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Off-diagonal Frobenius norm, relative to `max(1, ‖A‖_F)`, at which
/// Jacobi sweeps stop. One polishing sweep follows.
pub const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Fixed Taylor order of the scaled exponential; the scaled argument has
/// ‖X‖_∞ ≤ 1 so the truncation error is below 1/19!.
const EXPM_TAYLOR_ORDER: usize = 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues sorted
/// in descending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[(p, q)] * a[(p, q)];
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.nrows();
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let g = a[(r, p)];
            let h = a[(r, q)];
            let rp = g - s * (h + g * tau);
            let rq = h + s * (g - h * tau);
            a[(r, p)] = rp;
            a[(p, r)] = rp;
            a[(r, q)] = rq;
            a[(q, r)] = rq;
        }
    }
    for r in 0..n {
        let g = v[(r, p)];
        let h = v[(r, q)];
        v[(r, p)] = g - s * (h + g * tau);
        v[(r, q)] = h + s * (g - h * tau);
    }
}

/// Cyclic Jacobi rotations on a symmetric matrix.
///
/// Only the symmetric part `(A + Aᵀ)/2` is used. Sweeps run until the
/// off-diagonal Frobenius norm drops below `JACOBI_TOL·max(1, ‖A‖_F)`,
/// then one more sweep is applied; quadratic convergence makes that last
/// sweep push the residual to rounding level.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen, LinalgError> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(LinalgError::NonSquare { rows, cols });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = rows;
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(1.0);
    let tol = JACOBI_TOL * scale;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) < tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
    }
    // polishing sweep
    for p in 0..n {
        for q in (p + 1)..n {
            rotate(&mut m, &mut v, p, q);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &v.column(i));
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Householder reflector `H = I − 2wwᵀ/‖w‖²` with `H·v = ±‖v‖e₀`.
pub fn householder_to_first_axis(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let norm = v.norm();
    let alpha = if v[0] >= 0.0 { -norm } else { norm };
    let mut w = v.clone();
    w[0] -= alpha;
    let ww = w.dot(&w);
    let mut h = DMatrix::<f64>::identity(n, n);
    if ww > 0.0 {
        h -= (&w * w.transpose()) * (2.0 / ww);
    }
    h
}

/// Symmetric eigensolver with a known unit eigenvector `kernel` for the
/// eigenvalue 0 deflated first.
///
/// The returned decomposition has `values[0] == 0.0` exactly and
/// `vectors.column(0) == kernel`; the remaining pairs come from Jacobi on
/// the complement, sorted descending.
pub fn deflated_eigen(
    a: &DMatrix<f64>,
    kernel: &DVector<f64>,
) -> Result<SymmetricEigen, LinalgError> {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let h = householder_to_first_axis(kernel);
    let c = &h * &sym * &h;
    let block = c.view((1, 1), (n - 1, n - 1)).into_owned();
    let inner = jacobi_eigen(&block)?;

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    vectors.set_column(0, kernel);
    for k in 0..(n - 1) {
        values[k + 1] = inner.values[k];
        let mut z = DVector::zeros(n);
        z.rows_mut(1, n - 1).copy_from(&inner.vectors.column(k));
        vectors.set_column(k + 1, &(&h * z));
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Row-sum (∞) norm.
pub fn norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring.
///
/// The argument is scaled by `2^{-s}` with `s = ⌈log₂‖A‖_∞⌉` (zero when the
/// norm is at most one), a fixed-order Taylor polynomial is evaluated by
/// Horner's rule, and the result is squared `s` times.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = norm_inf(a);
    let squarings = if norm > 1.0 {
        norm.log2().ceil() as i32
    } else {
        0
    };
    let x = a * 2f64.powi(-squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let mut e = id.clone();
    for k in (1..=EXPM_TAYLOR_ORDER).rev() {
        e = &id + (&x * e) / (k as f64);
    }
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `D^{1/2}·M·D^{-1/2}` with `D = diag(weights)`: maps an operator on
/// `L²(π)` written in the coordinate basis to the ordinary Euclidean frame.
pub fn to_euclidean_frame(m: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] * (weights[i] / weights[j]).sqrt())
}

/// Inverse of [`to_euclidean_frame`].
pub fn from_euclidean_frame(b: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = b.nrows();
    DMatrix::from_fn(n, n, |i, j| b[(i, j)] * (weights[j] / weights[i]).sqrt())
}

/// Operator 2-norm of `M` on `L²(π)`: the largest singular value of
/// `D^{1/2} M D^{-1/2}`.
pub fn pi_operator_norm(m: &DMatrix<f64>, weights: &[f64]) -> Result<f64, LinalgError> {
    let b = to_euclidean_frame(m, weights);
    let gram = b.transpose() * &b;
    let eig = jacobi_eigen(&gram)?;
    Ok(eig.values[0].max(0.0).sqrt())
}
