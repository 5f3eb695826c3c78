//! Double-double evaluation of the tilted top eigenvalue and its Taylor
//! coefficients.
//!
//! Both are computed in the orthonormal eigenbasis of the untilted
//! symmetric operator, where the operator is `diag(λ_k) + r·T` with
//! `T = Uᵀ diag(f) U`. Taking the stored `λ_k` and `T` as exact, the kernel
//! vector is exactly the first axis, so `λ₀(0) = 0` holds exactly and the
//! eigenvalue and its series describe the same operator to ~32 digits.

use nalgebra::{DMatrix, DVector};
use twofloat::TwoFloat;

use crate::spectral::SpectralData;

/// Working precision of the Newton iteration on the secular equation.
const SECULAR_RTOL: f64 = 1e-31;
const SECULAR_MAX_ITERS: usize = 40;

/// `a / d` correct to double-double precision.
pub fn dd_div(a: TwoFloat, d: TwoFloat) -> TwoFloat {
    let q1 = a / d.hi();
    let r = a - q1 * d;
    let q2 = r / d.hi();
    let r = r - q2 * d;
    q1 + q2 + r / d.hi()
}

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

/// The untilted spectrum and the tilt in its eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    /// Descending, `eigenvalues[0] == 0`.
    pub eigenvalues: Vec<f64>,
    /// `Uᵀ diag(f) U`.
    pub tilt: DMatrix<f64>,
}

impl EigenFrame {
    pub fn new(sd: &SpectralData, f: &[f64]) -> Self {
        let u = sd.euclid_vectors();
        let tilt = u.transpose() * DMatrix::from_diagonal(&DVector::from_row_slice(f)) * u;
        let tilt = (&tilt + tilt.transpose()) * 0.5;
        EigenFrame {
            eigenvalues: sd.eigenvalues.iter().copied().collect(),
            tilt,
        }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Solves `M x = b` for a small dense double-double system by Gaussian
/// elimination with partial pivoting.
fn dd_solve(mut m: Vec<Vec<TwoFloat>>, mut b: Vec<TwoFloat>) -> Option<Vec<TwoFloat>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col]
                .hi()
                .abs()
                .partial_cmp(&m[j][col].hi().abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv][col].hi() == 0.0 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = dd_div(m[row][col], m[col][col]);
            for k in col..n {
                let sub = factor * m[col][k];
                m[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    let mut x = vec![dd(0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = dd_div(acc, m[row][row]);
    }
    Some(x)
}

/// Top eigenvalue of `diag(λ) + r·T` from the secular equation
/// `λ = r·T₀₀ + r²·wᵀ(λ − A)⁻¹w`, `A = diag(λ_{k≥1}) + r·T_{≥1,≥1}`,
/// `w = T_{≥1,0}`, by Newton from `start`.
///
/// Requires `λ − A` positive definite along the iteration, which holds when
/// `|r|·‖f‖_∞ < λ₁/2` and `start ≥ 0`. Returns `None` when the linear
/// solve breaks down.
pub fn lambda0_secular(frame: &EigenFrame, r: f64, start: f64) -> Option<TwoFloat> {
    let n = frame.n();
    if r == 0.0 {
        return Some(dd(0.0));
    }
    let t = &frame.tilt;
    let w: Vec<TwoFloat> = (1..n).map(|k| dd(t[(k, 0)])).collect();
    let a: Vec<Vec<TwoFloat>> = (1..n)
        .map(|i| {
            (1..n)
                .map(|j| {
                    let mut v = TwoFloat::new_mul(r, t[(i, j)]);
                    if i == j {
                        v += frame.eigenvalues[i];
                    }
                    v
                })
                .collect()
        })
        .collect();
    let rd00 = TwoFloat::new_mul(r, t[(0, 0)]);
    let r2 = TwoFloat::new_mul(r, r);

    let mut lam = dd(start.max(0.0));
    for _ in 0..SECULAR_MAX_ITERS {
        let shifted: Vec<Vec<TwoFloat>> = (0..n - 1)
            .map(|i| {
                (0..n - 1)
                    .map(|j| if i == j { lam - a[i][j] } else { -a[i][j] })
                    .collect()
            })
            .collect();
        let x = dd_solve(shifted, w.clone())?;
        let wx = w.iter().zip(&x).fold(dd(0.0), |s, (p, q)| s + *p * *q);
        let xx: f64 = x.iter().map(|v| v.hi() * v.hi()).sum();
        let h = lam - rd00 - r2 * wx;
        // h' ≥ 1, so double precision suffices for the Newton denominator
        let step = h / (1.0 + r * r * xx);
        lam -= step;
        if step.hi().abs() <= SECULAR_RTOL * lam.hi().abs() {
            break;
        }
    }
    Some(lam)
}

/// `λ₀⁽¹⁾..λ₀⁽ᴺ⁾` in double-double by the trace formula, evaluated in the
/// eigenframe where `S⁽⁰⁾ = −e₀e₀ᵀ` and `Sᵏ = diag(0, λ₁⁻ᵏ, …)`.
///
/// Compositions are enumerated depth-first so that every prefix product
/// is formed once.
pub fn series_coefficients_dd(frame: &EigenFrame, order: usize) -> Vec<TwoFloat> {
    let n = frame.n();
    // factors[k] = T·S⁽ᵏ⁾, column-scaled copies of T
    let mut factors: Vec<Vec<TwoFloat>> = Vec::with_capacity(order);
    for k in 0..order.max(1) {
        let diag: Vec<TwoFloat> = (0..n)
            .map(|j| {
                if k == 0 {
                    dd(if j == 0 { -1.0 } else { 0.0 })
                } else if j == 0 {
                    dd(0.0)
                } else {
                    let inv = dd_div(dd(1.0), dd(frame.eigenvalues[j]));
                    (1..k).fold(inv, |acc, _| acc * dd_div(dd(1.0), dd(frame.eigenvalues[j])))
                }
            })
            .collect();
        let mut m = vec![dd(0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = diag[j] * frame.tilt[(i, j)];
            }
        }
        factors.push(m);
    }

    let mut identity = vec![dd(0.0); n * n];
    for i in 0..n {
        identity[i * n + i] = dd(1.0);
    }
    let mut coeffs = Vec::with_capacity(order);
    for m in 1..=order {
        let mut total = dd(0.0);
        accumulate_traces(&factors, n, &identity, m - 1, m, &mut total);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(total * sign / m as f64);
    }
    coeffs
}

fn mat_mul(a: &[TwoFloat], b: &[TwoFloat], n: usize) -> Vec<TwoFloat> {
    let mut out = vec![dd(0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik.hi() == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn trace_of_product(a: &[TwoFloat], b: &[TwoFloat], n: usize) -> TwoFloat {
    let mut s = dd(0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[i * n + j] * b[j * n + i];
        }
    }
    s
}

fn accumulate_traces(
    factors: &[Vec<TwoFloat>],
    n: usize,
    prefix: &[TwoFloat],
    left: usize,
    parts: usize,
    total: &mut TwoFloat,
) {
    if parts == 1 {
        *total += trace_of_product(prefix, &factors[left], n);
        return;
    }
    for k in 0..=left {
        let next = mat_mul(prefix, &factors[k], n);
        accumulate_traces(factors, n, &next, left - k, parts - 1, total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_keeps_low_word() {
        let third = dd_div(dd(1.0), dd(3.0));
        let err = third * 3.0 - 1.0;
        assert!(err.hi().abs() < 1e-31);
    }

    #[test]
    fn solve_small_system() {
        let m = vec![vec![dd(4.0), dd(1.0)], vec![dd(1.0), dd(3.0)]];
        let x = dd_solve(m, vec![dd(1.0), dd(2.0)]).unwrap();
        // exact solution (1/11, 7/11)
        assert!((x[0] * 11.0 - 1.0).hi().abs() < 1e-30);
        assert!((x[1] * 11.0 - 7.0).hi().abs() < 1e-30);
    }
}
