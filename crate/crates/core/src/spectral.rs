//! Geometry of `L²(π)`: adjoint and symmetrized generator, its
//! eigendecomposition, spectral gap, reduced resolvent and asymptotic
//! variance.
//!
//! Operators are stored as matrices in the coordinate basis `e_x(y) = δ_xy`,
//! acting on functions `g: E → ℝ`. The π-selfadjoint symmetrized generator
//! becomes an ordinary symmetric matrix after the similarity
//! `B = D^{1/2}·sym·D^{-1/2}`, `D = diag(π)`, and is diagonalized there with
//! the constant function deflated first so that the eigenvalue 0 is exact.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, deflated_eigen, LinalgError};
use crate::markov::{Observable, ProbDist, QMatrix, CENTERED_TOL};

/// Second eigenvalue at or above this value is treated as a vanishing gap.
pub const GAP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invariant distribution must be strictly positive")]
    NotStrictlyPositive,
    #[error("degenerate spectral gap: second eigenvalue {0:e}")]
    DegenerateGap(f64),
    #[error("observable is not centered: π(f) = {0:e}")]
    NotCentered(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// π-orthonormal eigendecomposition of `(L + L*)/2` plus the derived
/// reduced resolvent.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub pi: ProbDist,
    /// `(L + L*)/2` in the coordinate basis.
    pub sym: DMatrix<f64>,
    /// Descending; `eigenvalues[0] == 0`.
    pub eigenvalues: DVector<f64>,
    /// π-orthonormal eigenfunctions as columns; column 0 is the constant 1.
    pub eigvecs: DMatrix<f64>,
    /// λ₁ = min over nonzero eigenvalues of |λ|.
    pub gap: f64,
    /// Orthogonal projection onto constants, `g ↦ π(g)·1`.
    pub projector0: DMatrix<f64>,
    /// Reduced resolvent `S` at the eigenvalue 0.
    pub resolvent: DMatrix<f64>,
    euclid_sym: DMatrix<f64>,
    euclid_vectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.sym.nrows()
    }

    /// `D^{1/2}·sym·D^{-1/2}`, symmetric.
    pub fn euclid_sym(&self) -> &DMatrix<f64> {
        &self.euclid_sym
    }

    /// Orthonormal eigenvectors of [`Self::euclid_sym`], same order as
    /// `eigenvalues`.
    pub fn euclid_vectors(&self) -> &DMatrix<f64> {
        &self.euclid_vectors
    }

    /// Spectral projector onto the k-th eigenfunction, `g ↦ ⟨g, e_k⟩_π e_k`.
    pub fn projector(&self, k: usize) -> DMatrix<f64> {
        let e = self.eigvecs.column(k);
        let w = self.pi.weights();
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| e[i] * e[j] * w[j])
    }

    /// `−⟨sym g, g⟩_π`, the Dirichlet form of `g`.
    pub fn dirichlet_form(&self, g: &[f64]) -> f64 {
        let gv = DVector::from_row_slice(g);
        let lg = &self.sym * &gv;
        -pi_inner(&self.pi, lg.as_slice(), g)
    }
}

/// `L*(x, y) = π_y q_yx / π_x`.
pub fn adjoint_generator(q: &QMatrix, pi: &ProbDist) -> DMatrix<f64> {
    let n = q.n();
    let w = pi.weights();
    DMatrix::from_fn(n, n, |x, y| w[y] * q.rate(y, x) / w[x])
}

/// `⟨g, h⟩_π = Σ_x g(x)h(x)π_x`.
pub fn pi_inner(pi: &ProbDist, g: &[f64], h: &[f64]) -> f64 {
    assert_eq!(g.len(), h.len(), "pi_inner: dimension mismatch");
    assert_eq!(g.len(), pi.len(), "pi_inner: dimension mismatch");
    linalg::compensated_sum(
        pi.weights()
            .iter()
            .zip(g.iter().zip(h))
            .map(|(w, (a, b))| w * a * b),
    )
}

/// `Var_π(g) = π(g²) − π(g)²`.
pub fn variance_pi(pi: &ProbDist, g: &[f64]) -> f64 {
    let m = pi.expect(g);
    let centered: Vec<f64> = g.iter().map(|v| v - m).collect();
    pi_inner(pi, &centered, &centered)
}

pub fn spectral_decomposition(q: &QMatrix, pi: &ProbDist) -> Result<SpectralData, SpectralError> {
    if !pi.is_strictly_positive() {
        return Err(SpectralError::NotStrictlyPositive);
    }
    let n = q.n();
    let w = pi.weights();
    let adj = adjoint_generator(q, pi);
    let sym = (q.matrix() + &adj) * 0.5;
    let b = linalg::to_euclidean_frame(&sym, w);
    let b = (&b + b.transpose()) * 0.5;
    let kernel = DVector::from_iterator(n, w.iter().map(|p| p.sqrt()));
    let eig = deflated_eigen(&b, &kernel)?;

    let second = eig.values[1];
    if second >= -GAP_TOL {
        return Err(SpectralError::DegenerateGap(second));
    }
    let gap = -second;

    let eigvecs = DMatrix::from_fn(n, n, |i, k| eig.vectors[(i, k)] / w[i].sqrt());
    let projector0 = DMatrix::from_fn(n, n, |_, j| w[j]);

    let mut sd = SpectralData {
        pi: pi.clone(),
        sym,
        eigenvalues: eig.values,
        eigvecs,
        gap,
        projector0,
        resolvent: DMatrix::zeros(n, n),
        euclid_sym: b,
        euclid_vectors: eig.vectors,
    };
    sd.resolvent = reduced_resolvent(&sd);
    Ok(sd)
}

fn spectral_sum(sd: &SpectralData, weight: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = sd.n();
    let w = sd.pi.weights();
    let mut m = DMatrix::zeros(n, n);
    for k in 1..n {
        let c = weight(sd.eigenvalues[k]);
        let e = sd.eigvecs.column(k);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += c * e[i] * e[j] * w[j];
            }
        }
    }
    m
}

/// `S = Σ_{k≥1} λ_k⁻¹ pr_k`: inverse of the symmetrized generator on
/// `{1}^⊥`, zero on constants.
pub fn reduced_resolvent(sd: &SpectralData) -> DMatrix<f64> {
    spectral_sum(sd, |l| 1.0 / l)
}

/// `Ŝ^r = Σ_{k≥1} (−λ_k)^{−r} pr_k`; `Ŝ¹ = −S`.
pub fn resolvent_power(sd: &SpectralData, r: f64) -> DMatrix<f64> {
    spectral_sum(sd, |l| (-l).powf(-r))
}

/// Asymptotic variance `σ̂_f² = −2⟨Sf, f⟩_π`.
pub fn sigma_hat_sq(sd: &SpectralData, f: &Observable) -> Result<f64, SpectralError> {
    let mean = sd.pi.expect(f.values());
    if mean.abs() > 1e-10 {
        return Err(SpectralError::NotCentered(mean));
    }
    let fv = DVector::from_row_slice(f.values());
    let sf = &sd.resolvent * &fv;
    Ok((-2.0 * pi_inner(&sd.pi, sf.as_slice(), f.values())).max(0.0))
}

/// `true` when `|π(f)|` is within the centering tolerance.
pub fn is_centered(pi: &ProbDist, f: &Observable) -> bool {
    pi.expect(f.values()).abs() <= CENTERED_TOL
}
