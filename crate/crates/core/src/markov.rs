//! Generators of Markov jump processes on a finite state space: Q-matrix
//! validation, irreducibility, invariant distribution, transition function
//! and detailed balance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{compensated_sum, expm};

/// Default tolerance for row sums and negative off-diagonal rates,
/// relative to the row's exit rate.
pub const DEFAULT_RATE_TOL: f64 = 1e-12;
/// Tolerance on `Σ weights = 1` for probability vectors.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Tolerance below which `|π(f)|` counts as centered.
pub const CENTERED_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("rate matrix is not square")]
    NonSquare,
    #[error("state space needs at least two states, got {0}")]
    TooFewStates(usize),
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("negative off-diagonal rate q[{0}][{1}]")]
    NegativeRate(usize, usize),
    #[error("row {0} does not sum to zero")]
    RowSumViolation(usize),
    #[error("generator is not irreducible")]
    NotIrreducible,
    #[error("singular system while solving for the invariant distribution")]
    SingularSystem,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("observable has non-finite entries")]
    NonFiniteObservable,
}

/// Validated generator: nonnegative off-diagonal rates, diagonal equal to
/// minus the off-diagonal row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    rates: DMatrix<f64>,
}

impl QMatrix {
    pub fn n(&self) -> usize {
        self.rates.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Exit rate `q_x = −q_xx`.
    pub fn exit_rate(&self, x: usize) -> f64 {
        -self.rates[(x, x)]
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[(x, y)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.rates
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// Probability vector on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbDist {
    weights: Vec<f64>,
}

impl ProbDist {
    pub fn new(weights: Vec<f64>) -> Result<Self, MarkovError> {
        if weights.is_empty() {
            return Err(MarkovError::InvalidDistribution("empty".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(MarkovError::InvalidDistribution(format!(
                "entry {i} is negative or non-finite"
            )));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(MarkovError::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(ProbDist { weights })
    }

    /// Point mass at state `x`.
    pub fn point_mass(n: usize, x: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[x] = 1.0;
        ProbDist { weights }
    }

    pub fn uniform(n: usize) -> Self {
        ProbDist {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Expectation `Σ_x w_x g(x)`.
    pub fn expect(&self, g: &[f64]) -> f64 {
        compensated_sum(self.weights.iter().zip(g).map(|(w, v)| w * v))
    }
}

/// Real function on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    values: Vec<f64>,
}

impl Observable {
    pub fn new(values: Vec<f64>) -> Result<Self, MarkovError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MarkovError::NonFiniteObservable);
        }
        Ok(Observable { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_centered(&self, pi: &ProbDist) -> bool {
        pi.expect(&self.values).abs() <= CENTERED_TOL
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ‖f‖_∞
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ‖f⁺‖_∞ with `f⁺ = max(f, 0)`.
    pub fn positive_part_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn negated(&self) -> Observable {
        Observable {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Observable {
        Observable {
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }
}

/// Irreducible generator together with its invariant distribution, a
/// centered observable and an initial distribution.
#[derive(Debug, Clone)]
pub struct MJPModel {
    pub q: QMatrix,
    pub pi: ProbDist,
    /// Centered observable `f − π(f)`.
    pub f: Observable,
    pub nu: ProbDist,
    /// Observable as supplied, before centering.
    pub f_raw: Observable,
    pub labels: Vec<String>,
    pub seed: Option<u64>,
}

impl MJPModel {
    /// Builds a model: checks irreducibility, solves for π and centers `f`.
    /// `nu` defaults to the point mass at state 0.
    pub fn new(q: QMatrix, f: Observable, nu: Option<ProbDist>) -> Result<Self, MarkovError> {
        let n = q.n();
        if f.len() != n {
            return Err(MarkovError::DimensionMismatch {
                expected: n,
                got: f.len(),
            });
        }
        let nu = nu.unwrap_or_else(|| ProbDist::point_mass(n, 0));
        if nu.len() != n {
            return Err(MarkovError::DimensionMismatch {
                expected: n,
                got: nu.len(),
            });
        }
        let pi = invariant_distribution(&q)?;
        let centered = center_observable(&f, &pi);
        Ok(MJPModel {
            q,
            pi,
            f: centered,
            nu,
            f_raw: f,
            labels: (0..n).map(|i| format!("s{i}")).collect(),
            seed: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    /// Same chain and initial law with the observable replaced by `−f`.
    pub fn negated(&self) -> MJPModel {
        MJPModel {
            f: self.f.negated(),
            f_raw: self.f_raw.negated(),
            ..self.clone()
        }
    }

    /// Same chain with the initial law replaced.
    pub fn with_initial(&self, nu: ProbDist) -> MJPModel {
        MJPModel {
            nu,
            ..self.clone()
        }
    }
}

/// Validates a raw rate matrix and recomputes the diagonal from the
/// off-diagonal rates.
///
/// Negative off-diagonal entries within `tol` of zero are clamped to 0;
/// row sums are checked before renormalization, both relative to
/// `max(1, q_x)`.
pub fn validate_q_matrix(raw: &[Vec<f64>], tol: f64) -> Result<QMatrix, MarkovError> {
    let n = raw.len();
    if raw.iter().any(|r| r.len() != n) {
        return Err(MarkovError::NonSquare);
    }
    if n < 2 {
        return Err(MarkovError::TooFewStates(n));
    }
    for (x, row) in raw.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(MarkovError::NonFinite(x, y));
            }
        }
    }
    let mut rates = DMatrix::zeros(n, n);
    for (x, row) in raw.iter().enumerate() {
        let scale = row
            .iter()
            .enumerate()
            .filter(|(y, _)| *y != x)
            .map(|(_, v)| v.abs())
            .sum::<f64>()
            .max(1.0);
        for (y, &v) in row.iter().enumerate() {
            if y != x && v < -tol * scale {
                return Err(MarkovError::NegativeRate(x, y));
            }
        }
        let row_sum = compensated_sum(row.iter().copied());
        if row_sum.abs() > tol * scale {
            return Err(MarkovError::RowSumViolation(x));
        }
        let mut exit = 0.0;
        for (y, &v) in row.iter().enumerate() {
            if y != x {
                let v = v.max(0.0);
                rates[(x, y)] = v;
                exit += v;
            }
        }
        rates[(x, x)] = -exit;
    }
    Ok(QMatrix { rates })
}

fn reachable_from(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

/// Strong connectivity of the positive-rate graph, by one forward and one
/// backward sweep from state 0.
pub fn is_irreducible(q: &QMatrix) -> bool {
    let n = q.n();
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for x in 0..n {
        for y in 0..n {
            if x != y && q.rate(x, y) > 0.0 {
                fwd[x].push(y);
                bwd[y].push(x);
            }
        }
    }
    reachable_from(&fwd, 0).into_iter().all(|b| b) && reachable_from(&bwd, 0).into_iter().all(|b| b)
}

/// Solves `πᵀQ = 0, Σπ = 1` directly, replacing the last equation of
/// `Qᵀπ = 0` by the normalization row.
pub fn invariant_distribution(q: &QMatrix) -> Result<ProbDist, MarkovError> {
    if !is_irreducible(q) {
        return Err(MarkovError::NotIrreducible);
    }
    let n = q.n();
    let mut a = q.matrix().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(MarkovError::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(MarkovError::SingularSystem);
    }
    let total = compensated_sum(x.iter().copied());
    Ok(ProbDist {
        weights: x.iter().map(|v| v / total).collect(),
    })
}

/// `P(t) = exp(tQ)` by scaling and squaring; tiny negative entries from
/// rounding are clamped to zero.
pub fn transition_matrix(q: &QMatrix, t: f64) -> DMatrix<f64> {
    assert!(t >= 0.0, "transition_matrix needs t >= 0");
    let mut p = expm(&(q.matrix() * t));
    p.apply(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
    p
}

/// `max_{x,y} |π_x q_xy − π_y q_yx| ≤ tol`.
pub fn check_detailed_balance(q: &QMatrix, pi: &ProbDist, tol: f64) -> bool {
    let n = q.n();
    let w = pi.weights();
    (0..n).all(|x| {
        (0..n).all(|y| (w[x] * q.rate(x, y) - w[y] * q.rate(y, x)).abs() <= tol)
    })
}

/// `f − π(f)·1`. An input with `π(f) == 0` exactly is returned unchanged.
pub fn center_observable(f: &Observable, pi: &ProbDist) -> Observable {
    let mean = pi.expect(f.values());
    if mean == 0.0 {
        return f.clone();
    }
    let once: Vec<f64> = f.values().iter().map(|v| v - mean).collect();
    // second pass removes the rounding residue of the first
    let residue = pi.expect(&once);
    Observable {
        values: once.into_iter().map(|v| v - residue).collect(),
    }
}
