//! Feynman–Kac tilts and Fenchel conjugation.
//!
//! `λ₀(r)` is the top eigenvalue of the selfadjoint operator
//! `(L + L*)/2 + r·M_f` on `L²(π)`; its conjugate `λ₀*(u)` is the rate in
//! the general concentration inequality. Conjugates are computed by
//! golden-section search on the concave map `r ↦ ru − G(r)`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use twofloat::TwoFloat;

use crate::extended::{lambda0_secular, EigenFrame};
use crate::linalg::{self, expm, jacobi_eigen, LinalgError};
use crate::markov::{Observable, ProbDist, QMatrix};
use crate::spectral::SpectralData;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Relative bracket width at which golden-section search stops.
const GOLDEN_XTOL: f64 = 1e-11;
const MAX_GOLDEN_ITERS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TiltedError {
    #[error("function returned a non-finite value at r = {0}")]
    NonFinite(f64),
    #[error("oracle supports at most three states, got {0}")]
    DimensionTooLarge(usize),
    #[error("level {u} lies outside [{lo}, {hi}]")]
    InfeasibleLevel { u: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome of `sup_{r ∈ [0, R)} (ru − G(r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateResult {
    pub u: f64,
    /// Clamped to be ≥ 0; `+∞` when the supremum diverges.
    pub value: f64,
    pub argmax_r: Option<f64>,
    /// `true` when an interior maximizer was bracketed.
    pub converged: bool,
    /// `true` when the search ran into the end of the domain while the
    /// objective was still increasing.
    pub boundary: bool,
}

impl ConjugateResult {
    pub fn infinite(u: f64) -> Self {
        ConjugateResult {
            u,
            value: f64::INFINITY,
            argmax_r: None,
            converged: true,
            boundary: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Variance factor and scale of a sub-gamma cumulant bound
/// `r²v / (2(1 − cr))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernsteinParams {
    pub v: f64,
    pub c: f64,
}

/// Search controls for [`fenchel_conjugate`].
#[derive(Debug, Clone, Copy)]
pub struct ConjugateOptions {
    /// First trial point of the geometric bracket expansion.
    pub initial_r: f64,
    /// Right end of the domain; `G` is only evaluated below it.
    pub domain_end: f64,
    pub xtol: f64,
}

impl ConjugateOptions {
    pub fn unbounded(cap: f64) -> Self {
        ConjugateOptions {
            initial_r: 1.0,
            domain_end: cap,
            xtol: GOLDEN_XTOL,
        }
    }
}

/// Numerical Fenchel conjugate over `[0, domain_end]`.
///
/// The bracket starts at `initial_r` and doubles until the objective
/// decreases over the last doubling or the domain end is reached; a
/// golden-section search then locates the maximizer. `G` may return `+∞`
/// (treated as a decrease) but never NaN.
pub fn fenchel_conjugate<G: Fn(f64) -> f64>(
    g: G,
    u: f64,
    opts: &ConjugateOptions,
) -> Result<ConjugateResult, TiltedError> {
    let h = |r: f64| -> Result<f64, TiltedError> {
        let v = g(r);
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(TiltedError::NonFinite(r));
        }
        Ok(r * u - v)
    };
    let end = opts.domain_end;
    let h0 = h(0.0)?;

    let mut before = 0.0;
    let mut prev = 0.0;
    let mut h_prev = h0;
    let mut x = opts.initial_r.min(end);
    let mut boundary = false;
    let (lo, hi) = loop {
        let hx = h(x)?;
        if hx < h_prev {
            break (before, x);
        }
        if x >= end {
            boundary = true;
            break (prev, end);
        }
        before = prev;
        prev = x;
        h_prev = hx;
        x = (2.0 * x).min(end);
    };

    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut hc = h(c)?;
    let mut hd = h(d)?;
    let mut iters = 0;
    while (b - a) > opts.xtol * (1.0 + a.abs() + b.abs()) && iters < MAX_GOLDEN_ITERS {
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - GOLDEN * (b - a);
            hc = h(c)?;
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + GOLDEN * (b - a);
            hd = h(d)?;
        }
        iters += 1;
    }
    let mut best_r = if hc >= hd { c } else { d };
    let mut best = hc.max(hd);
    for (r, v) in [(lo, h(lo)?), (hi, h(hi)?)] {
        if v > best {
            best = v;
            best_r = r;
        }
    }
    if h0 >= best {
        best = h0;
        best_r = 0.0;
    }
    if boundary && best_r < end * (1.0 - 1e-6) {
        boundary = false;
    }
    Ok(ConjugateResult {
        u,
        value: best.max(0.0),
        argmax_r: Some(best_r),
        converged: !boundary,
        boundary,
    })
}

/// Closed-form conjugate of `r ↦ r²v / (2(1 − rc))` on `[0, 1/c)`:
/// `2u² / (v(1 + √(1 + 2uc/v))²)`, and `u²/(2v)` at `c = 0`.
pub fn bernstein_conjugate(bp: BernsteinParams, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if bp.v <= 0.0 {
        // degenerate cumulant r ↦ 0 on [0, 1/c)
        return if bp.c > 0.0 { u / bp.c } else { f64::INFINITY };
    }
    let root = (1.0 + 2.0 * u * bp.c / bp.v).sqrt();
    2.0 * u * u / (bp.v * (1.0 + root) * (1.0 + root))
}

/// Second closed form `(v/c²)(1 + uc/v − √(1 + 2uc/v))`; loses precision
/// for small `uc/v` and is kept for cross-checks.
pub fn bernstein_conjugate_expanded(bp: BernsteinParams, u: f64) -> f64 {
    let x = u * bp.c / bp.v;
    bp.v / (bp.c * bp.c) * (1.0 + x - (1.0 + 2.0 * x).sqrt())
}

/// The sub-gamma cumulant bound `r²v / (2(1 − rc))`, `+∞` past `1/c`.
pub fn subgamma_cumulant(bp: BernsteinParams, r: f64) -> f64 {
    let denom = 1.0 - r * bp.c;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    r * r * bp.v / (2.0 * denom)
}

/// Top eigenvalue of `(L + L*)/2 + r·M_f`.
///
/// The Jacobi estimate is refined, when `|r|·‖f‖_∞ < λ₁/2`, by Newton
/// steps on the secular equation obtained by deflating the constant
/// function (see [`crate::extended`]). This keeps relative accuracy for the
/// tiny eigenvalues near `r = 0`. Returns NaN if the eigensolver fails.
pub fn lambda0(sd: &SpectralData, f: &Observable, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let n = sd.n();
    let fv = f.values();
    let mut b = sd.euclid_sym().clone();
    for i in 0..n {
        b[(i, i)] += r * fv[i];
    }
    let jacobi = match jacobi_eigen(&b) {
        Ok(e) => e.values[0],
        Err(_) => return f64::NAN,
    };
    if r.abs() * f.sup_norm() >= 0.5 * sd.gap {
        return jacobi;
    }
    let frame = EigenFrame::new(sd, fv);
    lambda0_secular(&frame, r, jacobi).map_or(jacobi, f64::from)
}

/// `λ₀(r)` in double-double precision for `|r|·‖f‖_∞ < λ₁/2`, `None`
/// outside that range.
pub fn lambda0_extended(sd: &SpectralData, f: &Observable, r: f64) -> Option<TwoFloat> {
    if r.abs() * f.sup_norm() >= 0.5 * sd.gap {
        return None;
    }
    let start = lambda0(sd, f, r);
    lambda0_secular(&EigenFrame::new(sd, f.values()), r, start)
}

/// π-operator norm of the Feynman–Kac semigroup `exp(t(Q + r·diag f))`.
pub fn feynman_kac_norm(
    q: &QMatrix,
    pi: &ProbDist,
    f: &Observable,
    r: f64,
    t: f64,
) -> Result<f64, LinalgError> {
    let mut gen = q.matrix().clone();
    for (i, v) in f.values().iter().enumerate() {
        gen[(i, i)] += r * v;
    }
    let p = expm(&(gen * t));
    linalg::pi_operator_norm(&p, pi.weights())
}

/// `‖dν/dπ‖₂ = √(Σ ν_x²/π_x)`.
pub fn chi2_prefactor(nu: &ProbDist, pi: &ProbDist) -> f64 {
    linalg::compensated_sum(
        nu.weights()
            .iter()
            .zip(pi.weights())
            .map(|(a, b)| a * a / b),
    )
    .sqrt()
}

/// Upper end of the adaptive `r`-bracket, `10⁶·(1 + 1/‖f‖_∞)`.
pub fn r_cap(f: &Observable) -> f64 {
    let s = f.sup_norm();
    if s > 0.0 {
        1e6 * (1.0 + 1.0 / s)
    } else {
        1e6
    }
}

/// `λ₀*(u) = sup_{r ≥ 0}(ru − λ₀(r))` for `u ≥ 0`.
///
/// Returns `+∞` for `u > max f`; at `u = max f` the supremum is only
/// approached as `r → ∞` and the result carries the `boundary` flag.
/// Negative `u` is handled through `λ₀*(u; f) = λ₀*(−u; −f)`.
pub fn lambda0_star(sd: &SpectralData, f: &Observable, u: f64) -> Result<ConjugateResult, TiltedError> {
    if u < 0.0 {
        let mut res = lambda0_star(sd, &f.negated(), -u)?;
        res.u = u;
        res.argmax_r = res.argmax_r.map(|r| -r);
        return Ok(res);
    }
    if u > f.max() {
        return Ok(ConjugateResult::infinite(u));
    }
    fenchel_conjugate(|r| lambda0(sd, f, r), u, &ConjugateOptions::unbounded(r_cap(f)))
}

/// `sup_{r ≥ 0}(ru − log Σ_x π_x e^{r f(x)})`, the Cramér transform of
/// `f(X₀)` under `X₀ ~ π`.
pub fn cramer_transform_static(
    pi: &ProbDist,
    f: &Observable,
    u: f64,
) -> Result<ConjugateResult, TiltedError> {
    if u > f.max() {
        return Ok(ConjugateResult::infinite(u));
    }
    fenchel_conjugate(
        |r| log_mgf(pi, f.values(), r),
        u,
        &ConjugateOptions::unbounded(r_cap(f)),
    )
}

/// `log Σ_x π_x e^{r f(x)}` evaluated with the max shifted out.
pub fn log_mgf(pi: &ProbDist, f: &[f64], r: f64) -> f64 {
    let m = f
        .iter()
        .map(|v| r * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let s = linalg::compensated_sum(
        pi.weights()
            .iter()
            .zip(f)
            .map(|(w, v)| w * (r * v - m).exp()),
    );
    m + s.ln()
}

fn quad_form(b: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += y[i] * b[(i, j)] * y[j];
        }
    }
    s
}

/// Brute-force `I(u) = inf{−⟨Lg, g⟩_π : ‖g‖₂ = 1, ⟨M_f g, g⟩_π = u}` for
/// two or three states.
///
/// Works in `y = D^{1/2}g` on the Euclidean unit sphere. With two states
/// the constraint leaves finitely many points. With three states each
/// coordinate axis in turn serves as the pole of a spherical chart; the
/// constraint fixes the polar angle, the azimuth is scanned on a dense grid
/// and the best cells are refined by golden-section search.
pub fn rate_function_variational(
    sd: &SpectralData,
    f: &Observable,
    u: f64,
) -> Result<f64, TiltedError> {
    let n = sd.n();
    let (lo, hi) = (f.min(), f.max());
    if u < lo - 1e-12 || u > hi + 1e-12 {
        return Err(TiltedError::InfeasibleLevel { u, lo, hi });
    }
    let u = u.clamp(lo, hi);
    let b = sd.euclid_sym();
    let fv = f.values();
    match n {
        2 => Ok(variational_two(b, fv, u)),
        3 => Ok(variational_three(b, fv, u)),
        _ => Err(TiltedError::DimensionTooLarge(n)),
    }
}

fn variational_two(b: &DMatrix<f64>, f: &[f64], u: f64) -> f64 {
    if f[0] == f[1] {
        // constant (hence zero) observable: the whole sphere is feasible
        return 0.0;
    }
    let c2 = ((u - f[1]) / (f[0] - f[1])).clamp(0.0, 1.0);
    let (c, s) = (c2.sqrt(), (1.0 - c2).sqrt());
    let mut best = f64::INFINITY;
    for sc in [-1.0, 1.0] {
        for ss in [-1.0, 1.0] {
            best = best.min(-quad_form(b, &[sc * c, ss * s]));
        }
    }
    best
}

const VARIATIONAL_GRID: usize = 20_000;

fn chart_point(pole: usize, f: &[f64], u: f64, psi: f64, sign: f64) -> Option<[f64; 3]> {
    let (a, c) = ((pole + 1) % 3, (pole + 2) % 3);
    let m = f[a] * psi.cos().powi(2) + f[c] * psi.sin().powi(2);
    let denom = m - f[pole];
    if denom == 0.0 {
        return None;
    }
    let s2 = (u - f[pole]) / denom;
    if !(0.0..=1.0).contains(&s2) {
        return None;
    }
    let s = s2.sqrt();
    let cphi = sign * (1.0 - s2).sqrt();
    let mut y = [0.0; 3];
    y[pole] = cphi;
    y[a] = s * psi.cos();
    y[c] = s * psi.sin();
    Some(y)
}

fn variational_three(b: &DMatrix<f64>, f: &[f64], u: f64) -> f64 {
    let mut best = f64::INFINITY;
    let step = std::f64::consts::TAU / VARIATIONAL_GRID as f64;
    for pole in 0..3 {
        for sign in [-1.0, 1.0] {
            let obj = |psi: f64| -> f64 {
                chart_point(pole, f, u, psi, sign)
                    .map(|y| -quad_form(b, &y))
                    .unwrap_or(f64::INFINITY)
            };
            let values: Vec<f64> = (0..VARIATIONAL_GRID).map(|k| obj(k as f64 * step)).collect();
            for k in 0..VARIATIONAL_GRID {
                let v = values[k];
                if !v.is_finite() {
                    continue;
                }
                best = best.min(v);
                let left = values[(k + VARIATIONAL_GRID - 1) % VARIATIONAL_GRID];
                let right = values[(k + 1) % VARIATIONAL_GRID];
                if v <= left && v <= right {
                    let psi = k as f64 * step;
                    best = best.min(golden_min(&obj, psi - step, psi + step));
                }
            }
        }
    }
    best
}

fn golden_min(obj: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = obj(c);
    let mut fd = obj(d);
    for _ in 0..100 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = obj(d);
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    fc.min(fd)
}
