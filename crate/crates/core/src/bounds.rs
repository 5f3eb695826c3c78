//! Upper bounds on `ℙ_ν(A_t/t ≥ u)` of the form
//! `min(1, ‖dν/dπ‖₂·e^{−tα(u)})` for several rate functions `α`, plus
//! lower-tail, two-sided and replicated variants and the
//! Donsker–Varadhan information.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{MJPModel, Observable, ProbDist, QMatrix};
use crate::spectral::{sigma_hat_sq, spectral_decomposition, variance_pi, SpectralData, SpectralError};
use crate::tilted::{
    bernstein_conjugate, chi2_prefactor, cramer_transform_static, fenchel_conjugate, lambda0_star,
    r_cap, rate_function_variational, BernsteinParams, ConjugateOptions, TiltedError,
};

/// Violation level above which an F-Sobolev witness counts.
pub const SOBOLEV_VIOLATION_TOL: f64 = 1e-8;
const SOBOLEV_SWEEP_POINTS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Tilted(#[from] TiltedError),
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("F-Sobolev inequality not verified for this model")]
    FSobolevNotVerified,
    #[error("the fsobolev family needs a Sobolev function")]
    MissingSobolev,
    #[error("brute-force check supports two or three states, got {0}")]
    DimensionTooLarge(usize),
    #[error("level {u} outside [{lo}, {hi}]")]
    InfeasibleSlice { u: f64, lo: f64, hi: f64 },
    #[error("unknown bound family `{0}`")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    General,
    Perturbation,
    Poincare,
    Fsobolev,
    BernsteinGeneral,
    /// A caller-supplied rate through the information inequality.
    Information,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 5] = [
        BoundFamily::General,
        BoundFamily::Perturbation,
        BoundFamily::Poincare,
        BoundFamily::Fsobolev,
        BoundFamily::BernsteinGeneral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::General => "general",
            BoundFamily::Perturbation => "perturbation",
            BoundFamily::Poincare => "poincare",
            BoundFamily::Fsobolev => "fsobolev",
            BoundFamily::BernsteinGeneral => "bernstein_general",
            BoundFamily::Information => "information",
        }
    }

    /// Parses `all` or a comma-separated list of family names.
    pub fn parse_list(s: &str) -> Result<Vec<BoundFamily>, BoundsError> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundFamily {
    type Err = BoundsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            BoundFamily::General,
            BoundFamily::Perturbation,
            BoundFamily::Poincare,
            BoundFamily::Fsobolev,
            BoundFamily::BernsteinGeneral,
            BoundFamily::Information,
        ]
        .into_iter()
        .find(|fam| fam.name() == s)
        .ok_or_else(|| BoundsError::UnknownFamily(s.to_string()))
    }
}

/// Model plus the spectral constants every bound family draws on.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: MJPModel,
    pub sd: SpectralData,
    /// Asymptotic variance `−2⟨Sf, f⟩_π`.
    pub sigma_hat_sq: f64,
    /// `2·Var_π(f)·C_P` with Poincaré constant `C_P` (default `1/λ₁`).
    pub sigma_tilde_sq: f64,
    pub poincare_constant: f64,
    pub gap: f64,
    pub f_sup: f64,
    pub f_pos_sup: f64,
    pub prefactor: f64,
}

impl Analysis {
    pub fn new(model: MJPModel) -> Result<Self, BoundsError> {
        let sd = spectral_decomposition(&model.q, &model.pi)?;
        let s2 = sigma_hat_sq(&sd, &model.f)?;
        let gap = sd.gap;
        let var = variance_pi(&model.pi, model.f.values());
        Ok(Analysis {
            sigma_hat_sq: s2,
            sigma_tilde_sq: 2.0 * var / gap,
            poincare_constant: 1.0 / gap,
            gap,
            f_sup: model.f.sup_norm(),
            f_pos_sup: model.f.positive_part_sup(),
            prefactor: chi2_prefactor(&model.nu, &model.pi),
            sd,
            model,
        })
    }

    /// Replaces the Poincaré constant; `1/λ₁` is the smallest valid one.
    pub fn with_poincare_constant(mut self, c: f64) -> Self {
        let var = variance_pi(&self.model.pi, self.model.f.values());
        self.poincare_constant = c;
        self.sigma_tilde_sq = 2.0 * var * c;
        self
    }

    /// Same chain and initial law with `f → −f`.
    pub fn negated(&self) -> Analysis {
        Analysis {
            model: self.model.negated(),
            f_pos_sup: self.model.f.negated().positive_part_sup(),
            ..self.clone()
        }
    }

    /// Parameters of the sub-gamma form behind each closed-form family.
    pub fn perturbation_params(&self) -> BernsteinParams {
        BernsteinParams {
            v: self.sigma_hat_sq,
            c: 2.0 * self.f_sup / self.gap,
        }
    }

    pub fn poincare_params(&self) -> BernsteinParams {
        BernsteinParams {
            v: self.sigma_tilde_sq,
            c: self.f_sup * self.poincare_constant,
        }
    }

    pub fn bernstein_general_params(&self) -> BernsteinParams {
        BernsteinParams {
            v: self.sigma_hat_sq,
            c: self.f_pos_sup / self.gap,
        }
    }

    /// Level `2σ̂²λ₁/‖f‖_∞` up to which the quadratic branch of the
    /// perturbation bound applies.
    pub fn perturbation_threshold(&self) -> f64 {
        if self.f_sup == 0.0 {
            return f64::INFINITY;
        }
        2.0 * self.sigma_hat_sq * self.gap / self.f_sup
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            sigma_hat_sq: self.sigma_hat_sq,
            sigma_tilde_sq: self.sigma_tilde_sq,
            gap: self.gap,
            f_sup: self.f_sup,
            f_pos_sup: self.f_pos_sup,
            prefactor: self.prefactor,
            perturbation_threshold: self.perturbation_threshold(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub sigma_hat_sq: f64,
    pub sigma_tilde_sq: f64,
    pub gap: f64,
    pub f_sup: f64,
    pub f_pos_sup: f64,
    pub prefactor: f64,
    pub perturbation_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPoint {
    pub family: BoundFamily,
    pub u: f64,
    pub t: f64,
    pub rate: f64,
    pub prefactor: f64,
    /// `prefactor·e^{−t·rate}` before clamping.
    pub raw: f64,
    pub bound: f64,
    pub branch: Option<String>,
    pub notes: Vec<String>,
}

impl BoundPoint {
    fn new(family: BoundFamily, u: f64, t: f64, rate: f64, prefactor: f64) -> Self {
        let rate = rate.max(0.0);
        let raw = if rate.is_infinite() {
            0.0
        } else {
            prefactor * (-t * rate).exp()
        };
        BoundPoint {
            family,
            u,
            t,
            rate,
            prefactor,
            raw,
            bound: raw.min(1.0),
            branch: None,
            notes: Vec::new(),
        }
    }

    fn with_branch(mut self, b: &str) -> Self {
        self.branch = Some(b.to_string());
        self
    }

    fn with_note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCurve {
    pub family: BoundFamily,
    pub t: f64,
    pub points: Vec<BoundPoint>,
    pub diagnostics: Diagnostics,
}

fn check_t(t: f64) -> Result<(), BoundsError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::NonPositiveHorizon(t))
    }
}

pub fn rate_general(a: &Analysis, u: f64) -> Result<f64, BoundsError> {
    if u <= 0.0 {
        return Ok(0.0);
    }
    Ok(lambda0_star(&a.sd, &a.model.f, u)?.value)
}

pub fn bound_general(a: &Analysis, t: f64, u: f64) -> Result<BoundPoint, BoundsError> {
    check_t(t)?;
    if u <= 0.0 {
        return Ok(BoundPoint::new(BoundFamily::General, u, t, 0.0, a.prefactor));
    }
    let res = lambda0_star(&a.sd, &a.model.f, u)?;
    let mut p = BoundPoint::new(BoundFamily::General, u, t, res.value, a.prefactor);
    if res.boundary {
        p = p.with_note("supremum approached at the end of the r-bracket");
    }
    if let Some(r) = res.argmax_r {
        p = p.with_note(format!("argmax r = {r:.6e}"));
    }
    Ok(p)
}

/// Rate of the perturbation-theory bound and its branch label.
pub fn rate_perturbation(a: &Analysis, u: f64) -> (f64, &'static str) {
    if u <= 0.0 {
        return (0.0, "a");
    }
    if u <= a.perturbation_threshold() {
        (bernstein_conjugate(a.perturbation_params(), u), "a")
    } else {
        let s = a.gap / (3.0 * a.f_sup);
        (s * (u - a.gap * a.sigma_hat_sq / (2.0 * a.f_sup)), "b")
    }
}

pub fn bound_perturbation(a: &Analysis, t: f64, u: f64) -> Result<BoundPoint, BoundsError> {
    check_t(t)?;
    let (rate, branch) = rate_perturbation(a, u);
    Ok(BoundPoint::new(BoundFamily::Perturbation, u, t, rate, a.prefactor)
        .with_branch(branch)
        .with_note(format!("threshold u = {:.6e}", a.perturbation_threshold())))
}

pub fn rate_poincare(a: &Analysis, u: f64) -> f64 {
    bernstein_conjugate(a.poincare_params(), u)
}

pub fn bound_poincare(a: &Analysis, t: f64, u: f64) -> Result<BoundPoint, BoundsError> {
    check_t(t)?;
    Ok(BoundPoint::new(BoundFamily::Poincare, u, t, rate_poincare(a, u), a.prefactor)
        .with_note("sub-gamma conjugate with v = 2Var(f)·C, c = ‖f‖∞·C, u inside the root"))
}

pub fn rate_bernstein_general(a: &Analysis, u: f64) -> f64 {
    bernstein_conjugate(a.bernstein_general_params(), u)
}

pub fn bound_bernstein_general(a: &Analysis, t: f64, u: f64) -> Result<BoundPoint, BoundsError> {
    check_t(t)?;
    Ok(BoundPoint::new(
        BoundFamily::BernsteinGeneral,
        u,
        t,
        rate_bernstein_general(a, u),
        a.prefactor,
    ))
}

/// `r²(σ̂²/2)/(1 − r‖f⁺‖_∞/λ₁)`, the upper bound on `λ₀(r)` behind the
/// general Bernstein rate.
pub fn lambda0_bernstein_bound(a: &Analysis, r: f64) -> f64 {
    crate::tilted::subgamma_cumulant(a.bernstein_general_params(), r)
}

/// Strictly increasing concave `F` with `F(1) = 0`, used in
/// `π(g²F(g²)) ≤ −⟨Lg, g⟩_π` for `‖g‖₂ = 1`.
pub trait SobolevFunction: fmt::Debug + Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn inverse(&self, y: f64) -> f64;
    /// `lim_{x↓0} F(x)`, possibly `−∞`.
    fn at_zero(&self) -> f64;
    fn describe(&self) -> String;

    /// Closed-form rate, when one exists.
    fn rate(&self, _pi: &ProbDist, _f: &Observable, _u: f64) -> Option<Result<f64, TiltedError>> {
        None
    }
}

/// `F = C·log`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSobolev {
    pub c: f64,
}

impl SobolevFunction for LogSobolev {
    fn value(&self, x: f64) -> f64 {
        self.c * x.ln()
    }

    fn inverse(&self, y: f64) -> f64 {
        (y / self.c).exp()
    }

    fn at_zero(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn describe(&self) -> String {
        format!("log-Sobolev C = {:e}", self.c)
    }

    /// `C·Ψ*(u)` with `Ψ` the log-MGF of `f(X₀)`, `X₀ ~ π`.
    fn rate(&self, pi: &ProbDist, f: &Observable, u: f64) -> Option<Result<f64, TiltedError>> {
        Some(cramer_transform_static(pi, f, u).map(|r| self.c * r.value))
    }
}

/// `F(x) = C(x^p − 1)` for `0 < p < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSobolev {
    pub c: f64,
    pub p: f64,
}

impl SobolevFunction for PowerSobolev {
    fn value(&self, x: f64) -> f64 {
        self.c * (x.powf(self.p) - 1.0)
    }

    fn inverse(&self, y: f64) -> f64 {
        (1.0 + y / self.c).max(0.0).powf(1.0 / self.p)
    }

    fn at_zero(&self) -> f64 {
        -self.c
    }

    fn describe(&self) -> String {
        format!("power-Sobolev C = {:e}, p = {}", self.c, self.p)
    }
}

/// Certified lower bound on the log-Sobolev constant from the spectral
/// gap: `α ≥ (1 − 2π_*)·λ₁ / log(1/π_* − 1)`, `π_* = min π`, with the
/// limit `λ₁/2` at `π_* = 1/2`.
pub fn log_sobolev_from_gap(a: &Analysis) -> LogSobolev {
    let p = a.model.pi.min_weight();
    let factor = if (0.5 - p).abs() < 1e-9 {
        0.5
    } else {
        (1.0 - 2.0 * p) / (1.0 / p - 1.0).ln()
    };
    LogSobolev { c: factor * a.gap }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Holds { max_violation: f64 },
    Violated { witness: Vec<f64>, violation: f64 },
    Inconclusive { max_violation: f64 },
}

/// `π(g²F(g²)) + ⟨Lg, g⟩_π` at `g = D^{-1/2}y`.
fn sobolev_violation(a: &Analysis, sob: &dyn SobolevFunction, y: &[f64]) -> f64 {
    let w = a.model.pi.weights();
    let b = a.sd.euclid_sym();
    let mut lhs = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let y2 = yi * yi;
        if y2 > 0.0 {
            lhs += y2 * sob.value(y2 / w[i]);
        }
    }
    let yv = DVector::from_row_slice(y);
    lhs + yv.dot(&(b * &yv))
}

fn to_function(a: &Analysis, y: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(a.model.pi.weights())
        .map(|(v, w)| v / w.sqrt())
        .collect()
}

/// Searches the unit sphere of `L²(π)` for a violation of the F-Sobolev
/// inequality.
///
/// Two states: dense angle sweep with local refinement, so `Holds` can be
/// returned. More states: projected gradient ascent from `restarts`
/// random starting points; the verdict is `Violated` or `Inconclusive`.
pub fn check_f_sobolev(a: &Analysis, sob: &dyn SobolevFunction, restarts: usize, seed: u64) -> Verdict {
    let n = a.model.n();
    if n == 2 {
        let v = |th: f64| sobolev_violation(a, sob, &[th.cos(), th.sin()]);
        let step = std::f64::consts::PI / SOBOLEV_SWEEP_POINTS as f64;
        let (mut best_th, mut best) = (0.0, f64::NEG_INFINITY);
        for k in 0..SOBOLEV_SWEEP_POINTS {
            let th = k as f64 * step;
            let val = v(th);
            if val > best {
                best = val;
                best_th = th;
            }
        }
        let (th, val) = golden_max(&v, best_th - step, best_th + step);
        if val > best {
            best = val;
            best_th = th;
        }
        return if best > SOBOLEV_VIOLATION_TOL {
            Verdict::Violated {
                witness: to_function(a, &[best_th.cos(), best_th.sin()]),
                violation: best,
            }
        } else {
            Verdict::Holds { max_violation: best }
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut best_y = vec![0.0; n];
    for _ in 0..restarts.max(1) {
        let mut y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        normalize(&mut y);
        let (yy, val) = ascend(a, sob, y);
        if val > best {
            best = val;
            best_y = yy;
        }
    }
    if best > SOBOLEV_VIOLATION_TOL {
        Verdict::Violated {
            witness: to_function(a, &best_y),
            violation: best,
        }
    } else {
        Verdict::Inconclusive { max_violation: best }
    }
}

fn normalize(y: &mut [f64]) {
    let s = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    y.iter_mut().for_each(|v| *v /= s);
}

fn ascend(a: &Analysis, sob: &dyn SobolevFunction, mut y: Vec<f64>) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut val = sobolev_violation(a, sob, &y);
    let mut eta = 0.1;
    for _ in 0..500 {
        let h = 1e-7;
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                let mut p = y.clone();
                let mut m = y.clone();
                p[i] += h;
                m[i] -= h;
                (sobolev_violation(a, sob, &p) - sobolev_violation(a, sob, &m)) / (2.0 * h)
            })
            .collect();
        let mut improved = false;
        while eta > 1e-12 {
            let mut cand: Vec<f64> = y.iter().zip(&grad).map(|(v, g)| v + eta * g).collect();
            normalize(&mut cand);
            let cv = sobolev_violation(a, sob, &cand);
            if cv > val {
                y = cand;
                val = cv;
                eta *= 1.5;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (y, val)
}

fn golden_max(obj: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const G: f64 = 0.618_033_988_749_894_9;
    let mut c = b - G * (b - a);
    let mut d = a + G * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..100 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - G * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + G * (b - a);
            fd = obj(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// A Sobolev function together with the grounds for using it.
#[derive(Debug, Clone)]
pub struct FSobolevCertificate {
    pub function: Arc<dyn SobolevFunction>,
    /// `true` when the caller vouches for the inequality instead of a
    /// passing check.
    pub assumed: bool,
}

impl FSobolevCertificate {
    /// Runs [`check_f_sobolev`] and issues a certificate on `Holds`.
    pub fn verify(
        a: &Analysis,
        function: Arc<dyn SobolevFunction>,
        restarts: usize,
        seed: u64,
    ) -> Result<Self, BoundsError> {
        match check_f_sobolev(a, function.as_ref(), restarts, seed) {
            Verdict::Holds { .. } => Ok(FSobolevCertificate {
                function,
                assumed: false,
            }),
            _ => Err(BoundsError::FSobolevNotVerified),
        }
    }

    pub fn assume(function: Arc<dyn SobolevFunction>) -> Self {
        FSobolevCertificate {
            function,
            assumed: true,
        }
    }
}

/// `sup_{r ∈ [0, r_f)} (ru − F(π(F⁻¹(rf))))`, `r_f = F(0)/min f`.
pub fn rate_fsobolev(a: &Analysis, u: f64, sob: &dyn SobolevFunction) -> Result<f64, BoundsError> {
    let f = &a.model.f;
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u > f.max() {
        return Ok(f64::INFINITY);
    }
    if let Some(r) = sob.rate(&a.model.pi, f, u) {
        return Ok(r?);
    }
    let rf = sob.at_zero() / f.min();
    let end = if rf.is_finite() && rf > 0.0 {
        rf * (1.0 - 1e-9)
    } else {
        r_cap(f)
    };
    let w = a.model.pi.weights();
    let fv = f.values();
    let g = |r: f64| {
        let m: f64 = w.iter().zip(fv).map(|(p, x)| p * sob.inverse(r * x)).sum();
        sob.value(m)
    };
    let opts = ConjugateOptions {
        initial_r: end.min(1.0),
        domain_end: end,
        xtol: 1e-12,
    };
    Ok(fenchel_conjugate(g, u, &opts)?.value)
}

pub fn bound_fsobolev(
    a: &Analysis,
    t: f64,
    u: f64,
    cert: &FSobolevCertificate,
) -> Result<BoundPoint, BoundsError> {
    check_t(t)?;
    let rate = rate_fsobolev(a, u, cert.function.as_ref())?;
    let mut p = BoundPoint::new(BoundFamily::Fsobolev, u, t, rate, a.prefactor)
        .with_note(cert.function.describe());
    if cert.assumed {
        p = p.with_note("inequality assumed, not verified");
    }
    Ok(p)
}

/// Evaluates one family at one level.
pub fn bound_family(
    a: &Analysis,
    family: BoundFamily,
    t: f64,
    u: f64,
    cert: Option<&FSobolevCertificate>,
) -> Result<BoundPoint, BoundsError> {
    match family {
        BoundFamily::General => bound_general(a, t, u),
        BoundFamily::Perturbation => bound_perturbation(a, t, u),
        BoundFamily::Poincare => bound_poincare(a, t, u),
        BoundFamily::BernsteinGeneral => bound_bernstein_general(a, t, u),
        BoundFamily::Fsobolev => bound_fsobolev(a, t, u, cert.ok_or(BoundsError::MissingSobolev)?),
        BoundFamily::Information => Err(BoundsError::UnknownFamily(
            "information bounds need a rate function; use bound_via_alpha".into(),
        )),
    }
}

/// A family over a grid of levels, evaluated in parallel.
pub fn bound_curve(
    a: &Analysis,
    family: BoundFamily,
    t: f64,
    us: &[f64],
    cert: Option<&FSobolevCertificate>,
) -> Result<BoundCurve, BoundsError> {
    let points = us
        .par_iter()
        .map(|&u| bound_family(a, family, t, u, cert))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BoundCurve {
        family,
        t,
        points,
        diagnostics: a.diagnostics(),
    })
}

/// `I(β|π) = −⟨L√(dβ/dπ), √(dβ/dπ)⟩_π`.
pub fn donsker_varadhan_info(q: &QMatrix, pi: &ProbDist, beta: &ProbDist) -> f64 {
    let w = pi.weights();
    let g: Vec<f64> = beta
        .weights()
        .iter()
        .zip(w)
        .map(|(b, p)| (b / p).sqrt())
        .collect();
    let qg = q.matrix() * DVector::from_row_slice(&g);
    let v = -crate::linalg::compensated_sum((0..g.len()).map(|x| w[x] * g[x] * qg[x]));
    if (-1e-12..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoReport {
    pub u: f64,
    pub infimum: f64,
    pub argmin: Vec<f64>,
    pub lambda0_star: f64,
    pub gap: f64,
}

/// Brute-force `inf{I(β|π) : β(f) = u}` over the simplex, compared with
/// `λ₀*(u)`. Two states: the slice is one point. Three states: the slice
/// is a segment, scanned on `grid` points and refined locally.
pub fn verify_info_representation(a: &Analysis, u: f64, grid: usize) -> Result<InfoReport, BoundsError> {
    let n = a.model.n();
    let f = a.model.f.values();
    let (lo, hi) = (a.model.f.min(), a.model.f.max());
    if u < lo - 1e-12 || u > hi + 1e-12 {
        return Err(BoundsError::InfeasibleSlice { u, lo, hi });
    }
    let u = u.clamp(lo, hi);
    let info = |beta: &[f64]| -> f64 {
        let b: Vec<f64> = beta.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = b.iter().sum();
        let b = ProbDist::new(b.iter().map(|v| v / s).collect()).expect("normalized weights");
        donsker_varadhan_info(&a.model.q, &a.model.pi, &b)
    };
    let (infimum, argmin) = match n {
        2 => {
            let b0 = if f[0] == f[1] { 0.5 } else { (u - f[1]) / (f[0] - f[1]) };
            let beta = vec![b0, 1.0 - b0];
            (info(&beta), beta)
        }
        3 => {
            let (p, q) = slice_endpoints(f, u);
            let point = |s: f64| -> Vec<f64> { (0..3).map(|i| p[i] + s * (q[i] - p[i])).collect() };
            let obj = |s: f64| info(&point(s));
            let m = grid.max(2);
            let (mut best_s, mut best) = (0.0, f64::INFINITY);
            for k in 0..=m {
                let s = k as f64 / m as f64;
                let v = obj(s);
                if v < best {
                    best = v;
                    best_s = s;
                }
            }
            let h = 1.0 / m as f64;
            let (s, v) = golden_max(&|s: f64| -obj(s.clamp(0.0, 1.0)), (best_s - h).max(0.0), (best_s + h).min(1.0));
            if -v < best {
                best = -v;
                best_s = s.clamp(0.0, 1.0);
            }
            (best, point(best_s))
        }
        _ => return Err(BoundsError::DimensionTooLarge(n)),
    };
    let l = if u == 0.0 {
        0.0
    } else {
        lambda0_star(&a.sd, &a.model.f, u)?.value
    };
    Ok(InfoReport {
        u,
        infimum,
        argmin,
        lambda0_star: l,
        gap: (infimum - l).abs(),
    })
}

/// End points of `{β ∈ simplex : Σ β_i f_i = u}` for three states.
fn slice_endpoints(f: &[f64], u: f64) -> ([f64; 3], [f64; 3]) {
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        // β on the edge e_i–e_j: β_i = s, β_j = 1 − s
        if f[i] == f[j] {
            if f[i] == u {
                let mut a = [0.0; 3];
                a[i] = 1.0;
                pts.push(a);
                let mut b = [0.0; 3];
                b[j] = 1.0;
                pts.push(b);
            }
            continue;
        }
        let s = (u - f[j]) / (f[i] - f[j]);
        if (0.0..=1.0).contains(&s) {
            let mut a = [0.0; 3];
            a[i] = s;
            a[j] = 1.0 - s;
            pts.push(a);
        }
    }
    let dist = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|k| (a[k] - b[k]).abs()).sum::<f64>();
    let mut best = (pts[0], pts[0]);
    let mut far = -1.0;
    for a in &pts {
        for b in &pts {
            let d = dist(a, b);
            if d > far {
                far = d;
                best = (*a, *b);
            }
        }
    }
    best
}

/// Bound from a rate function `α` that the caller asserts satisfies
/// `α(β(f)) ≤ I(β|π)`. For models with at most three states the
/// assertion is spot-checked against the information rate at `u`.
pub fn bound_via_alpha(
    a: &Analysis,
    t: f64,
    u: f64,
    alpha: impl Fn(f64) -> f64,
) -> Result<BoundPoint, BoundsError> {
    check_t(t)?;
    let rate = alpha(u);
    let mut p = BoundPoint::new(BoundFamily::Information, u, t, rate, a.prefactor);
    if a.model.n() <= 3 && u > 0.0 && u <= a.model.f.max() {
        if let Ok(i) = rate_function_variational(&a.sd, &a.model.f, u) {
            if rate > i + 1e-8 {
                p = p.with_note(format!("alpha(u) = {rate:e} exceeds the information rate {i:e}"));
            }
        }
    }
    Ok(p)
}

/// `ℙ_ν(A_t/t ≤ u)` for `u ≤ 0`, from the family applied to `−f` at `−u`.
pub fn lower_tail(
    a: &Analysis,
    t: f64,
    u: f64,
    family: BoundFamily,
    cert: Option<&FSobolevCertificate>,
) -> Result<BoundPoint, BoundsError> {
    let neg = a.negated();
    let mut p = bound_family(&neg, family, t, -u, cert)?;
    p.u = u;
    p.notes.push("lower tail via f -> -f".into());
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSidedBound {
    pub upper: BoundPoint,
    pub lower: BoundPoint,
    /// `upper.bound + lower.bound`.
    pub sum: f64,
    pub bound: f64,
}

/// `ℙ_ν(|A_t/t| ≥ u)` for `u > 0` by adding both tails.
pub fn two_sided(
    a: &Analysis,
    t: f64,
    u: f64,
    family: BoundFamily,
    cert: Option<&FSobolevCertificate>,
) -> Result<TwoSidedBound, BoundsError> {
    let upper = bound_family(a, family, t, u, cert)?;
    let lower = lower_tail(a, t, -u, family, cert)?;
    let sum = upper.bound + lower.bound;
    Ok(TwoSidedBound {
        upper,
        lower,
        sum,
        bound: sum.min(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IidBound {
    pub n_replicas: u32,
    /// `prefactorⁿ·e^{−n·t·α}`, clamped to 1.
    pub bound: f64,
    /// `prefactor·e^{−n·t·α}`, clamped to 1; valid when the replicas
    /// start from `π`-dominated laws sharing one density bound.
    pub single_prefactor_bound: f64,
}

/// Tail of the average of `n` independent copies of `A_t/t` at level `u`,
/// given one copy's rate `α(u)` and prefactor.
pub fn iid_sum_bound(rate: f64, prefactor: f64, t: f64, n_replicas: u32) -> IidBound {
    let n = n_replicas.max(1) as f64;
    let decay = if rate.is_infinite() { 0.0 } else { (-n * t * rate).exp() };
    IidBound {
        n_replicas: n_replicas.max(1),
        bound: (prefactor.powf(n) * decay).min(1.0),
        single_prefactor_bound: (prefactor * decay).min(1.0),
    }
}
