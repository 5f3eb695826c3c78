//! Taylor coefficients of `r ↦ λ₀(r)` at `r = 0` by the trace formula
//! for analytic perturbation of a simple eigenvalue:
//!
//! `λ₀⁽ⁿ⁾ = ((−1)ⁿ/n) Σ_{k₁+…+kₙ=n−1} Tr(M_f S⁽ᵏ¹⁾ ⋯ M_f S⁽ᵏⁿ⁾)`,
//!
//! with `S⁽⁰⁾ = −pr` (projection onto constants) and `S⁽ᵏ⁾ = Sᵏ`, `S` the
//! reduced resolvent of the symmetrized generator. The trace is basis
//! independent and is evaluated in the eigenbasis of the symmetrized
//! generator, in double-double precision.

use serde::Serialize;
use thiserror::Error;
use twofloat::TwoFloat;

use super::combinatorics::phi;
use crate::extended::{series_coefficients_dd, EigenFrame};
use crate::markov::Observable;
use crate::spectral::{sigma_hat_sq, SpectralData, SpectralError};

/// Highest order computed; the number of compositions is `C(2N−2, N−1)`.
pub const MAX_ORDER: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series order {0} exceeds the maximum {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("series order must be at least 1")]
    ZeroOrder,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesCoefficients {
    /// `coeffs[i]` is `λ₀⁽ⁱ⁺¹⁾`.
    pub coeffs: Vec<f64>,
    /// The same coefficients in double-double precision.
    #[serde(skip)]
    pub extended: Vec<TwoFloat>,
    pub order: usize,
}

impl SeriesCoefficients {
    /// `Σ_{n=1}^{N} λ₀⁽ⁿ⁾ rⁿ` for `N ≤ order`.
    pub fn partial_sum(&self, r: f64, upto: usize) -> f64 {
        let upto = upto.min(self.order);
        // Horner on r·(c₁ + r·(c₂ + …))
        let mut acc = 0.0;
        for c in self.coeffs[..upto].iter().rev() {
            acc = acc * r + c;
        }
        acc * r
    }

    /// [`Self::partial_sum`] in double-double precision.
    pub fn partial_sum_extended(&self, r: f64, upto: usize) -> TwoFloat {
        let upto = upto.min(self.order);
        let mut acc = TwoFloat::from(0.0);
        for c in self.extended[..upto].iter().rev() {
            acc = acc * r + *c;
        }
        acc * r
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        self.coeffs[n - 1]
    }
}

pub fn lambda0_coefficients(
    sd: &SpectralData,
    f: &Observable,
    order: usize,
) -> Result<SeriesCoefficients, SeriesError> {
    if order == 0 {
        return Err(SeriesError::ZeroOrder);
    }
    if order > MAX_ORDER {
        return Err(SeriesError::OrderTooLarge(order));
    }
    let mean = sd.pi.expect(f.values());
    if mean.abs() > 1e-10 {
        return Err(SpectralError::NotCentered(mean).into());
    }
    let extended = series_coefficients_dd(&EigenFrame::new(sd, f.values()), order);
    let coeffs = extended.iter().map(|c| f64::from(*c)).collect();
    Ok(SeriesCoefficients {
        coeffs,
        extended,
        order,
    })
}

/// `(σ̂²λ₁²/(2‖f‖²_∞))·Φ(‖f‖_∞ r/λ₁)`, an upper bound for `λ₀(r)` on
/// `0 ≤ r ≤ λ₁/(3‖f‖_∞)`. Returns `None` outside that range.
pub fn lambda0_phi_bound(sd: &SpectralData, f: &Observable, r: f64) -> Result<Option<f64>, SpectralError> {
    let s = f.sup_norm();
    if s == 0.0 {
        return Ok(Some(0.0));
    }
    let mut x = s * r / sd.gap;
    if x > 1.0 / 3.0 && x <= (1.0 + 1e-12) / 3.0 {
        x = 1.0 / 3.0;
    }
    match phi(x) {
        Ok(p) => {
            let v = sigma_hat_sq(sd, f)?;
            Ok(Some(v * sd.gap * sd.gap / (2.0 * s * s) * p))
        }
        Err(_) => Ok(None),
    }
}
