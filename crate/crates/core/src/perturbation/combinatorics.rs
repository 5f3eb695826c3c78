//! Exact integer combinatorics: Motzkin numbers, counts of rotation classes
//! of weak compositions, and the generating function `Φ`.
//!
//! Everything is `u128` with checked arithmetic; overflow is an error
//! rather than a wrap.

use std::collections::BTreeMap;

use thiserror::Error;

/// Largest `n` accepted by [`enumerate_classes`].
pub const MAX_ENUMERATION: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombinatoricsError {
    #[error("integer overflow at index {0}")]
    Overflow(usize),
    #[error("argument out of range: n = {n}, m = {m}")]
    OutOfRange { n: usize, m: usize },
    #[error("enumeration limited to n ≤ {MAX_ENUMERATION}, got {0}")]
    TooLarge(usize),
    #[error("x = {0} lies outside [0, 1/3]")]
    DomainError(f64),
}

/// `C(n, k)`, zero for `k > n`.
pub fn binomial(n: usize, k: usize) -> Result<u128, CombinatoricsError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i) is divisible by (i+1) after the multiplication
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(CombinatoricsError::Overflow(n))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// `m₀..m_N` from `m_n = m_{n−1} + Σ_{i+j=n−2} m_i m_j`.
pub fn motzkin(n_max: usize) -> Result<Vec<u128>, CombinatoricsError> {
    let mut m: Vec<u128> = Vec::with_capacity(n_max + 1);
    m.push(1);
    for n in 1..=n_max {
        let mut next = m[n - 1];
        if n >= 2 {
            for i in 0..=n - 2 {
                let term = m[i]
                    .checked_mul(m[n - 2 - i])
                    .ok_or(CombinatoricsError::Overflow(n))?;
                next = next.checked_add(term).ok_or(CombinatoricsError::Overflow(n))?;
            }
        }
        m.push(next);
    }
    Ok(m)
}

/// `m_n = Σ_k C(n, 2k)·Catalan(k)`.
pub fn motzkin_binomial(n: usize) -> Result<u128, CombinatoricsError> {
    let mut total: u128 = 0;
    for k in 0..=n / 2 {
        let catalan = binomial(2 * k, k)? / (k as u128 + 1);
        let term = binomial(n, 2 * k)?
            .checked_mul(catalan)
            .ok_or(CombinatoricsError::Overflow(n))?;
        total = total.checked_add(term).ok_or(CombinatoricsError::Overflow(n))?;
    }
    Ok(total)
}

fn check_beta_args(n: usize, m: usize) -> Result<(), CombinatoricsError> {
    if n < 2 || m == 0 || m >= n {
        return Err(CombinatoricsError::OutOfRange { n, m });
    }
    Ok(())
}

/// Number of rotation classes of weak compositions of `n − 1` into `n`
/// parts with exactly `m` zeros, no two of them cyclically adjacent:
/// `C(n−1, m)·C(n−1−m, n−2m) / (n−1)`. Zero for `m > ⌊n/2⌋`.
pub fn beta(n: usize, m: usize) -> Result<u128, CombinatoricsError> {
    check_beta_args(n, m)?;
    if 2 * m > n {
        return Ok(0);
    }
    let num = binomial(n - 1, m)?
        .checked_mul(binomial(n - 1 - m, n - 2 * m)?)
        .ok_or(CombinatoricsError::Overflow(n))?;
    debug_assert_eq!(num % (n as u128 - 1), 0);
    Ok(num / (n as u128 - 1))
}

/// Second closed form `C(n−m−1, m−1)·C(n−2, n−m−1) / m`.
pub fn beta_alternate(n: usize, m: usize) -> Result<u128, CombinatoricsError> {
    check_beta_args(n, m)?;
    if 2 * m > n {
        return Ok(0);
    }
    let num = binomial(n - m - 1, m - 1)?
        .checked_mul(binomial(n - 2, n - m - 1)?)
        .ok_or(CombinatoricsError::Overflow(n))?;
    Ok(num / m as u128)
}

/// `β_n = Σ_{m=1}^{⌊n/2⌋} β(n, m)`.
pub fn beta_n(n: usize) -> Result<u128, CombinatoricsError> {
    if n < 2 {
        return Err(CombinatoricsError::OutOfRange { n, m: 0 });
    }
    let mut total: u128 = 0;
    for m in 1..=n / 2 {
        total = total
            .checked_add(beta(n, m)?)
            .ok_or(CombinatoricsError::Overflow(n))?;
    }
    Ok(total)
}

/// `Φ(x) = ((1−x)/2)(1 − √(1 − 4x²/(1−x)²))`, the generating function of
/// `β_n`, on `[0, 1/3]`.
pub fn phi(x: f64) -> Result<f64, CombinatoricsError> {
    if !(0.0..=1.0 / 3.0).contains(&x) {
        return Err(CombinatoricsError::DomainError(x));
    }
    let y = x / (1.0 - x);
    let arg = (1.0 - 4.0 * y * y).max(0.0);
    // 1 − √a = (1 − a)/(1 + √a) avoids cancellation for small x
    Ok(0.5 * (1.0 - x) * (4.0 * y * y) / (1.0 + arg.sqrt()))
}

/// Rotation orbit of a weak composition, keyed by its lexicographically
/// minimal rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionClass {
    pub representative: Vec<usize>,
    pub size: usize,
    pub zeros: usize,
    /// Some pair of zeros sits in cyclically adjacent positions.
    pub adjacent_zeros: bool,
}

fn canonical_rotation(k: &[usize]) -> Vec<usize> {
    let n = k.len();
    (0..n)
        .map(|s| k[s..].iter().chain(&k[..s]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

fn for_each_composition(total: usize, parts: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, left: usize, parts: usize, visit: &mut dyn FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            visit(buf);
            buf.pop();
            return;
        }
        for v in (0..=left).rev() {
            buf.push(v);
            rec(buf, left - v, parts, visit);
            buf.pop();
        }
    }
    let mut buf = Vec::with_capacity(parts);
    rec(&mut buf, total, parts, &mut visit);
}

/// Weak compositions of `n − 1` into `n` parts; used by the trace formula.
pub fn weak_compositions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for_each_composition(n - 1, n, |k| out.push(k.to_vec()));
    out
}

/// Canonical representatives of all rotation classes of weak compositions
/// of `n − 1` into `n` parts. Since `gcd(n, n−1) = 1` every class has
/// exactly `n` members; this is asserted.
pub fn enumerate_classes(n: usize) -> Result<Vec<CompositionClass>, CombinatoricsError> {
    if n > MAX_ENUMERATION {
        return Err(CombinatoricsError::TooLarge(n));
    }
    if n < 2 {
        return Err(CombinatoricsError::OutOfRange { n, m: 0 });
    }
    let mut classes = Vec::new();
    for_each_composition(n - 1, n, |k| {
        let canon = canonical_rotation(k);
        if canon.as_slice() != k {
            return;
        }
        let mut rotations: Vec<Vec<usize>> = (0..n)
            .map(|s| k[s..].iter().chain(&k[..s]).copied().collect())
            .collect();
        rotations.sort();
        rotations.dedup();
        let zeros = k.iter().filter(|&&v| v == 0).count();
        let adjacent_zeros = (0..n).any(|i| k[i] == 0 && k[(i + 1) % n] == 0);
        classes.push(CompositionClass {
            representative: canon,
            size: rotations.len(),
            zeros,
            adjacent_zeros,
        });
    });
    for c in &classes {
        assert_eq!(c.size, n, "rotation class {:?} has size {}", c.representative, c.size);
    }
    Ok(classes)
}

/// Classes with `m` zeros and no two adjacent, counted per `m`.
pub fn census(n: usize) -> Result<BTreeMap<usize, u128>, CombinatoricsError> {
    let mut out = BTreeMap::new();
    for c in enumerate_classes(n)? {
        if !c.adjacent_zeros {
            *out.entry(c.zeros).or_insert(0) += 1;
        }
    }
    Ok(out)
}
