//! Exact path sampling from the jump-chain/holding-time description and
//! Monte Carlo tail estimates for time averages.
//!
//! Sample `i` of a run with seed `s` draws from its own ChaCha stream
//! `(s, i)`, so results do not depend on how samples are spread over
//! threads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::markov::{MJPModel, Observable, ProbDist};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("time average over a zero horizon")]
    ZeroHorizon,
    #[error("horizon must be finite and nonnegative, got {0}")]
    InvalidHorizon(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
}

/// Piecewise-constant path: `X_s = segments[k].1` on
/// `[segments[k].0, segments[k+1].0)`, the last segment ending at
/// `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub segments: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl Trajectory {
    /// Lengths of the segments, in order.
    pub fn holding_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().enumerate().map(|(k, &(start, _))| {
            let end = self.segments.get(k + 1).map_or(self.horizon, |s| s.0);
            end - start
        })
    }

    /// Time spent in each of `n` states.
    pub fn occupation_times(&self, n: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n];
        for (len, &(_, x)) in self.holding_times().zip(&self.segments) {
            occ[x] += len;
        }
        occ
    }
}

/// `A_t / t` for the observable along the whole trajectory.
pub fn time_average(traj: &Trajectory, f: &Observable) -> Result<f64, SimulateError> {
    if traj.horizon <= 0.0 {
        return Err(SimulateError::ZeroHorizon);
    }
    let fv = f.values();
    let integral: f64 = traj
        .holding_times()
        .zip(&traj.segments)
        .map(|(len, &(_, x))| fv[x] * len)
        .sum();
    Ok(integral / traj.horizon)
}

/// Per-state jump distributions and exit rates, built once per run.
#[derive(Debug, Clone)]
pub struct Sampler {
    exit_rates: Vec<f64>,
    jumps: Vec<Option<WeightedIndex<f64>>>,
    targets: Vec<Vec<usize>>,
    initial: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new(model: &MJPModel) -> Self {
        Self::with_initial(model, &model.nu)
    }

    pub fn with_initial(model: &MJPModel, nu: &ProbDist) -> Self {
        let n = model.n();
        let mut exit_rates = Vec::with_capacity(n);
        let mut jumps = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for x in 0..n {
            let ys: Vec<usize> = (0..n).filter(|&y| y != x && model.q.rate(x, y) > 0.0).collect();
            let w: Vec<f64> = ys.iter().map(|&y| model.q.rate(x, y)).collect();
            exit_rates.push(model.q.exit_rate(x));
            jumps.push(WeightedIndex::new(&w).ok());
            targets.push(ys);
        }
        let initial = WeightedIndex::new(nu.weights()).expect("probability vector has positive mass");
        Sampler {
            exit_rates,
            jumps,
            targets,
            initial,
        }
    }

    fn holding_time<R: Rng>(&self, x: usize, rng: &mut R) -> f64 {
        let q = self.exit_rates[x];
        if q <= 0.0 {
            return f64::INFINITY;
        }
        let u: f64 = Open01.sample(rng);
        -u.ln() / q
    }

    fn jump<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        match &self.jumps[x] {
            Some(d) => self.targets[x][d.sample(rng)],
            None => x,
        }
    }

    /// Path on `[0, horizon]`.
    pub fn trajectory<R: Rng>(&self, horizon: f64, rng: &mut R) -> Trajectory {
        let mut x = self.initial.sample(rng);
        let mut time = 0.0;
        let mut segments = vec![(0.0, x)];
        loop {
            time += self.holding_time(x, rng);
            if time >= horizon {
                break;
            }
            x = self.jump(x, rng);
            segments.push((time, x));
        }
        Trajectory { segments, horizon }
    }

    /// `A_t = ∫₀ᵗ f(X_s) ds` without storing the path.
    pub fn integral<R: Rng>(&self, f: &[f64], horizon: f64, rng: &mut R) -> f64 {
        let mut x = self.initial.sample(rng);
        let mut time = 0.0;
        let mut acc = 0.0;
        loop {
            let next = time + self.holding_time(x, rng);
            if next >= horizon {
                acc += f[x] * (horizon - time);
                return acc;
            }
            acc += f[x] * (next - time);
            time = next;
            x = self.jump(x, rng);
        }
    }
}

/// Random stream for sample `index` of a run seeded with `seed`.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_trajectory<R: Rng>(model: &MJPModel, horizon: f64, rng: &mut R) -> Result<Trajectory, SimulateError> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(SimulateError::InvalidHorizon(horizon));
    }
    Ok(Sampler::new(model).trajectory(horizon, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub u: f64,
    pub t: f64,
    pub n_samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ci_half_width: f64,
}

impl TailEstimate {
    /// Normal interval, or the Wilson interval when no or every sample hit.
    pub fn from_counts(u: f64, t: f64, hits: u64, n_samples: u64) -> Self {
        let n = n_samples as f64;
        let p = hits as f64 / n;
        let (lo, hi) = if hits == 0 || hits == n_samples {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / n;
            let center = (p + z2 / (2.0 * n)) / denom;
            let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            // the closed form puts the endpoint at exactly 0 or 1
            if hits == 0 {
                (0.0, (center + half).min(1.0))
            } else {
                ((center - half).max(0.0), 1.0)
            }
        } else {
            let half = Z95 * (p * (1.0 - p) / n).sqrt();
            (p - half, p + half)
        };
        TailEstimate {
            u,
            t,
            n_samples,
            hits,
            p_hat: p,
            ci_lo: lo,
            ci_hi: hi,
            ci_half_width: (hi - p).max(p - lo),
        }
    }
}

fn check_samples(n: u64, need: u64) -> Result<(), SimulateError> {
    if n < need {
        return Err(SimulateError::TooFewSamples {
            need: need as usize,
            got: n as usize,
        });
    }
    Ok(())
}

/// Time averages `A_t/t` of the centered observable for samples
/// `0..n_samples`, in index order, clamped to `[min f, max f]`.
pub fn sample_time_averages(
    model: &MJPModel,
    nu: &ProbDist,
    t: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<f64>, SimulateError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(SimulateError::InvalidHorizon(t));
    }
    let sampler = Sampler::with_initial(model, nu);
    let f = model.f.values();
    let (lo, hi) = (model.f.min(), model.f.max());
    Ok((0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            (sampler.integral(f, t, &mut rng) / t).clamp(lo, hi)
        })
        .collect())
}

/// `ℙ_ν(A_t/t ≥ u)` for every `u` in `us`, from one set of samples.
pub fn empirical_tails(
    model: &MJPModel,
    t: f64,
    us: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<TailEstimate>, SimulateError> {
    check_samples(n_samples, 1)?;
    let avgs = sample_time_averages(model, &model.nu, t, n_samples, seed)?;
    Ok(us
        .iter()
        .map(|&u| {
            let hits = avgs.iter().filter(|&&a| a >= u).count() as u64;
            TailEstimate::from_counts(u, t, hits, n_samples)
        })
        .collect())
}

pub fn empirical_tail(
    model: &MJPModel,
    t: f64,
    u: f64,
    n_samples: u64,
    seed: u64,
) -> Result<TailEstimate, SimulateError> {
    Ok(empirical_tails(model, t, &[u], n_samples, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub t: f64,
    pub n_samples: u64,
    /// Sample variance of `A_t`, divided by `t`.
    pub value: f64,
    /// Standard error of `value`.
    pub std_error: f64,
}

/// `Var(A_t)/t` under the stationary start `ν = π`.
pub fn empirical_variance_rate(
    model: &MJPModel,
    t: f64,
    n_samples: u64,
    seed: u64,
) -> Result<VarianceEstimate, SimulateError> {
    check_samples(n_samples, 2)?;
    let avgs = sample_time_averages(model, &model.pi, t, n_samples, seed)?;
    let n = n_samples as f64;
    let integrals: Vec<f64> = avgs.iter().map(|a| a * t).collect();
    let mean = integrals.iter().sum::<f64>() / n;
    let dev2: Vec<f64> = integrals.iter().map(|a| (a - mean) * (a - mean)).collect();
    let var = dev2.iter().sum::<f64>() / (n - 1.0);
    let m4 = dev2.iter().map(|d| d * d).sum::<f64>() / n;
    let se = ((m4 - var * var).max(0.0) / n).sqrt();
    Ok(VarianceEstimate {
        t,
        n_samples,
        value: var / t,
        std_error: se / t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::validate_q_matrix;
    use approx::assert_relative_eq;

    fn two_state() -> MJPModel {
        let q = validate_q_matrix(&[vec![-1.0, 1.0], vec![2.0, -2.0]], 1e-12).unwrap();
        MJPModel::new(q, Observable::new(vec![1.0, -2.0]).unwrap(), None).unwrap()
    }

    #[test]
    fn zero_horizon_single_segment() {
        let m = two_state();
        let traj = sample_trajectory(&m, 0.0, &mut sample_stream(1, 0)).unwrap();
        assert_eq!(traj.segments, vec![(0.0, 0)]);
        assert_eq!(time_average(&traj, &m.f), Err(SimulateError::ZeroHorizon));
    }

    #[test]
    fn time_average_examples() {
        let f = Observable::new(vec![1.0, -2.0]).unwrap();
        let traj = Trajectory {
            segments: vec![(0.0, 0), (5.0, 1)],
            horizon: 10.0,
        };
        assert_relative_eq!(time_average(&traj, &f).unwrap(), -0.5);
        let single = Trajectory {
            segments: vec![(0.0, 1)],
            horizon: 3.0,
        };
        assert_eq!(time_average(&single, &f).unwrap(), -2.0);
        let c = Observable::new(vec![0.7, 0.7]).unwrap();
        assert_relative_eq!(time_average(&traj, &c).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn trajectory_invariants() {
        let m = two_state();
        let traj = sample_trajectory(&m, 50.0, &mut sample_stream(3, 7)).unwrap();
        assert_eq!(traj.segments[0].0, 0.0);
        for w in traj.segments.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert_ne!(w[0].1, w[1].1);
        }
        assert!(traj.segments.last().unwrap().0 <= traj.horizon);
    }

    #[test]
    fn streamed_integral_matches_path() {
        let m = two_state();
        let sampler = Sampler::new(&m);
        let traj = sampler.trajectory(20.0, &mut sample_stream(9, 4));
        let direct = sampler.integral(m.f.values(), 20.0, &mut sample_stream(9, 4));
        assert_relative_eq!(time_average(&traj, &m.f).unwrap() * 20.0, direct, epsilon = 1e-12);
    }

    #[test]
    fn tail_extremes() {
        let m = two_state();
        let est = empirical_tails(&m, 2.0, &[m.f.max() + 0.1, m.f.min()], 500, 11).unwrap();
        assert_eq!(est[0].hits, 0);
        assert_eq!(est[1].hits, 500);
        assert!(est[0].ci_hi > 0.0 && est[0].ci_lo == 0.0);
    }

    #[test]
    fn variance_rate_of_zero_observable() {
        let q = validate_q_matrix(&[vec![-1.0, 1.0], vec![2.0, -2.0]], 1e-12).unwrap();
        let m = MJPModel::new(q, Observable::new(vec![0.0, 0.0]).unwrap(), None).unwrap();
        assert_eq!(empirical_variance_rate(&m, 5.0, 100, 1).unwrap().value, 0.0);
    }
}
