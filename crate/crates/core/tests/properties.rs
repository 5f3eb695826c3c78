mod common;

use common::{any_model, any_reversible};
use mjpc_core::bounds::{
    bound_family, donsker_varadhan_info, lower_tail, rate_bernstein_general, rate_general, two_sided,
    verify_info_representation, Analysis, BoundFamily,
};
use mjpc_core::linalg::compensated_sum;
use mjpc_core::markov::{check_detailed_balance, transition_matrix, ProbDist};
use mjpc_core::perturbation::{beta_n, lambda0_coefficients};
use mjpc_core::spectral::{sigma_hat_sq, variance_pi};
use mjpc_core::tilted::{chi2_prefactor, lambda0, lambda0_extended, lambda0_star};
use proptest::prelude::*;
use twofloat::TwoFloat;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariant_distribution_is_stationary(m in any_model(6)) {
        let w = m.pi.weights();
        prop_assert!((compensated_sum(w.iter().copied()) - 1.0).abs() < 1e-14);
        prop_assert!(w.iter().all(|&p| p > 0.0));
        let p = transition_matrix(&m.q, 0.8);
        for row in p.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn reversible_generators_pass_detailed_balance(m in any_reversible(5)) {
        prop_assert!(check_detailed_balance(&m.q, &m.pi, 1e-10));
        let a = Analysis::new(m).unwrap();
        // a reversible generator equals its symmetrization
        prop_assert!((a.sd.sym.clone() - a.model.q.matrix()).amax() < 1e-10);
    }

    #[test]
    fn spectrum_and_variances(m in any_model(6)) {
        let a = Analysis::new(m).unwrap();
        prop_assert!(a.sd.eigenvalues.iter().all(|&l| l <= 1e-12));
        prop_assert!(a.sigma_hat_sq >= 0.0);
        // −⟨Sf, f⟩ ≤ Var(f)/λ₁, hence σ̂² ≤ σ̃²
        prop_assert!(a.sigma_hat_sq <= a.sigma_tilde_sq * (1.0 + 1e-10) + 1e-14);
        prop_assert!(a.f_pos_sup <= a.f_sup);
    }

    #[test]
    fn lambda0_matches_dense_eigensolver(m in any_model(6), r in -3.0f64..3.0) {
        let a = Analysis::new(m).unwrap();
        let mut b = a.sd.euclid_sym().clone();
        for (i, v) in a.model.f.values().iter().enumerate() {
            b[(i, i)] += r * v;
        }
        let top = b.symmetric_eigen().eigenvalues.max();
        let l = lambda0(&a.sd, &a.model.f, r);
        prop_assert!((l - top).abs() <= 1e-12 * (1.0 + top.abs()), "{} vs {}", l, top);
    }

    #[test]
    fn lambda0_shape(m in any_model(5), r in 0.0f64..4.0, s in 0.0f64..4.0) {
        let a = Analysis::new(m).unwrap();
        let f = &a.model.f;
        let (lr, ls) = (lambda0(&a.sd, f, r), lambda0(&a.sd, f, s));
        let mid = lambda0(&a.sd, f, 0.5 * (r + s));
        prop_assert!(mid <= 0.5 * (lr + ls) + 1e-12);
        prop_assert!(lr >= -1e-14);
        prop_assert!(lr <= r * f.max() + 1e-12);
        // scaling f by c is the same as scaling r by c
        let c = 1.7;
        let scaled = lambda0(&a.sd, &f.scaled(c), r);
        prop_assert!((scaled - lambda0(&a.sd, f, c * r)).abs() <= 1e-11 * (1.0 + scaled.abs()));
    }

    #[test]
    fn conjugate_is_monotone_and_dominates_bernstein(m in any_model(5), x in 0.02f64..0.95, y in 0.02f64..0.95) {
        let a = Analysis::new(m).unwrap();
        let f = &a.model.f;
        let (u, v) = (x.min(y) * f.max(), x.max(y) * f.max());
        let su = lambda0_star(&a.sd, f, u).unwrap().value;
        let sv = lambda0_star(&a.sd, f, v).unwrap().value;
        prop_assert!(su >= 0.0);
        prop_assert!(su <= sv + 1e-10);
        prop_assert!(rate_general(&a, u).unwrap() + 1e-9 >= rate_bernstein_general(&a, u));
    }

    #[test]
    fn bounds_stay_in_unit_interval(m in any_model(5), x in -0.5f64..1.5, t in 0.1f64..30.0) {
        let a = Analysis::new(m).unwrap();
        let u = x * a.model.f.max();
        for fam in [BoundFamily::General, BoundFamily::Perturbation, BoundFamily::Poincare, BoundFamily::BernsteinGeneral] {
            let p = bound_family(&a, fam, t, u, None).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.bound));
            prop_assert!(p.rate >= 0.0);
            prop_assert!(p.raw >= p.bound || p.raw == p.bound);
        }
    }

    #[test]
    fn information_is_nonnegative(m in any_model(5), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = m.n();
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        let beta = ProbDist::new(w.iter().map(|v| v / s).collect()).unwrap();
        let i = donsker_varadhan_info(&m.q, &m.pi, &beta);
        prop_assert!(i >= 0.0);
        prop_assert!(donsker_varadhan_info(&m.q, &m.pi, &m.pi).abs() < 1e-12);
    }

    #[test]
    fn coefficients_match_finite_differences(m in any_model(5)) {
        let a = Analysis::new(m).unwrap();
        let f = &a.model.f;
        let c = lambda0_coefficients(&a.sd, f, 6).unwrap();
        let lam = |r: f64| lambda0_extended(&a.sd, f, r).unwrap();
        // Richardson-extrapolated central differences in double-double
        let diff = |k: usize, h: f64| -> f64 {
            let p = |j: f64| lam(j * h);
            let d: TwoFloat = match k {
                1 => (p(1.0) - p(-1.0)) / (2.0 * h),
                2 => (p(1.0) - p(0.0) * 2.0 + p(-1.0)) / (h * h),
                3 => (p(2.0) - p(1.0) * 2.0 + p(-1.0) * 2.0 - p(-2.0)) / (2.0 * h * h * h),
                _ => (p(2.0) - p(1.0) * 4.0 + p(0.0) * 6.0 - p(-1.0) * 4.0 + p(-2.0)) / (h * h * h * h),
            };
            f64::from(d)
        };
        let h = 1e-2 * a.gap / (2.0 * a.f_sup);
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
        let scale = c.coefficient(2).abs().max(1e-300);
        for k in 1..=4 {
            let rich = (4.0 * diff(k, h / 2.0) - diff(k, h)) / 3.0 / fact[k];
            let err = (rich - c.coefficient(k)).abs();
            prop_assert!(err <= 1e-6 * c.coefficient(k).abs().max(scale), "order {}: {} vs {}", k, rich, c.coefficient(k));
        }
    }

    #[test]
    fn coefficients_obey_combinatorial_bound(m in any_model(5)) {
        let a = Analysis::new(m).unwrap();
        let c = lambda0_coefficients(&a.sd, &a.model.f, 8).unwrap();
        let ratio = a.f_sup / a.gap;
        let pref = a.sigma_hat_sq * a.gap * a.gap / (2.0 * a.f_sup * a.f_sup);
        for n in 2..=8 {
            let bound = beta_n(n).unwrap() as f64 * ratio.powi(n as i32) * pref;
            prop_assert!(c.coefficient(n).abs() <= bound * (1.0 + 1e-9) + 1e-15, "n = {}", n);
        }
    }

    #[test]
    fn lower_tail_of_negated_model(m in any_model(4), x in 0.05f64..0.9) {
        let a = Analysis::new(m).unwrap();
        let u = x * a.model.f.max();
        let neg = a.negated();
        let lower = lower_tail(&neg, 2.0, -u, BoundFamily::General, None).unwrap();
        let upper = bound_family(&a, BoundFamily::General, 2.0, u, None).unwrap();
        prop_assert!((lower.bound - upper.bound).abs() < 1e-12);
        let both = two_sided(&a, 2.0, u, BoundFamily::BernsteinGeneral, None).unwrap();
        prop_assert_eq!(both.sum, both.upper.bound + both.lower.bound);
        prop_assert!(both.bound <= 1.0);
    }
}

#[test]
fn prefactor_is_one_from_stationarity() {
    let m = mjpc_core::fixtures::reversible_three();
    assert!((chi2_prefactor(&m.pi, &m.pi) - 1.0).abs() < 1e-15);
}

#[test]
fn info_representation_three_states() {
    for m in [mjpc_core::fixtures::three_cycle(), mjpc_core::fixtures::reversible_three()] {
        let a = Analysis::new(m).unwrap();
        let zero = verify_info_representation(&a, 0.0, 2_000).unwrap();
        assert!(zero.infimum < 1e-8, "{zero:?}");
        let mut last = f64::INFINITY;
        for grid in [100, 1_000, 10_000] {
            let rep = verify_info_representation(&a, 0.4 * a.model.f.max(), grid).unwrap();
            assert!(rep.gap <= 1e-4, "{rep:?}");
            assert!(rep.gap <= last + 1e-9);
            last = rep.gap;
        }
        assert!(verify_info_representation(&a, 5.0, 10).is_err());
    }
}

#[test]
fn symmetric_observable_has_matching_tails() {
    // 3-cycle with f = (1, 0, −1): relabeling 0↔2 reverses the rotation,
    // which keeps π and the symmetrized generator
    let a = Analysis::new(mjpc_core::fixtures::three_cycle()).unwrap();
    for u in [0.1, 0.3, 0.6] {
        let up = rate_general(&a, u).unwrap();
        let down = lower_tail(&a, 1.0, -u, BoundFamily::General, None).unwrap().rate;
        assert!((up - down).abs() < 1e-9, "{up} vs {down}");
    }
}

#[test]
fn sigma_hat_matches_variance_for_two_states() {
    let m = mjpc_core::fixtures::two_state();
    let a = Analysis::new(m).unwrap();
    assert!((sigma_hat_sq(&a.sd, &a.model.f).unwrap() - 4.0 / 3.0).abs() < 1e-14);
    // for two states the only nonzero eigenvalue is −λ₁, so σ̂² = σ̃²
    assert!((a.sigma_tilde_sq - 2.0 * variance_pi(&a.model.pi, a.model.f.values()) / 3.0).abs() < 1e-14);
    assert!((a.sigma_hat_sq - a.sigma_tilde_sq).abs() < 1e-14);
}
