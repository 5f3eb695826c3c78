//! Small reference models and random irreducible generators, shared by
//! tests, benchmarks and the CLI examples.

use rand::Rng;

use crate::markov::{validate_q_matrix, MJPModel, Observable, ProbDist, DEFAULT_RATE_TOL};

fn set_diagonal(rows: &mut [Vec<f64>]) {
    for (x, row) in rows.iter_mut().enumerate() {
        row[x] = 0.0;
        row[x] = -row.iter().sum::<f64>();
    }
}

fn build(rows: &[Vec<f64>], f: Vec<f64>, nu: Option<ProbDist>) -> MJPModel {
    let q = validate_q_matrix(rows, DEFAULT_RATE_TOL).expect("fixture rates are valid");
    MJPModel::new(q, Observable::new(f).expect("finite observable"), nu).expect("fixture is irreducible")
}

/// Rates 0→1 = 1, 1→0 = 2; `f = (1, −2)` is already centered under
/// `π = (2/3, 1/3)`. Started from state 0.
pub fn two_state() -> MJPModel {
    build(&[vec![-1.0, 1.0], vec![2.0, -2.0]], vec![1.0, -2.0], None)
    .with_labels(vec!["a".into(), "b".into()])
}

/// Unit-rate rotation 0→1→2→0 with `f = (1, 0, −1)`; uniform `π`, not
/// reversible.
pub fn three_cycle() -> MJPModel {
    build(
        &[vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0]],
        vec![1.0, 0.0, -1.0],
        None,
    )
}

/// Birth–death chain on three states (hence reversible) with an
/// asymmetric observable.
pub fn reversible_three() -> MJPModel {
    build(
        &[vec![-1.0, 1.0, 0.0], vec![0.5, -1.5, 1.0], vec![0.0, 2.0, -2.0]],
        vec![1.5, 0.2, -1.0],
        None,
    )
}

/// Irreducible generator on `n` states: a random sparse rate pattern on
/// top of the cycle `0 → 1 → … → n−1 → 0`, observable uniform in
/// `[−1, 1]`, started from a random state.
pub fn random_irreducible<R: Rng>(n: usize, rng: &mut R) -> MJPModel {
    let mut rows = vec![vec![0.0; n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            if x != y && rng.random::<f64>() < 0.5 {
                *v = rng.random_range(0.1..2.0);
            }
        }
        row[(x + 1) % n] = rng.random_range(0.1..2.0);
    }
    set_diagonal(&mut rows);
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let start = rng.random_range(0..n);
    build(&rows, f, Some(ProbDist::point_mass(n, start)))
}

/// Reversible generator with rates `q_xy = s_xy/π_x` for random symmetric
/// conductances `s` (a complete graph, so irreducible) and random `π`.
pub fn random_reversible<R: Rng>(n: usize, rng: &mut R) -> MJPModel {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let pi: Vec<f64> = w.iter().map(|v| v / total).collect();
    let mut rows = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in x + 1..n {
            let s = rng.random_range(0.05..1.0);
            rows[x][y] = s / pi[x];
            rows[y][x] = s / pi[y];
        }
    }
    set_diagonal(&mut rows);
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    build(&rows, f, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::check_detailed_balance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixture_properties() {
        let m = two_state();
        assert!((m.pi.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(check_detailed_balance(&m.q, &m.pi, 1e-12));
        assert!(!check_detailed_balance(&three_cycle().q, &three_cycle().pi, 1e-12));
        let r = reversible_three();
        assert!(check_detailed_balance(&r.q, &r.pi, 1e-12));
    }

    #[test]
    fn random_models_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..7 {
            let m = random_irreducible(n, &mut rng);
            assert_eq!(m.n(), n);
            let r = random_reversible(n, &mut rng);
            assert!(check_detailed_balance(&r.q, &r.pi, 1e-10));
        }
    }
}
