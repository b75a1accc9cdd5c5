//! Null-space and rank properties on matrices of known rank.

use mimo_dof::numerics::{
    condition_number, left_null_basis, numerical_rank, right_null_basis, singular_values, spectral_norm,
};
use mimo_dof::{ComplexMatrix, Tolerance};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Product of an `m x r` and an `r x n` random factor: rank exactly `r` with
/// probability one.
fn known_rank(m: usize, n: usize, r: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian(m, r, &mut rng);
    let c = gaussian(r, n, &mut rng);
    b * c
}

fn frob(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn gram_deviation(q: &ComplexMatrix) -> f64 {
    let g = q.adjoint() * q;
    frob(&(g - ComplexMatrix::identity(q.ncols(), q.ncols())))
}

fn shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=7, 1usize..=7)
        .prop_flat_map(|(m, n)| (Just(m), Just(n), 0..=m.min(n), any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rank_nullity((m, n, r, seed) in shape()) {
        let a = known_rank(m, n, r, seed);
        let tol = Tolerance::default();
        let rank = numerical_rank(&a, &tol).unwrap();
        prop_assert_eq!(rank, r);
        let nr = right_null_basis(&a, &tol).unwrap();
        prop_assert_eq!(nr.nrows(), n);
        prop_assert_eq!(nr.ncols(), n - r);
        let nl = left_null_basis(&a, &tol).unwrap();
        prop_assert_eq!(nl.ncols(), m);
        prop_assert_eq!(nl.nrows(), m - r);
    }

    #[test]
    fn null_bases_are_orthonormal_annihilators((m, n, r, seed) in shape()) {
        let a = known_rank(m, n, r, seed);
        let tol = Tolerance::default();
        let scale = frob(&a).max(1.0);

        let nr = right_null_basis(&a, &tol).unwrap();
        if nr.ncols() > 0 {
            prop_assert!(frob(&(&a * &nr)) <= 1e-10 * scale);
            prop_assert!(gram_deviation(&nr) <= 1e-10);
        }
        let nl = left_null_basis(&a, &tol).unwrap();
        if nl.nrows() > 0 {
            prop_assert!(frob(&(&nl * &a)) <= 1e-10 * scale);
            prop_assert!(gram_deviation(&nl.adjoint()) <= 1e-10);
        }
    }

    #[test]
    fn rank_of_adjoint_matches((m, n, r, seed) in shape()) {
        let a = known_rank(m, n, r, seed);
        let tol = Tolerance::default();
        prop_assert_eq!(
            numerical_rank(&a, &tol).unwrap(),
            numerical_rank(&a.adjoint(), &tol).unwrap()
        );
    }

    #[test]
    fn singular_values_sorted_and_bounded((m, n, r, seed) in shape()) {
        let a = known_rank(m, n, r, seed);
        let s = singular_values(&a).unwrap();
        prop_assert_eq!(s.len(), m.min(n));
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let norm = spectral_norm(&a).unwrap();
        prop_assert!((norm - s[0]).abs() <= 1e-12 * norm.max(1.0));
        // Frobenius norm is the root sum of squares of the singular values.
        let f: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((f - frob(&a)).abs() <= 1e-10 * f.max(1.0));
    }

    #[test]
    fn square_full_rank_has_finite_condition(n in 1usize..=7, seed in any::<u64>()) {
        let a = known_rank(n, n, n, seed);
        let c = condition_number(&a, &Tolerance::default()).unwrap();
        prop_assert!(!c.is_singular());
        prop_assert!(c.value() >= 1.0);
        // cond(A) = ||A|| * ||A^{-1}||
        let inv = a.clone().try_inverse().unwrap();
        let oracle = spectral_norm(&a).unwrap() * spectral_norm(&inv).unwrap();
        prop_assert!((c.value() - oracle).abs() <= 1e-6 * oracle);
    }

    #[test]
    fn rank_deficient_square_is_singular(n in 2usize..=7, seed in any::<u64>()) {
        let a = known_rank(n, n, n - 1, seed);
        prop_assert!(condition_number(&a, &Tolerance::default()).unwrap().is_singular());
    }
}
