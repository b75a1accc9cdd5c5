//! Transform constructions over many channels, checked by recomputing
//! `U H V` independently of the library's own verification.

use mimo_dof::channel::generate_channel;
use mimo_dof::numerics::{numerical_rank, spectral_norm};
use mimo_dof::simulate::{
    dominant_rate_curve, dominant_scheme_rate, estimate_dof_slope, monte_carlo_transform, DEFAULT_POWERS,
};
use mimo_dof::transform::{
    expected_zero_pattern, transform_example_221, transform_general_3user, verify_transform, MAX_CONDITION,
};
use mimo_dof::{AntennaProfile, ChannelRealization, ComplexMatrix, Tolerance, TransformPair, Variant, ZeroPattern};
use proptest::prelude::*;

fn p(v: &[usize]) -> AntennaProfile {
    AntennaProfile::new(v.to_vec()).unwrap()
}

/// Largest relative residual of a required-zero entry of `U_i H_ij V_j`.
fn oracle_residual(ch: &ChannelRealization, pair: &TransformPair, pattern: &ZeroPattern) -> f64 {
    let k = ch.users();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let h = ch.block(i, j);
            let product: ComplexMatrix = &pair.u[i] * h * &pair.v[j];
            let h_norm = spectral_norm(h).unwrap();
            let mask = pattern.entry_mask(i, j);
            for (r, row) in mask.iter().enumerate() {
                for (c, &zero) in row.iter().enumerate() {
                    if zero {
                        let u_norm = pair.u[i].row(r).norm();
                        let v_norm = pair.v[j].column(c).norm();
                        worst = worst.max(product[(r, c)].norm() / (u_norm * h_norm * v_norm));
                    }
                }
            }
        }
    }
    worst
}

fn check_success(ch: &ChannelRealization, pair: &TransformPair, pattern: &ZeroPattern) {
    let tol = Tolerance::default();
    let label = format!("{} seed {}", ch.profile(), ch.seed());
    assert!(oracle_residual(ch, pair, pattern) <= tol.zero_rel_tol, "{label}");
    for i in 0..ch.users() {
        let m = ch.profile().antennas(i);
        assert_eq!(numerical_rank(&pair.u[i], &tol).unwrap(), m, "{label} U{}", i + 1);
        assert_eq!(numerical_rank(&pair.v[i], &tol).unwrap(), m, "{label} V{}", i + 1);
        let direct = &pair.u[i] * ch.block(i, i) * &pair.v[i];
        assert_eq!(numerical_rank(&direct, &tol).unwrap(), m, "{label} H{}{}", i + 1, i + 1);
    }
    let report = verify_transform(ch, pair, pattern, &tol).unwrap();
    assert!(report.pass, "{label}: {report:?}");
    assert!(report.u_conditions.iter().chain(&report.v_conditions).all(|c| c.unwrap() <= MAX_CONDITION));
}

/// 3-user profiles with `M1 <= M2 + M3`, largest user at most `cap`.
fn three_user_profiles(cap: usize) -> Vec<AntennaProfile> {
    let mut out = Vec::new();
    for m1 in 1..=cap {
        for m2 in 1..=m1 {
            for m3 in 1..=m2 {
                if m1 <= m2 + m3 {
                    out.push(p(&[m1, m2, m3]));
                }
            }
        }
    }
    out
}

#[test]
fn general_construction_sound_over_seeds() {
    let profiles = three_user_profiles(5);
    assert!(profiles.len() >= 10);
    for profile in &profiles {
        let pattern = expected_zero_pattern(profile, Variant::General3User).unwrap();
        for seed in 0..100 {
            let ch = generate_channel(profile, seed);
            let (pair, transformed) = transform_general_3user(&ch).unwrap_or_else(|e| panic!("{profile} {seed}: {e}"));
            assert_eq!(transformed.pattern, pattern);
            check_success(&ch, &pair, &pattern);
        }
    }
}

#[test]
fn example_construction_sound_over_seeds() {
    let profile = p(&[2, 2, 1]);
    let pattern = expected_zero_pattern(&profile, Variant::Example221).unwrap();
    assert_eq!(pattern.scalar_zero_count(), 8);
    for seed in 0..100 {
        let ch = generate_channel(&profile, seed);
        let (pair, _) = transform_example_221(&ch).unwrap();
        assert_eq!(pair.u[2][(0, 0)].re, 1.0);
        assert_eq!(pair.v[2][(0, 0)].re, 1.0);
        check_success(&ch, &pair, &pattern);
    }
}

#[test]
fn two_constructions_differ_on_221() {
    let profile = p(&[2, 2, 1]);
    let example = expected_zero_pattern(&profile, Variant::Example221).unwrap();
    let general = expected_zero_pattern(&profile, Variant::General3User).unwrap();
    assert_ne!(example.grid(), general.grid());
    for seed in 0..20 {
        let ch = generate_channel(&profile, seed);
        let (pair, _) = transform_example_221(&ch).unwrap();
        check_success(&ch, &pair, &example);
        let (pair, _) = transform_general_3user(&ch).unwrap();
        check_success(&ch, &pair, &general);
    }
}

#[test]
fn identity_fails_every_pattern() {
    for profile in three_user_profiles(4) {
        let ch = generate_channel(&profile, 0);
        let pattern = expected_zero_pattern(&profile, Variant::General3User).unwrap();
        if pattern.scalar_zero_count() == 0 {
            continue;
        }
        let report = verify_transform(&ch, &TransformPair::identity(&profile), &pattern, &Tolerance::default()).unwrap();
        assert!(!report.residuals_ok, "{profile}");
        assert!(!report.pass, "{profile}");
    }
}

#[test]
fn monte_carlo_reference_runs() {
    let tol = Tolerance::default();
    let r = monte_carlo_transform(&p(&[2, 2, 1]), Variant::Example221, 200, 1, &tol).unwrap();
    assert_eq!(r.success_fraction, 1.0, "{:?}", r.failures);
    let r = monte_carlo_transform(&p(&[3, 2, 2]), Variant::General3User, 200, 1, &tol).unwrap();
    assert_eq!(r.success_fraction, 1.0, "{:?}", r.failures);
    assert!(r.worst_residual.unwrap() <= tol.zero_rel_tol);
    assert!(r.worst_condition.unwrap() <= MAX_CONDITION);
}

#[test]
fn monte_carlo_is_deterministic() {
    let tol = Tolerance::default();
    for (profile, variant) in [(p(&[2, 2, 1]), Variant::Example221), (p(&[4, 3, 3]), Variant::General3User)] {
        let a = monte_carlo_transform(&profile, variant, 40, 9, &tol).unwrap();
        let b = monte_carlo_transform(&profile, variant, 40, 9, &tol).unwrap();
        assert_eq!(a, b);
    }
}

fn any_profile() -> impl Strategy<Value = AntennaProfile> {
    prop::collection::vec(1usize..=6, 1..=5).prop_map(|v| AntennaProfile::sorted(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_shapes_follow_profile(v in prop::collection::vec(1usize..=8, 1..=8), seed in any::<u64>()) {
        let profile = AntennaProfile::sorted(v).unwrap();
        let ch = generate_channel(&profile, seed);
        for i in 0..profile.users() {
            for j in 0..profile.users() {
                let h = ch.block(i, j);
                prop_assert_eq!(h.shape(), (profile.antennas(i), profile.antennas(j)));
            }
        }
        prop_assert_eq!(&generate_channel(&profile, seed), &ch);
    }

    #[test]
    fn rate_nondecreasing_in_power(profile in any_profile(), seed in any::<u64>()) {
        let ch = generate_channel(&profile, seed);
        let mut last = 0.0;
        for e in -2..=9 {
            let rate = dominant_scheme_rate(&ch, 10f64.powi(e)).unwrap();
            prop_assert!(rate >= 0.0);
            prop_assert!(rate >= last - 1e-9, "P=1e{}: {} < {}", e, rate, last);
            last = rate;
        }
    }

    #[test]
    fn slope_bounded_by_largest_user(profile in any_profile(), seed in any::<u64>()) {
        let ch = generate_channel(&profile, seed);
        let curve = dominant_rate_curve(&ch, &DEFAULT_POWERS).unwrap();
        let slope = estimate_dof_slope(&curve).unwrap();
        prop_assert!(slope <= profile.largest() as f64 + 0.1, "{}", slope);
    }

    #[test]
    fn general_construction_on_random_seeds(seed in any::<u64>(), which in 0usize..4) {
        let profile = [p(&[3, 2, 2]), p(&[4, 3, 2]), p(&[4, 2, 2]), p(&[5, 4, 4])][which].clone();
        let ch = generate_channel(&profile, seed);
        let pattern = expected_zero_pattern(&profile, Variant::General3User).unwrap();
        let (pair, _) = transform_general_3user(&ch).unwrap();
        check_success(&ch, &pair, &pattern);
    }
}
