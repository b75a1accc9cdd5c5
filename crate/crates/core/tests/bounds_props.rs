//! Closed-form DoF values checked against brute-force enumeration.

use mimo_dof::bounds::{
    cooperation_outer_bound, decomposition_bound, dof_report, dominant_user_present, inner_bound, polytope_max,
    region_example_221, sum_dof, three_group_partition,
};
use mimo_dof::{AntennaProfile, Regime};
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i64>;

/// min over every split of the users into two nonempty groups of the larger
/// group's antenna total.
fn brute_outer(m: &[usize]) -> Q {
    let k = m.len();
    let total: usize = m.iter().sum();
    (1..(1u64 << k) - 1)
        .map(|mask| {
            let s: usize = (0..k).filter(|&i| mask >> i & 1 == 1).map(|i| m[i]).sum();
            s.max(total - s)
        })
        .min()
        .map(|v| Q::from_integer(v as i64))
        .unwrap()
}

fn brute_inner(m: &[usize]) -> Q {
    let total: usize = m.iter().sum();
    let largest = *m.iter().max().unwrap();
    Q::new(total as i64, 2).max(Q::from_integer(largest as i64))
}

/// Searches every 3-coloring for one in which each color class is nonempty
/// and holds at most half the antennas.
fn balanced_split_exists(m: &[usize]) -> bool {
    let k = m.len() as u32;
    let total: usize = m.iter().sum();
    (0..3u64.pow(k)).any(|code| {
        let mut sums = [0usize; 3];
        let mut used = [false; 3];
        let mut c = code;
        for &mi in m {
            let g = (c % 3) as usize;
            c /= 3;
            sums[g] += mi;
            used[g] = true;
        }
        used.iter().all(|&u| u) && sums.iter().all(|&s| 2 * s <= total)
    })
}

fn profile_strategy(min_users: usize, max_users: usize, max_antennas: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_antennas, min_users..=max_users)
}

fn sorted(v: &[usize]) -> AntennaProfile {
    AntennaProfile::sorted(v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn closed_forms_match_brute_force(m in profile_strategy(2, 12, 10)) {
        let p = sorted(&m);
        let (outer, witness) = cooperation_outer_bound(&p).unwrap();
        prop_assert_eq!(outer.ratio(), brute_outer(&m));
        prop_assert_eq!(inner_bound(&p).ratio(), brute_inner(&m));
        prop_assert!(witness.contains(&1));
        let s: usize = witness.iter().map(|&u| p.antennas(u - 1)).sum();
        prop_assert_eq!(Q::from_integer(s.max(p.total() - s) as i64), outer.ratio());
    }

    #[test]
    fn inner_never_exceeds_outer(m in profile_strategy(2, 12, 10)) {
        let p = sorted(&m);
        let (theorem, _) = sum_dof(&p);
        let (outer, _) = cooperation_outer_bound(&p).unwrap();
        prop_assert!(inner_bound(&p).ratio() <= theorem.ratio());
        prop_assert!(theorem.ratio() <= outer.ratio());
    }

    #[test]
    fn results_do_not_depend_on_user_order(m in profile_strategy(1, 10, 10), rot in 0usize..10) {
        let mut shuffled = m.clone();
        shuffled.reverse();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        prop_assert_eq!(dof_report(&sorted(&m)).unwrap(), dof_report(&sorted(&shuffled)).unwrap());
    }

    #[test]
    fn dominant_user_fixes_everything(rest in profile_strategy(1, 6, 6), extra in 0usize..5) {
        let mut m = rest.clone();
        m.push(rest.iter().sum::<usize>() + extra);
        let p = sorted(&m);
        prop_assert!(dominant_user_present(&p));
        let (theorem, regime) = sum_dof(&p);
        prop_assert_eq!(regime, Regime::DominantUser);
        prop_assert_eq!(theorem.ratio(), Q::from_integer(p.largest() as i64));
        prop_assert_eq!(cooperation_outer_bound(&p).unwrap().0, theorem);
    }

    #[test]
    fn decomposition_regime_is_half_the_total(m in profile_strategy(2, 12, 10)) {
        let p = sorted(&m);
        if !dominant_user_present(&p) {
            let (theorem, regime) = sum_dof(&p);
            prop_assert_eq!(regime, Regime::Decomposition);
            prop_assert_eq!(theorem, decomposition_bound(&p));
            prop_assert_eq!(theorem.ratio(), Q::new(p.total() as i64, 2));
        }
    }

    #[test]
    fn partitions_valid_without_dominant_user(m in profile_strategy(3, 9, 8)) {
        let p = sorted(&m);
        let result = three_group_partition(&p);
        if dominant_user_present(&p) {
            prop_assert!(result.is_err());
        } else {
            prop_assert!(balanced_split_exists(p.counts()));
            let plan = result.unwrap();
            let mut users: Vec<usize> = plan.groups.iter().flatten().copied().collect();
            users.sort_unstable();
            prop_assert_eq!(users, (1..=p.users()).collect::<Vec<_>>());
            for (group, &sum) in plan.groups.iter().zip(&plan.sums) {
                prop_assert!(!group.is_empty());
                prop_assert_eq!(sum, group.iter().map(|&u| p.antennas(u - 1)).sum::<usize>());
                prop_assert!(2 * sum <= p.total());
            }
        }
    }

    #[test]
    fn polytope_max_matches_grid_search(a in 0i64..=12, b in 0i64..=12, den in 1i64..=4) {
        let objective = (Q::new(a, den), Q::new(b, den));
        let region = region_example_221();
        let (max, argmax) = polytope_max(&region, objective).unwrap();
        let step = Q::new(1, 64);
        let mut best = Q::from_integer(0);
        for i in 0..=64 {
            for j in 0..=64 {
                let point = (step * i, step * j);
                if region.contains(point) {
                    best = best.max(objective.0 * point.0 + objective.1 * point.1);
                }
            }
        }
        prop_assert_eq!(max.ratio(), best);
        prop_assert!(region.contains(argmax));
        prop_assert_eq!(objective.0 * argmax.0 + objective.1 * argmax.1, best);
    }
}

/// Every sorted profile with at most `max_users` users of at most
/// `max_antennas` antennas.
fn all_profiles(max_users: usize, max_antennas: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, cap: usize, max_users: usize, out: &mut Vec<Vec<usize>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        if prefix.len() == max_users {
            return;
        }
        for m in 1..=cap {
            prefix.push(m);
            extend(prefix, m, max_users, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), max_antennas, max_users, &mut out);
    out
}

#[test]
fn exhaustive_small_profiles() {
    let profiles = all_profiles(8, 8);
    // Multisets of size 1..=8 over 8 values: C(16,8) - 1.
    assert_eq!(profiles.len(), 12869);
    for m in profiles.iter().filter(|m| m.len() >= 2) {
        let p = AntennaProfile::new(m.clone()).unwrap();
        let (theorem, _) = sum_dof(&p);
        let outer = brute_outer(m);
        assert_eq!(theorem.ratio(), brute_inner(m), "{p}");
        assert!(theorem.ratio() <= outer, "{p}");
        // The cooperation bound is tight exactly with a dominant user or
        // when the total splits evenly into two halves.
        let total: usize = m.iter().sum();
        let even_split = (1..(1u64 << m.len()) - 1)
            .any(|mask| 2 * (0..m.len()).filter(|&i| mask >> i & 1 == 1).map(|i| m[i]).sum::<usize>() == total);
        assert_eq!(theorem.ratio() == outer, dominant_user_present(&p) || even_split, "{p}");
    }
}
