//! Closed-form DoF quantities in exact rational arithmetic.
//!
//! User labels in witnesses and partitions are 1-based, matching the order
//! of the (sorted) antenna profile.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::AntennaProfile;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("the cooperation outer bound needs at least two users")]
    SingleUser,
    #[error("{users} users is beyond the enumeration limit of {max}")]
    TooManyUsers { users: usize, max: usize },
    #[error("three-group partition needs at least three users, got {0}")]
    TooFewUsers(usize),
    #[error("profile {0} has a dominant user; use the dominant-user regime instead")]
    DominantUser(String),
    #[error("no valid three-group partition found for {0}")]
    NoPartition(String),
    #[error("region is empty")]
    EmptyRegion,
    #[error("region is unbounded")]
    UnboundedRegion,
}

/// Exact rational DoF value, always in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DoFValue(Rational);

impl DoFValue {
    pub fn new(num: i64, den: i64) -> Self {
        Self(Rational::new(num, den))
    }

    pub fn integer(n: usize) -> Self {
        Self(Rational::from_integer(n as i64))
    }

    pub fn half_of(n: usize) -> Self {
        Self(Rational::new(n as i64, 2))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl From<Rational> for DoFValue {
    fn from(r: Rational) -> Self {
        Self(r)
    }
}

impl fmt::Display for DoFValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DoFValueDoc {
    num: i64,
    den: i64,
}

impl Serialize for DoFValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DoFValueDoc {
            num: self.numer(),
            den: self.denom(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DoFValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = DoFValueDoc::deserialize(d)?;
        if doc.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Self::new(doc.num, doc.den))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    DominantUser,
    Decomposition,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::DominantUser => "dominant_user",
            Regime::Decomposition => "decomposition",
        })
    }
}

/// Half a DoF per antenna: `(sum M_i) / 2`.
pub fn decomposition_bound(profile: &AntennaProfile) -> DoFValue {
    DoFValue::half_of(profile.total())
}

/// Best of the decomposition scheme and letting user 1 transmit alone.
pub fn inner_bound(profile: &AntennaProfile) -> DoFValue {
    decomposition_bound(profile).max(DoFValue::integer(profile.largest()))
}

/// `M_1 >= M_2 + ... + M_K`. Equality counts as dominant.
pub fn dominant_user_present(profile: &AntennaProfile) -> bool {
    let m1 = profile.largest();
    m1 >= profile.total() - m1
}

pub const MAX_ENUMERATION_USERS: usize = 30;

/// `min_S max(sum_S M, sum_{S^c} M)` over nonempty proper subsets.
///
/// User 1 is pinned inside `S` (the objective is symmetric in `S` and its
/// complement), leaving `2^(K-1) - 1` candidates. Ties go to the
/// lexicographically smallest witness.
pub fn cooperation_outer_bound(profile: &AntennaProfile) -> Result<(DoFValue, Vec<usize>), BoundsError> {
    let k = profile.users();
    if k < 2 {
        return Err(BoundsError::SingleUser);
    }
    if k > MAX_ENUMERATION_USERS {
        return Err(BoundsError::TooManyUsers {
            users: k,
            max: MAX_ENUMERATION_USERS,
        });
    }
    let counts = profile.counts();
    let total = profile.total();
    let full = (1u64 << (k - 1)) - 1;

    let mut best: Option<(usize, Vec<usize>)> = None;
    // Bit t of `others` places user t + 2 in S; `full` would make S everything.
    for others in 0..full {
        let mut subset = vec![1];
        let mut inside = counts[0];
        for t in 0..k - 1 {
            if others & (1 << t) != 0 {
                subset.push(t + 2);
                inside += counts[t + 1];
            }
        }
        let value = inside.max(total - inside);
        let better = match &best {
            None => true,
            Some((v, w)) => value < *v || (value == *v && subset < *w),
        };
        if better {
            best = Some((value, subset));
        }
    }
    let (value, witness) = best.expect("at least one candidate for K >= 2");
    Ok((DoFValue::integer(value), witness))
}

/// Exact sum DoF: `max(sum M_i / 2, M_1)` with its regime.
pub fn sum_dof(profile: &AntennaProfile) -> (DoFValue, Regime) {
    let regime = if dominant_user_present(profile) {
        Regime::DominantUser
    } else {
        Regime::Decomposition
    };
    (inner_bound(profile), regime)
}

/// Three disjoint user groups in which no group holds more antennas than the
/// other two combined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    /// 1-based user labels, ascending within each group.
    pub groups: Vec<Vec<usize>>,
    pub sums: Vec<usize>,
}

impl PartitionPlan {
    fn from_assignment(profile: &AntennaProfile, colors: &[usize]) -> Self {
        let mut groups = vec![Vec::new(); 3];
        let mut sums = vec![0; 3];
        for (user, &c) in colors.iter().enumerate() {
            groups[c].push(user + 1);
            sums[c] += profile.antennas(user);
        }
        Self { groups, sums }
    }

    /// Checks disjoint nonempty cover of `1..=K`, the recorded sums, and the
    /// balance condition.
    pub fn is_valid_for(&self, profile: &AntennaProfile) -> bool {
        if self.groups.len() != 3 || self.sums.len() != 3 {
            return false;
        }
        let k = profile.users();
        let mut seen = vec![false; k];
        for (g, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return false;
            }
            let mut sum = 0;
            for &u in group {
                if u == 0 || u > k || seen[u - 1] {
                    return false;
                }
                seen[u - 1] = true;
                sum += profile.antennas(u - 1);
            }
            if sum != self.sums[g] {
                return false;
            }
        }
        let total: usize = self.sums.iter().sum();
        seen.iter().all(|&s| s) && self.sums.iter().all(|&s| 2 * s <= total)
    }
}

pub const MAX_EXHAUSTIVE_PARTITION_USERS: usize = 15;

/// Longest-first greedy: each user joins the currently lightest group
/// (lowest index on ties).
fn greedy_partition(profile: &AntennaProfile) -> Vec<usize> {
    let mut sums = [0usize; 3];
    profile
        .counts()
        .iter()
        .map(|&m| {
            let g = (0..3).min_by_key(|&g| (sums[g], g)).expect("three groups");
            sums[g] += m;
            g
        })
        .collect()
}

/// Walks restricted-growth strings over three colors (each unordered
/// 3-coloring once) in lexicographic order.
fn exhaustive_partition(profile: &AntennaProfile) -> Option<Vec<usize>> {
    let k = profile.users();
    let mut colors = vec![0usize; k];
    loop {
        let max_used = colors.iter().copied().max().unwrap_or(0);
        if max_used == 2 {
            let plan = PartitionPlan::from_assignment(profile, &colors);
            if plan.is_valid_for(profile) {
                return Some(colors);
            }
        }
        // Next restricted-growth string.
        let mut pos = k;
        loop {
            if pos == 1 {
                return None;
            }
            pos -= 1;
            let prefix_max = colors[..pos].iter().copied().max().unwrap_or(0);
            if colors[pos] < 2 && colors[pos] <= prefix_max {
                colors[pos] += 1;
                for c in colors.iter_mut().skip(pos + 1) {
                    *c = 0;
                }
                break;
            }
        }
    }
}

/// Splits users into three groups that can each be treated as one
/// cooperating super-user of a 3-user channel without a dominant user.
pub fn three_group_partition(profile: &AntennaProfile) -> Result<PartitionPlan, BoundsError> {
    let k = profile.users();
    if k < 3 {
        return Err(BoundsError::TooFewUsers(k));
    }
    if dominant_user_present(profile) {
        return Err(BoundsError::DominantUser(profile.to_string()));
    }
    let plan = PartitionPlan::from_assignment(profile, &greedy_partition(profile));
    if plan.is_valid_for(profile) {
        return Ok(plan);
    }
    if k > MAX_EXHAUSTIVE_PARTITION_USERS {
        return Err(BoundsError::NoPartition(profile.to_string()));
    }
    exhaustive_partition(profile)
        .map(|colors| PartitionPlan::from_assignment(profile, &colors))
        .ok_or_else(|| BoundsError::NoPartition(profile.to_string()))
}

/// Everything the closed forms say about one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoFReport {
    pub profile: AntennaProfile,
    pub inner: DoFValue,
    /// Absent for a single user, where no two-group split exists.
    pub outer_coop: Option<DoFValue>,
    pub witness: Option<Vec<usize>>,
    pub theorem: DoFValue,
    pub regime: Regime,
    pub partition: Option<Vec<Vec<usize>>>,
}

pub fn dof_report(profile: &AntennaProfile) -> Result<DoFReport, BoundsError> {
    let (outer_coop, witness) = match cooperation_outer_bound(profile) {
        Ok((v, w)) => (Some(v), Some(w)),
        Err(BoundsError::SingleUser) => (None, None),
        Err(e) => return Err(e),
    };
    let (theorem, regime) = sum_dof(profile);
    let partition = if regime == Regime::Decomposition && profile.users() >= 3 {
        Some(three_group_partition(profile)?.groups)
    } else {
        None
    };
    Ok(DoFReport {
        profile: profile.clone(),
        inner: inner_bound(profile),
        outer_coop,
        witness,
        theorem,
        regime,
        partition,
    })
}

/// `a * d + b * d' <= c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfPlane {
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
}

impl HalfPlane {
    pub fn new(a: Rational, b: Rational, c: Rational) -> Self {
        Self { a, b, c }
    }

    fn holds(&self, p: (Rational, Rational)) -> bool {
        self.a * p.0 + self.b * p.1 <= self.c
    }
}

/// Polygon in the `(d, d')` plane cut out by half-planes plus the implied
/// `d >= 0`, `d' >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region2D {
    pub constraints: Vec<HalfPlane>,
}

pub type Point2 = (Rational, Rational);

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

impl Region2D {
    pub fn new(constraints: Vec<HalfPlane>) -> Self {
        Self { constraints }
    }

    fn all_constraints(&self) -> Vec<HalfPlane> {
        let mut all = self.constraints.clone();
        all.push(HalfPlane::new(r(-1), r(0), r(0)));
        all.push(HalfPlane::new(r(0), r(-1), r(0)));
        all
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.all_constraints().iter().all(|h| h.holds(p))
    }

    /// Feasible pairwise intersections of constraint boundaries, deduplicated
    /// and sorted by `(d, d')`.
    pub fn vertices(&self) -> Vec<Point2> {
        let all = self.all_constraints();
        let mut out = Vec::new();
        for (i, h) in all.iter().enumerate() {
            for g in &all[i + 1..] {
                let det = h.a * g.b - h.b * g.a;
                if det.is_zero() {
                    continue;
                }
                let p = ((h.c * g.b - h.b * g.c) / det, (h.a * g.c - h.c * g.a) / det);
                if all.iter().all(|c| c.holds(p)) {
                    out.push(p);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// True when some nonzero direction in the first quadrant satisfies every
    /// homogeneous constraint `a * x + b * y <= 0`.
    pub fn is_unbounded(&self) -> bool {
        let mut candidates = vec![(r(1), r(0)), (r(0), r(1))];
        for h in &self.constraints {
            candidates.push((h.b, -h.a));
            candidates.push((-h.b, h.a));
        }
        candidates.into_iter().any(|dir| {
            dir.0 >= r(0)
                && dir.1 >= r(0)
                && !(dir.0.is_zero() && dir.1.is_zero())
                && self.constraints.iter().all(|h| h.a * dir.0 + h.b * dir.1 <= r(0))
        })
    }
}

/// The (2,2,1) region for `d_1 = d_2 = d`, `d_3 = d'`:
/// `d <= 1`, `d' <= 1`, `d + d' <= 3/2`.
pub fn region_example_221() -> Region2D {
    Region2D::new(vec![
        HalfPlane::new(r(1), r(0), r(1)),
        HalfPlane::new(r(0), r(1), r(1)),
        HalfPlane::new(r(1), r(1), Rational::new(3, 2)),
    ])
}

/// Maximizes `a * d + b * d'` by vertex enumeration. The first maximizing
/// vertex in `(d, d')` order is returned.
pub fn polytope_max(region: &Region2D, objective: (Rational, Rational)) -> Result<(DoFValue, Point2), BoundsError> {
    let vertices = region.vertices();
    if vertices.is_empty() {
        return Err(BoundsError::EmptyRegion);
    }
    if region.is_unbounded() {
        return Err(BoundsError::UnboundedRegion);
    }
    let value = |p: &Point2| objective.0 * p.0 + objective.1 * p.1;
    let mut best = vertices[0];
    for v in &vertices[1..] {
        if value(v).cmp(&value(&best)) == Ordering::Greater {
            best = *v;
        }
    }
    Ok((DoFValue::from(value(&best)), best))
}

/// Upper-right boundary: vertices not weakly dominated by another vertex.
pub fn pareto_vertices(region: &Region2D) -> Vec<Point2> {
    let vs = region.vertices();
    vs.iter()
        .filter(|p| !vs.iter().any(|q| q != *p && q.0 >= p.0 && q.1 >= p.1))
        .copied()
        .collect()
}
