//! Invertible beamforming (`V`) and shaping (`U`) matrices that neutralize
//! chosen blocks of a 3-user channel, giving `H_ij = U_i * Hbar_ij * V_j`.
//!
//! Two constructions live here:
//!
//! * [`transform_example_221`]: the four-step antenna-level procedure for the
//!   `(2,2,1)` channel, leaving eight scalar zeros.
//! * [`transform_general_3user`]: the block-level procedure for any
//!   `M_1 >= M_2 >= M_3` with `M_1 <= M_2 + M_3`.
//!
//! Both pick vectors from numerical null spaces and fail with a
//! [`TransformError::NullSpaceDimension`] naming the step if a null space
//! does not have its generic dimension.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{complex_gaussian, AntennaProfile, ChannelRealization};
use crate::numerics::{
    condition_number, hstack, left_null_basis, numerical_rank, right_null_basis, spectral_norm, vstack,
    ComplexMatrix, MatrixDoc, NumericsError, Tolerance,
};

/// Largest condition number accepted for any `U_i` or `V_i`.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "example221")]
    Example221,
    #[serde(rename = "general3")]
    General3User,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Example221 => "example221",
            Variant::General3User => "general3",
        })
    }
}

impl FromStr for Variant {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "example221" | "example_221" => Ok(Variant::Example221),
            "general3" | "general_3user" => Ok(Variant::General3User),
            other => Err(TransformError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("unknown transform variant {0:?}")]
    UnknownVariant(String),
    #[error("profile {profile} is incompatible with variant {variant}: {reason}")]
    IncompatibleProfile {
        profile: String,
        variant: Variant,
        reason: String,
    },
    #[error("non-generic channel at {step}: null space has dimension {got}, expected {expected}")]
    NullSpaceDimension {
        step: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{matrix} is not invertible (condition number {condition:?})")]
    NotInvertible { matrix: String, condition: Option<f64> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl TransformError {
    /// Errors caused by the channel draw rather than by the request.
    pub fn is_non_generic(&self) -> bool {
        matches!(
            self,
            TransformError::NullSpaceDimension { .. } | TransformError::NotInvertible { .. }
        )
    }
}

/// Per-user block sizes on the transmit (`x_sizes`) and receive (`y_sizes`)
/// sides. Blocks may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub x_sizes: Vec<Vec<usize>>,
    pub y_sizes: Vec<Vec<usize>>,
}

impl BlockPartition {
    /// One block per antenna.
    pub fn antenna_granular(profile: &AntennaProfile) -> Self {
        let sizes: Vec<Vec<usize>> = profile.counts().iter().map(|&m| vec![1; m]).collect();
        Self {
            x_sizes: sizes.clone(),
            y_sizes: sizes,
        }
    }

    pub fn users(&self) -> usize {
        self.x_sizes.len()
    }

    fn offsets(sizes: &[usize]) -> Vec<usize> {
        sizes
            .iter()
            .scan(0, |acc, &s| {
                let at = *acc;
                *acc += s;
                Some(at)
            })
            .collect()
    }

    pub fn x_offsets(&self, user: usize) -> Vec<usize> {
        Self::offsets(&self.x_sizes[user])
    }

    pub fn y_offsets(&self, user: usize) -> Vec<usize> {
        Self::offsets(&self.y_sizes[user])
    }

    /// Which block a scalar index falls in.
    fn block_of(sizes: &[usize], index: usize) -> usize {
        let mut acc = 0;
        for (b, &s) in sizes.iter().enumerate() {
            acc += s;
            if index < acc {
                return b;
            }
        }
        panic!("index {index} outside partition {sizes:?}")
    }
}

/// Block sizes of the general 3-user construction:
///
/// * user 1 transmit `(M1-M2, M2+M3-M1, M1-M3)`, receive `(M1-M3, M2+M3-M1, M1-M2)`
/// * user 2 transmit and receive `(M2+M3-M1, M1-M3)`
/// * user 3 transmit and receive `(M2+M3-M1, M1-M2)`
pub fn block_partition_3user(profile: &AntennaProfile) -> Result<BlockPartition, TransformError> {
    let incompatible = |reason: String| TransformError::IncompatibleProfile {
        profile: profile.to_string(),
        variant: Variant::General3User,
        reason,
    };
    if profile.users() != 3 {
        return Err(incompatible(format!("needs exactly 3 users, got {}", profile.users())));
    }
    let (m1, m2, m3) = (profile.antennas(0), profile.antennas(1), profile.antennas(2));
    if m1 > m2 + m3 {
        return Err(incompatible(
            "dominant-user profile (M1 > M2 + M3) is not supported by this transform".into(),
        ));
    }
    let a = m1 - m2;
    let b = m1 - m3;
    let c = m2 + m3 - m1;
    Ok(BlockPartition {
        x_sizes: vec![vec![a, c, b], vec![c, b], vec![c, a]],
        y_sizes: vec![vec![b, c, a], vec![c, b], vec![c, a]],
    })
}

/// Required-zero blocks for every ordered cross pair `(rx, tx)`.
/// Required-zero `(receive block, transmit block)` pairs of one link `(rx, tx)`.
type ZeroBlocks = ((usize, usize), &'static [(usize, usize)]);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroPattern {
    pub variant: Variant,
    pub partition: BlockPartition,
    /// `masks[rx][tx][a][b]`: receive block `a` of user `rx` must see nothing
    /// from transmit block `b` of user `tx`. Blocks with no entries are never
    /// marked, and direct links are all `false`.
    masks: Vec<Vec<Vec<Vec<bool>>>>,
}

impl ZeroPattern {
    fn from_zero_blocks(variant: Variant, partition: BlockPartition, zeros: &[ZeroBlocks]) -> Self {
        let k = partition.users();
        let mut masks: Vec<Vec<Vec<Vec<bool>>>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| vec![vec![false; partition.x_sizes[j].len()]; partition.y_sizes[i].len()])
                    .collect()
            })
            .collect();
        for &((i, j), blocks) in zeros {
            for &(a, b) in blocks {
                if partition.y_sizes[i][a] > 0 && partition.x_sizes[j][b] > 0 {
                    masks[i][j][a][b] = true;
                }
            }
        }
        Self {
            variant,
            partition,
            masks,
        }
    }

    pub fn users(&self) -> usize {
        self.partition.users()
    }

    pub fn block_mask(&self, rx: usize, tx: usize) -> &[Vec<bool>] {
        &self.masks[rx][tx]
    }

    pub fn is_required_zero(&self, rx: usize, tx: usize, a: usize, b: usize) -> bool {
        self.masks[rx][tx][a][b]
    }

    /// Scalar-level mask of `H_{rx,tx}`.
    pub fn entry_mask(&self, rx: usize, tx: usize) -> Vec<Vec<bool>> {
        let ys = &self.partition.y_sizes[rx];
        let xs = &self.partition.x_sizes[tx];
        let rows: usize = ys.iter().sum();
        let cols: usize = xs.iter().sum();
        (0..rows)
            .map(|r| {
                let a = BlockPartition::block_of(ys, r);
                (0..cols)
                    .map(|c| self.masks[rx][tx][a][BlockPartition::block_of(xs, c)])
                    .collect()
            })
            .collect()
    }

    pub fn scalar_zero_count(&self) -> usize {
        let k = self.users();
        let mut n = 0;
        for i in 0..k {
            for j in 0..k {
                for (a, row) in self.masks[i][j].iter().enumerate() {
                    for (b, &z) in row.iter().enumerate() {
                        if z {
                            n += self.partition.y_sizes[i][a] * self.partition.x_sizes[j][b];
                        }
                    }
                }
            }
        }
        n
    }

    /// `'0'` for a required zero, `'*'` otherwise, one line per row, keyed
    /// by `H<rx><tx>` with 1-based users.
    pub fn grid(&self) -> BTreeMap<String, Vec<String>> {
        let k = self.users();
        let mut out = BTreeMap::new();
        for i in 0..k {
            for j in 0..k {
                let lines = self
                    .entry_mask(i, j)
                    .iter()
                    .map(|row| row.iter().map(|&z| if z { '0' } else { '*' }).collect())
                    .collect();
                out.insert(format!("H{}{}", i + 1, j + 1), lines);
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (name, lines) in self.grid() {
            s.push_str(&name);
            s.push_str(":\n");
            for l in lines {
                s.push_str("  ");
                s.push_str(&l);
                s.push('\n');
            }
        }
        s
    }
}

/// Zero pattern the named construction must produce on `profile`.
pub fn expected_zero_pattern(profile: &AntennaProfile, variant: Variant) -> Result<ZeroPattern, TransformError> {
    match variant {
        Variant::Example221 => {
            require_221(profile)?;
            let partition = BlockPartition::antenna_granular(profile);
            Ok(ZeroPattern::from_zero_blocks(
                variant,
                partition,
                &[
                    ((0, 1), &[(0, 1), (1, 0)]),
                    ((1, 0), &[(0, 1), (1, 0)]),
                    ((0, 2), &[(1, 0)]),
                    ((1, 2), &[(1, 0)]),
                    ((2, 0), &[(0, 1)]),
                    ((2, 1), &[(0, 1)]),
                ],
            ))
        }
        Variant::General3User => {
            let partition = block_partition_3user(profile)?;
            Ok(ZeroPattern::from_zero_blocks(
                variant,
                partition,
                &[
                    ((0, 1), &[(0, 0), (1, 1), (2, 0), (2, 1)]),
                    ((0, 2), &[(0, 0), (0, 1), (1, 1), (2, 0)]),
                    ((1, 0), &[(0, 0), (0, 2), (1, 0)]),
                    ((1, 2), &[(1, 0)]),
                    ((2, 0), &[(0, 0), (0, 2), (1, 2)]),
                    ((2, 1), &[(1, 0)]),
                ],
            ))
        }
    }
}

fn require_221(profile: &AntennaProfile) -> Result<(), TransformError> {
    if profile.counts() != [2, 2, 1] {
        return Err(TransformError::IncompatibleProfile {
            profile: profile.to_string(),
            variant: Variant::Example221,
            reason: "this construction is specific to (2,2,1)".into(),
        });
    }
    Ok(())
}

/// Square invertible `V_i` (beamforming) and `U_i` (shaping) for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPair {
    pub v: Vec<ComplexMatrix>,
    pub u: Vec<ComplexMatrix>,
}

impl TransformPair {
    pub fn identity(profile: &AntennaProfile) -> Self {
        let eye: Vec<ComplexMatrix> = profile.counts().iter().map(|&m| ComplexMatrix::identity(m, m)).collect();
        Self { v: eye.clone(), u: eye }
    }
}

/// Largest relative residual found in one required-zero block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockResidual {
    /// 1-based users and blocks.
    pub rx: usize,
    pub tx: usize,
    pub rx_block: usize,
    pub tx_block: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residuals: Vec<BlockResidual>,
    pub max_residual: f64,
    /// `None` marks a numerically singular matrix.
    pub u_conditions: Vec<Option<f64>>,
    pub v_conditions: Vec<Option<f64>>,
    pub direct_link_ranks: Vec<usize>,
    pub residuals_ok: bool,
    pub invertible: bool,
    pub direct_links_full_rank: bool,
    pub pass: bool,
}

/// Result of applying a [`TransformPair`] to a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedChannel {
    pub blocks: Vec<Vec<ComplexMatrix>>,
    pub pattern: ZeroPattern,
    pub residuals: Vec<BlockResidual>,
}

impl TransformedChannel {
    pub fn block(&self, rx: usize, tx: usize) -> &ComplexMatrix {
        &self.blocks[rx][tx]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn to_doc(&self) -> TransformedChannelDoc {
        let mut blocks = Vec::new();
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, h) in row.iter().enumerate() {
                blocks.push(crate::channel::BlockDoc {
                    rx: i + 1,
                    tx: j + 1,
                    matrix: MatrixDoc::from(h),
                });
            }
        }
        TransformedChannelDoc {
            variant: self.pattern.variant,
            partition: self.pattern.partition.clone(),
            blocks,
            pattern: self.pattern.grid(),
            required_zeros: self.pattern.scalar_zero_count(),
            residuals: self.residuals.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedChannelDoc {
    pub variant: Variant,
    pub partition: BlockPartition,
    pub blocks: Vec<crate::channel::BlockDoc>,
    pub pattern: BTreeMap<String, Vec<String>>,
    pub required_zeros: usize,
    pub residuals: Vec<BlockResidual>,
}

fn conditions(ms: &[ComplexMatrix], tol: &Tolerance) -> Result<Vec<Option<f64>>, TransformError> {
    ms.iter()
        .map(|m| {
            let c = condition_number(m, tol)?;
            Ok(if c.is_singular() { None } else { Some(c.value()) })
        })
        .collect()
}

fn apply(ch: &ChannelRealization, pair: &TransformPair) -> Vec<Vec<ComplexMatrix>> {
    let k = ch.users();
    (0..k)
        .map(|i| (0..k).map(|j| &pair.u[i] * ch.block(i, j) * &pair.v[j]).collect())
        .collect()
}

fn check_shapes(ch: &ChannelRealization, pair: &TransformPair, pattern: &ZeroPattern) -> Result<(), TransformError> {
    let profile = ch.profile();
    let k = profile.users();
    if pair.u.len() != k || pair.v.len() != k || pattern.users() != k {
        return Err(TransformError::ShapeMismatch(format!(
            "channel has {k} users, pair has {}/{} matrices, pattern {} users",
            pair.u.len(),
            pair.v.len(),
            pattern.users()
        )));
    }
    for i in 0..k {
        let m = profile.antennas(i);
        for (name, mat) in [("U", &pair.u[i]), ("V", &pair.v[i])] {
            if mat.shape() != (m, m) {
                return Err(TransformError::ShapeMismatch(format!(
                    "{name}{} is {:?}, expected {m}x{m}",
                    i + 1,
                    mat.shape()
                )));
            }
        }
        let xs: usize = pattern.partition.x_sizes[i].iter().sum();
        let ys: usize = pattern.partition.y_sizes[i].iter().sum();
        if xs != m || ys != m {
            return Err(TransformError::ShapeMismatch(format!(
                "pattern partition of user {} covers {xs}/{ys} antennas, expected {m}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Entry `(r, c)` of `U Hbar V` scaled by `|u_r| * ||Hbar|| * |v_c|`, the
/// largest it could be for the given row and column. Zero when that scale
/// vanishes.
fn block_residuals(
    ch: &ChannelRealization,
    pair: &TransformPair,
    transformed: &[Vec<ComplexMatrix>],
    pattern: &ZeroPattern,
) -> Result<Vec<BlockResidual>, TransformError> {
    let mut out = Vec::new();
    for (i, row_blocks) in transformed.iter().enumerate() {
        for (j, t) in row_blocks.iter().enumerate() {
            if i == j {
                continue;
            }
            let h_norm = spectral_norm(ch.block(i, j))?;
            let y_off = pattern.partition.y_offsets(i);
            let x_off = pattern.partition.x_offsets(j);
            for (a, row) in pattern.block_mask(i, j).iter().enumerate() {
                for (b, &zero) in row.iter().enumerate() {
                    if !zero {
                        continue;
                    }
                    let mut worst: f64 = 0.0;
                    for r in y_off[a]..y_off[a] + pattern.partition.y_sizes[i][a] {
                        let u_norm = pair.u[i].row(r).norm();
                        for c in x_off[b]..x_off[b] + pattern.partition.x_sizes[j][b] {
                            let scale = u_norm * h_norm * pair.v[j].column(c).norm();
                            if scale > 0.0 {
                                worst = worst.max(t[(r, c)].norm() / scale);
                            }
                        }
                    }
                    out.push(BlockResidual {
                        rx: i + 1,
                        tx: j + 1,
                        rx_block: a + 1,
                        tx_block: b + 1,
                        residual: worst,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Applies `pair` and checks the zero pattern, invertibility of every
/// `U_i`/`V_i` (condition number at most [`MAX_CONDITION`]), and full rank
/// of every transformed direct link.
pub fn verify_transform(
    ch: &ChannelRealization,
    pair: &TransformPair,
    pattern: &ZeroPattern,
    tol: &Tolerance,
) -> Result<VerificationReport, TransformError> {
    check_shapes(ch, pair, pattern)?;
    let transformed = apply(ch, pair);
    let residuals = block_residuals(ch, pair, &transformed, pattern)?;
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    let u_conditions = conditions(&pair.u, tol)?;
    let v_conditions = conditions(&pair.v, tol)?;
    let direct_link_ranks = (0..ch.users())
        .map(|i| numerical_rank(&transformed[i][i], tol))
        .collect::<Result<Vec<_>, _>>()?;

    let residuals_ok = residuals.iter().all(|r| r.residual <= tol.zero_rel_tol);
    let invertible = u_conditions
        .iter()
        .chain(&v_conditions)
        .all(|c| matches!(c, Some(k) if *k <= MAX_CONDITION));
    let direct_links_full_rank = direct_link_ranks
        .iter()
        .enumerate()
        .all(|(i, &r)| r == ch.profile().antennas(i));
    Ok(VerificationReport {
        residuals,
        max_residual,
        u_conditions,
        v_conditions,
        direct_link_ranks,
        residuals_ok,
        invertible,
        direct_links_full_rank,
        pass: residuals_ok && invertible && direct_links_full_rank,
    })
}

/// Knobs shared by both constructions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformOptions {
    pub tol: Tolerance,
    /// Seed for the free beamforming columns; defaults to the channel seed.
    pub free_seed: Option<u64>,
    /// Extra attempts with fresh free columns after an invertibility failure.
    pub retries: u32,
}

fn right_null_exact(
    step: &'static str,
    a: &ComplexMatrix,
    expected: usize,
    tol: &Tolerance,
) -> Result<ComplexMatrix, TransformError> {
    let basis = right_null_basis(a, tol)?;
    if basis.ncols() != expected {
        return Err(TransformError::NullSpaceDimension {
            step,
            expected,
            got: basis.ncols(),
        });
    }
    Ok(basis)
}

fn left_null_exact(
    step: &'static str,
    a: &ComplexMatrix,
    expected: usize,
    tol: &Tolerance,
) -> Result<ComplexMatrix, TransformError> {
    let basis = left_null_basis(a, tol)?;
    if basis.nrows() != expected {
        return Err(TransformError::NullSpaceDimension {
            step,
            expected,
            got: basis.nrows(),
        });
    }
    Ok(basis)
}

fn require_invertible(pair: &TransformPair, tol: &Tolerance) -> Result<(), TransformError> {
    for (name, ms) in [("U", &pair.u), ("V", &pair.v)] {
        for (i, m) in ms.iter().enumerate() {
            let c = condition_number(m, tol)?;
            if c.is_singular() || c.value() > MAX_CONDITION {
                return Err(TransformError::NotInvertible {
                    matrix: format!("{name}{}", i + 1),
                    condition: (!c.is_singular()).then(|| c.value()),
                });
            }
        }
    }
    Ok(())
}

fn finish(
    ch: &ChannelRealization,
    pair: TransformPair,
    variant: Variant,
) -> Result<(TransformPair, TransformedChannel), TransformError> {
    let pattern = expected_zero_pattern(ch.profile(), variant)?;
    let blocks = apply(ch, &pair);
    let residuals = block_residuals(ch, &pair, &blocks, &pattern)?;
    Ok((
        pair,
        TransformedChannel {
            blocks,
            pattern,
            residuals,
        },
    ))
}

/// The four-step `(2,2,1)` construction with default options.
pub fn transform_example_221(ch: &ChannelRealization) -> Result<(TransformPair, TransformedChannel), TransformError> {
    transform_example_221_with(ch, &TransformOptions::default())
}

/// Four neutralization steps, users and antennas 1-based in the comments:
///
/// 1. `v12 in rnull(H31)`, `v22 in rnull(H32)`: Rx3 hears nothing on the
///    second antenna of Tx1 or Tx2.
/// 2. `u11 in lnull(H12 v22)`, `u21 in lnull(H21 v12)`.
/// 3. `u12 in lnull(H13)`, `u22 in lnull(H23)`: Tx3 reaches only the first
///    antenna of Rx1 and Rx2.
/// 4. `v21 in rnull(u12 H12)`, `v11 in rnull(u22 H21)`.
///
/// `U3 = V3 = 1`. The construction has no free choices, so `free_seed` and
/// `retries` are ignored.
pub fn transform_example_221_with(
    ch: &ChannelRealization,
    opts: &TransformOptions,
) -> Result<(TransformPair, TransformedChannel), TransformError> {
    require_221(ch.profile())?;
    let tol = &opts.tol;
    let h = |i: usize, j: usize| ch.block(i - 1, j - 1);

    let v12 = right_null_exact("step 1: v12 in rightnull(H31)", h(3, 1), 1, tol)?;
    let v22 = right_null_exact("step 1: v22 in rightnull(H32)", h(3, 2), 1, tol)?;

    let u11 = left_null_exact("step 2: u11 in leftnull(H12 v22)", &(h(1, 2) * &v22), 1, tol)?;
    let u21 = left_null_exact("step 2: u21 in leftnull(H21 v12)", &(h(2, 1) * &v12), 1, tol)?;

    let u12 = left_null_exact("step 3: u12 in leftnull(H13)", h(1, 3), 1, tol)?;
    let u22 = left_null_exact("step 3: u22 in leftnull(H23)", h(2, 3), 1, tol)?;

    let v21 = right_null_exact("step 4: v21 in rightnull(u12 H12)", &(&u12 * h(1, 2)), 1, tol)?;
    let v11 = right_null_exact("step 4: v11 in rightnull(u22 H21)", &(&u22 * h(2, 1)), 1, tol)?;

    let one = ComplexMatrix::identity(1, 1);
    let pair = TransformPair {
        v: vec![hstack(2, &[&v11, &v12]), hstack(2, &[&v21, &v22]), one.clone()],
        u: vec![vstack(2, &[&u11, &u12]), vstack(2, &[&u21, &u22]), one],
    };
    require_invertible(&pair, tol)?;
    finish(ch, pair, Variant::Example221)
}

/// The block construction for any 3-user profile without a dominant user,
/// with default options.
pub fn transform_general_3user(ch: &ChannelRealization) -> Result<(TransformPair, TransformedChannel), TransformError> {
    transform_general_3user_with(ch, &TransformOptions::default())
}

/// Stream for free columns, kept apart from the per-block channel streams.
fn free_column_rng(seed: u64, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - attempt as u64);
    rng
}

/// Gaussian columns scaled to unit norm.
fn free_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut m = complex_gaussian(rows, cols, rng);
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= num_complex::Complex64::new(n, 0.0);
        }
    }
    m
}

/// Block construction, users and blocks 1-based in the comments. Shaping
/// rows that only depend on the channel come first so the beamforming
/// constraints on `v21` and `v31` can refer to shaped receive blocks:
///
/// * `u11 in lnull(H13)`, `u13 in lnull(H12)`
/// * `v11 in rnull(H21)`, `v13 in rnull(H31)`,
///   `v21 in rnull(u11 H12)`, `v31 in rnull(u13 H13)`
/// * `v12`, `v22`, `v32` random
/// * `u12 in lnull([H12 v22 | H13 v32])`, `u21 in lnull(H21 v13)`,
///   `u22 in lnull(H23 v31)`, `u31 in lnull(H31 v11)`, `u32 in lnull(H32 v21)`
///
/// Each null space must have exactly its block's size.
pub fn transform_general_3user_with(
    ch: &ChannelRealization,
    opts: &TransformOptions,
) -> Result<(TransformPair, TransformedChannel), TransformError> {
    let part = block_partition_3user(ch.profile())?;
    let seed = opts.free_seed.unwrap_or(ch.seed());
    let mut attempt = 0;
    loop {
        match general_attempt(ch, &part, opts, &mut free_column_rng(seed, attempt)) {
            Err(TransformError::NotInvertible { .. }) if attempt < opts.retries => attempt += 1,
            Err(e) => return Err(e),
            Ok(pair) => return finish(ch, pair, Variant::General3User),
        }
    }
}

fn general_attempt(
    ch: &ChannelRealization,
    part: &BlockPartition,
    opts: &TransformOptions,
    rng: &mut ChaCha8Rng,
) -> Result<TransformPair, TransformError> {
    let tol = &opts.tol;
    let profile = ch.profile();
    let (m1, m2, m3) = (profile.antennas(0), profile.antennas(1), profile.antennas(2));
    let h = |i: usize, j: usize| ch.block(i - 1, j - 1);
    let xs = |user: usize, b: usize| part.x_sizes[user - 1][b - 1];
    let ys = |user: usize, a: usize| part.y_sizes[user - 1][a - 1];

    let u11 = left_null_exact("shaping: u11 in leftnull(H13)", h(1, 3), ys(1, 1), tol)?;
    let u13 = left_null_exact("shaping: u13 in leftnull(H12)", h(1, 2), ys(1, 3), tol)?;

    let v11 = right_null_exact("beamforming: v11 in rightnull(H21)", h(2, 1), xs(1, 1), tol)?;
    let v13 = right_null_exact("beamforming: v13 in rightnull(H31)", h(3, 1), xs(1, 3), tol)?;
    let v21 = right_null_exact("beamforming: v21 in rightnull(u11 H12)", &(&u11 * h(1, 2)), xs(2, 1), tol)?;
    let v31 = right_null_exact("beamforming: v31 in rightnull(u13 H13)", &(&u13 * h(1, 3)), xs(3, 1), tol)?;

    let v12 = free_columns(m1, xs(1, 2), rng);
    let v22 = free_columns(m2, xs(2, 2), rng);
    let v32 = free_columns(m3, xs(3, 2), rng);

    let stacked = hstack(m1, &[&(h(1, 2) * &v22), &(h(1, 3) * &v32)]);
    let u12 = left_null_exact("shaping: u12 in leftnull([H12 v22 | H13 v32])", &stacked, ys(1, 2), tol)?;
    let u21 = left_null_exact("shaping: u21 in leftnull(H21 v13)", &(h(2, 1) * &v13), ys(2, 1), tol)?;
    let u22 = left_null_exact("shaping: u22 in leftnull(H23 v31)", &(h(2, 3) * &v31), ys(2, 2), tol)?;
    let u31 = left_null_exact("shaping: u31 in leftnull(H31 v11)", &(h(3, 1) * &v11), ys(3, 1), tol)?;
    let u32 = left_null_exact("shaping: u32 in leftnull(H32 v21)", &(h(3, 2) * &v21), ys(3, 2), tol)?;

    let pair = TransformPair {
        v: vec![
            hstack(m1, &[&v11, &v12, &v13]),
            hstack(m2, &[&v21, &v22]),
            hstack(m3, &[&v31, &v32]),
        ],
        u: vec![
            vstack(m1, &[&u11, &u12, &u13]),
            vstack(m2, &[&u21, &u22]),
            vstack(m3, &[&u31, &u32]),
        ],
    };
    require_invertible(&pair, tol)?;
    Ok(pair)
}

/// Runs the named construction.
pub fn run_variant(
    ch: &ChannelRealization,
    variant: Variant,
    opts: &TransformOptions,
) -> Result<(TransformPair, TransformedChannel), TransformError> {
    match variant {
        Variant::Example221 => transform_example_221_with(ch, opts),
        Variant::General3User => transform_general_3user_with(ch, opts),
    }
}
