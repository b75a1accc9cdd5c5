//! Antenna profiles and seeded generic channel realizations.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ensure_finite, ComplexMatrix, MatrixDoc, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("antenna profile must name at least one user")]
    Empty,
    #[error("user {user} has zero antennas")]
    ZeroAntennas { user: usize },
    #[error("antenna counts must be non-increasing: {0:?}")]
    NotSorted(Vec<usize>),
    #[error("cannot parse antenna count {0:?}")]
    Parse(String),
}

/// Antenna counts `M_1 >= M_2 >= ... >= M_K >= 1`; user `i` has `M_i`
/// antennas at both its transmitter and its receiver.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AntennaProfile(Vec<usize>);

impl AntennaProfile {
    /// Accepts only an already sorted profile.
    pub fn new(counts: Vec<usize>) -> Result<Self, ProfileError> {
        Self::check_entries(&counts)?;
        if counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(ProfileError::NotSorted(counts));
        }
        Ok(Self(counts))
    }

    /// Sorts into non-increasing order first. Relabelling users does not
    /// change any DoF quantity.
    pub fn sorted(mut counts: Vec<usize>) -> Result<Self, ProfileError> {
        Self::check_entries(&counts)?;
        counts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self(counts))
    }

    fn check_entries(counts: &[usize]) -> Result<(), ProfileError> {
        if counts.is_empty() {
            return Err(ProfileError::Empty);
        }
        if let Some(pos) = counts.iter().position(|&m| m == 0) {
            return Err(ProfileError::ZeroAntennas { user: pos + 1 });
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    /// Antenna count of the user at 0-based index `i`.
    pub fn antennas(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn largest(&self) -> usize {
        self.0[0]
    }
}

impl TryFrom<Vec<usize>> for AntennaProfile {
    type Error = ProfileError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AntennaProfile> for Vec<usize> {
    fn from(p: AntennaProfile) -> Self {
        p.0
    }
}

impl fmt::Display for AntennaProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|m| m.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Parses comma-separated counts, sorting them.
impl FromStr for AntennaProfile {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let counts = s
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<usize>().map_err(|_| ProfileError::Parse(t.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::sorted(counts)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("expected a {expected}x{expected} grid of blocks, got {got} rows")]
    GridSize { expected: usize, got: usize },
    #[error("block ({rx},{tx}) has shape {got:?}, expected {expected:?}")]
    BlockShape {
        rx: usize,
        tx: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One draw of all cross and direct channel matrices. `block(i, j)` is the
/// `M_i x M_j` matrix from transmitter `j` to receiver `i` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    profile: AntennaProfile,
    seed: u64,
    blocks: Vec<Vec<ComplexMatrix>>,
}

impl ChannelRealization {
    /// Wraps explicit blocks, validating shape and finiteness. `seed` is kept
    /// only as a provenance record.
    pub fn from_blocks(
        profile: AntennaProfile,
        seed: u64,
        blocks: Vec<Vec<ComplexMatrix>>,
    ) -> Result<Self, ChannelError> {
        let k = profile.users();
        if blocks.len() != k {
            return Err(ChannelError::GridSize {
                expected: k,
                got: blocks.len(),
            });
        }
        for (i, row) in blocks.iter().enumerate() {
            if row.len() != k {
                return Err(ChannelError::GridSize {
                    expected: k,
                    got: row.len(),
                });
            }
            for (j, h) in row.iter().enumerate() {
                let expected = (profile.antennas(i), profile.antennas(j));
                if h.shape() != expected {
                    return Err(ChannelError::BlockShape {
                        rx: i + 1,
                        tx: j + 1,
                        expected,
                        got: h.shape(),
                    });
                }
                ensure_finite(h)?;
            }
        }
        Ok(Self {
            profile,
            seed,
            blocks,
        })
    }

    pub fn profile(&self) -> &AntennaProfile {
        &self.profile
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn users(&self) -> usize {
        self.profile.users()
    }

    pub fn block(&self, rx: usize, tx: usize) -> &ComplexMatrix {
        &self.blocks[rx][tx]
    }

    /// Swaps in a replacement block of the same shape.
    pub fn replace_block(&mut self, rx: usize, tx: usize, h: ComplexMatrix) -> Result<(), ChannelError> {
        let expected = (self.profile.antennas(rx), self.profile.antennas(tx));
        if h.shape() != expected {
            return Err(ChannelError::BlockShape {
                rx: rx + 1,
                tx: tx + 1,
                expected,
                got: h.shape(),
            });
        }
        ensure_finite(&h)?;
        self.blocks[rx][tx] = h;
        Ok(())
    }

    pub fn to_doc(&self) -> ChannelDoc {
        let mut blocks = Vec::new();
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, h) in row.iter().enumerate() {
                blocks.push(BlockDoc {
                    rx: i + 1,
                    tx: j + 1,
                    matrix: MatrixDoc::from(h),
                });
            }
        }
        ChannelDoc {
            profile: self.profile.clone(),
            seed: self.seed,
            blocks,
        }
    }

    pub fn from_doc(doc: &ChannelDoc) -> Result<Self, ChannelError> {
        let k = doc.profile.users();
        let mut grid: Vec<Vec<Option<ComplexMatrix>>> = vec![vec![None; k]; k];
        for b in &doc.blocks {
            if b.rx == 0 || b.tx == 0 || b.rx > k || b.tx > k {
                return Err(ChannelError::GridSize {
                    expected: k,
                    got: b.rx.max(b.tx),
                });
            }
            grid[b.rx - 1][b.tx - 1] = Some(b.matrix.to_matrix()?);
        }
        let mut blocks = Vec::with_capacity(k);
        for (i, row) in grid.into_iter().enumerate() {
            let mut out = Vec::with_capacity(k);
            for (j, h) in row.into_iter().enumerate() {
                out.push(h.ok_or(ChannelError::BlockShape {
                    rx: i + 1,
                    tx: j + 1,
                    expected: (doc.profile.antennas(i), doc.profile.antennas(j)),
                    got: (0, 0),
                })?);
            }
            blocks.push(out);
        }
        Self::from_blocks(doc.profile.clone(), doc.seed, blocks)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("channel document serializes")
    }
}

/// JSON form of a [`ChannelRealization`]. User labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub profile: AntennaProfile,
    pub seed: u64,
    pub blocks: Vec<BlockDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub rx: usize,
    pub tx: usize,
    #[serde(flatten)]
    pub matrix: MatrixDoc,
}

/// Stream id for block `(rx, tx)`; keeps each block's draw independent of
/// the grid size and of generation order.
fn block_stream(rx: usize, tx: usize) -> u64 {
    ((rx as u64) << 32) | tx as u64
}

/// Fills an `rows x cols` matrix with i.i.d. CN(0, 1) entries drawn from `rng`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::zeros(rows, cols);
    // Row-major fill so the entry order matches the serialized layout.
    for r in 0..rows {
        for c in 0..cols {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(r, c)] = Complex64::new(scale * re, scale * im);
        }
    }
    m
}

/// Draws every block with i.i.d. CN(0, 1) entries. Deterministic in
/// `(profile, seed)`.
pub fn generate_channel(profile: &AntennaProfile, seed: u64) -> ChannelRealization {
    let k = profile.users();
    let blocks = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(block_stream(i, j));
                    complex_gaussian(profile.antennas(i), profile.antennas(j), &mut rng)
                })
                .collect()
        })
        .collect();
    ChannelRealization {
        profile: profile.clone(),
        seed,
        blocks,
    }
}
