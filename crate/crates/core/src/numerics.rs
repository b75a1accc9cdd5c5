//! Rank-revealing dense complex linear algebra.
//!
//! Everything here goes through a singular value decomposition. Null-space
//! bases are orthonormal and empty (zero-width or zero-height) matrices are
//! ordinary values, so callers never special-case degenerate block sizes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix. Rows and columns may be zero.
pub type ComplexMatrix = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{rows}x{cols} matrix cannot hold {len} entries")]
    InvalidShape { rows: usize, cols: usize, len: usize },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
}

/// Numeric thresholds standing in for "almost surely" statements.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    /// Singular values at or below `rank_rel_tol * sigma_max` count as zero.
    pub rank_rel_tol: f64,
    /// Relative residual below which an entry is considered neutralized.
    pub zero_rel_tol: f64,
}

impl Tolerance {
    pub const DEFAULT_RANK_REL_TOL: f64 = 1e-10;
    pub const DEFAULT_ZERO_REL_TOL: f64 = 1e-8;

    pub fn new(rank_rel_tol: f64, zero_rel_tol: f64) -> Result<Self, NumericsError> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !in_unit(rank_rel_tol) || rank_rel_tol >= 1e-3 {
            return Err(NumericsError::InvalidTolerance(format!(
                "rank_rel_tol must lie in (0, 1e-3), got {rank_rel_tol}"
            )));
        }
        if !in_unit(zero_rel_tol) {
            return Err(NumericsError::InvalidTolerance(format!(
                "zero_rel_tol must lie in (0, 1), got {zero_rel_tol}"
            )));
        }
        Ok(Self {
            rank_rel_tol,
            zero_rel_tol,
        })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rank_rel_tol: Self::DEFAULT_RANK_REL_TOL,
            zero_rel_tol: Self::DEFAULT_ZERO_REL_TOL,
        }
    }
}

/// Result of a condition-number query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Finite(f64),
    /// Smallest singular value fell below the rank cutoff.
    Singular,
}

impl Condition {
    pub fn value(self) -> f64 {
        match self {
            Condition::Finite(c) => c,
            Condition::Singular => f64::INFINITY,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, Condition::Singular)
    }
}

pub fn ensure_finite(a: &ComplexMatrix) -> Result<(), NumericsError> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// Singular values in non-increasing order. Empty for an empty matrix.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>, NumericsError> {
    ensure_finite(a)?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(a: &ComplexMatrix) -> Result<f64, NumericsError> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

fn rank_from_singular_values(sv: &[f64], tol: &Tolerance) -> usize {
    match sv.first() {
        Some(&max) if max > 0.0 => {
            let cutoff = tol.rank_rel_tol * max;
            sv.iter().filter(|&&s| s > cutoff).count()
        }
        _ => 0,
    }
}

/// Number of singular values strictly above `rank_rel_tol * sigma_max`.
pub fn numerical_rank(a: &ComplexMatrix, tol: &Tolerance) -> Result<usize, NumericsError> {
    let sv = singular_values(a)?;
    Ok(rank_from_singular_values(&sv, tol))
}

/// Orthonormal basis (as columns) of the numerical right null space of `a`.
///
/// The width is exactly `cols(a) - numerical_rank(a)`.
pub fn right_null_basis(a: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix, NumericsError> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    if m == 0 || a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(ComplexMatrix::identity(n, n));
    }

    // Pad wide inputs with zero rows so the decomposition yields a full n x n V.
    let padded = if m < n {
        let mut b = ComplexMatrix::zeros(n, n);
        b.view_mut((0, 0), (m, n)).copy_from(a);
        b
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = rank_from_singular_values(&sv, tol);

    let null_rows = &order[rank..];
    let mut basis = ComplexMatrix::zeros(n, null_rows.len());
    for (col, &row) in null_rows.iter().enumerate() {
        for k in 0..n {
            basis[(k, col)] = v_t[(row, k)].conj();
        }
    }
    Ok(basis)
}

/// Orthonormal basis (as rows) of the numerical left null space of `a`:
/// the conjugate transpose of the right null basis of `a^H`.
pub fn left_null_basis(a: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix, NumericsError> {
    Ok(right_null_basis(&a.adjoint(), tol)?.adjoint())
}

/// `sigma_max / sigma_min` for a square matrix, or [`Condition::Singular`]
/// when `sigma_min` is at or below the rank cutoff. A 0x0 matrix has
/// condition number 1.
pub fn condition_number(a: &ComplexMatrix, tol: &Tolerance) -> Result<Condition, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let sv = singular_values(a)?;
    let (Some(&max), Some(&min)) = (sv.first(), sv.last()) else {
        return Ok(Condition::Finite(1.0));
    };
    if max == 0.0 || min <= tol.rank_rel_tol * max {
        return Ok(Condition::Singular);
    }
    Ok(Condition::Finite(max / min))
}

/// Horizontal concatenation. All parts must share the row count `rows`.
pub fn hstack(rows: usize, parts: &[&ComplexMatrix]) -> ComplexMatrix {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, at), (rows, p.ncols())).copy_from(*p);
        at += p.ncols();
    }
    out
}

/// Vertical concatenation. All parts must share the column count `cols`.
pub fn vstack(cols: usize, parts: &[&ComplexMatrix]) -> ComplexMatrix {
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "vstack column mismatch");
        out.view_mut((at, 0), (p.nrows(), cols)).copy_from(*p);
        at += p.nrows();
    }
    out
}

/// Copy of the sub-block starting at `(row, col)` with the given shape.
pub fn block(a: &ComplexMatrix, row: usize, col: usize, rows: usize, cols: usize) -> ComplexMatrix {
    a.view((row, col), (rows, cols)).into_owned()
}

/// Largest entry modulus; zero for empty matrices.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Row-major `[re, im]` pairs, the on-disk form of a matrix block.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&ComplexMatrix> for MatrixDoc {
    fn from(a: &ComplexMatrix) -> Self {
        let mut data = Vec::with_capacity(a.len());
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                let z = a[(r, c)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data,
        }
    }
}

impl MatrixDoc {
    pub fn to_matrix(&self) -> Result<ComplexMatrix, NumericsError> {
        if self.data.len() != self.rows * self.cols {
            return Err(NumericsError::InvalidShape {
                rows: self.rows,
                cols: self.cols,
                len: self.data.len(),
            });
        }
        let m = ComplexMatrix::from_fn(self.rows, self.cols, |r, c| {
            let [re, im] = self.data[r * self.cols + c];
            Complex64::new(re, im)
        });
        ensure_finite(&m)?;
        Ok(m)
    }
}
