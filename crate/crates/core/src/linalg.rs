//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Induced ∞-norm (maximum absolute row sum).
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn cholesky(m: &Matrix, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if !is_finite(m) {
        return Err(Error::NonFinite(what));
    }
    Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite(what))
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn spd_solve(a: &Matrix, b: &Matrix, what: &'static str) -> Result<Matrix> {
    Ok(cholesky(a, what)?.solve(b))
}

pub fn sym_eigen(m: &Matrix) -> SymmetricEigen<f64, Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    sym_eigen(m).eigenvalues.max()
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigen(m).eigenvalues.min()
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Number of singular values above `n · σ_max · ε_machine`.
pub fn numerical_rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = m.nrows().max(m.ncols()) as f64 * smax * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled so that its 1-norm is at most 1/2; the series is
/// then summed until the next term no longer changes the result.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    assert!(a.is_square(), "expm of a non-square matrix");
    if !is_finite(a) {
        return Err(Error::NonFinite("matrix exponential argument"));
    }
    let n = a.nrows();
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        let tn = term.amax();
        if tn <= f64::EPSILON * result.amax() * 1e-2 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    if !is_finite(&result) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok(result)
}

/// Row-major nested vectors, for JSON documents.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<Matrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "{what}: expected {nrows}x{ncols} row-major array"
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}


/// Serde adapter storing a matrix as row-major nested arrays.
pub mod serde_rows {
    use super::Matrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        super::from_rows(&rows, nrows, ncols, "matrix").map_err(D::Error::custom)
    }
}
