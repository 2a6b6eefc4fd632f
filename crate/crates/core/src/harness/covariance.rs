//! Covariance estimation from held-out rows and covariance files.

use super::csv_io::{read_matrix_path, CsvOptions};
use crate::data::{Covariance, DataMatrix};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::path::Path;

/// Per-feature unbiased variances of `holdout`, as `I_n kron diag(s2)`
/// for data with `n` rows.
pub fn estimate_covariance_heldout(holdout: &DataMatrix, n: usize) -> Result<Covariance> {
    let (m, d) = (holdout.rows(), holdout.cols());
    if m < 2 {
        return Err(Error::InvalidData(format!("held-out set needs at least 2 rows, got {m}")));
    }
    let mut var = Vec::with_capacity(d);
    for j in 0..d {
        let v = crate::inference::estimate_variance(holdout, j);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "held-out variance of feature {j} is {v}"
            )));
        }
        var.push(v);
    }
    Ok(Covariance::Kronecker {
        row: DMatrix::identity(n, n),
        col: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(var)),
    })
}

/// Read a square covariance from CSV: `d x d` is taken as the column
/// covariance with independent rows, `nd x nd` as the full matrix.
pub fn read_covariance(path: &Path, n: usize, d: usize) -> Result<Covariance> {
    let m = read_matrix_path(path, &CsvOptions::default())?;
    let size = m.rows();
    if m.cols() != size {
        return Err(Error::InvalidData(format!(
            "covariance file must be square, got {} x {}",
            size,
            m.cols()
        )));
    }
    let dense = DMatrix::from_row_slice(size, size, m.as_vec());
    let cov = if size == d {
        Covariance::Kronecker {
            row: DMatrix::identity(n, n),
            col: dense,
        }
    } else if size == n * d {
        Covariance::Full(dense)
    } else {
        return Err(Error::InvalidData(format!(
            "covariance file is {size} x {size}; expected {d} or {}",
            n * d
        )));
    };
    cov.validate(n, d)?;
    Ok(cov)
}
