//! Data matrices, covariance structures and parametric lines.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Row-major `n x d` matrix; row `i` is a sample, column `j` a feature.
///
/// The vectorized view uses `l = i * d + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::InvalidData(format!(
                "need n >= 2 and d >= 1, got {n} x {d}"
            )));
        }
        if values.len() != n * d {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n} x {d} matrix, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(DataMatrix { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        DataMatrix::new(n, d, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// The vectorized data `x` of length `n * d`.
    pub fn as_vec(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Keep only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataMatrix> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix::new(rows.len(), self.d, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<DataMatrix> {
        DataMatrix::new(self.n, self.d, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Covariance of the vectorized noise.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `sigma2 * I_{nd}`.
    IdentityScaled(f64),
    /// Dense `nd x nd` matrix indexed by the vectorization.
    Full(DMatrix<f64>),
    /// `row (n x n)` kron `col (d x d)`: `Cov(X_ij, X_kl) = row[i,k] * col[j,l]`.
    Kronecker { row: DMatrix<f64>, col: DMatrix<f64> },
}

impl Covariance {
    pub fn identity() -> Self {
        Covariance::IdentityScaled(1.0)
    }

    /// Check shape, symmetry and basic positivity against an `n x d` layout.
    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        fn symmetric(m: &DMatrix<f64>, size: usize, what: &str) -> Result<()> {
            if m.nrows() != size || m.ncols() != size {
                return Err(Error::InvalidData(format!(
                    "{what} covariance must be {size} x {size}, got {} x {}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = m.amax().max(1.0);
            for i in 0..size {
                if !(m[(i, i)] >= 0.0) {
                    return Err(Error::InvalidData(format!(
                        "{what} covariance has negative diagonal entry at {i}"
                    )));
                }
                for j in 0..i {
                    if !m[(i, j)].is_finite() || (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                        return Err(Error::InvalidData(format!(
                            "{what} covariance is not symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
            Ok(())
        }
        match self {
            Covariance::IdentityScaled(s2) => {
                if !(s2.is_finite() && *s2 > 0.0) {
                    return Err(Error::InvalidData(format!(
                        "identity-scaled covariance needs sigma^2 > 0, got {s2}"
                    )));
                }
                Ok(())
            }
            Covariance::Full(m) => symmetric(m, n * d, "full"),
            Covariance::Kronecker { row, col } => {
                symmetric(row, n, "row")?;
                symmetric(col, d, "column")
            }
        }
    }

    /// `Sigma * v` for a vectorized `n x d` layout.
    pub fn apply(&self, v: &[f64], n: usize, d: usize) -> Vec<f64> {
        assert_eq!(v.len(), n * d);
        match self {
            Covariance::IdentityScaled(s2) => v.iter().map(|x| s2 * x).collect(),
            Covariance::Full(m) => {
                let mut out = vec![0.0; n * d];
                // skip zero entries of v; test directions are sparse
                for (c, &vc) in v.iter().enumerate() {
                    if vc != 0.0 {
                        for (r, o) in out.iter_mut().enumerate() {
                            *o += m[(r, c)] * vc;
                        }
                    }
                }
                out
            }
            Covariance::Kronecker { row, col } => {
                // (R kron C) vec(V) = vec(R V C^T) with V the n x d matrix
                let vm = DMatrix::from_row_slice(n, d, v);
                let prod = row * vm * col.transpose();
                let mut out = Vec::with_capacity(n * d);
                for i in 0..n {
                    for j in 0..d {
                        out.push(prod[(i, j)]);
                    }
                }
                out
            }
        }
    }

    /// `v^T Sigma v`.
    pub fn quad_form(&self, v: &[f64], n: usize, d: usize) -> f64 {
        let sv = self.apply(v, n, d);
        v.iter().zip(&sv).map(|(a, b)| a * b).sum()
    }

    /// Same covariance multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Covariance {
        match self {
            Covariance::IdentityScaled(s2) => Covariance::IdentityScaled(s2 * c),
            Covariance::Full(m) => Covariance::Full(m * c),
            Covariance::Kronecker { row, col } => Covariance::Kronecker {
                row: row * c,
                col: col.clone(),
            },
        }
    }

    /// A dense `nd x nd` matrix with the same entries.
    pub fn to_dense(&self, n: usize, d: usize) -> DMatrix<f64> {
        match self {
            Covariance::IdentityScaled(s2) => DMatrix::identity(n * d, n * d) * *s2,
            Covariance::Full(m) => m.clone(),
            Covariance::Kronecker { row, col } => row.kronecker(col),
        }
    }
}

/// The line `X(z) = a + b z` in data space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricLine {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ParametricLine {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        assert_eq!(a.len(), b.len(), "line vectors differ in length");
        ParametricLine { a, b }
    }

    /// The constant line through `x`.
    pub fn constant(x: &[f64]) -> Self {
        ParametricLine {
            a: x.to_vec(),
            b: vec![0.0; x.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Write `a + b z` into `out`.
    pub fn eval_into(&self, z: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.a.iter().zip(&self.b).map(|(a, b)| a + b * z));
    }

    pub fn eval(&self, z: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.a.len());
        self.eval_into(z, &mut out);
        out
    }

    pub fn at(&self, z: f64, n: usize, d: usize) -> Result<DataMatrix> {
        DataMatrix::new(n, d, self.eval(z))
    }
}
