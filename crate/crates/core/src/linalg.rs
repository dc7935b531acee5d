//! Dense square matrices and the `T D T'` factorization of symmetric positive
//! semidefinite matrices.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots at or above `-PIVOT_CLAMP * max(diag)` are accepted; negative ones
/// in that band are clamped to zero.
pub const PIVOT_CLAMP: f64 = 1e-10;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid(
                "matrix rows must all have length equal to the row count",
            ));
        }
        Ok(Self {
            dim,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |i| self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||self - other||_F / ||other||_F`.
    pub fn relative_distance(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let diff: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = other.frobenius_norm();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    /// Principal submatrix on rows and columns `0..size`.
    pub fn leading(&self, size: usize) -> SquareMatrix {
        assert!(size <= self.dim);
        let mut m = SquareMatrix::zeros(size);
        for i in 0..size {
            m.data[i * size..(i + 1) * size].copy_from_slice(&self.row(i)[..size]);
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// `C = T diag(D) T'` with `T` unit lower triangular and `D >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdtFactor {
    pub t: SquareMatrix,
    pub d: Vec<f64>,
}

impl TdtFactor {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Factor of the leading `size x size` principal submatrix; for a lower
    /// triangular factor these are just the leading blocks of `T` and `D`.
    pub fn leading(&self, size: usize) -> TdtFactor {
        TdtFactor {
            t: self.t.leading(size),
            d: self.d[..size].to_vec(),
        }
    }

    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.dim();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..=j {
                    acc += self.t[(i, k)] * self.d[k] * self.t[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// Indices of the strictly positive pivots.
    pub fn active_pivots(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.d[j] > 0.0).collect()
    }
}

/// Unpivoted `T D T'` elimination of a symmetric positive semidefinite matrix.
///
/// A negative pivot no larger in magnitude than `PIVOT_CLAMP * max(diag)` is
/// set to zero and the column of `T` below it is zeroed; a zero pivot is
/// handled the same way. Anything more negative is rejected.
pub fn tdt_decompose(cov: &SquareMatrix) -> Result<TdtFactor> {
    let n = cov.dim();
    let max_diag = cov.diagonal().fold(0.0f64, f64::max);
    if !cov.is_symmetric(1e-14 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::invalid("covariance matrix is not symmetric"));
    }
    let tolerance = PIVOT_CLAMP * max_diag;
    let mut t = SquareMatrix::identity(n);
    let mut d = vec![0.0; n];
    let mut active: Vec<usize> = Vec::new();
    // scratch: T[j, k] * D[k] for the active k of the current column j
    let mut scaled = Vec::with_capacity(n);

    for j in 0..n {
        scaled.clear();
        scaled.extend(active.iter().map(|&k| t[(j, k)] * d[k]));
        let mut pivot = cov[(j, j)];
        for (s, &k) in scaled.iter().zip(&active) {
            pivot -= s * t[(j, k)];
        }
        if pivot < -tolerance {
            return Err(Error::NotPositiveSemidefinite {
                index: j,
                pivot,
                tolerance,
            });
        }
        if pivot <= 0.0 {
            continue;
        }
        d[j] = pivot;
        for i in j + 1..n {
            let mut v = cov[(i, j)];
            for (s, &k) in scaled.iter().zip(&active) {
                v -= s * t[(i, k)];
            }
            t[(i, j)] = v / pivot;
        }
        active.push(j);
    }
    Ok(TdtFactor { t, d })
}
