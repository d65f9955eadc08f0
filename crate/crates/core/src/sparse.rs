//! Row-compressed real sparse matrices.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::io::Write;

/// A real matrix stored as per-row ordered (column, value) lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| vec![(i, 1.0)]).collect();
        SparseMatrix {
            nrows: n,
            ncols: n,
            rows,
        }
    }

    pub fn from_dense(data: &[Vec<f64>]) -> Self {
        let nrows = data.len();
        let ncols = data.first().map_or(0, Vec::len);
        let rows = data
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        SparseMatrix {
            nrows,
            ncols,
            rows,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Appends an entry to row `i`; columns must arrive strictly increasing.
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        debug_assert!(
            self.rows[i].last().map_or(true, |&(last, _)| last < j),
            "columns must be pushed in strictly increasing order (row {i}: {} then {j})",
            self.rows[i].last().map(|&(c, _)| c).unwrap_or(0),
        );
        if v != 0.0 {
            self.rows[i].push((j, v));
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Maximum number of nonzeros over all rows.
    pub fn row_sparsity(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|&(_, v)| v.abs()))
            .fold(0.0, f64::max)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    /// y = M x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "matvec: matrix has {} columns, vector has {} entries",
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.nrows];
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.rows[i].iter().map(|&(j, v)| v * x[j]).sum();
        });
        Ok(y)
    }

    /// Kronecker product, row index = i_a * b.nrows + i_b.
    pub fn kron(&self, other: &SparseMatrix) -> SparseMatrix {
        let mut out = SparseMatrix::zeros(self.nrows * other.nrows, self.ncols * other.ncols);
        for ia in 0..self.nrows {
            for &(ja, va) in &self.rows[ia] {
                for ib in 0..other.nrows {
                    let row = ia * other.nrows + ib;
                    for &(jb, vb) in &other.rows[ib] {
                        out.rows[row].push((ja * other.ncols + jb, va * vb));
                    }
                }
            }
        }
        for r in &mut out.rows {
            r.sort_by_key(|&(j, _)| j);
        }
        out
    }

    /// Interprets `self` as a permutation matrix and returns sigma with
    /// row i holding its single nonzero at column sigma(i). Errors when the
    /// matrix is not an exact permutation.
    pub fn as_permutation(&self) -> Result<Vec<usize>> {
        if self.nrows != self.ncols {
            return Err(Error::invalid("permutation matrix must be square"));
        }
        let mut seen = vec![false; self.ncols];
        let mut sigma = Vec::with_capacity(self.nrows);
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != 1 || row[0].1 != 1.0 {
                return Err(Error::invalid(format!(
                    "row {i} is not a unit permutation row"
                )));
            }
            let j = row[0].0;
            if seen[j] {
                return Err(Error::invalid(format!("column {j} hit twice")));
            }
            seen[j] = true;
            sigma.push(j);
        }
        Ok(sigma)
    }

    /// Writes the matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}
