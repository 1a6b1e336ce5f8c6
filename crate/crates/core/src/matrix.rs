use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `p × n` real matrix stored row-major. Each row is one sample
/// point in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Validates shape and finiteness. Positions in errors are 1-based.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!("matrix must be at least 1x1, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols + 1,
                col: pos % cols + 1,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Number of sample points (`p`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Dimension of each sample point (`n`).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.cols + k]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub(crate) fn require_pairs(&self) -> Result<()> {
        if self.rows < 2 {
            return Err(Error::InsufficientRows { rows: self.rows });
        }
        Ok(())
    }

    /// Applies `f` entrywise. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Adds `shift` to every row.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                found: shift.len(),
            });
        }
        let values = self
            .iter_rows()
            .flat_map(|row| row.iter().zip(shift).map(|(x, s)| x + s))
            .collect();
        Self::new(self.rows, self.cols, values)
    }

    /// Returns the matrix whose `i`-th row is row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                found: order.len(),
            });
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &src in order {
            if src >= self.rows {
                return Err(Error::param(format!("row index {src} out of range")));
            }
            values.extend_from_slice(self.row(src));
        }
        Self::new(self.rows, self.cols, values)
    }

    /// Appends one column; `column[i]` becomes the new last entry of row `i`.
    pub fn append_column(&self, column: &[f64]) -> Result<Self> {
        if column.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                found: column.len(),
            });
        }
        let cols = self.cols + 1;
        let mut values = Vec::with_capacity(self.rows * cols);
        for (row, &extra) in self.iter_rows().zip(column) {
            values.extend_from_slice(row);
            values.push(extra);
        }
        Self::new(self.rows, cols, values)
    }
}
