//! Dense row-major storage for per-node-per-path scalars and small vectors.

use crate::error::{Error, Result};

/// rows x cols matrix of f64, row-major. Rows index time nodes or steps,
/// columns index paths throughout the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut g = Grid::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                g.data[r * cols + c] = f(r, c);
            }
        }
        g
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill_row(&mut self, r: usize, values: &[f64]) {
        self.row_mut(r).copy_from_slice(values);
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn require_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::Shape(format!(
                "{what}: expected {rows}x{cols}, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// rows x cols grid of fixed-length f64 vectors (dim components), row-major.
/// Used for Brownian increments and Z panels where dim = d.
#[derive(Clone, Debug, PartialEq)]
pub struct VecGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    data: Vec<f64>,
}

impl VecGrid {
    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        VecGrid {
            rows,
            cols,
            dim,
            data: vec![0.0; rows * cols * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> &[f64] {
        let base = (r * self.cols + c) * self.dim;
        &self.data[base..base + self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut [f64] {
        let base = (r * self.cols + c) * self.dim;
        &mut self.data[base..base + self.dim]
    }

    /// Mutable row view, length cols * dim, for parallel column fills.
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.cols * self.dim;
        &mut self.data[r * w..(r + 1) * w]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.cols * self.dim;
        &self.data[r * w..(r + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
