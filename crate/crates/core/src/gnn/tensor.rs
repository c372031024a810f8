//! Dense row-major matrices of `f64`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "tensor data",
                format!("{} values", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect();
        Tensor2 { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor2::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ · y`.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &g) in self.data.chunks_exact(self.cols).zip(y) {
            if g != 0.0 {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += w * g;
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let t = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.matvec(&[1.0, 0.0, -1.0]), [-2.0, -2.0]);
        assert_eq!(t.matvec_t(&[1.0, 1.0]), [5.0, 7.0, 9.0]);
        assert_eq!(t.get(1, 2), 6.0);
        assert_eq!(t.row(1), [4.0, 5.0, 6.0]);
    }

    #[test]
    fn shape_checked() {
        assert!(matches!(Tensor2::from_vec(2, 2, vec![0.0; 3]), Err(Error::ShapeMismatch { .. })));
    }
}
