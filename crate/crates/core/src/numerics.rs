//! Dense f64 linear algebra, just enough for the training engine.
//!
//! Everything here is deterministic: for each output cell the summation
//! order is fixed (ascending index), so repeated runs with the same seed
//! are bit-identical. No BLAS, no threading, no sparse storage.

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from a row-major vector; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "Matrix::from_vec",
                detail: format!(
                    "{rows}x{cols} needs {} values, got {}",
                    rows * cols,
                    data.len()
                ),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                op: "Matrix::from_rows",
                detail: "ragged rows".to_string(),
            });
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copies rows `start..start + len` into a new matrix.
    pub fn slice_rows(&self, start: usize, len: usize) -> Matrix {
        assert!(start + len <= self.rows, "row slice out of bounds");
        Matrix {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `a * b` with the inner sum taken in ascending index order.
///
/// Entries of `a` that are exactly zero are skipped; adding `±0.0 * x` to a
/// partial sum that started from `+0.0` never changes it, so the result is
/// bit-identical to the naive triple loop.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            detail: format!("{}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols),
        });
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let crow = c.row_mut(i);
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aik * bv;
            }
        }
    }
    Ok(c)
}

/// `a^T * b` without materializing the transpose; summation order matches
/// `matmul(&transpose(a), b)` exactly.
pub fn transpose_matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::ShapeMismatch {
            op: "transpose_matmul",
            detail: format!("{}x{} (transposed) * {}x{}", a.rows, a.cols, b.rows, b.cols),
        });
    }
    let mut c = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for (i, &aki) in arow.iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let crow = c.row_mut(i);
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aki * bv;
            }
        }
    }
    Ok(c)
}

pub fn transpose(a: &Matrix) -> Matrix {
    let mut t = Matrix::zeros(a.cols, a.rows);
    for i in 0..a.rows {
        for j in 0..a.cols {
            t.data[j * a.rows + i] = a.data[i * a.cols + j];
        }
    }
    t
}

/// `target[i][j] += scale * x[i] * d[j]` for every cell.
pub fn outer_accumulate(target: &mut Matrix, x: &[f64], d: &[f64], scale: f64) -> Result<()> {
    if target.rows != x.len() || target.cols != d.len() {
        return Err(Error::ShapeMismatch {
            op: "outer_accumulate",
            detail: format!(
                "target {}x{} vs x[{}], d[{}]",
                target.rows,
                target.cols,
                x.len(),
                d.len()
            ),
        });
    }
    for (i, &xi) in x.iter().enumerate() {
        let sx = scale * xi;
        if sx == 0.0 {
            continue;
        }
        let trow = target.row_mut(i);
        for (tv, &dv) in trow.iter_mut().zip(d) {
            *tv += sx * dv;
        }
    }
    Ok(())
}

/// Applies `f` to every entry. Rejects the result if `f` produced NaN/Inf.
pub fn elementwise_map(a: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let mut out = Vec::with_capacity(a.data.len());
    for &v in &a.data {
        let m = f(v);
        if !m.is_finite() {
            return Err(Error::NonFinite {
                op: "elementwise_map",
            });
        }
        out.push(m);
    }
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data: out,
    })
}
