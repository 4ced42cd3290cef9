use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{shape_err, Error, Result};

/// Dense real matrix stored in row-major order.
///
/// Every constructor rejects non-finite entries, so a `DenseMatrix` obtained
/// through the public API never holds NaN or infinity.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(
                "DenseMatrix::from_vec",
                format!("{} values for {}x{}", rows * cols, rows, cols),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::from_vec"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape_err(
                    "DenseMatrix::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    /// Builds a matrix from a generator. Panics if the generator yields a
    /// non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(v);
            }
        }
        DenseMatrix { rows, cols, data }
    }

    // Internal constructor for results of arithmetic on finite inputs.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix::from_parts(self.cols, self.rows, out)
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(shape_err(
                "matmul",
                format!("{} rows on the right", self.cols),
                other.rows,
            ));
        }
        let (n, c) = (self.rows, other.cols);
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            let out_row = &mut out[i * c..(i + 1) * c];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        finite_result("matmul", n, c, out)
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn transpose_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(shape_err(
                "transpose_matmul",
                format!("{} rows", self.rows),
                other.rows,
            ));
        }
        let (p, c) = (self.cols, other.cols);
        let mut out = vec![0.0; p * c];
        for n in 0..self.rows {
            let b_row = other.row(n);
            for (k, &a) in self.row(n).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out[k * c..(k + 1) * c].iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        finite_result("transpose_matmul", p, c, out)
    }

    /// `selfᵀ * self`, exploiting symmetry.
    pub fn gram(&self) -> Result<DenseMatrix> {
        let p = self.cols;
        let mut out = vec![0.0; p * p];
        for n in 0..self.rows {
            let row = self.row(n);
            for k in 0..p {
                let a = row[k];
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out[k * p + k..(k + 1) * p];
                for (o, &b) in dst.iter_mut().zip(&row[k..]) {
                    *o += a * b;
                }
            }
        }
        for k in 0..p {
            for j in 0..k {
                out[k * p + j] = out[j * p + k];
            }
        }
        finite_result("gram", p, p, out)
    }

    pub fn select_columns(&self, idx: &[usize]) -> Result<DenseMatrix> {
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.cols) {
            return Err(shape_err(
                "select_columns",
                format!("index < {}", self.cols),
                bad,
            ));
        }
        let mut out = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let row = self.row(i);
            out.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(DenseMatrix::from_parts(self.rows, idx.len(), out))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<DenseMatrix> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.rows) {
            return Err(shape_err(
                "select_rows",
                format!("index < {}", self.rows),
                bad,
            ));
        }
        let mut out = Vec::with_capacity(self.cols * idx.len());
        for &i in idx {
            out.extend_from_slice(self.row(i));
        }
        Ok(DenseMatrix::from_parts(idx.len(), self.cols, out))
    }

    /// Column-wise concatenation `[a | b | ...]`.
    pub fn hstack(parts: &[&DenseMatrix]) -> Result<DenseMatrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if let Some(m) = parts.iter().find(|m| m.rows != rows) {
            return Err(shape_err("hstack", format!("{rows} rows"), m.rows));
        }
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                out.extend_from_slice(m.row(i));
            }
        }
        Ok(DenseMatrix::from_parts(rows, cols, out))
    }

    /// Row-wise concatenation.
    pub fn vstack(parts: &[&DenseMatrix]) -> Result<DenseMatrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if let Some(m) = parts.iter().find(|m| m.cols != cols) {
            return Err(shape_err("vstack", format!("{cols} columns"), m.cols));
        }
        let data: Vec<f64> = parts.iter().flat_map(|m| m.data.iter().copied()).collect();
        let rows = parts.iter().map(|m| m.rows).sum();
        Ok(DenseMatrix::from_parts(rows, cols, data))
    }

    pub fn scale(&self, s: f64) -> Result<DenseMatrix> {
        let data = self.data.iter().map(|v| v * s).collect();
        finite_result("scale", self.rows, self.cols, data)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &DenseMatrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(shape_err(
                op,
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        finite_result(op, self.rows, self.cols, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of entries that are exactly zero.
    pub fn count_zeros(&self) -> usize {
        self.data.iter().filter(|v| **v == 0.0).count()
    }
}

fn finite_result(
    op: &'static str,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
) -> Result<DenseMatrix> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(DenseMatrix::from_parts(rows, cols, data))
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}
