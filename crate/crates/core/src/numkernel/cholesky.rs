use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// stored row-major.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `g + shift * I`, where `g` is read through `entry(i, j)` for
    /// `j <= i`. Fails with [`Error::Singular`] when a pivot drops to
    /// `pivot_tol` times the largest diagonal entry or below.
    pub(crate) fn factor(
        n: usize,
        entry: impl Fn(usize, usize) -> f64,
        shift: f64,
        pivot_tol: f64,
    ) -> Result<Self> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = entry(i, j);
            }
            l[i * n + i] += shift;
        }
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(l[i * n + i]));
        let floor = pivot_tol * max_diag;

        for j in 0..n {
            let (upper, lower) = l.split_at_mut((j + 1) * n);
            let row_j = &mut upper[j * n..];
            let d = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
            if !(d > floor) || !d.is_finite() {
                return Err(Error::Singular { rank: j, cols: n });
            }
            let d = d.sqrt();
            row_j[j] = d;
            let lj = &row_j[..j];
            for i in j + 1..n {
                let row_i = &mut lower[(i - j - 1) * n..(i - j) * n];
                let s: f64 = row_i[..j].iter().zip(lj).map(|(a, b)| a * b).sum();
                row_i[j] = (row_i[j] - s) / d;
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `L Lᵀ x = b` in place.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}
