//! Householder QR with column pivoting, and the minimum-norm least-squares
//! solve built on it (complete orthogonal decomposition for rank-deficient
//! systems).

use super::DenseMatrix;

/// Column-major Householder factorization `A P = Q R`.
///
/// Reflector `k` is stored below the diagonal of column `k` with an implicit
/// unit leading entry; `R` occupies the upper triangle.
pub(crate) struct HouseholderQr {
    m: usize,
    n: usize,
    // column-major m x n
    qr: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl HouseholderQr {
    pub(crate) fn factor(a: &DenseMatrix, pivoting: bool) -> Self {
        let (m, n) = a.shape();
        let mut qr = vec![0.0; m * n];
        for i in 0..m {
            for (j, &v) in a.row(i).iter().enumerate() {
                qr[j * m + i] = v;
            }
        }
        Self::factor_col_major(m, n, qr, pivoting)
    }

    fn factor_col_major(m: usize, n: usize, mut qr: Vec<f64>, pivoting: bool) -> Self {
        let steps = m.min(n);
        let mut tau = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..n).collect();

        // Partial column norms (squared) with periodic recomputation to keep
        // the downdate from drifting.
        let mut norms: Vec<f64> = (0..n).map(|j| sq_norm(&qr[j * m..(j + 1) * m])).collect();
        let mut reference = norms.clone();

        for k in 0..steps {
            if pivoting {
                let mut best = k;
                for j in k + 1..n {
                    if norms[j] > norms[best] {
                        best = j;
                    }
                }
                if best != k {
                    for i in 0..m {
                        qr.swap(k * m + i, best * m + i);
                    }
                    perm.swap(k, best);
                    norms.swap(k, best);
                    reference.swap(k, best);
                }
            }

            let (head, tail) = qr.split_at_mut((k + 1) * m);
            let col = &mut head[k * m + k..k * m + m];
            tau[k] = make_reflector(col);
            let v = &head[k * m + k..k * m + m];

            for j in 0..(n - k - 1) {
                let target = &mut tail[j * m + k..j * m + m];
                apply_reflector(v, tau[k], target);
            }

            if pivoting {
                for j in k + 1..n {
                    let rkj = qr[j * m + k];
                    norms[j] -= rkj * rkj;
                    if norms[j] <= 1e-3 * reference[j] || norms[j] < 0.0 {
                        norms[j] = sq_norm(&qr[j * m + k + 1..(j + 1) * m]);
                        reference[j] = norms[j];
                    }
                }
            }
        }

        HouseholderQr {
            m,
            n,
            qr,
            tau,
            perm,
        }
    }

    pub(crate) fn r(&self, i: usize, j: usize) -> f64 {
        self.qr[j * self.m + i]
    }

    /// Numerical rank: leading diagonal entries of `R` above `tol * |R_00|`.
    pub(crate) fn rank(&self, tol: f64) -> usize {
        let steps = self.tau.len();
        if steps == 0 {
            return 0;
        }
        let r00 = self.r(0, 0).abs();
        if r00 == 0.0 {
            return 0;
        }
        (0..steps)
            .take_while(|&k| self.r(k, k).abs() > tol * r00)
            .count()
    }

    /// Overwrites `b` (length m) with `Qᵀ b`.
    pub(crate) fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.tau.len() {
            let v = &self.qr[k * self.m + k..(k + 1) * self.m];
            apply_reflector(v, self.tau[k], &mut b[k..]);
        }
    }

    /// Least-squares solution of `A x = b` using the leading `rank` columns of
    /// the factorization. When `rank < n` the returned solution is the
    /// minimum-norm one.
    pub(crate) fn solve(&self, b: &[f64], rank: usize) -> Vec<f64> {
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        let n = self.n;
        let mut x_perm = vec![0.0; n];

        if rank == n {
            back_substitute(rank, |i, j| self.r(i, j), &c[..rank], &mut x_perm);
        } else if rank > 0 {
            // [R11 R12]ᵀ = Z T, so [R11 R12] = Tᵀ Zᵀ and the minimum-norm
            // solution is x = Z T⁻ᵀ c.
            let mut mt = vec![0.0; n * rank];
            for i in 0..rank {
                for j in i..n {
                    mt[i * n + j] = self.r(i, j);
                }
            }
            let cod = HouseholderQr::factor_col_major(n, rank, mt, false);
            let mut u = vec![0.0; rank];
            for i in 0..rank {
                let mut s = c[i];
                for (j, uj) in u.iter().enumerate().take(i) {
                    s -= cod.r(j, i) * uj;
                }
                u[i] = s / cod.r(i, i);
            }
            x_perm[..rank].copy_from_slice(&u);
            for k in (0..rank).rev() {
                let v = &cod.qr[k * n + k..(k + 1) * n];
                apply_reflector(v, cod.tau[k], &mut x_perm[k..]);
            }
        }

        let mut x = vec![0.0; n];
        for (j, &p) in self.perm.iter().enumerate() {
            x[p] = x_perm[j];
        }
        x
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Turns `x` into a Householder vector in place (LAPACK `dlarfg` convention)
/// and returns `tau`. On exit `x[0]` holds the resulting diagonal entry.
fn make_reflector(x: &mut [f64]) -> f64 {
    let alpha = x[0];
    let tail_norm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if tail_norm == 0.0 {
        return 0.0;
    }
    let norm = alpha.hypot(tail_norm);
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    x[0] = beta;
    tau
}

/// Applies `I - tau v vᵀ` to `target`, with `v[0]` treated as 1.
fn apply_reflector(v: &[f64], tau: f64, target: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let mut s = target[0];
    for (a, b) in v[1..].iter().zip(&target[1..]) {
        s += a * b;
    }
    s *= tau;
    target[0] -= s;
    for (t, a) in target[1..].iter_mut().zip(&v[1..]) {
        *t -= s * a;
    }
}

pub(crate) fn back_substitute(n: usize, r: impl Fn(usize, usize) -> f64, c: &[f64], x: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = c[i];
        for j in i + 1..n {
            s -= r(i, j) * x[j];
        }
        x[i] = s / r(i, i);
    }
}
