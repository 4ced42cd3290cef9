//! Dense matrices and the two linear solvers everything else is built on:
//! least squares through pivoted Householder QR, and ridge regression through
//! a Cholesky factorization of the regularized normal equations.

mod cholesky;
mod matrix;
mod qr;

pub use matrix::DenseMatrix;

use crate::error::{shape_err, Error, Result};
use cholesky::Cholesky;
use qr::HouseholderQr;

pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

/// Solver tolerances and the rank-deficiency policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative pivot tolerance. A QR diagonal entry at or below
    /// `pivot_tol * |R_00|` (or a Cholesky pivot at or below
    /// `pivot_tol * max diag`) counts as rank loss.
    pub pivot_tol: f64,
    /// Fail with [`Error::Singular`] on rank loss instead of returning the
    /// minimum-norm solution.
    pub strict: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pivot_tol: DEFAULT_PIVOT_TOL,
            strict: false,
        }
    }
}

impl SolverOptions {
    pub fn strict() -> Self {
        SolverOptions {
            strict: true,
            ..Self::default()
        }
    }
}

/// Minimizes `‖B − A W‖_F` column by column.
pub fn solve_least_squares(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    solve_least_squares_with(a, b, &SolverOptions::default())
}

pub fn solve_least_squares_with(
    a: &DenseMatrix,
    b: &DenseMatrix,
    opts: &SolverOptions,
) -> Result<DenseMatrix> {
    check_system("solve_least_squares", a, b)?;
    let qr = HouseholderQr::factor(a, true);
    let rank = qr.rank(opts.pivot_tol);
    if rank < a.cols() && opts.strict {
        return Err(Error::Singular {
            rank,
            cols: a.cols(),
        });
    }
    let mut w = DenseMatrix::zeros(a.cols(), b.cols());
    for d in 0..b.cols() {
        let x = qr.solve(&b.column(d), rank);
        w.set_column(d, &x);
    }
    ensure_finite("solve_least_squares", w)
}

/// `(AᵀA + λI)⁻¹ AᵀB`. With `λ = 0` this is a strict least-squares solve.
pub fn solve_ridge(a: &DenseMatrix, b: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    solve_ridge_with(a, b, lambda, &SolverOptions::default())
}

pub fn solve_ridge_with(
    a: &DenseMatrix,
    b: &DenseMatrix,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<DenseMatrix> {
    check_system("solve_ridge", a, b)?;
    check_lambda(lambda)?;
    if lambda == 0.0 {
        let strict = SolverOptions {
            strict: true,
            ..*opts
        };
        return solve_least_squares_with(a, b, &strict);
    }
    NormalEquations::new(a, b)?.solve_ridge(a, b, lambda, opts)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "ridge lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Cached `AᵀA` and `AᵀB` for repeated solves against the same system,
/// either regularized over all columns or restricted to a column subset.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    gram: DenseMatrix,
    atb: DenseMatrix,
}

impl NormalEquations {
    pub fn new(a: &DenseMatrix, b: &DenseMatrix) -> Result<Self> {
        check_system("NormalEquations::new", a, b)?;
        Ok(NormalEquations {
            gram: a.gram()?,
            atb: a.transpose_matmul(b)?,
        })
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn atb(&self) -> &DenseMatrix {
        &self.atb
    }

    /// Ridge solution for every column of `B`. `λ > 0` guarantees a
    /// positive-definite system; if the Cholesky factorization still breaks
    /// down numerically, the augmented least-squares problem
    /// `[A; √λ I] W ≈ [B; 0]` is solved by QR instead.
    pub fn solve_ridge(
        &self,
        a: &DenseMatrix,
        b: &DenseMatrix,
        lambda: f64,
        opts: &SolverOptions,
    ) -> Result<DenseMatrix> {
        check_lambda(lambda)?;
        let p = self.gram.cols();
        match Cholesky::factor(p, |i, j| self.gram[(i, j)], lambda, opts.pivot_tol) {
            Ok(chol) => {
                let mut w = DenseMatrix::zeros(p, self.atb.cols());
                for d in 0..self.atb.cols() {
                    let mut x = self.atb.column(d);
                    chol.solve_in_place(&mut x);
                    w.set_column(d, &x);
                }
                ensure_finite("solve_ridge", w)
            }
            Err(_) if lambda > 0.0 => {
                let reg = DenseMatrix::identity(p).scale(lambda.sqrt())?;
                let aug_a = DenseMatrix::vstack(&[a, &reg])?;
                let aug_b = DenseMatrix::vstack(&[b, &DenseMatrix::zeros(p, b.cols())])?;
                solve_least_squares_with(&aug_a, &aug_b, opts)
            }
            Err(e) => Err(e),
        }
    }

    /// Unregularized least squares for output column `output` using only the
    /// columns in `active`. Fails with [`Error::Singular`] when the restricted
    /// Gram matrix is numerically singular; callers fall back to QR.
    pub fn solve_subset(
        &self,
        active: &[usize],
        output: usize,
        opts: &SolverOptions,
    ) -> Result<Vec<f64>> {
        let p = self.gram.cols();
        if let Some(&bad) = active.iter().find(|&&j| j >= p) {
            return Err(shape_err("solve_subset", format!("index < {p}"), bad));
        }
        let g = self.gram.as_slice();
        let chol = Cholesky::factor(
            active.len(),
            |i, j| g[active[i] * p + active[j]],
            0.0,
            opts.pivot_tol,
        )?;
        let mut x: Vec<f64> = active.iter().map(|&j| self.atb[(j, output)]).collect();
        chol.solve_in_place(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("solve_subset"));
        }
        Ok(x)
    }
}

fn check_system(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(shape_err(op, format!("{} rows in B", a.rows()), b.rows()));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(shape_err(op, "non-empty A", format!("{:?}", a.shape())));
    }
    Ok(())
}

fn ensure_finite(op: &'static str, m: DenseMatrix) -> Result<DenseMatrix> {
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(m)
}
