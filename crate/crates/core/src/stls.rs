//! Sparse output weights via sequential thresholded least squares (STLS).
//!
//! Training starts from a dense least-squares readout `W⁽⁰⁾` (optionally
//! ridge-regularized) and then runs exactly
//! `T` rounds of
//!
//! 1. hard thresholding: every `|w_ij| < λ` becomes exactly `0.0`;
//! 2. projection: for each output `d`, the surviving rows `S_d` are refit by
//!    unregularized least squares on the columns `A[:, S_d]`.
//!
//! Pruned rows stay zero, so the active sets can only shrink. The loop never
//! exits early; the cost is bounded by `T` regardless of when the support
//! stabilizes.
//!
//! With a sparsity target, λ is by default re-read from the current weights
//! before every round. Zeros from earlier rounds count toward the target, so
//! once it is met no further nodes are pruned and the projection is simply
//! repeated. A frozen schedule (λ chosen once from `W⁽⁰⁾`) is available too.
//!
//! Also here: threshold selection from a sparsity target, an ISTA (L1)
//! baseline for timing comparisons, and an exhaustive best-subset search used
//! as ground truth on small problems.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numkernel::{solve_least_squares_with, DenseMatrix, NormalEquations, SolverOptions};

/// How the truncation threshold λ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Use λ as given.
    FixedLambda(f64),
    /// Pick λ so that thresholding `W⁽⁰⁾` prunes about this fraction of entries.
    SparsityTarget(f64),
}

/// When the sparsity-target threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSchedule {
    /// Once, from `W⁽⁰⁾`; later rounds reuse that λ.
    Frozen,
    /// Before every round, from `W⁽ᵗ⁻¹⁾`.
    PerIteration,
}

/// Solver used for the per-output projection step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSolver {
    /// Cholesky on the restricted cached Gram matrix `AᵀA[S, S]`, falling
    /// back to pivoted QR on `A[:, S]` when the restricted Gram matrix is
    /// numerically singular.
    NormalEquations,
    /// Pivoted QR on `A[:, S]` every time.
    Qr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlsConfig {
    pub threshold: ThresholdMode,
    /// Ignored for [`ThresholdMode::FixedLambda`].
    pub schedule: ThresholdSchedule,
    /// Number of threshold + projection rounds (T).
    pub max_iterations: usize,
    /// Error out when an active submatrix loses rank instead of using the
    /// minimum-norm solution.
    pub strict_rank: bool,
    /// Ridge parameter for the dense initial solve. The default `0` is the
    /// minimum-norm least-squares (pseudoinverse) start.
    pub init_ridge_lambda: f64,
    pub projection: ProjectionSolver,
    pub pivot_tol: f64,
}

impl Default for StlsConfig {
    fn default() -> Self {
        StlsConfig {
            threshold: ThresholdMode::SparsityTarget(0.5),
            schedule: ThresholdSchedule::PerIteration,
            max_iterations: 10,
            strict_rank: false,
            init_ridge_lambda: 0.0,
            projection: ProjectionSolver::NormalEquations,
            pivot_tol: crate::numkernel::DEFAULT_PIVOT_TOL,
        }
    }
}

impl StlsConfig {
    pub fn fixed(lambda: f64) -> Self {
        StlsConfig {
            threshold: ThresholdMode::FixedLambda(lambda),
            ..Self::default()
        }
    }

    pub fn sparsity_target(rho: f64) -> Self {
        StlsConfig {
            threshold: ThresholdMode::SparsityTarget(rho),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        match self.threshold {
            ThresholdMode::FixedLambda(l) if !(l > 0.0) || !l.is_finite() => {
                return Err(Error::Domain(format!(
                    "threshold lambda must be positive, got {l}"
                )))
            }
            ThresholdMode::SparsityTarget(r) if !(r > 0.0 && r < 1.0) => {
                return Err(Error::Domain(format!(
                    "sparsity target must lie in (0, 1), got {r}"
                )))
            }
            _ => {}
        }
        if !(self.init_ridge_lambda >= 0.0) || !self.init_ridge_lambda.is_finite() {
            return Err(Error::Domain(format!(
                "init_ridge_lambda must be non-negative, got {}",
                self.init_ridge_lambda
            )));
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            pivot_tol: self.pivot_tol,
            strict: self.strict_rank,
        }
    }
}

/// Per-round record of the STLS loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// λ applied in this round.
    pub threshold: f64,
    /// Active-set size per output after thresholding.
    pub active_counts: Vec<usize>,
    /// `max_d ‖A_Sᵀ(Y_d − A_S w_S)‖_∞` after the projection.
    pub orthogonality_residual: f64,
    /// Outputs whose projection fell back from normal equations to QR.
    pub qr_fallbacks: usize,
}

/// Result of sparse training.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    /// `L x C` weights; rows outside `active_sets[d]` are exactly zero in
    /// column `d`.
    pub weights: DenseMatrix,
    /// Ascending active row indices per output.
    pub active_sets: Vec<Vec<usize>>,
    pub trace: Vec<IterationRecord>,
    /// λ of the first round, resolved from `W⁽⁰⁾`.
    pub threshold: f64,
}

impl SparseWeights {
    /// Rows that are nonzero for at least one output.
    pub fn active_nodes(&self) -> usize {
        let mut rows: Vec<usize> = self.active_sets.iter().flatten().copied().collect();
        rows.sort_unstable();
        rows.dedup();
        rows.len()
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Zeroes every entry with `|w| < λ`; returns the thresholded matrix and the
/// surviving row indices of each column.
pub fn hard_threshold(w: &DenseMatrix, lambda: f64) -> Result<(DenseMatrix, Vec<Vec<usize>>)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "threshold must be positive, got {lambda}"
        )));
    }
    let mut out = w.clone();
    let mut active = vec![Vec::new(); w.cols()];
    for i in 0..w.rows() {
        for (d, v) in out.row_mut(i).iter_mut().enumerate() {
            if v.abs() < lambda {
                *v = 0.0;
            } else {
                active[d].push(i);
            }
        }
    }
    Ok((out, active))
}

/// Resolves the threshold λ from the dense initialization.
///
/// In sparsity-target mode with ratio ρ over `M = L·C` pooled magnitudes
/// sorted ascending `a_1 ≤ … ≤ a_M`, λ is the midpoint of `a_k` and `a_{k+1}`
/// with `k = clamp(⌊ρM⌋, 1, M − 1)`, so thresholding prunes exactly `k`
/// entries when those two order statistics differ.
pub fn select_threshold(w0: &DenseMatrix, config: &StlsConfig) -> Result<f64> {
    match config.threshold {
        ThresholdMode::FixedLambda(lambda) => {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::Domain(format!(
                    "threshold must be positive, got {lambda}"
                )));
            }
            Ok(lambda)
        }
        ThresholdMode::SparsityTarget(rho) => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Domain(format!(
                    "sparsity target must lie in (0, 1), got {rho}"
                )));
            }
            if w0.max_abs() == 0.0 {
                return Err(Error::Degenerate("initial weights are all zero".into()));
            }
            let (k, m, lambda) = quantile_threshold(w0, rho)?;
            if lambda <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "more than {k} of {m} initial weights are zero; sparsity target gives zero threshold"
                )));
            }
            Ok(lambda)
        }
    }
}

fn quantile_threshold(w: &DenseMatrix, rho: f64) -> Result<(usize, usize, f64)> {
    let mut mags: Vec<f64> = w.as_slice().iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let m = mags.len();
    if m < 2 {
        return Err(Error::Degenerate(
            "need at least two weights for a sparsity target".into(),
        ));
    }
    let k = ((rho * m as f64).floor() as usize).clamp(1, m - 1);
    Ok((k, m, 0.5 * (mags[k - 1] + mags[k])))
}

/// Threshold for round `t ≥ 2` of the per-iteration schedule. If earlier
/// rounds already zeroed at least the target count, λ drops to half the
/// smallest surviving magnitude and nothing new is pruned.
fn reselect_threshold(w: &DenseMatrix, rho: f64) -> Result<f64> {
    let (_, _, lambda) = quantile_threshold(w, rho)?;
    if lambda > 0.0 {
        return Ok(lambda);
    }
    let smallest = w
        .as_slice()
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if smallest.is_finite() {
        Ok(0.5 * smallest)
    } else {
        Err(Error::Degenerate("all weights are zero".into()))
    }
}

/// Least-squares refit of each output on its active columns, by pivoted QR.
/// Rows outside the active set are zero.
pub fn project_active_set(
    a: &DenseMatrix,
    y: &DenseMatrix,
    active_sets: &[Vec<usize>],
) -> Result<DenseMatrix> {
    project_active_set_with(a, y, active_sets, &SolverOptions::default())
}

pub fn project_active_set_with(
    a: &DenseMatrix,
    y: &DenseMatrix,
    active_sets: &[Vec<usize>],
    opts: &SolverOptions,
) -> Result<DenseMatrix> {
    check_projection(a, y, active_sets, 0)?;
    let mut w = DenseMatrix::zeros(a.cols(), y.cols());
    for (d, set) in active_sets.iter().enumerate() {
        let x = qr_subset(a, y, set, d, opts)?;
        for (&i, v) in set.iter().zip(x) {
            w[(i, d)] = v;
        }
    }
    Ok(w)
}

fn check_projection(
    a: &DenseMatrix,
    y: &DenseMatrix,
    active_sets: &[Vec<usize>],
    iteration: usize,
) -> Result<()> {
    if a.rows() != y.rows() {
        return Err(shape_err(
            "project_active_set",
            format!("{} rows", a.rows()),
            y.rows(),
        ));
    }
    if active_sets.len() != y.cols() {
        return Err(shape_err(
            "project_active_set",
            format!("{} active sets", y.cols()),
            active_sets.len(),
        ));
    }
    for (d, set) in active_sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyActiveSet {
                output: d,
                iteration,
            });
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= a.cols()) {
            return Err(shape_err(
                "project_active_set",
                format!("index < {}", a.cols()),
                bad,
            ));
        }
    }
    Ok(())
}

fn qr_subset(
    a: &DenseMatrix,
    y: &DenseMatrix,
    set: &[usize],
    d: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let sub = a.select_columns(set)?;
    let rhs = DenseMatrix::from_parts(y.rows(), 1, y.column(d));
    Ok(solve_least_squares_with(&sub, &rhs, opts)?.into_vec())
}

/// `‖A_Sᵀ(y − A_S w_S)‖_∞` for one output, computed directly from `A`.
pub fn restricted_orthogonality(a: &DenseMatrix, y: &[f64], set: &[usize], w_s: &[f64]) -> f64 {
    let mut grad = vec![0.0; set.len()];
    for (n, &target) in y.iter().enumerate() {
        let row = a.row(n);
        let fit: f64 = set.iter().zip(w_s).map(|(&j, w)| row[j] * w).sum();
        let r = target - fit;
        for (g, &j) in grad.iter_mut().zip(set) {
            *g += row[j] * r;
        }
    }
    grad.iter().fold(0.0, |m, g| m.max(g.abs()))
}

/// Trains sparse output weights with STLS.
///
/// The dense start is the ridge solution with `config.init_ridge_lambda`, or
/// the least-squares solution when that is zero: Cholesky on the Gram matrix
/// when it is numerically positive definite, minimum-norm QR otherwise. Exactly
/// `config.max_iterations` rounds run. Fails with [`Error::EmptyActiveSet`]
/// if a threshold removes every node of some output.
pub fn train_sbls(a: &DenseMatrix, y: &DenseMatrix, config: &StlsConfig) -> Result<SparseWeights> {
    config.validate()?;
    if a.rows() != y.rows() {
        return Err(shape_err(
            "train_sbls",
            format!("{} target rows", a.rows()),
            y.rows(),
        ));
    }
    if a.rows() < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let opts = config.solver_options();
    let normal = NormalEquations::new(a, y)?;
    let w0 = match normal.solve_ridge(a, y, config.init_ridge_lambda, &opts) {
        Err(Error::Singular { .. }) if config.init_ridge_lambda == 0.0 => {
            solve_least_squares_with(a, y, &opts)?
        }
        other => other?,
    };
    let threshold = select_threshold(&w0, config)?;
    let reselect = match (config.threshold, config.schedule) {
        (ThresholdMode::SparsityTarget(rho), ThresholdSchedule::PerIteration) => Some(rho),
        _ => None,
    };

    let y_cols: Vec<Vec<f64>> = (0..y.cols()).map(|d| y.column(d)).collect();
    let mut w = w0;
    let mut active_sets = Vec::new();
    let mut trace = Vec::with_capacity(config.max_iterations);
    for t in 1..=config.max_iterations {
        let lambda = match reselect {
            Some(rho) if t > 1 => reselect_threshold(&w, rho)?,
            _ => threshold,
        };
        let (_, sets) = hard_threshold(&w, lambda)?;
        check_projection(a, y, &sets, t)?;

        let mut next = DenseMatrix::zeros(a.cols(), y.cols());
        let mut orthogonality: f64 = 0.0;
        let mut qr_fallbacks = 0;
        for (d, set) in sets.iter().enumerate() {
            let x = match config.projection {
                ProjectionSolver::NormalEquations => match normal.solve_subset(set, d, &opts) {
                    Ok(x) => x,
                    Err(Error::Singular { .. }) | Err(Error::NonFinite(_)) => {
                        qr_fallbacks += 1;
                        qr_subset(a, y, set, d, &opts)?
                    }
                    Err(e) => return Err(e),
                },
                ProjectionSolver::Qr => qr_subset(a, y, set, d, &opts)?,
            };
            orthogonality = orthogonality.max(restricted_orthogonality(a, &y_cols[d], set, &x));
            for (&i, v) in set.iter().zip(&x) {
                next[(i, d)] = *v;
            }
        }
        trace.push(IterationRecord {
            threshold: lambda,
            active_counts: sets.iter().map(Vec::len).collect(),
            orthogonality_residual: orthogonality,
            qr_fallbacks,
        });
        w = next;
        active_sets = sets;
    }

    Ok(SparseWeights {
        weights: w,
        active_sets,
        trace,
        threshold,
    })
}

/// Exhaustive best-subset fit (ground truth for the L0 problem).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    pub support: Vec<usize>,
    /// `L x 1`, zero outside `support`.
    pub weights: DenseMatrix,
    pub sse: f64,
}

/// Largest column count accepted by [`best_subset_oracle`].
pub const ORACLE_MAX_COLUMNS: usize = 12;

/// Enumerates every support of size `≤ max_support` (smallest sizes first,
/// lexicographic within a size) and returns the one with the least residual
/// sum of squares. A later support must beat the incumbent by more than a
/// relative `1e-12` to replace it, so numerical ties go to the smaller
/// support.
pub fn best_subset_oracle(
    a: &DenseMatrix,
    y: &DenseMatrix,
    max_support: usize,
) -> Result<SubsetFit> {
    let (n, l) = a.shape();
    if l > ORACLE_MAX_COLUMNS {
        return Err(Error::TooManyColumns {
            cols: l,
            limit: ORACLE_MAX_COLUMNS,
        });
    }
    if y.cols() != 1 || y.rows() != n {
        return Err(shape_err(
            "best_subset_oracle",
            format!("{n}x1 target"),
            format!("{:?}", y.shape()),
        ));
    }
    let yy: f64 = y.as_slice().iter().map(|v| v * v).sum();
    let tie = 1e-12 * (1.0 + yy);
    let mut best = SubsetFit {
        support: Vec::new(),
        weights: DenseMatrix::zeros(l, 1),
        sse: yy,
    };
    let opts = SolverOptions::default();
    for size in 1..=max_support.min(l) {
        for support in combinations(l, size) {
            let sub = a.select_columns(&support)?;
            let w_s = solve_least_squares_with(&sub, y, &opts)?;
            let resid = y.sub(&sub.matmul(&w_s)?)?;
            let sse: f64 = resid.as_slice().iter().map(|v| v * v).sum();
            if sse < best.sse - tie {
                let mut weights = DenseMatrix::zeros(l, 1);
                for (&i, v) in support.iter().zip(w_s.as_slice()) {
                    weights[(i, 0)] = *v;
                }
                best = SubsetFit {
                    support,
                    weights,
                    sse,
                };
            }
        }
    }
    Ok(best)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Outcome of the ISTA baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub weights: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub step_size: f64,
}

pub const ISTA_TOLERANCE: f64 = 1e-6;
const POWER_ITERATIONS: usize = 50;

/// Largest eigenvalue of `AᵀA` by power iteration, using `O(N·L)` products.
pub fn spectral_norm_sq(a: &DenseMatrix) -> f64 {
    let l = a.cols();
    let mut v = vec![1.0 / (l as f64).sqrt(); l];
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let av: Vec<f64> = (0..a.rows())
            .map(|i| a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        let mut atav = vec![0.0; l];
        for (i, s) in av.iter().enumerate() {
            for (o, x) in atav.iter_mut().zip(a.row(i)) {
                *o += x * s;
            }
        }
        let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        sigma = norm;
        v = atav.into_iter().map(|x| x / norm).collect();
    }
    sigma
}

/// L1-regularized least squares `½‖Y − AW‖²_F + α‖W‖₁` by ISTA with step
/// `1/σ`, σ the power-iteration estimate of `λ_max(AᵀA)`. Stops when the
/// largest weight change drops below `1e-6` or after `max_iterations`.
pub fn train_lasso_ista(
    a: &DenseMatrix,
    y: &DenseMatrix,
    alpha: f64,
    max_iterations: usize,
) -> Result<LassoFit> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "alpha must be non-negative, got {alpha}"
        )));
    }
    if a.rows() != y.rows() {
        return Err(shape_err(
            "train_lasso_ista",
            format!("{} rows", a.rows()),
            y.rows(),
        ));
    }
    let (n, l) = a.shape();
    let c = y.cols();
    let sigma = spectral_norm_sq(a);
    if sigma == 0.0 {
        return Ok(LassoFit {
            weights: DenseMatrix::zeros(l, c),
            iterations: 0,
            converged: true,
            step_size: 0.0,
        });
    }
    let step = 1.0 / sigma;
    let shrink = alpha * step;

    let mut w = vec![0.0; l * c];
    let mut resid = vec![0.0; n * c];
    let mut grad = vec![0.0; l * c];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        // resid = A W − Y
        for i in 0..n {
            let row = a.row(i);
            for d in 0..c {
                let mut s = -y[(i, d)];
                for (k, x) in row.iter().enumerate() {
                    s += x * w[k * c + d];
                }
                resid[i * c + d] = s;
            }
        }
        // grad = Aᵀ resid
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let r = &resid[i * c..(i + 1) * c];
            for (k, x) in a.row(i).iter().enumerate() {
                for (g, rv) in grad[k * c..(k + 1) * c].iter_mut().zip(r) {
                    *g += x * rv;
                }
            }
        }
        let mut max_change: f64 = 0.0;
        for (wv, g) in w.iter_mut().zip(&grad) {
            let z = *wv - step * g;
            let next = z.signum() * (z.abs() - shrink).max(0.0);
            if !next.is_finite() {
                return Err(Error::NonFinite("train_lasso_ista"));
            }
            max_change = max_change.max((next - *wv).abs());
            *wv = next;
        }
        if max_change < ISTA_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        weights: DenseMatrix::from_vec(l, c, w)?,
        iterations,
        converged,
        step_size: step,
    })
}
