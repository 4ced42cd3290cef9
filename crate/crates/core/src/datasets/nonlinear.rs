use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{add_noise, NoiseSpec, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Lag structure of the NARX regressor `[y(n−1) … y(n−p), u(n−1) … u(n−r)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NarxOrder {
    pub output_lags: usize,
    pub input_lags: usize,
}

impl Default for NarxOrder {
    fn default() -> Self {
        NarxOrder {
            output_lags: 2,
            input_lags: 1,
        }
    }
}

/// `y(n) = y(n−1)·y(n−2)·(y(n−1) + 2.5) / (1 + y(n−1)² + y(n−2)²) + u(n−1)`.
pub fn nonlinear_step(y1: f64, y2: f64, u1: f64) -> f64 {
    y1 * y2 * (y1 + 2.5) / (1.0 + y1 * y1 + y2 * y2) + u1
}

/// Runs the difference equation from zero history. `y[0] = y[1] = 0` and
/// `y[n]` for `n ≥ 2` uses `u[n−1]`; the result has the length of `u`.
pub fn simulate_nonlinear(u: &[f64]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; u.len()];
    for n in 2..u.len() {
        y[n] = nonlinear_step(y[n - 1], y[n - 2], u[n - 1]);
        if !(y[n].abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Instability {
                step: n,
                reason: format!("|y| = {} exceeds {DIVERGENCE_LIMIT}", y[n]),
            });
        }
    }
    Ok(y)
}

/// Builds regressor rows for `n = start..y.len()`.
fn narx_rows(y: &[f64], u: &[f64], order: NarxOrder, start: usize) -> (DenseMatrix, DenseMatrix) {
    let rows = y.len() - start;
    let d = order.output_lags + order.input_lags;
    let x = DenseMatrix::from_fn(rows, d, |i, j| {
        let n = start + i;
        if j < order.output_lags {
            y[n - 1 - j]
        } else {
            u[n - 1 - (j - order.output_lags)]
        }
    });
    let t = DenseMatrix::from_fn(rows, 1, |i, _| y[start + i]);
    (x, t)
}

fn regressor_names(order: NarxOrder) -> Vec<String> {
    (1..=order.output_lags)
        .map(|k| format!("y_lag{k}"))
        .chain((1..=order.input_lags).map(|k| format!("u_lag{k}")))
        .collect()
}

/// Nonlinear benchmark with the default `[y(n−1), y(n−2), u(n−1)]`
/// regressor. Training input is i.i.d. `Uniform[−2, 2]`; test input is
/// `sin(2πn/25)`.
pub fn gen_nonlinear_system(
    n_train: usize,
    n_test: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    gen_nonlinear_system_with_order(n_train, n_test, noise, seed, NarxOrder::default())
}

pub fn gen_nonlinear_system_with_order(
    n_train: usize,
    n_test: usize,
    noise: &NoiseSpec,
    seed: u64,
    order: NarxOrder,
) -> Result<TimeSeriesDataset> {
    if n_train < 10 || n_test < 10 {
        return Err(Error::Domain(format!(
            "need at least 10 train and test samples, got {n_train}/{n_test}"
        )));
    }
    if order.output_lags == 0 && order.input_lags == 0 {
        return Err(Error::Domain(
            "NARX order must include at least one lag".into(),
        ));
    }
    noise.validate()?;
    let start = order.output_lags.max(order.input_lags).max(2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_train: Vec<f64> = (0..n_train + start)
        .map(|_| rng.gen_range(-2.0..=2.0))
        .collect();
    let y_train = simulate_nonlinear(&u_train)?;

    let (x_train, t_train, outlier_rows) = if noise.corrupt_regressors {
        let measured = add_noise(&DenseMatrix::column_vector(&y_train)?, noise)?;
        let y_meas = measured.values.into_vec();
        let (x, t) = narx_rows(&y_meas, &u_train, order, start);
        let outliers = measured
            .outlier_rows
            .into_iter()
            .filter(|&n| n >= start)
            .map(|n| n - start)
            .collect();
        (x, t, outliers)
    } else {
        let (x, t) = narx_rows(&y_train, &u_train, order, start);
        let noisy = add_noise(&t, noise)?;
        (x, noisy.values, noisy.outlier_rows)
    };

    let u_test: Vec<f64> = (0..n_test + start)
        .map(|n| (2.0 * PI * n as f64 / 25.0).sin())
        .collect();
    let y_test = simulate_nonlinear(&u_test)?;
    let (x_test, t_test) = narx_rows(&y_test, &u_test, order, start);

    Ok(TimeSeriesDataset {
        x_train,
        y_train: t_train,
        x_test,
        y_test: t_test,
        regressor_names: regressor_names(order),
        target_names: vec!["target_y".into()],
        noise: *noise,
        outlier_rows,
    })
}
