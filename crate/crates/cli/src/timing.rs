use std::time::Instant;

use sbls_core::bls::{init_network, train_standard_bls, BlsHyperparams};
use sbls_core::stls::{train_lasso_ista, train_sbls};
use sbls_core::DenseMatrix;

use crate::config::{ExperimentConfig, Method};
use crate::grid::generate_dataset;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub median_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub rows: usize,
    pub nodes: usize,
    /// Time to build the system matrix, reported separately because every
    /// method pays it.
    pub system_matrix_ms: f64,
    pub methods: Vec<TimingRow>,
    /// Active node count after each STLS round of the first repeat.
    pub shrink_curve: Vec<usize>,
}

impl TimingReport {
    pub fn median(&self, method: Method) -> Option<f64> {
        self.methods
            .iter()
            .find(|r| r.method == method)
            .map(|r| r.median_ms)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,median_ms,repeats\n");
        for r in &self.methods {
            out.push_str(&format!(
                "{},{},{}\n",
                r.method,
                r.median_ms,
                r.samples_ms.len()
            ));
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_once(
    config: &ExperimentConfig,
    method: Method,
    a: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<(f64, Vec<usize>), CliError> {
    let start = Instant::now();
    let curve = match method {
        Method::Bls => {
            std::hint::black_box(train_standard_bls(a, y, config.bls.ridge_lambda)?);
            Vec::new()
        }
        Method::Sbls => {
            let fit = std::hint::black_box(train_sbls(a, y, &config.stls)?);
            fit.trace
                .iter()
                .map(|r| r.active_counts.iter().sum())
                .collect()
        }
        Method::Lasso => {
            std::hint::black_box(train_lasso_ista(
                a,
                y,
                config.lasso.alpha,
                config.lasso.max_iterations,
            )?);
            Vec::new()
        }
    };
    Ok((start.elapsed().as_secs_f64() * 1e3, curve))
}

/// Median training time per method on the first noise level and seed of
/// `config`. All methods share one system matrix, so only the readout fit
/// is timed.
pub fn timing_report(config: &ExperimentConfig, repeats: usize) -> Result<TimingReport, CliError> {
    if config.methods.len() < 2 {
        return Err(CliError::Usage(
            "timing needs at least two methods to compare".into(),
        ));
    }
    if repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let gamma = *config
        .noise_levels
        .first()
        .ok_or_else(|| CliError::Usage("no noise levels configured".into()))?;
    let seed = *config
        .seeds
        .first()
        .ok_or_else(|| CliError::Usage("no seeds configured".into()))?;
    let ds = generate_dataset(config, gamma, seed)?;
    let hyper = BlsHyperparams {
        seed,
        ..config.bls.clone()
    };
    let net = init_network(&hyper, ds.input_dim(), &ds.x_train)?;
    let start = Instant::now();
    let a = net.system_matrix(&ds.x_train)?;
    let system_matrix_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut rows = Vec::new();
    let mut shrink_curve = Vec::new();
    for &method in &config.methods {
        let mut samples = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let (ms, curve) = time_once(config, method, &a, &ds.y_train)?;
            if r == 0 && method == Method::Sbls {
                shrink_curve = curve;
            }
            samples.push(ms);
        }
        rows.push(TimingRow {
            method,
            median_ms: median(samples.clone()),
            samples_ms: samples,
        });
    }
    Ok(TimingReport {
        rows: a.rows(),
        nodes: a.cols(),
        system_matrix_ms,
        methods: rows,
        shrink_curve,
    })
}
