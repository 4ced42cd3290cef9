use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{error, info};
use rayon::prelude::*;
use sbls_core::bls::{init_network, train_standard_bls, BlsNetwork};
use sbls_core::datasets::{gen_cstr_dataset, gen_nonlinear_system, TimeSeriesDataset};
use sbls_core::metrics::{self, node_sparsity, ExperimentRecord, RECORD_HEADER};
use sbls_core::stls::{train_lasso_ista, train_sbls, IterationRecord};
use sbls_core::DenseMatrix;

use crate::config::{Benchmark, ExperimentConfig, Method};
use crate::{level_tag, write_atomic, CliError};

/// One trained readout inside a cell.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub method: Method,
    pub weights: DenseMatrix,
    pub test_prediction: DenseMatrix,
    /// STLS rounds; empty for the other methods.
    pub trace: Vec<IterationRecord>,
}

/// Everything produced for one (noise level, seed) pair. All methods share
/// the dataset and the random feature network.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub benchmark: Benchmark,
    pub noise_level: f64,
    pub seed: u64,
    pub dataset: TimeSeriesDataset,
    pub network: BlsNetwork,
    pub models: Vec<TrainedModel>,
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<CellFailure>,
}

impl CellRun {
    pub fn model(&self, method: Method) -> Option<&TrainedModel> {
        self.models.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub noise_level: f64,
    pub method: Option<Method>,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridOutcome {
    /// Ordered by noise level, then method, then seed, as listed in the config.
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<CellFailure>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise seed for a cell. Depends only on the seed and the noise level
/// itself, so adding or removing other grid entries leaves it unchanged.
pub fn noise_seed(seed: u64, gamma: f64) -> u64 {
    splitmix64(splitmix64(seed) ^ gamma.to_bits())
}

pub fn generate_dataset(
    config: &ExperimentConfig,
    gamma: f64,
    seed: u64,
) -> Result<TimeSeriesDataset, CliError> {
    let noise = config.noise.spec(gamma, noise_seed(seed, gamma));
    let ds = match config.benchmark {
        Benchmark::Nonlinear => gen_nonlinear_system(config.n_train, config.n_test, &noise, seed)?,
        Benchmark::Cstr => {
            gen_cstr_dataset(&config.cstr, config.n_train, config.n_test, &noise, seed)?
        }
    };
    Ok(ds)
}

fn train_method(
    config: &ExperimentConfig,
    method: Method,
    a: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<(DenseMatrix, Vec<IterationRecord>, usize, usize), CliError> {
    Ok(match method {
        Method::Bls => {
            let w = train_standard_bls(a, y, config.bls.ridge_lambda)?;
            let active = metrics::active_nodes(&w);
            (w, Vec::new(), active, 0)
        }
        Method::Sbls => {
            let fit = train_sbls(a, y, &config.stls)?;
            let active = fit.active_nodes();
            let rounds = fit.iterations();
            (fit.weights, fit.trace, active, rounds)
        }
        Method::Lasso => {
            let fit = train_lasso_ista(a, y, config.lasso.alpha, config.lasso.max_iterations)?;
            let active = metrics::active_nodes(&fit.weights);
            (fit.weights, Vec::new(), active, fit.iterations)
        }
    })
}

/// Generates the data for one (noise level, seed) pair, builds the network
/// and trains every configured method on it.
///
/// Setup failures are returned as `Err`. A failure of a single method is
/// recorded in [`CellRun::failures`] and the other methods still run.
pub fn run_cell(config: &ExperimentConfig, gamma: f64, seed: u64) -> Result<CellRun, CliError> {
    let dataset = generate_dataset(config, gamma, seed)?;
    let hyper = sbls_core::bls::BlsHyperparams {
        seed,
        ..config.bls.clone()
    };
    let network = init_network(&hyper, dataset.input_dim(), &dataset.x_train)?;
    let a = network.system_matrix(&dataset.x_train)?;
    let a_test = network.system_matrix(&dataset.x_test)?;
    let total = network.total_nodes();

    let mut models = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &method in &config.methods {
        let start = Instant::now();
        let trained = train_method(config, method, &a, &dataset.y_train);
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        let outcome = trained.and_then(|(weights, trace, active, iterations)| {
            let train_pred = a.matmul(&weights)?;
            let test_prediction = a_test.matmul(&weights)?;
            let record = ExperimentRecord {
                benchmark: config.benchmark.name().to_string(),
                method: method.name().to_string(),
                noise_level: gamma,
                seed,
                rmse_test: metrics::rmse(&dataset.y_test, &test_prediction)?,
                rmse_train: metrics::rmse(&dataset.y_train, &train_pred)?,
                total_nodes: total,
                active_nodes: active,
                sparsity_pct: node_sparsity(active, total),
                train_time_ms: if config.record_timing {
                    elapsed_ms
                } else {
                    0.0
                },
                iterations,
            };
            record.validate()?;
            Ok((
                TrainedModel {
                    method,
                    weights,
                    test_prediction,
                    trace,
                },
                record,
            ))
        });
        match outcome {
            Ok((model, record)) => {
                models.push(model);
                records.push(record);
            }
            Err(e) => failures.push(CellFailure {
                noise_level: gamma,
                method: Some(method),
                seed,
                message: e.to_string(),
            }),
        }
    }
    Ok(CellRun {
        benchmark: config.benchmark,
        noise_level: gamma,
        seed,
        dataset,
        network,
        models,
        records,
        failures,
    })
}

fn stls_trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from(
        "iteration,output,threshold,active_count,orthogonality_residual,qr_fallbacks\n",
    );
    for (t, r) in trace.iter().enumerate() {
        for (d, count) in r.active_counts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{d},{},{count},{:e},{}",
                t + 1,
                r.threshold,
                r.orthogonality_residual,
                r.qr_fallbacks
            );
        }
    }
    out
}

pub fn trace_file_name(benchmark: Benchmark, gamma: f64, seed: u64) -> String {
    format!("{benchmark}_noise{}_seed{seed}.csv", level_tag(gamma))
}

/// Runs every (noise level, seed) cell, in parallel. When `trace_dir` is
/// given, each cell with an S-BLS model writes its STLS trace there.
pub fn run_grid(config: &ExperimentConfig, trace_dir: Option<&Path>) -> GridOutcome {
    let cells: Vec<(usize, f64, u64)> = config
        .noise_levels
        .iter()
        .enumerate()
        .flat_map(|(i, &g)| config.seeds.iter().map(move |&s| (i, g, s)))
        .collect();

    let results: Vec<(usize, u64, Result<CellRun, CliError>)> = cells
        .par_iter()
        .map(|&(i, gamma, seed)| {
            let run = run_cell(config, gamma, seed).and_then(|run| {
                if let (Some(dir), Some(model)) = (trace_dir, run.model(Method::Sbls)) {
                    let path = dir.join(trace_file_name(config.benchmark, gamma, seed));
                    write_atomic(&path, &stls_trace_csv(&model.trace))?;
                }
                Ok(run)
            });
            (i, seed, run)
        })
        .collect();

    let mut outcome = GridOutcome::default();
    let mut by_cell: Vec<(usize, u64, Vec<ExperimentRecord>)> = Vec::new();
    for (i, seed, result) in results {
        match result {
            Ok(run) => {
                for f in &run.failures {
                    error!(
                        "cell noise={} method={} seed={} failed: {}",
                        f.noise_level,
                        f.method.map_or("-", Method::name),
                        f.seed,
                        f.message
                    );
                }
                outcome.failures.extend(run.failures);
                by_cell.push((i, seed, run.records));
            }
            Err(e) => {
                let gamma = config.noise_levels[i];
                error!("cell noise={gamma} seed={seed} failed: {e}");
                outcome
                    .failures
                    .extend(config.methods.iter().map(|&m| CellFailure {
                        noise_level: gamma,
                        method: Some(m),
                        seed,
                        message: e.to_string(),
                    }));
            }
        }
    }

    for (i, _) in config.noise_levels.iter().enumerate() {
        for method in &config.methods {
            for &seed in &config.seeds {
                let found = by_cell
                    .iter()
                    .filter(|(ci, cs, _)| *ci == i && *cs == seed)
                    .flat_map(|(_, _, recs)| recs)
                    .find(|r| r.method == method.name());
                if let Some(r) = found {
                    outcome.records.push(r.clone());
                }
            }
        }
    }
    info!(
        "grid finished: {} records, {} failed cells",
        outcome.records.len(),
        outcome.failures.len()
    );
    outcome
}

pub fn results_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Median and interquartile range per (noise level, method).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub benchmark: String,
    pub method: String,
    pub noise_level: f64,
    pub runs: usize,
    pub rmse_test_median: f64,
    pub rmse_test_q1: f64,
    pub rmse_test_q3: f64,
    pub active_nodes_median: f64,
}

pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, u64)> = Vec::new();
    for r in records {
        let key = (r.method.clone(), r.noise_level.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, bits)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.method == method && r.noise_level.to_bits() == bits)
                .collect();
            let rmse = sorted(group.iter().map(|r| r.rmse_test).collect());
            let active = sorted(group.iter().map(|r| r.active_nodes as f64).collect());
            SummaryRow {
                benchmark: group[0].benchmark.clone(),
                method,
                noise_level: f64::from_bits(bits),
                runs: group.len(),
                rmse_test_median: quantile(&rmse, 0.5),
                rmse_test_q1: quantile(&rmse, 0.25),
                rmse_test_q3: quantile(&rmse, 0.75),
                active_nodes_median: quantile(&active, 0.5),
            }
        })
        .collect()
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "benchmark,method,noise_level,runs,rmse_test_median,rmse_test_q1,rmse_test_q3,active_nodes_median\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.benchmark,
            r.method,
            r.noise_level,
            r.runs,
            r.rmse_test_median,
            r.rmse_test_q1,
            r.rmse_test_q3,
            r.active_nodes_median
        );
    }
    out
}

/// Writes `results.csv` and `summary.csv` into `dir`.
pub fn write_grid_outputs(dir: &Path, outcome: &GridOutcome) -> Result<(), CliError> {
    write_atomic(&dir.join("results.csv"), &results_csv(&outcome.records))?;
    write_atomic(
        &dir.join("summary.csv"),
        &summary_csv(&summarize(&outcome.records)),
    )?;
    Ok(())
}
