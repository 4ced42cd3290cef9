use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sbls_cli::config::{Benchmark, ExperimentConfig};
use sbls_cli::grid::{generate_dataset, run_cell, run_grid, trace_file_name, write_grid_outputs};
use sbls_cli::{apply_overrides, emit_tracking_trace, parse_config, timing_report, CliError};
use sbls_core::datasets::export_csv;

#[derive(Parser)]
#[command(name = "sbls", version, about = "BLS and sparse BLS benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config. Without it the nonlinear benchmark defaults apply.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full noise level × method × seed grid.
    Run(Common),
    /// Write the test-split tracking curves for one cell.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Noise level to trace; defaults to the last configured level.
        #[arg(long)]
        noise_level: Option<f64>,
    },
    /// Compare training times on a shared system matrix.
    Timing {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Export the generated datasets as CSV.
    GenData(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::defaults(Benchmark::Nonlinear),
    };
    apply_overrides(&mut config, common.seed_override, common.out.clone());
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(common) => {
            let config = load(&common)?;
            let outcome = run_grid(&config, Some(&config.output_dir.join("traces")));
            write_grid_outputs(&config.output_dir, &outcome)?;
            info!(
                "wrote {} records to {}",
                outcome.records.len(),
                config.output_dir.display()
            );
            if !outcome.failures.is_empty() {
                warn!("{} method runs failed", outcome.failures.len());
            }
        }
        Command::Trace {
            common,
            noise_level,
        } => {
            let config = load(&common)?;
            let gamma = match noise_level {
                Some(g) => g,
                None => *config
                    .noise_levels
                    .last()
                    .ok_or_else(|| CliError::Usage("no noise levels configured".into()))?,
            };
            let seed = *config
                .seeds
                .first()
                .ok_or_else(|| CliError::Usage("no seeds configured".into()))?;
            let cell = run_cell(&config, gamma, seed)?;
            let path = config.output_dir.join("tracking").join(trace_file_name(
                config.benchmark,
                gamma,
                seed,
            ));
            let summary = emit_tracking_trace(&cell, &path)?;
            println!(
                "{}: {} steps, rmse bls {:.6}, rmse sbls {:.6}",
                path.display(),
                summary.rows,
                summary.rmse_bls,
                summary.rmse_sbls
            );
        }
        Command::Timing { common, repeats } => {
            let config = load(&common)?;
            let report = timing_report(&config, repeats)?;
            println!(
                "system matrix {}x{}: {:.2} ms",
                report.rows, report.nodes, report.system_matrix_ms
            );
            for row in &report.methods {
                println!(
                    "{:>6}: {:.2} ms (median of {})",
                    row.method,
                    row.median_ms,
                    row.samples_ms.len()
                );
            }
            if !report.shrink_curve.is_empty() {
                println!("sbls active nodes per round: {:?}", report.shrink_curve);
            }
            std::fs::create_dir_all(&config.output_dir)?;
            std::fs::write(config.output_dir.join("timing.csv"), report.to_csv())?;
        }
        Command::GenData(common) => {
            let config = load(&common)?;
            for &gamma in &config.noise_levels {
                for &seed in &config.seeds {
                    let ds = generate_dataset(&config, gamma, seed)?;
                    let dir = config.output_dir.join("data").join(
                        trace_file_name(config.benchmark, gamma, seed).trim_end_matches(".csv"),
                    );
                    export_csv(&ds, &dir)?;
                    info!("wrote {}", dir.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
