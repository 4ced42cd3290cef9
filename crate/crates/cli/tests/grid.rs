use std::fs;
use std::process::Command;

use sbls_cli::config::{Benchmark, ExperimentConfig, Method};
use sbls_cli::grid::{results_csv, run_cell, run_grid};
use sbls_cli::{
    emit_tracking_trace, parse_config_str, timing_report, write_grid_outputs, CliError,
};

fn small(benchmark: Benchmark) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(benchmark);
    c.bls.nodes_per_feature_group = 4;
    c.bls.nodes_per_enhancement_group = 30;
    c.n_train = 300;
    c.n_test = 80;
    c.seeds = vec![0, 1];
    c
}

#[test]
fn default_grid_shape() {
    let c = ExperimentConfig::defaults(Benchmark::Nonlinear);
    assert_eq!(
        c.noise_levels.len() * c.methods.len() * c.seeds.len(),
        4 * 2 * 10
    );
    let c = ExperimentConfig::defaults(Benchmark::Cstr);
    assert_eq!(
        c.noise_levels.len() * c.methods.len() * c.seeds.len(),
        3 * 2 * 10
    );
}

#[test]
fn grid_produces_one_record_per_cell_in_order() {
    let c = small(Benchmark::Nonlinear);
    let outcome = run_grid(&c, None);
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    assert_eq!(outcome.records.len(), 4 * 2 * 2);
    let keys: Vec<(f64, &str, u64)> = outcome
        .records
        .iter()
        .map(|r| (r.noise_level, r.method.as_str(), r.seed))
        .collect();
    assert_eq!(keys[0], (0.1, "bls", 0));
    assert_eq!(keys[1], (0.1, "bls", 1));
    assert_eq!(keys[2], (0.1, "sbls", 0));
    assert_eq!(keys[15], (0.4, "sbls", 1));
    for r in &outcome.records {
        assert_eq!(r.total_nodes, c.total_nodes());
        assert_eq!(r.train_time_ms, 0.0);
        assert_eq!(r.iterations, if r.method == "sbls" { 10 } else { 0 });
    }
}

#[test]
fn rerun_is_byte_identical() {
    let c = small(Benchmark::Cstr);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_grid_outputs(a.path(), &run_grid(&c, Some(&a.path().join("traces")))).unwrap();
    write_grid_outputs(b.path(), &run_grid(&c, Some(&b.path().join("traces")))).unwrap();
    for name in [
        "results.csv",
        "summary.csv",
        "traces/cstr_noise0p3_seed1.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_results_do_not_depend_on_other_seeds() {
    let mut c = small(Benchmark::Nonlinear);
    let both = run_grid(&c, None).records;
    c.seeds = vec![1];
    let alone = run_grid(&c, None).records;
    let from_both: Vec<_> = both.into_iter().filter(|r| r.seed == 1).collect();
    assert_eq!(results_csv(&from_both), results_csv(&alone));
}

#[test]
fn tracking_trace_matches_cell() {
    let c = small(Benchmark::Nonlinear);
    let cell = run_cell(&c, 0.4, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let summary = emit_tracking_trace(&cell, &path).unwrap();
    assert_eq!(summary.rows, c.n_test);

    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,ground_truth,bls_prediction,sbls_prediction"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), c.n_test);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[1], cell.dataset.y_test[(i, 0)]);
    }
    let rmse = |k: usize| {
        (rows.iter().map(|r| (r[k] - r[1]).powi(2)).sum::<f64>() / rows.len() as f64).sqrt()
    };
    assert!((rmse(2) - summary.rmse_bls).abs() < 1e-9);
    assert!((rmse(3) - summary.rmse_sbls).abs() < 1e-9);
    let record = cell.records.iter().find(|r| r.method == "sbls").unwrap();
    assert!((record.rmse_test - summary.rmse_sbls).abs() < 1e-9);
}

#[test]
fn tracking_trace_needs_both_models() {
    let mut c = small(Benchmark::Nonlinear);
    c.methods = vec![Method::Bls];
    let cell = run_cell(&c, 0.1, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = emit_tracking_trace(&cell, &dir.path().join("t.csv")).unwrap_err();
    assert!(matches!(err, CliError::MissingModel(Method::Sbls)));
}

#[test]
fn timing_reports_every_method() {
    let mut c = small(Benchmark::Nonlinear);
    c.methods = vec![Method::Bls, Method::Sbls, Method::Lasso];
    c.lasso.max_iterations = 20;
    let report = timing_report(&c, 3).unwrap();
    assert_eq!(report.methods.len(), 3);
    assert!(report
        .methods
        .iter()
        .all(|r| r.samples_ms.len() == 3 && r.median_ms >= 0.0));
    assert_eq!(report.shrink_curve.len(), 10);
    c.methods = vec![Method::Sbls];
    assert!(matches!(timing_report(&c, 3), Err(CliError::Usage(_))));
}

#[test]
fn config_file_round_trip() {
    let c = parse_config_str("benchmark = \"cstr\"\nseeds = [3]\nsparsity_target = 0.6\n").unwrap();
    assert_eq!(c.benchmark, Benchmark::Cstr);
    assert_eq!(c.seeds, vec![3]);
}

fn sbls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbls"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "sparsity_target = 1.5\n").unwrap();
    let out = sbls().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sparsity_target"));

    fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = sbls().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("ok.toml");
    fs::write(
        &cfg,
        "n_train = 200\nn_test = 50\nnodes_per_enhancement_group = 20\nnoise_levels = [0.2]\n",
    )
    .unwrap();
    let out = sbls()
        .args(["gen-data", "--seed-override", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = dir.path().join("data/nonlinear_noise0p2_seed4");
    assert!(data.join("train.csv").exists() && data.join("test.csv").exists());

    let out = sbls()
        .args(["run", "--seed-override", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
}
