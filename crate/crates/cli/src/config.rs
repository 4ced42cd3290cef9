//! Flat TOML experiment configuration.
//!
//! Every key is optional. Missing keys take the defaults of the selected
//! benchmark, so an empty file is the full nonlinear setup.

use std::fmt;
use std::path::{Path, PathBuf};

use sbls_core::bls::{BlsHyperparams, EnhancementActivation, FeatureActivation};
use sbls_core::datasets::{CstrParams, NoiseKind, NoiseSpec};
use sbls_core::stls::{ProjectionSolver, StlsConfig, ThresholdMode, ThresholdSchedule};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Nonlinear,
    Cstr,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Nonlinear => "nonlinear",
            Benchmark::Cstr => "cstr",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bls,
    Sbls,
    Lasso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bls => "bls",
            Method::Sbls => "sbls",
            Method::Lasso => "lasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Uniform,
    UniformPlusOutliers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub alpha: f64,
    pub max_iterations: usize,
}

/// How training noise is drawn for each noise level of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTemplate {
    pub mode: NoiseMode,
    pub outlier_fraction: f64,
    pub outlier_magnitude: f64,
    pub corrupt_regressors: bool,
}

impl NoiseTemplate {
    pub fn spec(&self, gamma: f64, seed: u64) -> NoiseSpec {
        let kind = match self.mode {
            NoiseMode::Uniform => NoiseKind::Uniform { gamma },
            NoiseMode::UniformPlusOutliers => NoiseKind::UniformPlusOutliers {
                gamma,
                outlier_fraction: self.outlier_fraction,
                outlier_magnitude: self.outlier_magnitude,
            },
        };
        NoiseSpec {
            kind,
            seed,
            corrupt_regressors: self.corrupt_regressors,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub bls: BlsHyperparams,
    pub stls: StlsConfig,
    pub lasso: LassoConfig,
    pub noise: NoiseTemplate,
    pub noise_levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub n_train: usize,
    pub n_test: usize,
    pub cstr: CstrParams,
    /// Write measured wall-clock times into results.csv. Off by default so
    /// that results.csv is reproducible byte for byte.
    pub record_timing: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn defaults(benchmark: Benchmark) -> Self {
        let (bls, rho, levels, noise_mode) = match benchmark {
            Benchmark::Nonlinear => (
                BlsHyperparams {
                    ridge_lambda: 0.01,
                    ..BlsHyperparams::new(10, 20, 1, 200)
                },
                0.5,
                vec![0.1, 0.2, 0.3, 0.4],
                NoiseMode::Uniform,
            ),
            Benchmark::Cstr => (
                BlsHyperparams {
                    ridge_lambda: 1e-8,
                    ..BlsHyperparams::new(10, 10, 1, 100)
                },
                0.7,
                vec![0.2, 0.3, 0.4],
                NoiseMode::UniformPlusOutliers,
            ),
        };
        ExperimentConfig {
            benchmark,
            bls,
            stls: StlsConfig::sparsity_target(rho),
            lasso: LassoConfig {
                alpha: 0.01,
                max_iterations: 5000,
            },
            noise: NoiseTemplate {
                mode: noise_mode,
                outlier_fraction: 0.05,
                outlier_magnitude: 5.0,
                corrupt_regressors: false,
            },
            noise_levels: levels,
            methods: vec![Method::Bls, Method::Sbls],
            seeds: (0..10).collect(),
            n_train: 2000,
            n_test: 500,
            cstr: CstrParams::default(),
            record_timing: false,
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn total_nodes(&self) -> usize {
        self.bls.total_nodes()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    benchmark: Option<Benchmark>,
    noise_levels: Option<Vec<f64>>,
    methods: Option<Vec<Method>>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    record_timing: Option<bool>,

    feature_groups: Option<usize>,
    nodes_per_feature_group: Option<usize>,
    enhancement_groups: Option<usize>,
    nodes_per_enhancement_group: Option<usize>,
    ridge_lambda: Option<f64>,
    feature_activation: Option<FeatureActivation>,
    enhancement_activation: Option<EnhancementActivation>,
    include_bias: Option<bool>,

    sparsity_target: Option<f64>,
    threshold_lambda: Option<f64>,
    threshold_schedule: Option<ThresholdSchedule>,
    max_iterations: Option<usize>,
    init_ridge_lambda: Option<f64>,
    projection: Option<ProjectionSolver>,
    strict_rank: Option<bool>,

    lasso_alpha: Option<f64>,
    lasso_max_iterations: Option<usize>,

    noise_mode: Option<NoiseMode>,
    outlier_fraction: Option<f64>,
    outlier_magnitude: Option<f64>,
    corrupt_regressors: Option<bool>,

    cstr_q: Option<f64>,
    cstr_volume: Option<f64>,
    cstr_k0: Option<f64>,
    cstr_e_over_r: Option<f64>,
    cstr_caf: Option<f64>,
    cstr_tf: Option<f64>,
    cstr_neg_dh_over_rho_cp: Option<f64>,
    cstr_ua_over_v_rho_cp: Option<f64>,
    cstr_dt: Option<f64>,
}

fn key_err(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(key_err(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(key_err(key, format!("must be non-negative, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(key_err(key, "must be at least 1"))
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::ConfigSyntax(e.to_string()))?;
    let mut c = ExperimentConfig::defaults(raw.benchmark.unwrap_or(Benchmark::Nonlinear));

    if let Some(v) = raw.noise_levels {
        if v.is_empty() {
            return Err(key_err("noise_levels", "must not be empty"));
        }
        for &g in &v {
            non_negative("noise_levels", g)?;
        }
        c.noise_levels = v;
    }
    if let Some(v) = raw.methods {
        if v.is_empty() {
            return Err(key_err("methods", "must not be empty"));
        }
        let mut seen = v.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != v.len() {
            return Err(key_err("methods", "contains duplicates"));
        }
        c.methods = v;
    }
    if let Some(v) = raw.seeds {
        if v.is_empty() {
            return Err(key_err("seeds", "must not be empty"));
        }
        let mut seen = v.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != v.len() {
            return Err(key_err("seeds", "contains duplicates"));
        }
        c.seeds = v;
    }
    if let Some(v) = raw.output_dir {
        c.output_dir = v;
    }
    if let Some(v) = raw.n_train {
        c.n_train = v;
    }
    if let Some(v) = raw.n_test {
        c.n_test = v;
    }
    if c.n_train < 10 {
        return Err(key_err(
            "n_train",
            format!("must be at least 10, got {}", c.n_train),
        ));
    }
    if c.n_test < 10 {
        return Err(key_err(
            "n_test",
            format!("must be at least 10, got {}", c.n_test),
        ));
    }
    if let Some(v) = raw.record_timing {
        c.record_timing = v;
    }

    let b = &mut c.bls;
    if let Some(v) = raw.feature_groups {
        b.feature_groups = at_least_one("feature_groups", v)?;
    }
    if let Some(v) = raw.nodes_per_feature_group {
        b.nodes_per_feature_group = at_least_one("nodes_per_feature_group", v)?;
    }
    if let Some(v) = raw.enhancement_groups {
        b.enhancement_groups = v;
    }
    if let Some(v) = raw.nodes_per_enhancement_group {
        b.nodes_per_enhancement_group = v;
    }
    if let Some(v) = raw.ridge_lambda {
        b.ridge_lambda = non_negative("ridge_lambda", v)?;
    }
    if let Some(v) = raw.feature_activation {
        b.feature_activation = v;
    }
    if let Some(v) = raw.enhancement_activation {
        b.enhancement_activation = v;
    }
    if let Some(v) = raw.include_bias {
        b.include_bias = v;
    }
    b.validate().map_err(|e| key_err("bls", e.to_string()))?;

    let s = &mut c.stls;
    match (raw.sparsity_target, raw.threshold_lambda) {
        (Some(_), Some(_)) => {
            return Err(key_err(
                "threshold_lambda",
                "set either sparsity_target or threshold_lambda, not both",
            ))
        }
        (Some(rho), None) => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(key_err(
                    "sparsity_target",
                    format!("must lie in (0, 1), got {rho}"),
                ));
            }
            s.threshold = ThresholdMode::SparsityTarget(rho);
        }
        (None, Some(l)) => {
            s.threshold = ThresholdMode::FixedLambda(positive("threshold_lambda", l)?)
        }
        (None, None) => {}
    }
    if let Some(v) = raw.threshold_schedule {
        s.schedule = v;
    }
    if let Some(v) = raw.max_iterations {
        s.max_iterations = at_least_one("max_iterations", v)?;
    }
    if let Some(v) = raw.init_ridge_lambda {
        s.init_ridge_lambda = non_negative("init_ridge_lambda", v)?;
    }
    if let Some(v) = raw.projection {
        s.projection = v;
    }
    if let Some(v) = raw.strict_rank {
        s.strict_rank = v;
    }

    if let Some(v) = raw.lasso_alpha {
        c.lasso.alpha = non_negative("lasso_alpha", v)?;
    }
    if let Some(v) = raw.lasso_max_iterations {
        c.lasso.max_iterations = at_least_one("lasso_max_iterations", v)?;
    }

    if let Some(v) = raw.noise_mode {
        c.noise.mode = v;
    }
    if let Some(v) = raw.outlier_fraction {
        if !(0.0..1.0).contains(&v) {
            return Err(key_err(
                "outlier_fraction",
                format!("must lie in [0, 1), got {v}"),
            ));
        }
        c.noise.outlier_fraction = v;
    }
    if let Some(v) = raw.outlier_magnitude {
        c.noise.outlier_magnitude = positive("outlier_magnitude", v)?;
    }
    if let Some(v) = raw.corrupt_regressors {
        c.noise.corrupt_regressors = v;
    }

    let p = &mut c.cstr;
    let cstr_keys = [
        ("cstr_q", raw.cstr_q, &mut p.q),
        ("cstr_volume", raw.cstr_volume, &mut p.volume),
        ("cstr_k0", raw.cstr_k0, &mut p.k0),
        ("cstr_e_over_r", raw.cstr_e_over_r, &mut p.e_over_r),
        ("cstr_caf", raw.cstr_caf, &mut p.caf),
        ("cstr_tf", raw.cstr_tf, &mut p.tf),
        (
            "cstr_neg_dh_over_rho_cp",
            raw.cstr_neg_dh_over_rho_cp,
            &mut p.neg_dh_over_rho_cp,
        ),
        (
            "cstr_ua_over_v_rho_cp",
            raw.cstr_ua_over_v_rho_cp,
            &mut p.ua_over_v_rho_cp,
        ),
        ("cstr_dt", raw.cstr_dt, &mut p.dt),
    ];
    for (key, value, slot) in cstr_keys {
        if let Some(v) = value {
            *slot = positive(key, v)?;
        }
    }
    Ok(c)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigSyntax(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
