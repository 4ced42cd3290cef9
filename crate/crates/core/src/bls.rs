//! Random Broad Learning System network: mapped feature nodes, enhancement
//! nodes, the system matrix `A = [Z | H | 1]`, and the dense ridge readout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numkernel::{solve_ridge, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureActivation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhancementActivation {
    Tanh,
    Sigmoid,
}

impl FeatureActivation {
    fn apply(self, x: f64) -> f64 {
        match self {
            FeatureActivation::Identity => x,
            FeatureActivation::Tanh => x.tanh(),
        }
    }
}

impl EnhancementActivation {
    fn apply(self, x: f64) -> f64 {
        match self {
            EnhancementActivation::Tanh => x.tanh(),
            EnhancementActivation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Network shape and readout regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlsHyperparams {
    /// Number of mapped-feature groups (n).
    pub feature_groups: usize,
    /// Nodes per feature group (k).
    pub nodes_per_feature_group: usize,
    /// Number of enhancement groups (m).
    pub enhancement_groups: usize,
    /// Nodes per enhancement group (q).
    pub nodes_per_enhancement_group: usize,
    pub ridge_lambda: f64,
    pub feature_activation: FeatureActivation,
    pub enhancement_activation: EnhancementActivation,
    pub include_bias: bool,
    pub seed: u64,
}

impl BlsHyperparams {
    pub fn new(n: usize, k: usize, m: usize, q: usize) -> Self {
        BlsHyperparams {
            feature_groups: n,
            nodes_per_feature_group: k,
            enhancement_groups: m,
            nodes_per_enhancement_group: q,
            ridge_lambda: 0.01,
            feature_activation: FeatureActivation::Tanh,
            enhancement_activation: EnhancementActivation::Tanh,
            include_bias: true,
            seed: 0,
        }
    }

    pub fn feature_nodes(&self) -> usize {
        self.feature_groups * self.nodes_per_feature_group
    }

    pub fn enhancement_nodes(&self) -> usize {
        self.enhancement_groups * self.nodes_per_enhancement_group
    }

    /// Total node count `L = n·k + m·q`, plus one for the bias column.
    pub fn total_nodes(&self) -> usize {
        self.feature_nodes() + self.enhancement_nodes() + usize::from(self.include_bias)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("feature_groups", self.feature_groups),
            ("nodes_per_feature_group", self.nodes_per_feature_group),
            ("enhancement_groups", self.enhancement_groups),
            (
                "nodes_per_enhancement_group",
                self.nodes_per_enhancement_group,
            ),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be at least 1")));
            }
        }
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(Error::Domain(format!(
                "ridge_lambda must be finite and non-negative, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// Frozen random feature map. Weights are drawn once and never retrained.
#[derive(Debug, Clone, PartialEq)]
pub struct BlsNetwork {
    /// One `D x k` matrix per feature group.
    pub feature_weights: Vec<DenseMatrix>,
    pub feature_biases: Vec<Vec<f64>>,
    /// One `(n·k) x q` matrix per enhancement group.
    pub enhancement_weights: Vec<DenseMatrix>,
    pub enhancement_biases: Vec<Vec<f64>>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub hyper: BlsHyperparams,
    /// Notes about input columns whose scale had to be clamped.
    pub diagnostics: Vec<String>,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Draws all weights and biases uniformly on `[-1, 1]` from `hyper.seed` and
/// records per-column standardization statistics of `x_train`.
pub fn init_network(
    hyper: &BlsHyperparams,
    input_dim: usize,
    x_train: &DenseMatrix,
) -> Result<BlsNetwork> {
    hyper.validate()?;
    if input_dim == 0 {
        return Err(Error::Domain("input_dim must be at least 1".into()));
    }
    if x_train.cols() != input_dim {
        return Err(shape_err(
            "init_network",
            format!("{input_dim} input columns"),
            x_train.cols(),
        ));
    }
    if x_train.rows() == 0 {
        return Err(Error::Domain("training inputs are empty".into()));
    }

    let n_rows = x_train.rows() as f64;
    let mut input_mean = vec![0.0; input_dim];
    let mut input_scale = vec![0.0; input_dim];
    let mut diagnostics = Vec::new();
    for j in 0..input_dim {
        let col = x_train.column(j);
        let mean = col.iter().sum::<f64>() / n_rows;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_rows;
        input_mean[j] = mean;
        input_scale[j] = if var > 0.0 {
            var.sqrt()
        } else {
            diagnostics.push(format!(
                "input column {j} has zero variance; scale clamped to 1"
            ));
            1.0
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let k = hyper.nodes_per_feature_group;
    let q = hyper.nodes_per_enhancement_group;
    let mut feature_weights = Vec::with_capacity(hyper.feature_groups);
    let mut feature_biases = Vec::with_capacity(hyper.feature_groups);
    for _ in 0..hyper.feature_groups {
        feature_weights.push(uniform_matrix(&mut rng, input_dim, k));
        feature_biases.push(uniform_vec(&mut rng, k));
    }
    let nk = hyper.feature_nodes();
    let mut enhancement_weights = Vec::with_capacity(hyper.enhancement_groups);
    let mut enhancement_biases = Vec::with_capacity(hyper.enhancement_groups);
    for _ in 0..hyper.enhancement_groups {
        enhancement_weights.push(uniform_matrix(&mut rng, nk, q));
        enhancement_biases.push(uniform_vec(&mut rng, q));
    }

    Ok(BlsNetwork {
        feature_weights,
        feature_biases,
        enhancement_weights,
        enhancement_biases,
        input_mean,
        input_scale,
        hyper: hyper.clone(),
        diagnostics,
    })
}

/// `act(X W + β)` for each group, written side by side into one matrix.
fn grouped_layer(
    input: &DenseMatrix,
    weights: &[DenseMatrix],
    biases: &[Vec<f64>],
    act: impl Fn(f64) -> f64,
) -> Result<DenseMatrix> {
    let width: usize = biases.iter().map(Vec::len).sum();
    let mut out = DenseMatrix::zeros(input.rows(), width);
    let mut offset = 0;
    for (w, b) in weights.iter().zip(biases) {
        let block = input.matmul(w)?;
        for i in 0..input.rows() {
            let dst = &mut out.row_mut(i)[offset..offset + b.len()];
            for ((d, &v), &bias) in dst.iter_mut().zip(block.row(i)).zip(b) {
                *d = act(v + bias);
            }
        }
        offset += b.len();
    }
    Ok(out)
}

impl BlsNetwork {
    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.hyper.total_nodes()
    }

    /// Standardizes `x` with the training statistics.
    pub fn normalize(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.input_dim() {
            return Err(shape_err(
                "normalize",
                format!("{} input columns", self.input_dim()),
                x.cols(),
            ));
        }
        Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
            (x[(i, j)] - self.input_mean[j]) / self.input_scale[j]
        }))
    }

    /// Mapped feature nodes `Z = [φ(X̃ W_e1 + β_e1), ..., φ(X̃ W_en + β_en)]`.
    pub fn map_features(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let xn = self.normalize(x)?;
        let act = self.hyper.feature_activation;
        grouped_layer(&xn, &self.feature_weights, &self.feature_biases, |v| {
            act.apply(v)
        })
    }

    /// Enhancement nodes `H = [ξ(Z W_h1 + β_h1), ..., ξ(Z W_hm + β_hm)]`.
    pub fn enhance(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        let nk = self.hyper.feature_nodes();
        if z.cols() != nk {
            return Err(shape_err(
                "enhance",
                format!("{nk} feature columns"),
                z.cols(),
            ));
        }
        let act = self.hyper.enhancement_activation;
        grouped_layer(
            z,
            &self.enhancement_weights,
            &self.enhancement_biases,
            |v| act.apply(v),
        )
    }

    /// Full system matrix for inputs `x`.
    pub fn system_matrix(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let z = self.map_features(x)?;
        let h = self.enhance(&z)?;
        assemble_system_matrix(&z, &h, self.hyper.include_bias)
    }

    /// `Ŷ = A(x) W`.
    pub fn predict(&self, weights: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        if weights.rows() != self.total_nodes() {
            return Err(shape_err(
                "predict",
                format!("{} weight rows", self.total_nodes()),
                weights.rows(),
            ));
        }
        self.system_matrix(x)?.matmul(weights)
    }
}

/// `A = [Z | H]` with a trailing all-ones column when `include_bias`.
pub fn assemble_system_matrix(
    z: &DenseMatrix,
    h: &DenseMatrix,
    include_bias: bool,
) -> Result<DenseMatrix> {
    if z.rows() != h.rows() {
        return Err(shape_err(
            "assemble_system_matrix",
            format!("{} rows", z.rows()),
            h.rows(),
        ));
    }
    if include_bias {
        let ones = DenseMatrix::from_fn(z.rows(), 1, |_, _| 1.0);
        DenseMatrix::hstack(&[z, h, &ones])
    } else {
        DenseMatrix::hstack(&[z, h])
    }
}

/// Dense ridge readout `W = (AᵀA + λI)⁻¹AᵀY`.
pub fn train_standard_bls(
    a: &DenseMatrix,
    y: &DenseMatrix,
    lambda_ridge: f64,
) -> Result<DenseMatrix> {
    solve_ridge(a, y, lambda_ridge)
}

/// Convenience wrapper for the free-function form.
pub fn map_features(net: &BlsNetwork, x: &DenseMatrix) -> Result<DenseMatrix> {
    net.map_features(x)
}

pub fn enhance(net: &BlsNetwork, z: &DenseMatrix) -> Result<DenseMatrix> {
    net.enhance(z)
}

pub fn predict(net: &BlsNetwork, weights: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    net.predict(weights, x)
}
