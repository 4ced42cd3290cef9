use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// Zero-mean `Uniform[-γ, γ]` on every entry.
    Uniform {
        gamma: f64,
    },
    /// Uniform noise plus `⌊fraction·N⌋` rows shifted by
    /// `± magnitude · std(column)`.
    UniformPlusOutliers {
        gamma: f64,
        outlier_fraction: f64,
        outlier_magnitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    /// Corrupt the measured output sequence itself, so that the noise also
    /// enters the lagged-output regressors. Off by default: only the
    /// training targets are perturbed.
    #[serde(default)]
    pub corrupt_regressors: bool,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            seed: 0,
            corrupt_regressors: false,
        }
    }

    pub fn uniform(gamma: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Uniform { gamma },
            seed,
            corrupt_regressors: false,
        }
    }

    pub fn with_outliers(gamma: f64, fraction: f64, magnitude: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::UniformPlusOutliers {
                gamma,
                outlier_fraction: fraction,
                outlier_magnitude: magnitude,
            },
            seed,
            corrupt_regressors: false,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform { gamma } | NoiseKind::UniformPlusOutliers { gamma, .. } => gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = self.gamma();
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!(
                "noise gamma must be non-negative, got {gamma}"
            )));
        }
        if let NoiseKind::UniformPlusOutliers {
            outlier_fraction,
            outlier_magnitude,
            ..
        } = self.kind
        {
            if !(0.0..1.0).contains(&outlier_fraction) {
                return Err(Error::Domain(format!(
                    "outlier fraction must lie in [0, 1), got {outlier_fraction}"
                )));
            }
            if !(outlier_magnitude > 0.0) || !outlier_magnitude.is_finite() {
                return Err(Error::Domain(format!(
                    "outlier magnitude must be positive, got {outlier_magnitude}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyTargets {
    pub values: DenseMatrix,
    /// Sorted indices of the rows that received an outlier.
    pub outlier_rows: Vec<usize>,
}

/// Perturbs `y` according to `spec`. With `γ = 0` and no outliers the input
/// is returned unchanged.
pub fn add_noise(y: &DenseMatrix, spec: &NoiseSpec) -> Result<NoisyTargets> {
    spec.validate()?;
    let mut out = y.clone();
    let mut outlier_rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let gamma = spec.gamma();
    if gamma > 0.0 {
        for i in 0..out.rows() {
            for v in out.row_mut(i) {
                *v += rng.gen_range(-gamma..=gamma);
            }
        }
    }

    if let NoiseKind::UniformPlusOutliers {
        outlier_fraction,
        outlier_magnitude,
        ..
    } = spec.kind
    {
        let n = y.rows();
        let count = (outlier_fraction * n as f64).floor() as usize;
        let stds: Vec<f64> = (0..y.cols()).map(|d| column_std(&y.column(d))).collect();
        outlier_rows = sample(&mut rng, n, count).into_vec();
        outlier_rows.sort_unstable();
        for &i in &outlier_rows {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for (v, s) in out.row_mut(i).iter_mut().zip(&stds) {
                *v += sign * outlier_magnitude * s;
            }
        }
    }

    if out.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("add_noise"));
    }
    Ok(NoisyTargets {
        values: out,
        outlier_rows,
    })
}

fn column_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}
