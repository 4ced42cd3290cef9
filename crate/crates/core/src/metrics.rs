//! RMSE, sparsity ratio, active-node counts, and the result row written by
//! the experiment runner.
//!
//! Zero detection is exact (`== 0.0`): STLS writes exact zeros, so no
//! tolerance is applied here.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numkernel::DenseMatrix;

/// Root mean square error over all entries.
pub fn rmse(y: &DenseMatrix, y_hat: &DenseMatrix) -> Result<f64> {
    if y.shape() != y_hat.shape() {
        return Err(shape_err(
            "rmse",
            format!("{:?}", y.shape()),
            format!("{:?}", y_hat.shape()),
        ));
    }
    if y.is_empty() {
        return Err(Error::Domain("rmse of an empty vector".into()));
    }
    let sse: f64 = y
        .as_slice()
        .iter()
        .zip(y_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sse / y.as_slice().len() as f64).sqrt())
}

/// Percentage of exactly-zero entries: `(1 − nonzero/total)·100`.
pub fn sparsity_ratio(w: &DenseMatrix) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let total = w.as_slice().len();
    let nonzero = total - w.count_zeros();
    (1.0 - nonzero as f64 / total as f64) * 100.0
}

/// Rows of `W` with at least one nonzero entry.
pub fn active_nodes(w: &DenseMatrix) -> usize {
    (0..w.rows())
        .filter(|&i| w.row(i).iter().any(|v| *v != 0.0))
        .count()
}

/// Node-level sparsity `(1 − active/total)·100`.
pub fn node_sparsity(active: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (1.0 - active as f64 / total as f64) * 100.0
}

/// One (benchmark, noise level, method, seed) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub benchmark: String,
    pub method: String,
    pub noise_level: f64,
    pub seed: u64,
    pub rmse_test: f64,
    pub rmse_train: f64,
    pub total_nodes: usize,
    pub active_nodes: usize,
    pub sparsity_pct: f64,
    pub train_time_ms: f64,
    pub iterations: usize,
}

pub const RECORD_HEADER: &str = "benchmark,method,noise_level,seed,rmse_test,rmse_train,total_nodes,active_nodes,sparsity_pct,train_time_ms,iterations";

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.rmse_test >= 0.0) || !(self.rmse_train >= 0.0) {
            return Err(Error::Domain(format!(
                "rmse must be non-negative (test {}, train {})",
                self.rmse_test, self.rmse_train
            )));
        }
        if self.active_nodes > self.total_nodes {
            return Err(Error::Domain(format!(
                "active nodes {} exceed total {}",
                self.active_nodes, self.total_nodes
            )));
        }
        let expected = node_sparsity(self.active_nodes, self.total_nodes);
        if (self.sparsity_pct - expected).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "sparsity {} disagrees with node counts ({expected})",
                self.sparsity_pct
            )));
        }
        Ok(())
    }

    /// One CSV line in [`RECORD_HEADER`] order. Floats use the shortest
    /// representation that round-trips.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.benchmark,
            self.method,
            self.noise_level,
            self.seed,
            self.rmse_test,
            self.rmse_train,
            self.total_nodes,
            self.active_nodes,
            self.sparsity_pct,
            self.train_time_ms,
            self.iterations
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 11 {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected 11 fields, found {}", f.len()),
            });
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line: 0,
                message: format!("bad {name}: {s:?}"),
            })
        }
        Ok(ExperimentRecord {
            benchmark: f[0].to_string(),
            method: f[1].to_string(),
            noise_level: num(f[2], "noise_level")?,
            seed: num(f[3], "seed")?,
            rmse_test: num(f[4], "rmse_test")?,
            rmse_train: num(f[5], "rmse_train")?,
            total_nodes: num(f[6], "total_nodes")?,
            active_nodes: num(f[7], "active_nodes")?,
            sparsity_pct: num(f[8], "sparsity_pct")?,
            train_time_ms: num(f[9], "train_time_ms")?,
            iterations: num(f[10], "iterations")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::column_vector(v).unwrap()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&col(&[1.0, 2.0]), &col(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(rmse(&col(&[0.0, 0.0]), &col(&[1.0, 1.0])).unwrap(), 1.0);
        let r = rmse(&col(&[0.0, 0.0, 0.0]), &col(&[1.0, 2.0, 2.0])).unwrap();
        assert!((r - 3f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&col(&[0.0]), &col(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity_ratio(&DenseMatrix::zeros(5, 2)), 100.0);
        assert_eq!(sparsity_ratio(&DenseMatrix::from_fn(3, 2, |_, _| 1.0)), 0.0);
        let w = DenseMatrix::from_fn(401, 1, |i, _| if i < 201 { 1.0 } else { 0.0 });
        let s = sparsity_ratio(&w);
        assert!((s - 200.0 / 401.0 * 100.0).abs() < 1e-12);
        assert_eq!(format!("{s:.1}"), "49.9");
    }

    #[test]
    fn active_node_examples() {
        assert_eq!(active_nodes(&DenseMatrix::from_fn(7, 2, |_, _| 0.5)), 7);
        assert_eq!(active_nodes(&DenseMatrix::zeros(7, 2)), 0);
        let w = DenseMatrix::from_fn(201, 1, |i, _| if i % 3 == 0 && i < 183 { 1.0 } else { 0.0 });
        assert_eq!(active_nodes(&w), 61);
        // A row counts as active if any output uses it.
        let w = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(active_nodes(&w), 2);
    }

    #[test]
    fn record_round_trip_and_validation() {
        let rec = ExperimentRecord {
            benchmark: "nonlinear".into(),
            method: "sbls".into(),
            noise_level: 0.4,
            seed: 3,
            rmse_test: 0.1632,
            rmse_train: 0.25,
            total_nodes: 401,
            active_nodes: 201,
            sparsity_pct: node_sparsity(201, 401),
            train_time_ms: 0.0,
            iterations: 10,
        };
        rec.validate().unwrap();
        assert_eq!(
            ExperimentRecord::from_csv_row(&rec.to_csv_row()).unwrap(),
            rec
        );
        assert_eq!(RECORD_HEADER.split(',').count(), 11);

        let bad = ExperimentRecord {
            active_nodes: 402,
            ..rec.clone()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentRecord {
            sparsity_pct: 10.0,
            ..rec
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_homogeneous(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
            c in -10f64..10.0,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let r = rmse(&col(&y), &col(&yh)).unwrap();
            prop_assert_eq!(r, rmse(&col(&yh), &col(&y)).unwrap());
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let yhs: Vec<f64> = yh.iter().map(|v| v * c).collect();
            let rs = rmse(&col(&ys), &col(&yhs)).unwrap();
            prop_assert!((rs - c.abs() * r).abs() <= 1e-9 * (1.0 + rs));
        }

        #[test]
        fn single_output_sparsity_matches_node_count(mask in proptest::collection::vec(any::<bool>(), 1..300)) {
            let w = DenseMatrix::from_fn(mask.len(), 1, |i, _| if mask[i] { 1.5 } else { 0.0 });
            let s = sparsity_ratio(&w);
            let n = node_sparsity(active_nodes(&w), mask.len());
            prop_assert!((s - n).abs() < 1e-9);
        }
    }
}
