//! Deterministic benchmark data: a rational nonlinear difference equation
//! and a continuous stirred tank reactor (CSTR), each turned into NARX
//! regressor/target pairs, with optional noise on the training targets.

mod cstr;
mod csv;
mod noise;
mod nonlinear;

pub use self::csv::{export_csv, import_csv, read_table, write_table, CsvTable};
pub use cstr::{
    cstr_derivative, gen_cstr_dataset, simulate_cstr, simulate_cstr_substeps, steady_state,
    CstrParams, CstrState, GAS_CONSTANT,
};
pub use noise::{add_noise, NoiseKind, NoiseSpec, NoisyTargets};
pub use nonlinear::{
    gen_nonlinear_system, gen_nonlinear_system_with_order, nonlinear_step, simulate_nonlinear,
    NarxOrder,
};

use crate::numkernel::DenseMatrix;

/// Regressor/target pairs for training and testing.
///
/// Test targets are always noise-free; noise only ever touches the training
/// split.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub x_train: DenseMatrix,
    pub y_train: DenseMatrix,
    pub x_test: DenseMatrix,
    pub y_test: DenseMatrix,
    pub regressor_names: Vec<String>,
    pub target_names: Vec<String>,
    pub noise: NoiseSpec,
    /// Training rows that received an outlier.
    pub outlier_rows: Vec<usize>,
}

impl TimeSeriesDataset {
    pub fn input_dim(&self) -> usize {
        self.x_train.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.y_train.cols()
    }
}
