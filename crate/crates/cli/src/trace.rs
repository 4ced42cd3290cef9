use std::fmt::Write as _;
use std::path::Path;

use sbls_core::metrics::rmse;

use crate::config::Method;
use crate::grid::CellRun;
use crate::{write_atomic, CliError};

/// What [`emit_tracking_trace`] wrote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSummary {
    pub rows: usize,
    pub rmse_bls: f64,
    pub rmse_sbls: f64,
}

/// Writes the test-split tracking curves of the BLS and S-BLS models of
/// `run` as `step,ground_truth,bls_prediction,sbls_prediction`. Only the
/// first output column is written.
pub fn emit_tracking_trace(run: &CellRun, path: &Path) -> Result<TrackingSummary, CliError> {
    let bls = run
        .model(Method::Bls)
        .ok_or(CliError::MissingModel(Method::Bls))?;
    let sbls = run
        .model(Method::Sbls)
        .ok_or(CliError::MissingModel(Method::Sbls))?;
    let truth = &run.dataset.y_test;

    let mut out = String::from("step,ground_truth,bls_prediction,sbls_prediction\n");
    for i in 0..truth.rows() {
        let _ = writeln!(
            out,
            "{i},{:.17e},{:.17e},{:.17e}",
            truth.get(i, 0),
            bls.test_prediction.get(i, 0),
            sbls.test_prediction.get(i, 0)
        );
    }
    write_atomic(path, &out)?;
    Ok(TrackingSummary {
        rows: truth.rows(),
        rmse_bls: rmse(truth, &bls.test_prediction)?,
        rmse_sbls: rmse(truth, &sbls.test_prediction)?,
    })
}
