use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{NoiseSpec, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

const TARGET_PREFIX: &str = "target";

/// One split as stored on disk: regressor columns followed by target columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub regressor_names: Vec<String>,
    pub target_names: Vec<String>,
    pub x: DenseMatrix,
    pub y: DenseMatrix,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Serializes a table. Values use 17 significant digits so that reading
/// the file back reproduces every bit.
pub fn write_table(
    path: &Path,
    regressor_names: &[String],
    target_names: &[String],
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<()> {
    if x.rows() != y.rows() || x.cols() != regressor_names.len() || y.cols() != target_names.len() {
        return Err(crate::error::shape_err(
            "write_table",
            format!(
                "{} regressors, {} targets",
                regressor_names.len(),
                target_names.len()
            ),
            format!("x {:?}, y {:?}", x.shape(), y.shape()),
        ));
    }
    if let Some(bad) = target_names.iter().find(|n| !n.starts_with(TARGET_PREFIX)) {
        return Err(Error::Domain(format!(
            "target column {bad:?} must start with {TARGET_PREFIX:?}"
        )));
    }
    if let Some(bad) = regressor_names
        .iter()
        .find(|n| n.starts_with(TARGET_PREFIX))
    {
        return Err(Error::Domain(format!(
            "regressor column {bad:?} uses the target prefix"
        )));
    }

    let mut out = String::new();
    let header: Vec<&str> = regressor_names
        .iter()
        .chain(target_names)
        .map(String::as_str)
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..x.rows() {
        for (j, v) in x.row(i).iter().chain(y.row(i)).enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(parse_err(1, "empty column name in header"));
    }
    let split = names
        .iter()
        .position(|n| n.starts_with(TARGET_PREFIX))
        .ok_or_else(|| parse_err(1, "header has no target column"))?;
    if names[split..].iter().any(|n| !n.starts_with(TARGET_PREFIX)) {
        return Err(parse_err(1, "regressor column after target columns"));
    }
    let width = names.len();

    let mut values = Vec::new();
    let mut rows = 0;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        if values.len() - start != width {
            return Err(parse_err(
                lineno,
                format!("expected {width} fields, found {}", values.len() - start),
            ));
        }
        rows += 1;
    }

    let d = split;
    let x = DenseMatrix::from_fn(rows, d, |i, j| values[i * width + j]);
    let y = DenseMatrix::from_fn(rows, width - d, |i, j| values[i * width + d + j]);
    Ok(CsvTable {
        regressor_names: names[..d].to_vec(),
        target_names: names[d..].to_vec(),
        x,
        y,
    })
}

/// Writes `train.csv` and `test.csv` into `dir`, creating it if needed.
pub fn export_csv(ds: &TimeSeriesDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_table(
        &dir.join("train.csv"),
        &ds.regressor_names,
        &ds.target_names,
        &ds.x_train,
        &ds.y_train,
    )?;
    write_table(
        &dir.join("test.csv"),
        &ds.regressor_names,
        &ds.target_names,
        &ds.x_test,
        &ds.y_test,
    )
}

/// Reads a directory written by [`export_csv`]. Noise metadata is not
/// stored, so the result carries [`NoiseSpec::none`] and no outlier rows.
pub fn import_csv(dir: &Path) -> Result<TimeSeriesDataset> {
    let train = read_table(&dir.join("train.csv"))?;
    let test = read_table(&dir.join("test.csv"))?;
    if train.regressor_names != test.regressor_names || train.target_names != test.target_names {
        return Err(parse_err(1, "test.csv header does not match train.csv"));
    }
    Ok(TimeSeriesDataset {
        x_train: train.x,
        y_train: train.y,
        x_test: test.x,
        y_test: test.y,
        regressor_names: train.regressor_names,
        target_names: train.target_names,
        noise: NoiseSpec::none(),
        outlier_rows: Vec::new(),
    })
}
