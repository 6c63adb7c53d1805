//! CSV tables: mandatory header row, UTF-8, `.` decimal separator.

use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::RawDataset;
use crate::error::{Error, Result};

/// Expected range of a column; values outside it are reported, not rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

/// Which CSV columns are inputs and which are targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub inputs: Vec<String>,
    pub targets: Vec<String>,
    #[serde(default)]
    pub ranges: Vec<ColumnRange>,
}

impl TableSchema {
    /// Cylinder-flow table: `x, y, Ma -> P, Cp, Fx, Fy`.
    pub fn cylinder() -> Self {
        let range = |c: &str, min, max| ColumnRange {
            column: c.to_string(),
            min,
            max,
        };
        Self {
            inputs: vec!["x".into(), "y".into(), "Ma".into()],
            targets: vec!["P".into(), "Cp".into(), "Fx".into(), "Fy".into()],
            ranges: vec![
                range("x", 0.1, 1.0),
                range("y", -0.5, 0.5),
                range("Ma", 0.1, 0.24),
            ],
        }
    }

    pub fn burgers() -> Self {
        Self {
            inputs: vec!["t".into(), "x".into(), "v".into()],
            targets: vec!["u".into()],
            ranges: Vec::new(),
        }
    }
}

/// Reads a CSV table; rows keep file order.
pub fn load_table(path: impl AsRef<Path>, schema: &TableSchema) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let data = read_table(file, schema)?;
    for warning in check_ranges(&data, schema) {
        log::warn!("{}: {warning}", path.display());
    }
    Ok(data)
}

pub fn read_table<R: std::io::Read>(reader: R, schema: &TableSchema) -> Result<RawDataset> {
    if schema.inputs.is_empty() || schema.targets.is_empty() {
        return Err(Error::Schema(
            "schema needs at least one input and one target".into(),
        ));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Schema("table has no header row".into()));
    }
    let find = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let input_cols = schema.inputs.iter().map(find).collect::<Result<Vec<_>>>()?;
    let target_cols = schema
        .targets
        .iter()
        .map(find)
        .collect::<Result<Vec<_>>>()?;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // row numbers are 1-based data rows, columns 1-based file columns
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).ok_or_else(|| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: "missing cell".into(),
            })?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: c + 1,
                    message: format!("`{raw}` is not finite"),
                });
            }
            Ok(v)
        };
        for &c in &input_cols {
            inputs.push(cell(c)?);
        }
        for &c in &target_cols {
            targets.push(cell(c)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Schema("table has no data rows".into()));
    }
    let inputs = Array2::from_shape_vec((rows, input_cols.len()), inputs).expect("row-major");
    let targets = Array2::from_shape_vec((rows, target_cols.len()), targets).expect("row-major");
    RawDataset::new(
        schema.inputs.clone(),
        schema.targets.clone(),
        inputs,
        targets,
    )
}

/// One message per column whose values leave its expected range.
pub fn check_ranges(data: &RawDataset, schema: &TableSchema) -> Vec<String> {
    let mut warnings = Vec::new();
    for range in &schema.ranges {
        let column = data
            .input_names
            .iter()
            .position(|n| *n == range.column)
            .map(|i| data.inputs.column(i))
            .or_else(|| {
                data.target_names
                    .iter()
                    .position(|n| *n == range.column)
                    .map(|i| data.targets.column(i))
            });
        let Some(column) = column else { continue };
        let tol = 1e-9 * (range.max - range.min).abs().max(1.0);
        let outside = column
            .iter()
            .filter(|&&v| v < range.min - tol || v > range.max + tol)
            .count();
        if outside > 0 {
            warnings.push(format!(
                "{outside} values of `{}` outside [{}, {}]",
                range.column, range.min, range.max
            ));
        }
    }
    warnings
}

/// Writes inputs then targets under their column names.
pub fn save_table(path: impl AsRef<Path>, data: &RawDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(file, data)
}

pub fn write_table<W: std::io::Write>(writer: W, data: &RawDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(data.input_names.iter().chain(&data.target_names))?;
    for (x, y) in data.inputs.outer_iter().zip(data.targets.outer_iter()) {
        wtr.write_record(x.iter().chain(y.iter()).map(|v| v.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
