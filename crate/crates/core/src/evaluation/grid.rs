use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Surrogate;
use crate::clusternet::GateMode;
use crate::datasets::Scaling;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Cartesian product of axes; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn rows(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Raw input points in lexicographic order.
    pub fn points(&self) -> Result<Array2<f64>> {
        if self.axes.is_empty() {
            return Err(Error::invalid("grid has no axes"));
        }
        if let Some(a) = self.axes.iter().find(|a| a.values.is_empty()) {
            return Err(Error::invalid(format!("grid axis `{}` is empty", a.name)));
        }
        let n = self.rows();
        let d = self.axes.len();
        let mut out = Array2::zeros((n, d));
        let mut idx = vec![0usize; d];
        for r in 0..n {
            for (j, a) in self.axes.iter().enumerate() {
                out[[r, j]] = a.values[idx[j]];
            }
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.axes[j].values.len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(out)
    }
}

/// Reference values for one raw input row.
pub type Oracle = dyn Fn(&[f64]) -> Vec<f64> + Sync;

/// Writes `inputs.., pred_<t>.. [, real_<t>..]` for every grid point.
/// Predictions are in raw units; `oracle` maps a raw input row to raw targets.
#[allow(clippy::too_many_arguments)]
pub fn export_prediction_grid(
    model: &Surrogate,
    scaling: &Scaling,
    grid: &GridSpec,
    target_names: &[String],
    mode: GateMode,
    oracle: Option<&Oracle>,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    if grid.axes.len() != model.input_width() {
        return Err(Error::invalid(format!(
            "grid has {} axes, model takes {} inputs",
            grid.axes.len(),
            model.input_width()
        )));
    }
    if target_names.len() != model.output_width() {
        return Err(Error::invalid("one target name per model output required"));
    }
    let raw = grid.points()?;
    let pred =
        scaling.denormalize_targets(&model.predict(scaling.normalize_inputs(&raw).view(), mode)?);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    let mut header: Vec<String> = grid.axes.iter().map(|a| a.name.clone()).collect();
    header.extend(target_names.iter().map(|t| format!("pred_{t}")));
    if oracle.is_some() {
        header.extend(target_names.iter().map(|t| format!("real_{t}")));
    }
    wtr.write_record(&header)?;
    for (x, y) in raw.outer_iter().zip(pred.outer_iter()) {
        let x = x.to_vec();
        let mut rec: Vec<String> = x.iter().chain(y.iter()).map(f64::to_string).collect();
        if let Some(f) = oracle {
            rec.extend(f(&x).iter().map(f64::to_string));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(raw.nrows())
}
