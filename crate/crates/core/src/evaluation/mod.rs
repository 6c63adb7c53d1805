//! Error metrics, region-stratified reports, activation traces and
//! prediction-grid export.

mod grid;
mod metrics;
mod trace;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use grid::{export_prediction_grid, GridAxis, GridSpec, Oracle};
pub use metrics::{
    compute_metrics, error_stats, Comparison, ErrorStats, MetricScale, MetricsReport, Region,
    RegionPredicate, RunStatus, ALL_ROWS,
};
pub use trace::{activation_trace, ActivationTrace, Dominance, TraceRow};

use crate::clusternet::{ClusterNet, ClusterNetRecord, GateMode};
use crate::error::Result;
use crate::nn::{Mlp, MlpRecord};

/// Either trained model kind, used wherever predictions are all that matter.
#[derive(Debug, Clone, PartialEq)]
pub enum Surrogate {
    Fcn(Mlp),
    ClusterNet(ClusterNet),
}

impl Surrogate {
    pub fn input_width(&self) -> usize {
        match self {
            Surrogate::Fcn(m) => m.input_width(),
            Surrogate::ClusterNet(m) => m.input_width(),
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            Surrogate::Fcn(m) => m.output_width(),
            Surrogate::ClusterNet(m) => m.output_width(),
        }
    }

    /// Normalized inputs to normalized predictions. `mode` only affects
    /// ClusterNets.
    pub fn predict(&self, inputs: ArrayView2<f64>, mode: GateMode) -> Result<Array2<f64>> {
        match self {
            Surrogate::Fcn(m) => m.forward_batch(inputs),
            Surrogate::ClusterNet(m) => m.predict_batch(inputs, mode),
        }
    }
}

/// Serialized form of a [`Surrogate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum SurrogateRecord {
    Fcn(MlpRecord),
    ClusterNet(ClusterNetRecord),
}

impl From<&Surrogate> for SurrogateRecord {
    fn from(s: &Surrogate) -> Self {
        match s {
            Surrogate::Fcn(m) => SurrogateRecord::Fcn(m.into()),
            Surrogate::ClusterNet(m) => SurrogateRecord::ClusterNet(m.into()),
        }
    }
}

impl TryFrom<SurrogateRecord> for Surrogate {
    type Error = crate::Error;

    fn try_from(r: SurrogateRecord) -> Result<Self> {
        Ok(match r {
            SurrogateRecord::Fcn(m) => Surrogate::Fcn(m.try_into()?),
            SurrogateRecord::ClusterNet(m) => Surrogate::ClusterNet(m.try_into()?),
        })
    }
}
