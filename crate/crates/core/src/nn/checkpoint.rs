//! JSON checkpoint schema for a single network.
//!
//! ```json
//! {
//!   "format": "mtl.mlp",
//!   "version": 1,
//!   "layer_sizes": [3, 32, 1],
//!   "hidden_activation": "tanh",
//!   "output_activation": "identity",
//!   "seed_lineage": { "init": 7, "train": null },
//!   "layers": [ { "weights": [/* row-major (out, in) */], "biases": [] } ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so save -> load -> save
//! reproduces the same bytes.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::activation::{HiddenActivation, OutputActivation};
use super::mlp::{Mlp, SeedLineage};
use crate::error::{Error, Result};

pub const MLP_FORMAT: &str = "mtl.mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub seed_lineage: SeedLineage,
    pub layers: Vec<LayerRecord>,
}

impl From<&Mlp> for MlpRecord {
    fn from(net: &Mlp) -> Self {
        let layers = net
            .weights()
            .iter()
            .zip(net.biases())
            .map(|(w, b)| LayerRecord {
                weights: w.iter().copied().collect(),
                biases: b.to_vec(),
            })
            .collect();
        Self {
            format: MLP_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layer_sizes: net.layer_sizes().to_vec(),
            hidden_activation: net.hidden_activation(),
            output_activation: net.output_activation(),
            seed_lineage: net.lineage(),
            layers,
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(rec: MlpRecord) -> Result<Self> {
        if rec.format != MLP_FORMAT || rec.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "expected {MLP_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                rec.format, rec.version
            )));
        }
        if rec.layer_sizes.len() != rec.layers.len() + 1 {
            return Err(Error::Schema(format!(
                "{} layer sizes but {} layers",
                rec.layer_sizes.len(),
                rec.layers.len()
            )));
        }
        let mut weights = Vec::with_capacity(rec.layers.len());
        let mut biases = Vec::with_capacity(rec.layers.len());
        for (l, layer) in rec.layers.into_iter().enumerate() {
            let shape = (rec.layer_sizes[l + 1], rec.layer_sizes[l]);
            let w = Array2::from_shape_vec(shape, layer.weights)
                .map_err(|e| Error::Schema(format!("layer {l} weights: {e}")))?;
            weights.push(w);
            biases.push(Array1::from(layer.biases));
        }
        let mut net = Mlp::from_parts(
            weights,
            biases,
            rec.hidden_activation,
            rec.output_activation,
        )?;
        if net.layer_sizes() != rec.layer_sizes.as_slice() {
            return Err(Error::Schema(
                "layer sizes disagree with parameter shapes".into(),
            ));
        }
        net.set_lineage(rec.seed_lineage);
        Ok(net)
    }
}

impl Mlp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MlpRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<MlpRecord>(text)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
