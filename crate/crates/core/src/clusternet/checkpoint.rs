//! ClusterNet checkpoints: the cluster count followed by each cluster's
//! function and context network in the single-network record format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Cluster, ClusterNet};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpRecord, CHECKPOINT_VERSION};

pub const CLUSTERNET_FORMAT: &str = "mtl.clusternet";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub function: MlpRecord,
    pub context: MlpRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNetRecord {
    pub format: String,
    pub version: u32,
    pub q: usize,
    pub clusters: Vec<ClusterRecord>,
}

impl From<&ClusterNet> for ClusterNetRecord {
    fn from(model: &ClusterNet) -> Self {
        Self {
            format: CLUSTERNET_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            q: model.q(),
            clusters: model
                .clusters()
                .iter()
                .map(|c| ClusterRecord {
                    function: MlpRecord::from(&c.function_net),
                    context: MlpRecord::from(&c.context_net),
                })
                .collect(),
        }
    }
}

impl TryFrom<ClusterNetRecord> for ClusterNet {
    type Error = Error;

    fn try_from(rec: ClusterNetRecord) -> Result<Self> {
        if rec.format != CLUSTERNET_FORMAT || rec.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "expected {CLUSTERNET_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                rec.format, rec.version
            )));
        }
        if rec.q != rec.clusters.len() {
            return Err(Error::Schema(format!(
                "declares {} clusters but stores {}",
                rec.q,
                rec.clusters.len()
            )));
        }
        let clusters = rec
            .clusters
            .into_iter()
            .map(|c| {
                Ok(Cluster {
                    function_net: Mlp::try_from(c.function)?,
                    context_net: Mlp::try_from(c.context)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ClusterNet::from_clusters(clusters).map_err(|e| Error::Schema(e.to_string()))
    }
}

impl ClusterNet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ClusterNetRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ClusterNetRecord>(text)?.try_into()
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
