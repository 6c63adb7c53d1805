//! TOML experiment configuration.
//!
//! ```toml
//! seed = 0
//! output = "runs/mtl_x"
//!
//! [dataset]
//! kind = "burgers"          # or "table" (with `path`, `schema`) or "cylinder"
//! split = [8, 1, 1]
//!
//! [allocation]              # required for ClusterNet models
//! method = "partition"      # or "kmeans"
//! dimension = "x"
//! k = 4
//!
//! [model]
//! structure = "4;3*64;1*5"
//!
//! [training]
//! learning_rate = 1e-4
//! batch_size = 128
//! iterations = 2000
//!
//! [evaluation]
//! regions = ["u > 3.5"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::structure::Structure;
use crate::clusternet::{GateMode, TrainConfig};
use crate::datasets::{BurgersConfig, TableSchema};
use crate::error::{Error, Result};
use crate::evaluation::{MetricScale, RegionPredicate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaChoice {
    Burgers,
    Cylinder,
    #[serde(untagged)]
    Custom(TableSchema),
}

impl SchemaChoice {
    pub fn resolve(&self) -> TableSchema {
        match self {
            SchemaChoice::Burgers => TableSchema::burgers(),
            SchemaChoice::Cylinder => TableSchema::cylinder(),
            SchemaChoice::Custom(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Burgers {
        #[serde(default)]
        grid: BurgersConfig,
    },
    Table {
        path: PathBuf,
        schema: SchemaChoice,
    },
    /// Built-in synthetic cylinder-surface table.
    Cylinder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default = "default_split")]
    pub split: [usize; 3],
}

fn default_split() -> [usize; 3] {
    [8, 1, 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMethod {
    Partition,
    KMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    pub method: AllocationMethod,
    pub k: usize,
    /// Input column name for partitioning.
    #[serde(default)]
    pub dimension: Option<String>,
    #[serde(default)]
    pub widths: Option<Vec<f64>>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub structure: Structure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub regions: Vec<RegionPredicate>,
    pub gate_mode: GateMode,
    pub scale: MetricScale,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            regions: Vec::new(),
            gate_mode: GateMode::Soft,
            scale: MetricScale::Normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub allocation: Option<AllocationConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Cross-section checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.dataset.split[0] == 0 {
            return Err(Error::Config(
                "training share of the split must be positive".into(),
            ));
        }
        match (&self.model.structure, &self.allocation) {
            (Structure::ClusterNet { .. }, None) => {
                return Err(Error::Config(
                    "a ClusterNet model needs an [allocation] section".into(),
                ))
            }
            (Structure::ClusterNet { q, .. }, Some(a)) if *q != a.k => {
                return Err(Error::Config(format!(
                    "allocation k = {} but the model has q = {q} clusters",
                    a.k
                )))
            }
            _ => {}
        }
        if let Some(a) = &self.allocation {
            if a.k == 0 {
                return Err(Error::Config("allocation k must be positive".into()));
            }
            if a.method == AllocationMethod::Partition && a.dimension.is_none() {
                return Err(Error::Config(
                    "partition allocation needs a `dimension`".into(),
                ));
            }
            if let Some(w) = &a.widths {
                if w.len() != a.k {
                    return Err(Error::Config(format!("{} widths for k = {}", w.len(), a.k)));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output directory
    /// is left out so relocated runs share a hash.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        let canonical = serde_json::to_vec(&canonical)?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MTL_X: &str = r#"
seed = 3
output = "runs/x"

[dataset]
kind = "burgers"

[allocation]
method = "partition"
dimension = "x"
k = 4

[model]
structure = "4;3*64;1*5"

[training]
iterations = 10

[evaluation]
regions = ["u > 3.5"]
"#;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_toml(MTL_X).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.training.iterations, 10);
        assert_eq!(cfg.training.batch_size, 128);
        assert_eq!(cfg.model.structure.clusters(), Some(4));
        assert_eq!(cfg.evaluation.regions[0].threshold, 3.5);
        assert_eq!(cfg.dataset.split, [8, 1, 1]);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn k_must_equal_q() {
        let text = MTL_X.replace("k = 4", "k = 3");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bad_structure_is_rejected() {
        let text = MTL_X.replace("4;3*64;1*5", "4;;");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.category(), crate::error::Category::Config);
    }

    #[test]
    fn table_source() {
        let text = r#"
[dataset]
kind = "table"
path = "cyl.csv"
schema = "cylinder"

[model]
structure = "3*32"
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        match &cfg.dataset.source {
            DatasetSource::Table { schema, .. } => {
                assert_eq!(schema.resolve(), TableSchema::cylinder())
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ExperimentConfig::from_toml(MTL_X).unwrap();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 4;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [
            include_str!("../../../../configs/burgers_fcn.toml"),
            include_str!("../../../../configs/burgers_mtl_x.toml"),
            include_str!("../../../../configs/burgers_mtl_k.toml"),
        ] {
            ExperimentConfig::from_toml(text).unwrap();
        }
    }

    #[test]
    fn full_training_section_parses() {
        let text = r#"
seed = 0
[dataset]
kind = "burgers"
split = [8, 1, 1]
[allocation]
method = "partition"
dimension = "x"
k = 4
[model]
structure = "4;3*64;1*5"
[training]
learning_rate = 1e-4
batch_size = 128
iterations = 2000
iteration_unit = "epoch"
optimizer = { kind = "adam" }
[evaluation]
regions = ["u > 3.5"]
gate_mode = "soft"
scale = "normalized"
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.training.optimizer, crate::nn::OptimizerKind::adam());
        let sgd = text.replace(r#"{ kind = "adam" }"#, r#"{ kind = "sgd" }"#);
        let cfg = ExperimentConfig::from_toml(&sgd).unwrap();
        assert_eq!(cfg.training.optimizer, crate::nn::OptimizerKind::Sgd);
    }
}
