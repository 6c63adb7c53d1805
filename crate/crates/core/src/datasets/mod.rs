//! Dataset generation, loading, normalization and splitting.

mod burgers;
mod cylinder;
mod solver;
mod table;

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis as NdAxis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use burgers::{
    generate_burgers, Axis, BurgersConfig, TravelingWave, BURGERS_INPUTS, BURGERS_TARGET,
};
pub use cylinder::synthetic_cylinder_table;
pub use solver::{solve_burgers_numerical, DEFAULT_CFL};
pub use table::{
    check_ranges, load_table, read_table, save_table, write_table, ColumnRange, TableSchema,
};

use crate::error::{Error, Result};

/// Named input and target columns, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub input_names: Vec<String>,
    pub target_names: Vec<String>,
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl RawDataset {
    pub fn new(
        input_names: Vec<String>,
        target_names: Vec<String>,
        inputs: Array2<f64>,
        targets: Array2<f64>,
    ) -> Result<Self> {
        if inputs.nrows() != targets.nrows()
            || inputs.ncols() != input_names.len()
            || targets.ncols() != target_names.len()
        {
            return Err(Error::invalid(format!(
                "inputs {:?} / targets {:?} do not match {} + {} column names",
                inputs.dim(),
                targets.dim(),
                input_names.len(),
                target_names.len()
            )));
        }
        Ok(Self {
            input_names,
            target_names,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.input_names.iter().position(|n| n == name)
    }

    pub fn target_index(&self, name: &str) -> Option<usize> {
        self.target_names.iter().position(|n| n == name)
    }
}

/// Min-max scaling of one column onto `[0, 1]`. A constant column maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

impl ColumnTransform {
    pub fn fit(values: ArrayView1<f64>) -> Self {
        let min = values.fold(f64::INFINITY, |m, &v| m.min(v));
        let max = values.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        Self {
            min,
            max,
            degenerate: !(max > min),
        }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        if self.degenerate {
            self.min
        } else {
            self.min + z * (self.max - self.min)
        }
    }

    /// Factor that maps normalized differences back to raw units.
    pub fn scale(&self) -> f64 {
        if self.degenerate {
            0.0
        } else {
            self.max - self.min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Split sizes for `n` rows under `ratio`: train and validation are floored,
/// the test split takes the remainder.
pub fn split_sizes(n: usize, ratio: (usize, usize, usize)) -> (usize, usize, usize) {
    let total = ratio.0 + ratio.1 + ratio.2;
    let train = n * ratio.0 / total;
    let val = n * ratio.1 / total;
    (train, val, n - train - val)
}

/// A dataset scaled by transforms fitted on its training split only.
#[derive(Debug, Clone)]
pub struct NormalizedDataset {
    pub raw: RawDataset,
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub input_transforms: Vec<ColumnTransform>,
    pub target_transforms: Vec<ColumnTransform>,
    pub splits: SplitIndices,
    pub seed: u64,
}

/// Shuffles rows by `seed`, splits them by `ratio` and min-max scales every
/// column with statistics of the training rows.
pub fn normalize_and_split(
    raw: RawDataset,
    ratio: (usize, usize, usize),
    seed: u64,
) -> Result<NormalizedDataset> {
    let n = raw.len();
    if n < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 rows to split, got {n}"
        )));
    }
    if ratio.0 == 0 || ratio.0 + ratio.1 + ratio.2 == 0 {
        return Err(Error::invalid(format!("bad split ratio {ratio:?}")));
    }
    let (n_train, n_val, _) = split_sizes(n, ratio);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let splits = SplitIndices {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };

    let train_inputs = raw.inputs.select(NdAxis(0), &splits.train);
    let train_targets = raw.targets.select(NdAxis(0), &splits.train);
    let input_transforms: Vec<_> = train_inputs
        .columns()
        .into_iter()
        .map(ColumnTransform::fit)
        .collect();
    let target_transforms: Vec<_> = train_targets
        .columns()
        .into_iter()
        .map(ColumnTransform::fit)
        .collect();
    let inputs = apply(&raw.inputs, &input_transforms, ColumnTransform::normalize);
    let targets = apply(&raw.targets, &target_transforms, ColumnTransform::normalize);
    Ok(NormalizedDataset {
        raw,
        inputs,
        targets,
        input_transforms,
        target_transforms,
        splits,
        seed,
    })
}

fn apply(
    m: &Array2<f64>,
    transforms: &[ColumnTransform],
    f: fn(&ColumnTransform, f64) -> f64,
) -> Array2<f64> {
    let mut out = m.clone();
    for (mut col, t) in out.columns_mut().into_iter().zip(transforms) {
        col.mapv_inplace(|v| f(t, v));
    }
    out
}

/// Fitted transforms detached from the data, for use at inference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub inputs: Vec<ColumnTransform>,
    pub targets: Vec<ColumnTransform>,
}

impl Scaling {
    pub fn normalize_inputs(&self, raw: &Array2<f64>) -> Array2<f64> {
        apply(raw, &self.inputs, ColumnTransform::normalize)
    }

    pub fn normalize_targets(&self, raw: &Array2<f64>) -> Array2<f64> {
        apply(raw, &self.targets, ColumnTransform::normalize)
    }

    pub fn denormalize_targets(&self, normalized: &Array2<f64>) -> Array2<f64> {
        apply(normalized, &self.targets, ColumnTransform::denormalize)
    }
}

impl NormalizedDataset {
    pub fn scaling(&self) -> Scaling {
        Scaling {
            inputs: self.input_transforms.clone(),
            targets: self.target_transforms.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn target_width(&self) -> usize {
        self.targets.ncols()
    }

    pub fn rows(&self, split: Split) -> &[usize] {
        self.splits.get(split)
    }

    pub fn split_inputs(&self, split: Split) -> Array2<f64> {
        self.inputs.select(NdAxis(0), self.rows(split))
    }

    pub fn split_targets(&self, split: Split) -> Array2<f64> {
        self.targets.select(NdAxis(0), self.rows(split))
    }

    pub fn normalize_inputs(&self, raw: &Array2<f64>) -> Array2<f64> {
        apply(raw, &self.input_transforms, ColumnTransform::normalize)
    }

    pub fn denormalize_targets(&self, normalized: &Array2<f64>) -> Array2<f64> {
        apply(
            normalized,
            &self.target_transforms,
            ColumnTransform::denormalize,
        )
    }

    pub fn denormalize_inputs(&self, normalized: &Array2<f64>) -> Array2<f64> {
        apply(
            normalized,
            &self.input_transforms,
            ColumnTransform::denormalize,
        )
    }
}

/// Sidecar written next to every generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub generator: String,
    pub generator_version: String,
    pub rows: usize,
    pub burgers: Option<BurgersConfig>,
    pub config_hash: Option<String>,
}

impl DatasetProvenance {
    pub fn burgers(config: &BurgersConfig, rows: usize) -> Self {
        Self {
            generator: "burgers-traveling-wave".into(),
            generator_version: env!("CARGO_PKG_VERSION").into(),
            rows,
            burgers: Some(*config),
            config_hash: None,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Writes `data` as CSV plus a `<name>.provenance.json` sidecar.
pub fn save_with_provenance(
    path: impl AsRef<Path>,
    data: &RawDataset,
    provenance: &DatasetProvenance,
) -> Result<()> {
    let path = path.as_ref();
    save_table(path, data)?;
    provenance.write(sidecar_path(path))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    path.with_file_name(format!("{stem}.provenance.json"))
}
