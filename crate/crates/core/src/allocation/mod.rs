//! Task allocation: split a dataset into `k` disjoint labeled subtasks.

mod kmeans;
mod partition;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans_fit, KMeansConfig, KMeansModel};
pub use partition::{partition_by_dimension, PartitionRule};

use crate::error::{Error, Result};

/// The rule that produced an [`Allocation`]; also labels rows it has not seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum AllocationRule {
    Partition(PartitionRule),
    KMeans(KMeansModel),
}

impl AllocationRule {
    pub fn k(&self) -> usize {
        match self {
            AllocationRule::Partition(p) => p.k(),
            AllocationRule::KMeans(m) => m.k(),
        }
    }

    pub fn assign(&self, row: &[f64]) -> Result<usize> {
        match self {
            AllocationRule::Partition(p) => {
                let v = row.get(p.dimension).ok_or_else(|| {
                    Error::invalid(format!(
                        "row has {} features, partition reads dimension {}",
                        row.len(),
                        p.dimension
                    ))
                })?;
                Ok(p.label_of(*v))
            }
            AllocationRule::KMeans(m) => m.assign(row),
        }
    }
}

/// Per-row subtask labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub labels: Vec<usize>,
    pub k: usize,
    pub rule: AllocationRule,
}

impl Allocation {
    pub fn by_partition(
        data: ArrayView2<f64>,
        dimension: usize,
        k: usize,
        widths: Option<&[f64]>,
    ) -> Result<Self> {
        let (rule, labels) = partition_by_dimension(data, dimension, k, widths)?;
        Ok(Self {
            labels,
            k,
            rule: AllocationRule::Partition(rule),
        })
    }

    pub fn by_kmeans(data: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<Self> {
        let (model, labels) = kmeans_fit(data, cfg)?;
        Ok(Self {
            labels,
            k: cfg.k,
            rule: AllocationRule::KMeans(model),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows per subtask.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &z in &self.labels {
            counts[z] += 1;
        }
        counts
    }

    /// Row indices of each subtask.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let mut subsets = vec![Vec::new(); self.k];
        for (i, &z) in self.labels.iter().enumerate() {
            subsets[z].push(i);
        }
        subsets
    }

    pub fn select(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }

    /// `(n, k)` one-hot matrix of the labels.
    pub fn one_hot_matrix(&self) -> Array2<f64> {
        one_hot_rows(&self.labels, self.k)
    }
}

/// Length-`k` indicator vector of `label`.
pub fn one_hot(label: usize, k: usize) -> Result<Vec<f64>> {
    if label >= k {
        return Err(Error::invalid(format!(
            "label {label} out of range for k = {k}"
        )));
    }
    let mut v = vec![0.0; k];
    v[label] = 1.0;
    Ok(v)
}

pub(crate) fn one_hot_rows(labels: &[usize], k: usize) -> Array2<f64> {
    let mut m = Array2::zeros((labels.len(), k));
    for (i, &z) in labels.iter().enumerate() {
        m[[i, z]] = 1.0;
    }
    m
}
