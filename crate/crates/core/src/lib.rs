//! Multi-task learning for imbalanced regression datasets.
//!
//! A dataset is first split into `k` disjoint subtasks (by binning one input
//! dimension or by K-means), then a ClusterNet learns all subtasks at once:
//! `k` clusters, each a regression "function" network gated by a sigmoid
//! "context" network, combined as `y = sum_j f_j * c_j`. Function and context
//! networks are trained alternately on their own losses.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allocation;
pub mod clusternet;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod nn;

pub use error::{Error, Result};
