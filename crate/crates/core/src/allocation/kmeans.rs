//! Lloyd's algorithm with Forgy initialization and farthest-point repair of
//! empty clusters.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    /// Independent Lloyd runs; the lowest final objective wins.
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// `(k, d)` centroid matrix.
    pub centroids: Array2<f64>,
    /// Final objective: sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Objective after every assignment step of the winning run.
    pub trace: Vec<f64>,
    /// Trace indices whose preceding centroid update reseeded an empty cluster.
    pub repairs: Vec<usize>,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    /// Nearest centroid; ties go to the lowest index.
    pub fn assign(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.dim() {
            return Err(Error::invalid(format!(
                "row has {} features, centroids have {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(nearest(&self.centroids, ArrayView1::from(row)).0)
    }

    /// Objective of `labels` against the stored centroids.
    pub fn objective(&self, data: ArrayView2<f64>, labels: &[usize]) -> f64 {
        objective(data, &self.centroids, labels)
    }

    /// Trace split at every repair; the objective is non-increasing within each segment.
    pub fn monotone_segments(&self) -> Vec<&[f64]> {
        let mut segments = Vec::new();
        let mut start = 0;
        for &r in &self.repairs {
            if r > start {
                segments.push(&self.trace[start..r]);
            }
            start = r;
        }
        segments.push(&self.trace[start..]);
        segments
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &Array2<f64>, row: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (z, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (z, d);
        }
    }
    best
}

fn objective(data: ArrayView2<f64>, centroids: &Array2<f64>, labels: &[usize]) -> f64 {
    data.outer_iter()
        .zip(labels)
        .map(|(row, &z)| sq_dist(row, centroids.row(z)))
        .sum()
}

fn row_key(row: ArrayView1<f64>) -> Vec<u64> {
    // +0.0 folds -0.0 onto 0.0
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn distinct_rows(data: ArrayView2<f64>) -> usize {
    data.outer_iter().map(row_key).collect::<HashSet<_>>().len()
}

struct Run {
    centroids: Array2<f64>,
    labels: Vec<usize>,
    trace: Vec<f64>,
    repairs: Vec<usize>,
    iterations: usize,
}

fn forgy(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    order.shuffle(rng);
    let mut seen = HashSet::new();
    let mut centroids = Array2::zeros((k, data.ncols()));
    let mut z = 0;
    for i in order {
        if z == k {
            break;
        }
        if seen.insert(row_key(data.row(i))) {
            centroids.row_mut(z).assign(&data.row(i));
            z += 1;
        }
    }
    centroids
}

fn lloyd(data: ArrayView2<f64>, mut centroids: Array2<f64>, cfg: &KMeansConfig) -> Run {
    let (n, d) = data.dim();
    let k = centroids.nrows();
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut repairs = Vec::new();
    let mut iterations = 0;

    loop {
        for (i, row) in data.outer_iter().enumerate() {
            let (z, dist) = nearest(&centroids, row);
            labels[i] = z;
            dists[i] = dist;
        }
        trace.push(dists.iter().sum());
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (row, &z) in data.outer_iter().zip(&labels) {
            let mut acc = sums.row_mut(z);
            acc += &row;
            counts[z] += 1;
        }
        let mut next = centroids.clone();
        let mut taken = HashSet::new();
        let mut repaired = false;
        for z in 0..k {
            if counts[z] > 0 {
                let mut c = next.row_mut(z);
                c.assign(&sums.row(z));
                c /= counts[z] as f64;
            } else {
                let far =
                    (0..n)
                        .filter(|i| !taken.contains(i))
                        .fold(None, |best: Option<usize>, i| match best {
                            Some(b) if dists[b] >= dists[i] => Some(b),
                            _ => Some(i),
                        });
                if let Some(i) = far {
                    taken.insert(i);
                    next.row_mut(z).assign(&data.row(i));
                    repaired = true;
                }
            }
        }
        if repaired {
            repairs.push(trace.len());
        }
        let shift = centroids
            .outer_iter()
            .zip(next.outer_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < cfg.tol && !repaired {
            for (i, row) in data.outer_iter().enumerate() {
                let (z, dist) = nearest(&centroids, row);
                labels[i] = z;
                dists[i] = dist;
            }
            trace.push(dists.iter().sum());
            break;
        }
    }
    Run {
        centroids,
        labels,
        trace,
        repairs,
        iterations,
    }
}

/// Fits `cfg.k` centroids to the rows of `data`, returning the model and the
/// per-row labels of its final assignment.
pub fn kmeans_fit(data: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<(KMeansModel, Vec<usize>)> {
    if cfg.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if data.nrows() < cfg.k {
        return Err(Error::Infeasible(format!(
            "{} rows cannot form {} clusters",
            data.nrows(),
            cfg.k
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input holds non-finite values"));
    }
    let distinct = distinct_rows(data);
    if distinct < cfg.k {
        return Err(Error::Infeasible(format!(
            "{distinct} distinct rows cannot form {} clusters",
            cfg.k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.restarts.max(1) {
        let init = forgy(data, cfg.k, &mut rng);
        let run = lloyd(data, init, cfg);
        let better = match &best {
            Some(b) => run.trace.last() < b.trace.last(),
            None => true,
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let inertia = *run.trace.last().unwrap();
    Ok((
        KMeansModel {
            centroids: run.centroids,
            inertia,
            trace: run.trace,
            repairs: run.repairs,
            iterations: run.iterations,
        },
        run.labels,
    ))
}
