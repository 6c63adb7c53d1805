#![allow(dead_code)]

use mtl::clusternet::ClusterNet;
use mtl::nn::{HiddenActivation, Mlp, OutputActivation};

/// Forward pass with explicit loops over the stored parameters.
pub fn loop_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let last = net.num_layers() - 1;
    for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        let mut z = vec![0.0; w.nrows()];
        for i in 0..w.nrows() {
            let mut s = b[i];
            for j in 0..w.ncols() {
                s += w[[i, j]] * a[j];
            }
            z[i] = s;
        }
        if l < last {
            for v in &mut z {
                *v = match net.hidden_activation() {
                    HiddenActivation::Tanh => v.tanh(),
                    HiddenActivation::Relu => v.max(0.0),
                    HiddenActivation::Sigmoid => 1.0 / (1.0 + (-*v).exp()),
                };
            }
        } else {
            match net.output_activation() {
                OutputActivation::Identity => {}
                OutputActivation::Sigmoid => {
                    for v in &mut z {
                        *v = 1.0 / (1.0 + (-*v).exp());
                    }
                }
                OutputActivation::Softmax => {
                    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                    let s: f64 = e.iter().sum();
                    z = e.iter().map(|v| v / s).collect();
                }
            }
        }
        a = z;
    }
    a
}

/// `sum_j f_j * c_j` from per-cluster loop forwards.
pub fn loop_clusternet(model: &ClusterNet, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; model.output_width()];
    for cluster in model.clusters() {
        let f = loop_forward(&cluster.function_net, x);
        let c = loop_forward(&cluster.context_net, x)[0];
        for (yd, fd) in y.iter_mut().zip(f) {
            *yd += fd * c;
        }
    }
    y
}

/// Exact k=2 optimum by enumerating every two-way split.
pub fn brute_force_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << (n - 1)) {
        let mut total = 0.0;
        for side in [true, false] {
            let members: Vec<&Vec<f64>> = (0..n)
                .filter(|&i| ((mask >> i) & 1 == 1) == side)
                .map(|i| &points[i])
                .collect();
            let mut mean = vec![0.0; d];
            for p in &members {
                for j in 0..d {
                    mean[j] += p[j] / members.len() as f64;
                }
            }
            for p in &members {
                for j in 0..d {
                    total += (p[j] - mean[j]).powi(2);
                }
            }
        }
        best = best.min(total);
    }
    best
}

/// Bin index by linear scan over interior edges; the top edge is inclusive.
pub fn enumerate_bin(v: f64, edges: &[f64]) -> usize {
    let k = edges.len() - 1;
    for b in 0..k {
        if v < edges[b + 1] {
            return b;
        }
    }
    k - 1
}
