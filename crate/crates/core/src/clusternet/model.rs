use ndarray::{Array2, ArrayView2, Axis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{HiddenActivation, Mlp, OutputActivation};

/// How cluster outputs become a prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    /// `y = sum_j f_j * c_j`.
    #[default]
    Soft,
    /// `y = f_j*` with `j* = argmax_j c_j`, lowest index on ties.
    Hard,
}

/// One expert: a regression head and its sigmoid gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub function_net: Mlp,
    pub context_net: Mlp,
}

/// Widths that define a ClusterNet, excluding parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterArchitecture {
    pub input_width: usize,
    pub output_width: usize,
    pub clusters: usize,
    pub function_hidden: Vec<usize>,
    pub context_hidden: Vec<usize>,
}

impl ClusterArchitecture {
    pub fn function_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width];
        s.extend(&self.function_hidden);
        s.push(self.output_width);
        s
    }

    pub fn context_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width];
        s.extend(&self.context_hidden);
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNet {
    clusters: Vec<Cluster>,
}

/// Single-sample result of [`ClusterNet::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutput {
    pub y: Vec<f64>,
    /// `f[j]` is cluster `j`'s function output.
    pub f: Vec<Vec<f64>>,
    /// `c[j]` is cluster `j`'s gate value.
    pub c: Vec<f64>,
}

/// Batched result: `f[j]` is `(n, out)`, `c` is `(n, q)`.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub y: Array2<f64>,
    pub f: Vec<Array2<f64>>,
    pub c: Array2<f64>,
}

impl ClusterNet {
    /// Fresh model; every network gets its own seed drawn from `seed`.
    pub fn new(arch: &ClusterArchitecture, seed: u64) -> Result<Self> {
        if arch.clusters == 0 {
            return Err(Error::invalid("a ClusterNet needs at least one cluster"));
        }
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let clusters = (0..arch.clusters)
            .map(|_| {
                Ok(Cluster {
                    function_net: Mlp::new(
                        &arch.function_sizes(),
                        HiddenActivation::Tanh,
                        OutputActivation::Identity,
                        seeds.next_u64(),
                    )?,
                    context_net: Mlp::new(
                        &arch.context_sizes(),
                        HiddenActivation::Tanh,
                        OutputActivation::Sigmoid,
                        seeds.next_u64(),
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_clusters(clusters)
    }

    /// Assembles clusters, checking that they agree on widths and that every
    /// gate is a single sigmoid unit.
    pub fn from_clusters(clusters: Vec<Cluster>) -> Result<Self> {
        let first = clusters
            .first()
            .ok_or_else(|| Error::invalid("a ClusterNet needs at least one cluster"))?;
        let input = first.function_net.input_width();
        let output = first.function_net.output_width();
        for (j, c) in clusters.iter().enumerate() {
            if c.function_net.input_width() != input || c.context_net.input_width() != input {
                return Err(Error::invalid(format!("cluster {j}: input widths differ")));
            }
            if c.function_net.output_width() != output {
                return Err(Error::invalid(format!("cluster {j}: output width differs")));
            }
            if c.context_net.output_width() != 1
                || c.context_net.output_activation() != OutputActivation::Sigmoid
            {
                return Err(Error::invalid(format!(
                    "cluster {j}: context network must end in one sigmoid unit"
                )));
            }
            if c.function_net.layer_sizes() != first.function_net.layer_sizes()
                || c.context_net.layer_sizes() != first.context_net.layer_sizes()
            {
                return Err(Error::invalid(format!("cluster {j}: layer sizes differ")));
            }
        }
        Ok(Self { clusters })
    }

    pub fn q(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn clusters_mut(&mut self) -> &mut [Cluster] {
        &mut self.clusters
    }

    pub fn input_width(&self) -> usize {
        self.clusters[0].function_net.input_width()
    }

    pub fn output_width(&self) -> usize {
        self.clusters[0].function_net.output_width()
    }

    pub fn architecture(&self) -> ClusterArchitecture {
        let f = self.clusters[0].function_net.layer_sizes();
        let c = self.clusters[0].context_net.layer_sizes();
        ClusterArchitecture {
            input_width: f[0],
            output_width: *f.last().unwrap(),
            clusters: self.q(),
            function_hidden: f[1..f.len() - 1].to_vec(),
            context_hidden: c[1..c.len() - 1].to_vec(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ClusterOutput> {
        if x.len() != self.input_width() {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_width()
            )));
        }
        let mut f = Vec::with_capacity(self.q());
        let mut c = Vec::with_capacity(self.q());
        for cluster in &self.clusters {
            f.push(cluster.function_net.forward(x)?);
            c.push(cluster.context_net.forward(x)?[0]);
        }
        let y = combine(&f, &c)?;
        Ok(ClusterOutput { y, f, c })
    }

    /// Gate values `(n, q)`.
    pub fn gates_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut c = Array2::zeros((inputs.nrows(), self.q()));
        for (j, cluster) in self.clusters.iter().enumerate() {
            let g = cluster.context_net.forward_batch(inputs)?;
            c.column_mut(j).assign(&g.column(0));
        }
        Ok(c)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<BatchOutput> {
        let c = self.gates_batch(inputs)?;
        let f = self
            .clusters
            .iter()
            .map(|cl| cl.function_net.forward_batch(inputs))
            .collect::<Result<Vec<_>>>()?;
        let y = soft_combine(&f, &c);
        Ok(BatchOutput { y, f, c })
    }

    pub fn predict(&self, x: &[f64], mode: GateMode) -> Result<Vec<f64>> {
        let out = self.forward(x)?;
        match mode {
            GateMode::Soft => Ok(out.y),
            GateMode::Hard => select_hard(&out.f, &out.c),
        }
    }

    pub fn predict_batch(&self, inputs: ArrayView2<f64>, mode: GateMode) -> Result<Array2<f64>> {
        let out = self.forward_batch(inputs)?;
        Ok(match mode {
            GateMode::Soft => out.y,
            GateMode::Hard => {
                let mut y = Array2::zeros(out.y.dim());
                for (i, gates) in out.c.outer_iter().enumerate() {
                    let j = argmax(gates.as_slice().expect("row-major gates"));
                    y.row_mut(i).assign(&out.f[j].row(i));
                }
                y
            }
        })
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// `y = sum_j f[j] * c[j]`.
pub fn combine(f: &[Vec<f64>], c: &[f64]) -> Result<Vec<f64>> {
    check_parts(f, c)?;
    let mut y = vec![0.0; f[0].len()];
    for (fj, &cj) in f.iter().zip(c) {
        for (yd, &fd) in y.iter_mut().zip(fj) {
            *yd += fd * cj;
        }
    }
    Ok(y)
}

/// Output of the cluster with the largest gate.
pub fn select_hard(f: &[Vec<f64>], c: &[f64]) -> Result<Vec<f64>> {
    check_parts(f, c)?;
    Ok(f[argmax(c)].clone())
}

fn check_parts(f: &[Vec<f64>], c: &[f64]) -> Result<()> {
    if f.is_empty() || f.len() != c.len() {
        return Err(Error::invalid(format!(
            "{} function outputs for {} gates",
            f.len(),
            c.len()
        )));
    }
    if f.iter().any(|fj| fj.len() != f[0].len()) {
        return Err(Error::invalid("function outputs differ in width"));
    }
    Ok(())
}

pub(crate) fn soft_combine(f: &[Array2<f64>], c: &Array2<f64>) -> Array2<f64> {
    let mut y = Array2::zeros(f[0].dim());
    for (j, fj) in f.iter().enumerate() {
        let gate = c.column(j).insert_axis(Axis(1));
        y += &(fj * &gate);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_one_hot_gate() {
        let y = combine(&[vec![2.0], vec![4.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(y, vec![2.0]);
    }

    #[test]
    fn uniform_gates_average() {
        let y = combine(&vec![vec![1.0]; 4], &[0.25; 4]).unwrap();
        assert_eq!(y, vec![1.0]);
    }

    #[test]
    fn soft_and_hard_on_a_traced_row() {
        let f = [vec![0.09], vec![0.14], vec![0.0], vec![0.0]];
        let c = [0.98, 0.48, 0.0, 0.0];
        let soft = combine(&f, &c).unwrap();
        assert!((soft[0] - 0.1554).abs() < 1e-12);
        assert_eq!(select_hard(&f, &c).unwrap(), vec![0.09]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn mismatched_parts() {
        assert!(combine(&[vec![1.0]], &[0.5, 0.5]).is_err());
        assert!(combine(&[vec![1.0], vec![1.0, 2.0]], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn rejects_bad_clusters() {
        let arch = ClusterArchitecture {
            input_width: 3,
            output_width: 1,
            clusters: 2,
            function_hidden: vec![4],
            context_hidden: vec![2],
        };
        let model = ClusterNet::new(&arch, 1).unwrap();
        assert_eq!(model.architecture(), arch);
        let mut clusters = model.clusters().to_vec();
        clusters[1].context_net = Mlp::new(
            &[3, 2, 2],
            HiddenActivation::Tanh,
            OutputActivation::Sigmoid,
            0,
        )
        .unwrap();
        assert!(ClusterNet::from_clusters(clusters).is_err());
        assert!(model.forward(&[1.0]).is_err());
    }
}
