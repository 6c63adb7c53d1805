use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::mlp::{GradientSet, Mlp};
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// Update rule applied by [`OptimizerState::step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Plain descent, `theta -= lr * grad`.
    Sgd,
    /// First/second-moment adaptive descent with bias correction.
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::adam()
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

/// Learning rate plus per-tensor accumulators for one network.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    learning_rate: f64,
    kind: OptimizerKind,
    steps: u64,
    moments: Option<Moments>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, kind: OptimizerKind) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            learning_rate,
            kind,
            steps: 0,
            moments: None,
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(learning_rate, OptimizerKind::Sgd)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Moves every parameter of `net` against its gradient.
    pub fn step(&mut self, net: &mut Mlp, grads: &GradientSet) -> Result<()> {
        if !grads.is_congruent(net) {
            return Err(Error::invalid("gradient shapes do not match the network"));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in net.weights_mut().iter_mut().zip(&grads.weights) {
                    w.scaled_add(-lr, g);
                }
                for (b, g) in net.biases_mut().iter_mut().zip(&grads.biases) {
                    b.scaled_add(-lr, g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let moments = self.moments.get_or_insert_with(|| Moments {
                    m_w: grads
                        .weights
                        .iter()
                        .map(|g| Array2::zeros(g.dim()))
                        .collect(),
                    v_w: grads
                        .weights
                        .iter()
                        .map(|g| Array2::zeros(g.dim()))
                        .collect(),
                    m_b: grads
                        .biases
                        .iter()
                        .map(|g| Array1::zeros(g.len()))
                        .collect(),
                    v_b: grads
                        .biases
                        .iter()
                        .map(|g| Array1::zeros(g.len()))
                        .collect(),
                });
                let t = (self.steps + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                };
                for (l, w) in net.weights_mut().iter_mut().enumerate() {
                    Zip::from(w)
                        .and(&mut moments.m_w[l])
                        .and(&mut moments.v_w[l])
                        .and(&grads.weights[l])
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                }
                for (l, b) in net.biases_mut().iter_mut().enumerate() {
                    Zip::from(b)
                        .and(&mut moments.m_b[l])
                        .and(&mut moments.v_b[l])
                        .and(&grads.biases[l])
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                }
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// One descent step, `theta <- theta - lr * grad`, through `opt`'s update rule.
pub fn sgd_step(net: &mut Mlp, grads: &GradientSet, opt: &mut OptimizerState) -> Result<()> {
    opt.step(net, grads)
}
