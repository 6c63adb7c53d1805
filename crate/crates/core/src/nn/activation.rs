use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Element-wise nonlinearity applied after every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Tanh,
    Relu,
    Sigmoid,
}

/// Nonlinearity applied to the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
    Softmax,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl HiddenActivation {
    pub(crate) fn apply(self, z: &mut Array2<f64>) {
        match self {
            HiddenActivation::Tanh => z.mapv_inplace(f64::tanh),
            HiddenActivation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            HiddenActivation::Sigmoid => z.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activated value `a`.
    pub(crate) fn backprop(self, a: ArrayView2<f64>, grad: &mut Array2<f64>) {
        match self {
            HiddenActivation::Tanh => Zip::from(grad).and(a).for_each(|g, &a| *g *= 1.0 - a * a),
            HiddenActivation::Relu => Zip::from(grad).and(a).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            HiddenActivation::Sigmoid => {
                Zip::from(grad).and(a).for_each(|g, &a| *g *= a * (1.0 - a))
            }
        }
    }
}

impl OutputActivation {
    pub(crate) fn apply(self, z: &mut Array2<f64>) {
        match self {
            OutputActivation::Identity => {}
            OutputActivation::Sigmoid => z.mapv_inplace(sigmoid),
            OutputActivation::Softmax => {
                for mut row in z.axis_iter_mut(Axis(0)) {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }

    pub(crate) fn backprop(self, a: ArrayView2<f64>, grad: &mut Array2<f64>) {
        match self {
            OutputActivation::Identity => {}
            OutputActivation::Sigmoid => {
                Zip::from(grad).and(a).for_each(|g, &a| *g *= a * (1.0 - a))
            }
            OutputActivation::Softmax => {
                // J^T g = s * (g - <g, s>)
                for (mut g, s) in grad.axis_iter_mut(Axis(0)).zip(a.axis_iter(Axis(0))) {
                    let dot = g.dot(&s);
                    Zip::from(&mut g)
                        .and(&s)
                        .for_each(|g, &s| *g = s * (*g - dot));
                }
            }
        }
    }
}

impl fmt::Display for HiddenActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HiddenActivation::Tanh => "tanh",
            HiddenActivation::Relu => "relu",
            HiddenActivation::Sigmoid => "sigmoid",
        })
    }
}

impl fmt::Display for OutputActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputActivation::Identity => "identity",
            OutputActivation::Sigmoid => "sigmoid",
            OutputActivation::Softmax => "softmax",
        })
    }
}

impl FromStr for HiddenActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(HiddenActivation::Tanh),
            "relu" => Ok(HiddenActivation::Relu),
            "sigmoid" => Ok(HiddenActivation::Sigmoid),
            other => Err(Error::invalid(format!(
                "unknown hidden activation `{other}`"
            ))),
        }
    }
}

impl FromStr for OutputActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(OutputActivation::Identity),
            "sigmoid" => Ok(OutputActivation::Sigmoid),
            "softmax" => Ok(OutputActivation::Softmax),
            other => Err(Error::invalid(format!(
                "unknown output activation `{other}`"
            ))),
        }
    }
}
