//! Central finite differences over every network parameter.

use super::mlp::{GradientSet, Mlp};
use crate::error::{Error, Result};

/// Estimates dL/dθ for every parameter θ of `net` as `(L(θ+h) - L(θ-h)) / 2h`.
pub fn fd_gradient<F>(mut loss_fn: F, net: &Mlp, h: f64) -> Result<GradientSet>
where
    F: FnMut(&Mlp) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let mut probe = net.clone();
    let mut grads = GradientSet::zeros_like(net);
    for l in 0..net.num_layers() {
        let (rows, cols) = net.weights()[l].dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = probe.weights()[l][[i, j]];
                probe.weights_mut()[l][[i, j]] = orig + h;
                let plus = loss_fn(&probe)?;
                probe.weights_mut()[l][[i, j]] = orig - h;
                let minus = loss_fn(&probe)?;
                probe.weights_mut()[l][[i, j]] = orig;
                grads.weights[l][[i, j]] = (plus - minus) / (2.0 * h);
            }
        }
        for i in 0..net.biases()[l].len() {
            let orig = probe.biases()[l][i];
            probe.biases_mut()[l][i] = orig + h;
            let plus = loss_fn(&probe)?;
            probe.biases_mut()[l][i] = orig - h;
            let minus = loss_fn(&probe)?;
            probe.biases_mut()[l][i] = orig;
            grads.biases[l][i] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}
