use crate::error::{Error, Result};

/// Probability clipping used by the cross-entropy losses.
pub const PROB_EPS: f64 = 1e-7;

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::invalid("loss of an empty vector"));
    }
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "prediction has length {}, target {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(pred, target)?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

fn check_probs(probs: &[f64], labels: &[f64]) -> Result<()> {
    check_pair(probs, labels)?;
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Categorical cross-entropy `-sum_j p_j ln c_j` of predicted probabilities `c`
/// against a target distribution `p`, with `c` clipped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn cross_entropy_loss(probs: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_probs(probs, target)?;
    let mut loss = 0.0;
    let grad = probs
        .iter()
        .zip(target)
        .map(|(&c, &p)| {
            let c = c.clamp(PROB_EPS, 1.0 - PROB_EPS);
            loss -= p * c.ln();
            -p / c
        })
        .collect();
    Ok((loss, grad))
}

/// Mean of independent binary cross-entropies, one per entry.
pub fn binary_cross_entropy(probs: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_probs(probs, labels)?;
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let grad = probs
        .iter()
        .zip(labels)
        .map(|(&c, &p)| {
            let c = c.clamp(PROB_EPS, 1.0 - PROB_EPS);
            loss -= p * c.ln() + (1.0 - p) * (1.0 - c).ln();
            (-p / c + (1.0 - p) / (1.0 - c)) / n
        })
        .collect();
    Ok((loss / n, grad))
}
