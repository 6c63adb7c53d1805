use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binning of one input dimension into `k` consecutive half-open intervals
/// `[a + sum_{j<z} w_j, a + sum_{j<=z} w_j)` covering `[lower, upper)`.
/// A value equal to `upper` lands in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRule {
    pub dimension: usize,
    pub lower: f64,
    pub upper: f64,
    pub widths: Vec<f64>,
}

impl PartitionRule {
    pub fn new(dimension: usize, lower: f64, widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::invalid("a partition needs at least one bin"));
        }
        if let Some(w) = widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!(
                "bin widths must be positive, got {w}"
            )));
        }
        if !lower.is_finite() {
            return Err(Error::invalid("partition lower bound must be finite"));
        }
        let upper = lower + widths.iter().sum::<f64>();
        Ok(Self {
            dimension,
            lower,
            upper,
            widths,
        })
    }

    pub fn k(&self) -> usize {
        self.widths.len()
    }

    /// The `k + 1` bin boundaries, starting at `lower` and ending at `upper`.
    pub fn edges(&self) -> Vec<f64> {
        let mut edges = Vec::with_capacity(self.widths.len() + 1);
        let mut acc = self.lower;
        edges.push(acc);
        for w in &self.widths {
            acc += w;
            edges.push(acc);
        }
        // keep the closing edge identical to `upper`
        *edges.last_mut().unwrap() = self.upper;
        edges
    }

    /// Bin of `value`. Values below `lower` clamp to bin 0, values at or above
    /// `upper` to the last bin.
    pub fn label_of(&self, value: f64) -> usize {
        let edges = self.edges();
        edges[1..]
            .iter()
            .position(|&right| value < right)
            .unwrap_or(self.k() - 1)
    }
}

/// Labels each row by the bin its `dimension` value falls in.
///
/// Without explicit `widths` the dimension's observed range `[min, max]` is
/// cut into `k` equal bins. With widths, bins start at the observed minimum
/// and must reach at least the observed maximum.
pub fn partition_by_dimension(
    data: ArrayView2<f64>,
    dimension: usize,
    k: usize,
    widths: Option<&[f64]>,
) -> Result<(PartitionRule, Vec<usize>)> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if data.nrows() == 0 {
        return Err(Error::invalid("cannot partition an empty dataset"));
    }
    if dimension >= data.ncols() {
        return Err(Error::invalid(format!(
            "dimension {dimension} out of range for {} columns",
            data.ncols()
        )));
    }
    let column = data.column(dimension);
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "dimension {dimension} holds non-finite values"
        )));
    }
    let min = column.fold(f64::INFINITY, |m, &v| m.min(v));
    let max = column.fold(f64::NEG_INFINITY, |m, &v| m.max(v));

    let rule = match widths {
        Some(w) => {
            if w.len() != k {
                return Err(Error::invalid(format!(
                    "{} widths given for k = {k}",
                    w.len()
                )));
            }
            let rule = PartitionRule::new(dimension, min, w.to_vec())?;
            let span = max - min;
            if rule.upper - rule.lower < span - 1e-9 * span.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "widths sum to {} but dimension {dimension} spans {span}",
                    rule.upper - rule.lower
                )));
            }
            rule
        }
        None => {
            if k > 1 && max == min {
                return Err(Error::DegenerateDimension { dimension, k });
            }
            if k == 1 && max == min {
                PartitionRule::new(dimension, min, vec![1.0])?
            } else {
                let width = (max - min) / k as f64;
                let mut rule = PartitionRule::new(dimension, min, vec![width; k])?;
                rule.upper = max;
                rule
            }
        }
    };
    let labels = column.iter().map(|&v| rule.label_of(v)).collect();
    Ok((rule, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn column(values: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    #[test]
    fn hand_binning_with_widths() {
        let data = column(&[0.0, 1.0, 2.0, 3.0]);
        let (rule, labels) = partition_by_dimension(data.view(), 0, 2, Some(&[2.0, 2.0])).unwrap();
        assert_eq!(labels, vec![0, 0, 1, 1]);
        assert_eq!(rule.edges(), vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn single_bin_labels_everything_zero() {
        let data = column(&[0.3, -1.0, 7.0]);
        let (_, labels) = partition_by_dimension(data.view(), 0, 1, None).unwrap();
        assert_eq!(labels, vec![0, 0, 0]);
        let constant = column(&[2.0, 2.0]);
        let (_, labels) = partition_by_dimension(constant.view(), 0, 1, None).unwrap();
        assert_eq!(labels, vec![0, 0]);
    }

    #[test]
    fn maximum_goes_to_last_bin() {
        let data = column(&[0.0, 0.5, 1.0]);
        let (_, labels) = partition_by_dimension(data.view(), 0, 2, None).unwrap();
        assert_eq!(labels, vec![0, 1, 1]);
    }

    #[test]
    fn constant_dimension_is_degenerate() {
        let data = column(&[1.0, 1.0, 1.0]);
        let err = partition_by_dimension(data.view(), 0, 3, None).unwrap_err();
        assert!(matches!(
            err,
            Error::DegenerateDimension { dimension: 0, k: 3 }
        ));
    }

    #[test]
    fn widths_must_cover_span() {
        let data = column(&[0.0, 5.0]);
        assert!(partition_by_dimension(data.view(), 0, 2, Some(&[1.0, 1.0])).is_err());
        assert!(partition_by_dimension(data.view(), 0, 2, Some(&[1.0, -6.0])).is_err());
        assert!(partition_by_dimension(data.view(), 0, 3, Some(&[2.5, 2.5])).is_err());
    }

    #[test]
    fn bad_arguments() {
        let data = column(&[0.0, 5.0]);
        assert!(partition_by_dimension(data.view(), 1, 2, None).is_err());
        assert!(partition_by_dimension(data.view(), 0, 0, None).is_err());
    }
}
