use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Region key that selects every row.
pub const ALL_ROWS: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mse: f64,
    pub mae: f64,
    /// Rows the statistics cover.
    pub count: usize,
}

/// MSE and MAE over every entry of `pred - target`.
pub fn error_stats(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<ErrorStats> {
    if pred.dim() != target.dim() {
        return Err(Error::invalid(format!(
            "predictions {:?} and targets {:?} differ in shape",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no rows to evaluate"));
    }
    let (mut sq, mut abs) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        sq += d * d;
        abs += d.abs();
    }
    let n = pred.len() as f64;
    Ok(ErrorStats {
        mse: sq / n,
        mae: abs / n,
        count: pred.nrows(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Comparison {
    fn symbol(self) -> &'static str {
        match self {
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
        }
    }

    fn holds(self, v: f64, threshold: f64) -> bool {
        match self {
            Comparison::Gt => v > threshold,
            Comparison::Ge => v >= threshold,
            Comparison::Lt => v < threshold,
            Comparison::Le => v <= threshold,
        }
    }
}

/// Threshold test on one raw target column, written like `u > 3.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegionPredicate {
    pub column: String,
    pub op: Comparison,
    pub threshold: f64,
}

impl RegionPredicate {
    /// Rows of `raw_targets` that satisfy the predicate.
    pub fn mask(&self, raw_targets: ArrayView2<f64>, target_names: &[String]) -> Result<Vec<bool>> {
        let j = target_names
            .iter()
            .position(|n| *n == self.column)
            .ok_or_else(|| {
                Error::Config(format!("region refers to unknown target `{}`", self.column))
            })?;
        Ok(raw_targets
            .column(j)
            .iter()
            .map(|&v| self.op.holds(v, self.threshold))
            .collect())
    }
}

impl fmt::Display for RegionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.column, self.op.symbol(), self.threshold)
    }
}

impl FromStr for RegionPredicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad region `{s}`, expected e.g. `u > 3.5`"));
        let pos = s.find(['<', '>']).ok_or_else(bad)?;
        let rest = &s[pos..];
        let (op, len) = if rest.starts_with(">=") {
            (Comparison::Ge, 2)
        } else if rest.starts_with("<=") {
            (Comparison::Le, 2)
        } else if rest.starts_with('>') {
            (Comparison::Gt, 1)
        } else {
            (Comparison::Lt, 1)
        };
        let column = s[..pos].trim();
        if column.is_empty() {
            return Err(bad());
        }
        let threshold: f64 = rest[len..].trim().parse().map_err(|_| bad())?;
        if !threshold.is_finite() {
            return Err(bad());
        }
        Ok(Self {
            column: column.to_string(),
            op,
            threshold,
        })
    }
}

impl TryFrom<String> for RegionPredicate {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RegionPredicate> for String {
    fn from(p: RegionPredicate) -> String {
        p.to_string()
    }
}

/// A named row subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub mask: Vec<bool>,
}

/// Statistics over all rows (key [`ALL_ROWS`]) and over each region.
/// Regions that select no rows are left out.
pub fn compute_metrics(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    regions: &[Region],
) -> Result<BTreeMap<String, ErrorStats>> {
    let mut out = BTreeMap::new();
    out.insert(ALL_ROWS.to_string(), error_stats(pred, target)?);
    for region in regions {
        if region.mask.len() != pred.nrows() {
            return Err(Error::invalid(format!(
                "region `{}` has {} flags for {} rows",
                region.name,
                region.mask.len(),
                pred.nrows()
            )));
        }
        let rows: Vec<usize> = (0..pred.nrows()).filter(|&i| region.mask[i]).collect();
        if rows.is_empty() {
            continue;
        }
        let p = pred.select(ndarray::Axis(0), &rows);
        let t = target.select(ndarray::Axis(0), &rows);
        out.insert(region.name.clone(), error_stats(p.view(), t.view())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricScale {
    #[default]
    Normalized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverges { iteration: usize },
}

/// Metrics keyed `metric -> split -> region -> value`.
///
/// ```json
/// {
///   "status": { "state": "ok" },
///   "scale": "normalized",
///   "metrics": { "mse": { "test": { "all": 1.2e-4, "u>3.5": 8.0e-4 } }, "mae": {}, "count": {} },
///   "extra": { "val_context_loss": 0.01 }
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub status: RunStatus,
    pub scale: MetricScale,
    pub metrics: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

impl MetricsReport {
    pub fn new(scale: MetricScale) -> Self {
        Self {
            status: RunStatus::Ok,
            scale,
            metrics: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn diverged(iteration: usize) -> Self {
        Self {
            status: RunStatus::Diverges { iteration },
            ..Self::new(MetricScale::Normalized)
        }
    }

    pub fn insert_split(&mut self, split: &str, stats: &BTreeMap<String, ErrorStats>) {
        for (region, s) in stats {
            for (metric, value) in [("mse", s.mse), ("mae", s.mae), ("count", s.count as f64)] {
                self.metrics
                    .entry(metric.to_string())
                    .or_default()
                    .entry(split.to_string())
                    .or_default()
                    .insert(region.clone(), value);
            }
        }
    }

    pub fn get(&self, metric: &str, split: &str, region: &str) -> Option<f64> {
        self.metrics.get(metric)?.get(split)?.get(region).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
