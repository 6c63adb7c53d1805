//! Burgers' equation dataset `u_t + u u_x = v u_xx` sampled on a uniform
//! `(t, x, v)` grid from the exact viscous traveling-wave solution
//!
//! `u = (uL + uR)/2 - (uL - uR)/2 * tanh((uL - uR)(x - x0 - s t) / (4 v))`,
//! with shock speed `s = (uL + uR)/2`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RawDataset;
use crate::error::{Error, Result};

/// One grid axis, `start, start + step, ..., end` (end inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Axis {
    pub const fn new(start: f64, end: f64, step: f64) -> Self {
        Self { start, end, step }
    }

    pub fn len(&self) -> usize {
        if !(self.step > 0.0) || self.end < self.start {
            return 0;
        }
        ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid values, rounded to 12 decimals so `0.2 * 3` prints as `0.6`.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| ((self.start + self.step * i as f64) * 1e12).round() / 1e12)
            .collect()
    }
}

/// Parameters of the traveling-wave solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TravelingWave {
    pub u_left: f64,
    pub u_right: f64,
    pub shock_offset: f64,
}

impl Default for TravelingWave {
    fn default() -> Self {
        Self {
            u_left: 5.0,
            u_right: 0.0,
            shock_offset: -8.0,
        }
    }
}

impl TravelingWave {
    pub fn speed(&self) -> f64 {
        0.5 * (self.u_left + self.u_right)
    }

    pub fn u(&self, t: f64, x: f64, v: f64) -> f64 {
        let jump = self.u_left - self.u_right;
        let xi = x - self.shock_offset - self.speed() * t;
        self.speed() - 0.5 * jump * (jump * xi / (4.0 * v)).tanh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersConfig {
    pub t: Axis,
    pub x: Axis,
    pub v: Axis,
    pub wave: TravelingWave,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        let axis = Axis::new(0.2, 4.8, 0.2);
        Self {
            t: axis,
            x: axis,
            v: axis,
            wave: TravelingWave::default(),
        }
    }
}

impl BurgersConfig {
    pub fn rows(&self) -> usize {
        self.t.len() * self.x.len() * self.v.len()
    }
}

pub const BURGERS_INPUTS: [&str; 3] = ["t", "x", "v"];
pub const BURGERS_TARGET: &str = "u";

/// Full `(t, x, v) -> u` grid, rows ordered lexicographically with `v` fastest.
pub fn generate_burgers(config: &BurgersConfig) -> Result<RawDataset> {
    let (ts, xs, vs) = (config.t.values(), config.x.values(), config.v.values());
    if ts.is_empty() || xs.is_empty() || vs.is_empty() {
        return Err(Error::invalid(
            "every Burgers grid axis needs at least one value",
        ));
    }
    if let Some(v) = vs.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::invalid(format!(
            "viscosity must be positive, got {v}"
        )));
    }
    let wave = config.wave;
    let rows: Vec<[f64; 4]> = ts
        .par_iter()
        .flat_map_iter(|&t| {
            let vs = &vs;
            xs.iter()
                .flat_map(move |&x| vs.iter().map(move |&v| [t, x, v, wave.u(t, x, v)]))
        })
        .collect();
    let n = rows.len();
    let mut inputs = Array2::zeros((n, 3));
    let mut targets = Array2::zeros((n, 1));
    for (i, r) in rows.iter().enumerate() {
        inputs[[i, 0]] = r[0];
        inputs[[i, 1]] = r[1];
        inputs[[i, 2]] = r[2];
        targets[[i, 0]] = r[3];
    }
    if targets.iter().any(|u: &f64| !u.is_finite()) {
        return Err(Error::Numeric(
            "Burgers generator produced a non-finite value".into(),
        ));
    }
    RawDataset::new(
        BURGERS_INPUTS.iter().map(|s| s.to_string()).collect(),
        vec![BURGERS_TARGET.to_string()],
        inputs,
        targets,
    )
}
