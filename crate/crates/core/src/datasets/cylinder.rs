//! Synthetic stand-in for a CFD cylinder-surface table.
//!
//! 400 surface points of a cylinder centered at `(0.55, 0)` with radius 0.45,
//! times Mach numbers `0.10, 0.11, ..., 0.24`, for 6000 rows total. Pressure
//! follows inviscid theory on the windward half (Prandtl-Glauert corrected),
//! recovers linearly to a base pressure on the leeward half, and friction
//! vanishes at both stagnation points. It exercises the pipeline with the
//! right schema and a scarce large-`Cp` region; it is not a flow solution.

use std::f64::consts::PI;

use ndarray::Array2;

use super::RawDataset;
use crate::error::Result;

const CENTER_X: f64 = 0.55;
const RADIUS: f64 = 0.45;
const SURFACE_POINTS: usize = 400;
const P_INF: f64 = 101_325.0;
const GAMMA: f64 = 1.4;

fn pressure_coefficient(phi: f64, mach: f64) -> f64 {
    // phi: angle from the windward stagnation point, in [0, pi]
    let incompressible = if phi <= 0.5 * PI {
        1.0 - 4.0 * phi.sin().powi(2)
    } else {
        -3.0 + 1.8 * (phi - 0.5 * PI) / (0.5 * PI)
    };
    incompressible / (1.0 - mach * mach).sqrt()
}

fn wall_shear(phi: f64, mach: f64) -> f64 {
    let cf = 0.02 * (1.0 + mach);
    if phi <= 0.5 * PI {
        cf * (2.0 * phi).sin()
    } else {
        0.05 * cf * (2.0 * phi).sin().abs()
    }
}

pub fn synthetic_cylinder_table() -> Result<RawDataset> {
    let machs: Vec<f64> = (10..=24).map(|m| m as f64 / 100.0).collect();
    let n = SURFACE_POINTS * machs.len();
    let mut inputs = Array2::zeros((n, 3));
    let mut targets = Array2::zeros((n, 4));
    let mut r = 0;
    for k in 0..SURFACE_POINTS {
        // theta = pi is the windward point x = 0.1
        let theta = 2.0 * PI * (k as f64 + 0.5) / SURFACE_POINTS as f64;
        let x = CENTER_X + RADIUS * theta.cos();
        let y = RADIUS * theta.sin();
        let phi = (PI - theta).abs();
        for &mach in &machs {
            let cp = pressure_coefficient(phi, mach);
            let p = P_INF * (1.0 + 0.5 * GAMMA * mach * mach * cp);
            let tau = wall_shear(phi, mach);
            inputs.row_mut(r).assign(&ndarray::arr1(&[x, y, mach]));
            targets.row_mut(r).assign(&ndarray::arr1(&[
                p,
                cp,
                tau * phi.sin(),
                tau * phi.cos() * y.signum(),
            ]));
            r += 1;
        }
    }
    RawDataset::new(
        vec!["x".into(), "y".into(), "Ma".into()],
        vec!["P".into(), "Cp".into(), "Fx".into(), "Fy".into()],
        inputs,
        targets,
    )
}
