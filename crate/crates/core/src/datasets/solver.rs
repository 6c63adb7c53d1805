//! Finite-difference Burgers solver, used to cross-check the analytic generator.
//!
//! Each step splits the equation: a conservative first-order upwind
//! (Engquist-Osher) update for `(u^2/2)_x`, then a Crank-Nicolson step for
//! `v u_xx`. Both ends are Dirichlet, held at the initial endpoint values.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Maximum `|u| dt / dx` used when choosing the time step.
pub const DEFAULT_CFL: f64 = 0.5;

/// Allowed growth of `max |u|` over its initial value before the run is
/// declared unstable. The continuous solution obeys a maximum principle.
const GROWTH_BOUND: f64 = 1.05;

/// Solves on the uniform grid `x_grid`, starting from `initial` at `times[0]`
/// and returning one row per entry of `times`.
pub fn solve_burgers_numerical(
    initial: &[f64],
    viscosity: f64,
    x_grid: &[f64],
    times: &[f64],
    cfl: f64,
) -> Result<Array2<f64>> {
    let n = x_grid.len();
    if n < 3 || initial.len() != n {
        return Err(Error::invalid(format!(
            "need at least 3 grid points and a matching initial condition, got {n} and {}",
            initial.len()
        )));
    }
    if !(viscosity >= 0.0) || !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::invalid(format!(
            "viscosity {viscosity} / cfl {cfl} out of range"
        )));
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "output times must be non-empty and ascending",
        ));
    }
    let dx = (x_grid[n - 1] - x_grid[0]) / (n - 1) as f64;
    if !(dx > 0.0)
        || x_grid
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.max(1.0))
    {
        return Err(Error::invalid("x grid must be uniform and increasing"));
    }

    let bound = initial.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let mut u = initial.to_vec();
    let mut out = Array2::zeros((times.len(), n));
    out.row_mut(0).assign(&ndarray::ArrayView1::from(&u[..]));
    let (left, right) = (u[0], u[n - 1]);

    let mut flux = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut t = times[0];
    for (k, &target) in times.iter().enumerate().skip(1) {
        while t < target - 1e-12 {
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dt = if umax > 0.0 {
                (cfl * dx / umax).min(target - t)
            } else {
                target - t
            };

            for i in 0..n - 1 {
                let a = u[i].max(0.0);
                let b = u[i + 1].min(0.0);
                flux[i] = 0.5 * (a * a + b * b);
            }
            scratch.copy_from_slice(&u);
            for i in 1..n - 1 {
                scratch[i] = u[i] - dt / dx * (flux[i] - flux[i - 1]);
            }

            let r = viscosity * dt / (dx * dx);
            rhs[0] = left;
            rhs[n - 1] = right;
            for i in 1..n - 1 {
                rhs[i] =
                    scratch[i] + 0.5 * r * (scratch[i + 1] - 2.0 * scratch[i] + scratch[i - 1]);
            }
            crank_nicolson_solve(r, &rhs, &mut u);

            t += dt;
            let now = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !now.is_finite() || now > GROWTH_BOUND * bound + 1e-12 {
                return Err(Error::Numeric(format!(
                    "Burgers solver unstable at t = {t}: max |u| = {now}, initial {bound}"
                )));
            }
        }
        out.row_mut(k).assign(&ndarray::ArrayView1::from(&u[..]));
    }
    Ok(out)
}

/// Thomas solve of `(I - r/2 L) u = rhs` with identity rows at both ends.
fn crank_nicolson_solve(r: f64, rhs: &[f64], u: &mut [f64]) {
    let n = rhs.len();
    let off = -0.5 * r;
    let diag = 1.0 + r;
    // forward sweep; row 0 is [1, 0]
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = 0.0;
    d_prime[0] = rhs[0];
    for i in 1..n - 1 {
        let m = diag - off * c_prime[i - 1];
        c_prime[i] = off / m;
        d_prime[i] = (rhs[i] - off * d_prime[i - 1]) / m;
    }
    d_prime[n - 1] = rhs[n - 1];
    u[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = d_prime[i] - c_prime[i] * u[i + 1];
    }
}
