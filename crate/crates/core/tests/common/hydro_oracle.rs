//! References for the hydrodynamics tests: state setters, exact wave
//! averages, shock location and the dense diffusion matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use taskgrid::hydro::{Hydro, HydroConfig};
use taskgrid::reduce::Partial;
use taskgrid::runtime::{Runtime, TaskSpec};

/// Overwrites the conserved state with `f(global cell)`.
pub fn set_state(rt: &mut Runtime, hydro: &Hydro, f: impl Fn([usize; 3]) -> Vec<f64> + Send + Sync + 'static) {
    let h = hydro.u.clone();
    rt.submit(
        TaskSpec::new("set", move |ctx| {
            let mut v = ctx.view_mut(&h)?;
            ctx.for_each_cell(&mut v, |c, out| out.copy_from_slice(&f(c.global)));
            Ok(Partial::None)
        })
        .read_write(&hydro.u),
    )
    .unwrap();
}

/// Exact cell average of the advected wave at time `t`.
pub fn wave_average(cfg: &HydroConfig, i: usize, n: usize, t: f64) -> f64 {
    let h = 1.0 / n as f64;
    let shift = cfg.velocity[0] * t;
    let (a, b) = (i as f64 * h - shift, (i + 1) as f64 * h - shift);
    1.0 + cfg.amplitude * ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI * h)
}

pub fn shock_position(rho: &[f64], nx: usize, mid: f64) -> f64 {
    let i = (0..nx - 1).rev().find(|&i| rho[i] > mid).expect("shock inside the box");
    let frac = (rho[i] - mid) / (rho[i] - rho[i + 1]);
    (i as f64 + 0.5 + frac) / nx as f64
}

pub fn limiter(r: f64) -> f64 {
    (2.0 + r) / (6.0 + 3.0 * r + r * r)
}

/// Dense backward-Euler matrix for the gathered state, assembled from the
/// closure formulas directly. `periodic[a]` selects wrap vs zero flux.
pub fn dense_diffusion(
    u: &[f64],
    n: [usize; 3],
    dims: usize,
    periodic: [bool; 3],
    cfg: &HydroConfig,
    dt: f64,
    flux_limited: bool,
) -> (DMatrix<f64>, DVector<f64>) {
    let nc = dims + 3;
    let cells = n[0] * n[1] * n[2];
    let idx = |g: [usize; 3]| g[0] + n[0] * (g[1] + n[1] * g[2]);
    let mut a = DMatrix::identity(cells, cells);
    let mut b = DVector::zeros(cells);
    for k in 0..cells {
        let g = [k % n[0], (k / n[0]) % n[1], k / (n[0] * n[1])];
        b[k] = u[k * nc + nc - 1];
        for axis in 0..dims {
            let h = 1.0 / n[axis] as f64;
            for step in [-1i64, 1] {
                let mut nb = g;
                let c = g[axis] as i64 + step;
                if c < 0 || c >= n[axis] as i64 {
                    if !periodic[axis] {
                        continue;
                    }
                    nb[axis] = c.rem_euclid(n[axis] as i64) as usize;
                } else {
                    nb[axis] = c as usize;
                }
                let j = idx(nb);
                let rho = 0.5 * (u[k * nc] + u[j * nc]);
                let e = 0.5 * (u[k * nc + nc - 1] + u[j * nc + nc - 1]);
                let grad = (u[j * nc + nc - 1] - u[k * nc + nc - 1]).abs() / h;
                let r = grad / (cfg.opacity * rho * e);
                let lam = if flux_limited { limiter(r) } else { 1.0 / 3.0 };
                let w = dt * cfg.light_speed * lam / (cfg.opacity * rho) / (h * h);
                a[(k, k)] += w;
                a[(k, j)] -= w;
            }
        }
    }
    (a, b)
}
