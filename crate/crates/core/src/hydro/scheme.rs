//! Block kernels of the advective scheme. They operate on one rank's local
//! storage (halo included, components interleaved).

use super::eos::{IdealGas, Layout, Violation};
use super::riemann::RiemannSolver;
use super::weno::{weno5z, weno5z_left_face};
use super::{Boundary, HydroError};
use crate::topology::{LocalBlock, Side, MAX_DIMS};

/// Ghost depth the reconstruction needs.
pub const STENCIL_HALO: usize = 3;

const MAX_COMP: usize = 6;

fn invalid(block: &LocalBlock, local: [isize; MAX_DIMS], stage: &'static str, v: Violation) -> HydroError {
    HydroError::InvalidState {
        stage,
        cell: block.local_to_global(local),
        violation: v,
    }
}

fn admissible(layout: Layout, q: &[f64]) -> bool {
    q[0] > 0.0 && q[layout.energy()] > 0.0 && layout.rad().is_none_or(|r| q[r] >= 0.0)
}

/// `L(U) = −Σ_axes (F_{i+½} − F_{i−½}) / dx` on the owned cells of `out`.
///
/// Needs current ghosts on `u` along every used axis. Reconstructed states
/// that come out non-physical fall back to the adjacent cell value.
pub fn advective_rhs(
    block: &LocalBlock,
    layout: Layout,
    eos: &IdealGas,
    solver: &dyn RiemannSolver,
    dx: &[f64; MAX_DIMS],
    u: &[f64],
    out: &mut [f64],
) -> Result<(), HydroError> {
    let nc = layout.ncomp();
    for cell in block.owned_cells() {
        out[cell.offset * nc..cell.offset * nc + nc].fill(0.0);
    }
    let h = STENCIL_HALO;
    let mut prim = Vec::new();
    let mut flux = Vec::new();
    for axis in 0..layout.dims {
        let n = block.owned_extent(axis);
        let stride = block.stride(axis);
        let (a1, a2) = ((axis + 1) % MAX_DIMS, (axis + 2) % MAX_DIMS);
        prim.resize((n + 2 * h) * nc, 0.0);
        flux.resize((n + 1) * nc, 0.0);
        for j2 in 0..block.owned_extent(a2) as isize {
            for j1 in 0..block.owned_extent(a1) as isize {
                let mut local = [0isize; MAX_DIMS];
                local[a1] = j1;
                local[a2] = j2;
                local[axis] = -(h as isize);
                let base = block.offset(local);
                for k in 0..n + 2 * h {
                    let off = (base + k * stride) * nc;
                    eos.to_primitive(layout, &u[off..off + nc], &mut prim[k * nc..(k + 1) * nc])
                        .map_err(|v| {
                            let mut at = local;
                            at[axis] = k as isize - h as isize;
                            invalid(block, at, "reconstruction", v)
                        })?;
                }
                // interface m sits between local cells m-1 and m
                for m in 0..=n {
                    let mut q_l = [0.0; MAX_COMP];
                    let mut q_r = [0.0; MAX_COMP];
                    for c in 0..nc {
                        let s = |k: usize| prim[(m + k) * nc + c];
                        q_l[c] = weno5z([s(0), s(1), s(2), s(3), s(4)]);
                        q_r[c] = weno5z_left_face([s(1), s(2), s(3), s(4), s(5)]);
                    }
                    if !admissible(layout, &q_l) {
                        q_l[..nc].copy_from_slice(&prim[(m + 2) * nc..(m + 3) * nc]);
                    }
                    if !admissible(layout, &q_r) {
                        q_r[..nc].copy_from_slice(&prim[(m + 3) * nc..(m + 4) * nc]);
                    }
                    solver.flux(eos, layout, axis, &q_l[..nc], &q_r[..nc], &mut flux[m * nc..(m + 1) * nc]);
                }
                for i in 0..n {
                    let off = (base + (i + h) * stride) * nc;
                    for c in 0..nc {
                        out[off + c] -= (flux[(i + 1) * nc + c] - flux[i * nc + c]) / dx[axis];
                    }
                }
            }
        }
    }
    Ok(())
}

/// Fills the physical-boundary ghost slabs of `u`.
pub fn apply_boundaries(block: &LocalBlock, layout: Layout, bcs: &[Boundary; MAX_DIMS], u: &mut [f64]) {
    let nc = layout.ncomp();
    for b in block.boundary_ranges() {
        let axis = b.axis;
        let n = block.owned_extent(axis) as isize;
        let kind = bcs[axis];
        for cell in block.slab_cells(axis, b.local.clone()) {
            let g = cell.local[axis];
            let mut src = cell.local;
            src[axis] = match (kind, b.side) {
                (Boundary::Reflecting, Side::Low) => -1 - g,
                (Boundary::Reflecting, Side::High) => 2 * n - 1 - g,
                (_, Side::Low) => 0,
                (_, Side::High) => n - 1,
            };
            let from = block.offset(src) * nc;
            let to = cell.offset * nc;
            u.copy_within(from..from + nc, to);
            if kind == Boundary::Reflecting {
                u[to + layout.momentum(axis)] = -u[to + layout.momentum(axis)];
            }
        }
    }
}

/// `min over owned cells and axes of dx / (|u| + a)`.
pub fn min_crossing_time(
    block: &LocalBlock,
    layout: Layout,
    eos: &IdealGas,
    dx: &[f64; MAX_DIMS],
    u: &[f64],
) -> Result<f64, HydroError> {
    let nc = layout.ncomp();
    let mut q = [0.0; MAX_COMP];
    let mut best = f64::INFINITY;
    for cell in block.owned_cells() {
        let off = cell.offset * nc;
        eos.to_primitive(layout, &u[off..off + nc], &mut q[..nc])
            .map_err(|v| invalid(block, cell.local, "time-step control", v))?;
        let a = eos.sound_speed(q[0], q[layout.energy()]);
        for axis in 0..layout.dims {
            let speed = q[1 + axis].abs() + a;
            if !speed.is_finite() {
                return Err(HydroError::NonFiniteSpeed {
                    cell: block.local_to_global(cell.local),
                });
            }
            best = best.min(dx[axis] / speed);
        }
    }
    Ok(best)
}

/// Checks the state invariants on every owned cell.
pub fn check_state(
    block: &LocalBlock,
    layout: Layout,
    eos: &IdealGas,
    u: &[f64],
    stage: &'static str,
) -> Result<(), HydroError> {
    let nc = layout.ncomp();
    for cell in block.owned_cells() {
        let off = cell.offset * nc;
        eos.check(layout, &u[off..off + nc])
            .map_err(|v| invalid(block, cell.local, stage, v))?;
    }
    Ok(())
}

/// One Heun step of the scalar ODE `y' = f(y)`.
pub fn heun(y: f64, h: f64, f: impl Fn(f64) -> f64) -> f64 {
    let k1 = f(y);
    let k2 = f(y + h * k1);
    y + 0.5 * h * (k1 + k2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_heun_hook() {
        assert_eq!(heun(1.0, 0.1, |y| -y), 0.905);
    }
}
