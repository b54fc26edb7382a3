//! Gray flux-limited radiation diffusion: backward-Euler operator assembly
//! and the Jacobi solve.
//!
//! The operator field stores, per cell, `[b, diag, o_lo0, o_hi0, o_lo1, ..]`
//! where `o_*` are the off-diagonal matrix entries coupling the cell to its
//! low and high neighbor along each axis.

use std::fmt::Debug;
use std::sync::Arc;

use super::eos::Layout;
use super::HydroError;
use crate::reduce::Partial;
use crate::registry::Registry;
use crate::runtime::{FieldHandle, TaskSpec};
use crate::topology::{LocalBlock, Side, MAX_DIMS};

/// Components of the operator field for `dims` axes.
pub fn operator_components(dims: usize) -> usize {
    2 + 2 * dims
}

/// Maps the radiation parameter `R` to the limiter `λ(R)`.
pub trait DiffusionClosure: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn limiter(&self, r: f64) -> f64;
}

/// Rational Levermore-Pomraning limiter `(2+R)/(6+3R+R²)`.
#[derive(Debug, Default)]
pub struct FluxLimited;

impl DiffusionClosure for FluxLimited {
    fn name(&self) -> &'static str {
        "flux_limited"
    }

    fn limiter(&self, r: f64) -> f64 {
        (2.0 + r) / (6.0 + 3.0 * r + r * r)
    }
}

/// Classical diffusion, `λ = 1/3` everywhere.
#[derive(Debug, Default)]
pub struct ConstantClosure;

impl DiffusionClosure for ConstantClosure {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn limiter(&self, _r: f64) -> f64 {
        1.0 / 3.0
    }
}

pub type ClosureFactory = fn() -> Arc<dyn DiffusionClosure>;

pub fn closure_registry() -> Registry<ClosureFactory> {
    let mut r: Registry<ClosureFactory> = Registry::new("diffusion closure");
    r.register_with_aliases(
        "flux_limited",
        &["levermore_pomraning", "lp"],
        "rational flux limiter (2+R)/(6+3R+R^2)",
        || Arc::new(FluxLimited),
    );
    r.register_with_aliases("constant", &["eddington"], "lambda = 1/3", || Arc::new(ConstantClosure));
    r
}

/// Physical constants of the diffusion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationParams {
    pub light_speed: f64,
    pub opacity: f64,
}

/// Face diffusion coefficient `D = c·λ(R)/(κρ)` between two cells, with
/// face density and energy taken as the arithmetic means. Symmetric in its
/// two cells, bit for bit.
pub fn face_coefficient(
    closure: &dyn DiffusionClosure,
    params: RadiationParams,
    rho: (f64, f64),
    e: (f64, f64),
    dx: f64,
) -> f64 {
    let rho_f = 0.5 * (rho.0 + rho.1);
    let e_f = 0.5 * (e.0 + e.1);
    let kr = params.opacity * rho_f;
    let r = if e_f > 0.0 {
        (e.1 - e.0).abs() / dx / (kr * e_f)
    } else {
        0.0
    };
    params.light_speed * closure.limiter(r) / kr
}

/// Fills the operator and initial guess for one block. `u` carries current
/// ghosts across rank faces; physical boundaries are zero-flux.
#[allow(clippy::too_many_arguments)]
pub fn assemble_block(
    layout: Layout,
    closure: &dyn DiffusionClosure,
    params: RadiationParams,
    dx: &[f64; MAX_DIMS],
    dt: f64,
    u_block: &LocalBlock,
    u: &[f64],
    op_block: &LocalBlock,
    op: &mut [f64],
    x: &mut [f64],
) {
    let nc = layout.ncomp();
    let rad = layout.rad().expect("radiation component");
    let no = operator_components(layout.dims);
    for cell in op_block.owned_cells() {
        let here = u_block.offset(cell.local) * nc;
        let (rho, e) = (u[here], u[here + rad]);
        let o = cell.offset * no;
        let mut diag = 1.0;
        for axis in 0..layout.dims {
            for (s, side) in Side::BOTH.into_iter().enumerate() {
                let mut nb = cell.local;
                nb[axis] += if side == Side::Low { -1 } else { 1 };
                let edge = nb[axis] < 0 || nb[axis] >= op_block.owned_extent(axis) as isize;
                let coupling = if edge && op_block.is_boundary(axis, side) {
                    0.0
                } else {
                    let there = u_block.offset(nb) * nc;
                    let (pair_rho, pair_e) = if side == Side::Low {
                        ((u[there], rho), (u[there + rad], e))
                    } else {
                        ((rho, u[there]), (e, u[there + rad]))
                    };
                    dt * face_coefficient(closure, params, pair_rho, pair_e, dx[axis]) / (dx[axis] * dx[axis])
                };
                diag += coupling;
                op[o + 2 + 2 * axis + s] = -coupling;
            }
        }
        op[o] = e;
        op[o + 1] = diag;
        x[cell.offset] = e;
    }
}

/// Task that solves `A x = b` by Jacobi iteration, exchanging the ghosts
/// of `x` before every sweep. Resolves to the iteration count (as a max).
///
/// Stops once `‖b − A x‖ ≤ tol·‖b‖`; fails after `max_iters` sweeps.
pub fn jacobi_spec(
    label: impl Into<String>,
    x: &FieldHandle,
    op: &FieldHandle,
    dims: usize,
    tol: f64,
    max_iters: usize,
) -> TaskSpec {
    let (xh, oh) = (x.clone(), op.clone());
    let no = operator_components(dims);
    TaskSpec::new(label, move |ctx| {
        let mut xv = ctx.view_mut(&xh)?;
        let ov = ctx.view(&oh)?;
        let block = xv.block();
        let mut next = Vec::with_capacity(block.owned_count());
        let mut iterations = 0usize;
        loop {
            ctx.exchange(&mut xv)?;
            let xs = xv.values();
            let ops = ov.values();
            let apply = |cell: &crate::topology::Cell| {
                let o = &ops[cell.offset * no..(cell.offset + 1) * no];
                let mut off_sum = 0.0;
                for axis in 0..dims {
                    for (s, step) in [-1isize, 1].into_iter().enumerate() {
                        let mut nb = cell.local;
                        nb[axis] += step;
                        let c = o[2 + 2 * axis + s];
                        if c != 0.0 {
                            off_sum += c * xs[block.offset(nb)];
                        }
                    }
                }
                (o[0], o[1], off_sum)
            };
            let sums = ctx.sum_cells_vec(block, 2, |cell, out| {
                let (b, diag, off) = apply(&cell);
                let r = b - diag * xs[cell.offset] - off;
                out[0] = r * r;
                out[1] = b * b;
            });
            let total = ctx.allreduce(Partial::SumVec(sums))?;
            let [r2, b2] = match &total {
                Partial::SumVec(v) => [v[0].value(), v[1].value()],
                _ => unreachable!("sum_vec allreduce"),
            };
            if r2 <= tol * tol * b2 {
                break;
            }
            if iterations >= max_iters {
                return Err(Box::new(HydroError::JacobiDiverged {
                    iterations,
                    residual: (r2 / b2).sqrt(),
                }));
            }
            next.clear();
            next.extend(block.owned_cells().map(|cell| {
                let (b, diag, off) = apply(&cell);
                (b - off) / diag
            }));
            let values = xv.values_mut();
            for (cell, v) in block.owned_cells().zip(&next) {
                values[cell.offset] = *v;
            }
            iterations += 1;
        }
        Ok(Partial::Max(iterations as f64))
    })
    .read_write(x)
    .read_owned(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiter_values() {
        assert_eq!(FluxLimited.limiter(0.0), 1.0 / 3.0);
        // free-streaming limit: λR → 1
        let r = 1e8;
        assert!((FluxLimited.limiter(r) * r - 1.0).abs() < 1e-7);
        assert_eq!(ConstantClosure.limiter(5.0), 1.0 / 3.0);
    }

    #[test]
    fn face_coefficient_is_symmetric() {
        let p = RadiationParams {
            light_speed: 2.0,
            opacity: 3.0,
        };
        let a = face_coefficient(&FluxLimited, p, (1.3, 0.7), (0.2, 1.9), 0.1);
        let b = face_coefficient(&FluxLimited, p, (0.7, 1.3), (1.9, 0.2), 0.1);
        assert_eq!(a.to_bits(), b.to_bits());
        let flat = face_coefficient(&FluxLimited, p, (1.0, 1.0), (1.0, 1.0), 0.1);
        assert_eq!(flat, 2.0 / 3.0 / 3.0);
    }
}
