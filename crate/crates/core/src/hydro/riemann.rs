//! Interface flux solvers and the physical Euler flux.

use std::fmt::Debug;
use std::sync::Arc;

use super::eos::{IdealGas, Layout};
use crate::registry::Registry;

/// Physical flux along `axis` of primitive state `q` (conserved `u`).
pub fn physical_flux(layout: Layout, axis: usize, q: &[f64], u: &[f64], out: &mut [f64]) {
    let vn = q[1 + axis];
    let e = layout.energy();
    let p = q[e];
    out[0] = u[0] * vn;
    for k in 0..layout.dims {
        out[1 + k] = u[1 + k] * vn;
    }
    out[1 + axis] += p;
    out[e] = (u[e] + p) * vn;
    if let Some(r) = layout.rad() {
        out[r] = u[r] * vn;
    }
}

/// `½(F_L + F_R) − ½ α (U_R − U_L)`.
pub fn lax_friedrichs(f_l: f64, f_r: f64, u_l: f64, u_r: f64, alpha: f64) -> f64 {
    0.5 * (f_l + f_r) - 0.5 * alpha * (u_r - u_l)
}

/// HLL combination for one component given the wave-speed estimates.
pub fn hll(f_l: f64, f_r: f64, u_l: f64, u_r: f64, s_l: f64, s_r: f64) -> f64 {
    if s_r == s_l {
        0.5 * (f_l + f_r)
    } else if s_l >= 0.0 {
        f_l
    } else if s_r <= 0.0 {
        f_r
    } else {
        (s_r * f_l - s_l * f_r + s_l * s_r * (u_r - u_l)) / (s_r - s_l)
    }
}

/// Davis estimates `(S_L, S_R)` for primitive states along `axis`.
pub fn davis_speeds(eos: &IdealGas, layout: Layout, axis: usize, q_l: &[f64], q_r: &[f64]) -> (f64, f64) {
    let e = layout.energy();
    let (v_l, v_r) = (q_l[1 + axis], q_r[1 + axis]);
    let a_l = eos.sound_speed(q_l[0], q_l[e]);
    let a_r = eos.sound_speed(q_r[0], q_r[e]);
    ((v_l - a_l).min(v_r - a_r), (v_l + a_l).max(v_r + a_r))
}

/// Flux at one interface from reconstructed primitive states.
pub trait RiemannSolver: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn flux(&self, eos: &IdealGas, layout: Layout, axis: usize, q_l: &[f64], q_r: &[f64], out: &mut [f64]);
}

const MAX_COMP: usize = 6;

struct Sides {
    u_l: [f64; MAX_COMP],
    u_r: [f64; MAX_COMP],
    f_l: [f64; MAX_COMP],
    f_r: [f64; MAX_COMP],
}

fn sides(eos: &IdealGas, layout: Layout, axis: usize, q_l: &[f64], q_r: &[f64]) -> Sides {
    let n = layout.ncomp();
    let mut s = Sides {
        u_l: [0.0; MAX_COMP],
        u_r: [0.0; MAX_COMP],
        f_l: [0.0; MAX_COMP],
        f_r: [0.0; MAX_COMP],
    };
    eos.to_conserved(layout, q_l, &mut s.u_l[..n]);
    eos.to_conserved(layout, q_r, &mut s.u_r[..n]);
    physical_flux(layout, axis, q_l, &s.u_l[..n], &mut s.f_l[..n]);
    physical_flux(layout, axis, q_r, &s.u_r[..n], &mut s.f_r[..n]);
    s
}

/// HLL on the gas components; Lax-Friedrichs with `α = max|u_n|` on the
/// advected radiation energy.
#[derive(Debug, Default)]
pub struct Hll;

impl RiemannSolver for Hll {
    fn name(&self) -> &'static str {
        "hll"
    }

    fn flux(&self, eos: &IdealGas, layout: Layout, axis: usize, q_l: &[f64], q_r: &[f64], out: &mut [f64]) {
        let s = sides(eos, layout, axis, q_l, q_r);
        let (s_l, s_r) = davis_speeds(eos, layout, axis, q_l, q_r);
        for c in 0..=layout.energy() {
            out[c] = hll(s.f_l[c], s.f_r[c], s.u_l[c], s.u_r[c], s_l, s_r);
        }
        if let Some(r) = layout.rad() {
            let alpha = q_l[1 + axis].abs().max(q_r[1 + axis].abs());
            out[r] = lax_friedrichs(s.f_l[r], s.f_r[r], s.u_l[r], s.u_r[r], alpha);
        }
    }
}

/// Lax-Friedrichs (Rusanov) on every component, `α = max(|u_n| + a)`.
#[derive(Debug, Default)]
pub struct LaxFriedrichs;

impl RiemannSolver for LaxFriedrichs {
    fn name(&self) -> &'static str {
        "lax_friedrichs"
    }

    fn flux(&self, eos: &IdealGas, layout: Layout, axis: usize, q_l: &[f64], q_r: &[f64], out: &mut [f64]) {
        let s = sides(eos, layout, axis, q_l, q_r);
        let (s_l, s_r) = davis_speeds(eos, layout, axis, q_l, q_r);
        let alpha = s_l.abs().max(s_r.abs());
        for c in 0..layout.ncomp() {
            out[c] = lax_friedrichs(s.f_l[c], s.f_r[c], s.u_l[c], s.u_r[c], alpha);
        }
    }
}

pub type RiemannFactory = fn() -> Arc<dyn RiemannSolver>;

pub fn riemann_registry() -> Registry<RiemannFactory> {
    let mut r: Registry<RiemannFactory> = Registry::new("flux solver");
    r.register(
        "hll",
        "two-wave HLL, Davis speeds; Lax-Friedrichs for radiation",
        || Arc::new(Hll),
    );
    r.register_with_aliases(
        "lax_friedrichs",
        &["rusanov", "lf"],
        "local Lax-Friedrichs on all components",
        || Arc::new(LaxFriedrichs),
    );
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lf_examples() {
        assert_eq!(lax_friedrichs(0.0, 2.0, 0.0, 2.0, 1.0), 0.0);
        assert_eq!(lax_friedrichs(1.0, 3.0, 5.0, 9.0, 0.0), 2.0);
    }

    #[test]
    fn zero_velocity_momentum_flux_is_pressure() {
        let l = Layout::new(2, false);
        let eos = IdealGas::new(1.4).unwrap();
        let q = [1.3, 0.0, 0.0, 0.7];
        let mut u = [0.0; 4];
        eos.to_conserved(l, &q, &mut u);
        let mut f = [0.0; 4];
        physical_flux(l, 1, &q, &u, &mut f);
        assert_eq!(f, [0.0, 0.0, 0.7, 0.0]);
    }
}
