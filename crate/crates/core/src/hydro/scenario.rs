//! Initial conditions and boundary kinds of the bundled problems.

use std::fmt::Debug;
use std::sync::Arc;

use super::eos::Layout;
use super::exact::{shock_jump, RiemannState};
use super::{Boundary, HydroConfig};
use crate::registry::Registry;
use crate::topology::MAX_DIMS;

pub trait Scenario: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    /// Boundary kind per axis, applied on both sides.
    fn boundaries(&self, config: &HydroConfig) -> [Boundary; MAX_DIMS];
    /// Primitive state `[ρ, u.., P, (E_rad)]` at point `x`.
    fn primitive(&self, config: &HydroConfig, layout: Layout, x: [f64; MAX_DIMS], q: &mut [f64]);
}

fn shock_tube_bcs() -> [Boundary; MAX_DIMS] {
    [Boundary::Outflow, Boundary::Periodic, Boundary::Periodic]
}

fn fill(config: &HydroConfig, layout: Layout, rho: f64, vel: [f64; MAX_DIMS], p: f64, q: &mut [f64]) {
    q[0] = rho;
    q[1..=layout.dims].copy_from_slice(&vel[..layout.dims]);
    q[layout.energy()] = p;
    if let Some(r) = layout.rad() {
        q[r] = config.radiation_scale * p;
    }
}

/// Two constant states split at `x0` along axis 0.
fn tube(config: &HydroConfig, layout: Layout, x: f64, left: RiemannState, right: RiemannState, q: &mut [f64]) {
    let x0 = config.interface.unwrap_or(0.5);
    let s = if x < x0 { left } else { right };
    fill(config, layout, s.rho, [s.u, 0.0, 0.0], s.p, q);
}

/// Sod shock tube along axis 0.
#[derive(Debug, Default)]
pub struct Sod;

impl Sod {
    pub const LEFT: RiemannState = RiemannState {
        rho: 1.0,
        u: 0.0,
        p: 1.0,
    };
    pub const RIGHT: RiemannState = RiemannState {
        rho: 0.125,
        u: 0.0,
        p: 0.1,
    };
}

impl Scenario for Sod {
    fn name(&self) -> &'static str {
        "sod"
    }

    fn boundaries(&self, _config: &HydroConfig) -> [Boundary; MAX_DIMS] {
        shock_tube_bcs()
    }

    fn primitive(&self, config: &HydroConfig, layout: Layout, x: [f64; MAX_DIMS], q: &mut [f64]) {
        tube(config, layout, x[0], Self::LEFT, Self::RIGHT, q);
    }
}

/// Planar shock of Mach `config.mach` running along axis 0 into gas at
/// rest, with the post-shock state from the jump conditions.
#[derive(Debug, Default)]
pub struct RankineHugoniot;

impl RankineHugoniot {
    pub const PRE_SHOCK: RiemannState = RiemannState {
        rho: 1.0,
        u: 0.0,
        p: 1.0,
    };
    pub const DEFAULT_INTERFACE: f64 = 0.25;

    /// Post-shock state and shock speed for `config`.
    pub fn jump(config: &HydroConfig) -> (RiemannState, f64) {
        shock_jump(Self::PRE_SHOCK, config.mach, config.gamma)
    }
}

impl Scenario for RankineHugoniot {
    fn name(&self) -> &'static str {
        "rankine_hugoniot"
    }

    fn boundaries(&self, _config: &HydroConfig) -> [Boundary; MAX_DIMS] {
        shock_tube_bcs()
    }

    fn primitive(&self, config: &HydroConfig, layout: Layout, x: [f64; MAX_DIMS], q: &mut [f64]) {
        let (post, _) = Self::jump(config);
        let x0 = config.interface.unwrap_or(Self::DEFAULT_INTERFACE);
        let s = if x[0] < x0 { post } else { Self::PRE_SHOCK };
        fill(config, layout, s.rho, [s.u, 0.0, 0.0], s.p, q);
    }
}

/// `ρ = 1 + A·sin(2π k·x)` carried by a uniform velocity at unit pressure.
#[derive(Debug, Default)]
pub struct SmoothWave;

impl SmoothWave {
    pub fn density(config: &HydroConfig, x: [f64; MAX_DIMS]) -> f64 {
        let phase: f64 = (0..MAX_DIMS).map(|a| config.wave_vector[a] * x[a]).sum();
        1.0 + config.amplitude * (2.0 * std::f64::consts::PI * phase).sin()
    }
}

impl Scenario for SmoothWave {
    fn name(&self) -> &'static str {
        "smooth_wave"
    }

    fn boundaries(&self, _config: &HydroConfig) -> [Boundary; MAX_DIMS] {
        [Boundary::Periodic; MAX_DIMS]
    }

    fn primitive(&self, config: &HydroConfig, layout: Layout, x: [f64; MAX_DIMS], q: &mut [f64]) {
        fill(config, layout, Self::density(config, x), config.velocity, 1.0, q);
    }
}

#[derive(Debug, Default)]
pub struct Uniform;

impl Scenario for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn boundaries(&self, _config: &HydroConfig) -> [Boundary; MAX_DIMS] {
        [Boundary::Periodic; MAX_DIMS]
    }

    fn primitive(&self, config: &HydroConfig, layout: Layout, _x: [f64; MAX_DIMS], q: &mut [f64]) {
        fill(config, layout, 1.0, config.velocity, 1.0, q);
    }
}

pub type ScenarioFactory = fn() -> Arc<dyn Scenario>;

pub fn scenario_registry() -> Registry<ScenarioFactory> {
    let mut r: Registry<ScenarioFactory> = Registry::new("scenario");
    r.register("sod", "Sod shock tube along axis 0", || Arc::new(Sod));
    r.register_with_aliases(
        "rankine_hugoniot",
        &["rh", "shock"],
        "planar shock from the jump conditions, outflow along axis 0",
        || Arc::new(RankineHugoniot),
    );
    r.register_with_aliases(
        "smooth_wave",
        &["wave"],
        "advected sinusoidal density wave, periodic",
        || Arc::new(SmoothWave),
    );
    r.register("uniform", "constant state, periodic", || Arc::new(Uniform));
    r
}
