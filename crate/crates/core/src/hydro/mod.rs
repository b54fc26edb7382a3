//! Finite-volume compressible Euler solver with an operator-split gray
//! radiation-diffusion step, written as runtime tasks.
//!
//! A step submits: the time-step reduction, boundary fill, `L(U)`, the
//! predictor, boundary fill, `L(U*)`, the corrector, the optional radiation
//! solve, and a task that sums the conserved totals. Ghost exchanges are
//! inserted by the runtime in front of each `L` evaluation.

pub mod eos;
pub mod exact;
pub mod radiation;
pub mod riemann;
pub mod scenario;
pub mod scheme;
pub mod weno;

use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::exec::ExecutorConfig;
use crate::reduce::{Partial, TaskValue};
use crate::registry::UnknownName;
use crate::runtime::{ElementKind, FieldHandle, Runtime, RuntimeError, TaskResult, TaskSpec};
use crate::topology::{MeshTopology, MAX_DIMS};

use eos::{IdealGas, Layout, Violation};
use radiation::{closure_registry, operator_components, DiffusionClosure, RadiationParams};
use riemann::{riemann_registry, RiemannSolver};
use scenario::{scenario_registry, Scenario};
use scheme::STENCIL_HALO;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydroError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Unknown(#[from] UnknownName),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid hydro configuration: {0}")]
    Invalid(String),
    #[error("cell {cell:?}: invalid {violation} in {stage}")]
    InvalidState {
        stage: &'static str,
        cell: [isize; MAX_DIMS],
        violation: Violation,
    },
    #[error("cell {cell:?}: non-finite signal speed")]
    NonFiniteSpeed { cell: [isize; MAX_DIMS] },
    #[error("Jacobi solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    JacobiDiverged { iterations: usize, residual: f64 },
    #[error("time step {0} is not positive and finite")]
    BadTimeStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Zero gradient.
    Outflow,
    /// Mirror with the normal momentum negated.
    Reflecting,
}

impl FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "outflow" | "zero_gradient" => Ok(Boundary::Outflow),
            "reflecting" | "wall" => Ok(Boundary::Reflecting),
            other => Err(format!("unknown boundary '{other}'")),
        }
    }
}

/// Run parameters. Every axis spans `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroConfig {
    pub scenario: String,
    pub extents: Vec<usize>,
    pub colors: Vec<usize>,
    pub gamma: f64,
    pub cfl: f64,
    pub end_time: f64,
    pub max_steps: usize,
    /// Replaces the CFL control when set (still clipped to the end time).
    pub fixed_dt: Option<f64>,
    pub radiation: bool,
    pub opacity: f64,
    pub light_speed: f64,
    /// Initial `E_rad` as a multiple of the gas pressure.
    pub radiation_scale: f64,
    pub closure: String,
    pub riemann: String,
    pub jacobi_tolerance: f64,
    pub jacobi_max_iters: usize,
    pub mach: f64,
    /// Discontinuity position along axis 0; scenario default when unset.
    pub interface: Option<f64>,
    pub velocity: [f64; MAX_DIMS],
    pub wave_vector: [f64; MAX_DIMS],
    pub amplitude: f64,
    /// Per-axis override of the scenario's boundary kinds.
    pub boundaries: Option<Vec<Boundary>>,
    /// Steps between state outputs; 0 writes only the final state.
    pub output_every: usize,
    /// Suppresses all state output.
    pub benchmark: bool,
}

impl Default for HydroConfig {
    fn default() -> Self {
        Self {
            scenario: "sod".into(),
            extents: vec![400],
            colors: vec![1],
            gamma: 1.4,
            cfl: 0.4,
            end_time: 0.2,
            max_steps: 1_000_000,
            fixed_dt: None,
            radiation: false,
            opacity: 10.0,
            light_speed: 1.0,
            radiation_scale: 1.0,
            closure: "flux_limited".into(),
            riemann: "hll".into(),
            jacobi_tolerance: 1e-10,
            jacobi_max_iters: 10_000,
            mach: 2.0,
            interface: None,
            velocity: [1.0, 0.0, 0.0],
            wave_vector: [1.0, 0.0, 0.0],
            amplitude: 0.2,
            boundaries: None,
            output_every: 0,
            benchmark: false,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "scenario",
    "extents",
    "colors",
    "gamma",
    "cfl",
    "end_time",
    "max_steps",
    "fixed_dt",
    "radiation",
    "opacity",
    "kappa",
    "light_speed",
    "radiation_scale",
    "closure",
    "riemann",
    "jacobi_tolerance",
    "jacobi_max_iters",
    "mach",
    "interface",
    "velocity",
    "wave_vector",
    "amplitude",
    "boundaries",
    "output_every",
    "benchmark",
];

fn triple(v: Vec<f64>, key: &str) -> Result<[f64; MAX_DIMS], HydroError> {
    if v.is_empty() || v.len() > MAX_DIMS {
        return Err(HydroError::Invalid(format!("{key} needs 1 to 3 values")));
    }
    let mut out = [0.0; MAX_DIMS];
    out[..v.len()].copy_from_slice(&v);
    Ok(out)
}

impl HydroConfig {
    /// A cube of `n` cells per axis in `dims` dimensions on one color.
    pub fn cube(scenario: &str, dims: usize, n: usize) -> Self {
        Self {
            scenario: scenario.into(),
            extents: vec![n; dims],
            colors: vec![1; dims],
            ..Self::default()
        }
    }

    /// Applies the keys present in `kv` on top of `self`.
    pub fn apply(mut self, kv: &KeyValues) -> Result<Self, HydroError> {
        kv.check_known(CONFIG_KEYS)?;
        if let Some(v) = kv.raw("scenario") {
            self.scenario = v.into();
        }
        if let Some(v) = kv.get_list("extents")? {
            self.extents = v;
        }
        if let Some(v) = kv.get_list("colors")? {
            self.colors = v;
        }
        macro_rules! scalar {
            ($($key:literal => $field:ident),*) => {$(
                if let Some(v) = kv.get($key)? {
                    self.$field = v;
                }
            )*};
        }
        scalar!("gamma" => gamma, "cfl" => cfl, "end_time" => end_time, "max_steps" => max_steps,
            "opacity" => opacity, "kappa" => opacity, "light_speed" => light_speed,
            "radiation_scale" => radiation_scale, "jacobi_tolerance" => jacobi_tolerance,
            "jacobi_max_iters" => jacobi_max_iters, "mach" => mach, "amplitude" => amplitude,
            "output_every" => output_every);
        if let Some(v) = kv.get("fixed_dt")? {
            self.fixed_dt = Some(v);
        }
        if let Some(v) = kv.get("interface")? {
            self.interface = Some(v);
        }
        if let Some(v) = kv.get_bool("radiation")? {
            self.radiation = v;
        }
        if let Some(v) = kv.get_bool("benchmark")? {
            self.benchmark = v;
        }
        if let Some(v) = kv.raw("closure") {
            self.closure = v.into();
        }
        if let Some(v) = kv.raw("riemann") {
            self.riemann = v.into();
        }
        if let Some(v) = kv.get_list("velocity")? {
            self.velocity = triple(v, "velocity")?;
        }
        if let Some(v) = kv.get_list("wave_vector")? {
            self.wave_vector = triple(v, "wave_vector")?;
        }
        if let Some(v) = kv.get_list("boundaries")? {
            self.boundaries = Some(v);
        }
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.extents.len()
    }

    pub fn validate(&self) -> Result<(), HydroError> {
        let bad = |m: String| Err(HydroError::Invalid(m));
        if !(1..=MAX_DIMS).contains(&self.dims()) {
            return bad(format!("extents must have 1 to 3 axes, got {}", self.dims()));
        }
        if self.colors.len() != self.dims() {
            return bad(format!("colors has {} axes, extents {}", self.colors.len(), self.dims()));
        }
        for (a, (&n, &c)) in self.extents.iter().zip(&self.colors).enumerate() {
            if c == 0 || n / c < STENCIL_HALO {
                return bad(format!(
                    "axis {a}: blocks of {n} cells over {c} colors are thinner than the {STENCIL_HALO}-cell stencil halo"
                ));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.end_time >= 0.0 && self.end_time.is_finite()) {
            return bad(format!("end_time must be finite and non-negative, got {}", self.end_time));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("fixed_dt must be positive, got {dt}"));
            }
        }
        if self.radiation {
            if !(self.opacity > 0.0 && self.light_speed > 0.0) {
                return bad("opacity and light_speed must be positive".into());
            }
            if !(self.jacobi_tolerance > 0.0) {
                return bad("jacobi_tolerance must be positive".into());
            }
        }
        if !(self.mach >= 1.0) {
            return bad(format!("mach must be at least 1, got {}", self.mach));
        }
        if let Some(b) = &self.boundaries {
            if b.len() != self.dims() {
                return bad(format!("boundaries has {} entries for {} axes", b.len(), self.dims()));
            }
        }
        IdealGas::new(self.gamma).map_err(HydroError::Invalid)?;
        scenario_registry().get(&self.scenario)?;
        riemann_registry().get(&self.riemann)?;
        closure_registry().get(&self.closure)?;
        Ok(())
    }

    /// Executor configuration matching this decomposition.
    pub fn executor(&self, executor: &str, workers: usize) -> ExecutorConfig {
        ExecutorConfig {
            executor: executor.into(),
            ranks: self.colors.iter().product(),
            workers_per_rank: workers,
            ..ExecutorConfig::default()
        }
    }
}

/// One advanced step and its deferred diagnostics.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub totals: TaskResult,
    pub jacobi: Option<TaskResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroReport {
    pub steps: usize,
    pub time: f64,
    pub dts: Vec<f64>,
    /// Conserved totals per component after each step, initial state first.
    pub totals: Vec<Vec<f64>>,
    /// Largest relative change of any conserved total over the run.
    pub drift: f64,
    pub jacobi_iterations: Vec<usize>,
}

/// Wraps each submitted spec (identity outside benchmarks).
pub type SpecWrap<'a> = &'a mut dyn FnMut(TaskSpec) -> TaskSpec;

pub struct Hydro {
    pub config: HydroConfig,
    pub layout: Layout,
    pub eos: IdealGas,
    pub topology: Arc<MeshTopology>,
    pub dx: [f64; MAX_DIMS],
    pub boundaries: [Boundary; MAX_DIMS],
    pub u: FieldHandle,
    pub u_star: FieldHandle,
    pub l0: FieldHandle,
    pub l1: FieldHandle,
    /// Operator and iterate of the radiation solve.
    pub rad_fields: Option<(FieldHandle, FieldHandle)>,
    pub time: f64,
    pub steps: usize,
    pub history: Vec<StepRecord>,
    initial_totals: TaskResult,
    riemann: Arc<dyn RiemannSolver>,
    closure: Arc<dyn DiffusionClosure>,
}

impl std::fmt::Debug for Hydro {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hydro")
            .field("config", &self.config)
            .field("time", &self.time)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

/// 3-point Gauss-Legendre nodes on `[-½, ½]` and weights.
const GAUSS: [(f64, f64); 3] = [
    (-0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.0, 8.0 / 18.0),
    (0.387_298_334_620_741_7, 5.0 / 18.0),
];

impl Hydro {
    /// Registers the fields and submits the initial-state task.
    pub fn init(rt: &mut Runtime, config: &HydroConfig) -> Result<Self, HydroError> {
        config.validate()?;
        let dims = config.dims();
        let scenario = scenario_registry().get(&config.scenario)?();
        let boundaries = match &config.boundaries {
            Some(b) => {
                let mut out = [Boundary::Periodic; MAX_DIMS];
                out[..dims].copy_from_slice(b);
                out
            }
            None => scenario.boundaries(config),
        };
        let periodic: Vec<bool> = (0..dims).map(|a| boundaries[a] == Boundary::Periodic).collect();
        let base = MeshTopology::decompose(&config.extents, &config.colors).map_err(RuntimeError::from)?;
        let topology = Arc::new(
            base.clone()
                .with_halo(STENCIL_HALO)
                .and_then(|t| t.with_periodic(&periodic))
                .map_err(RuntimeError::from)?,
        );
        let layout = Layout::new(dims, config.radiation);
        let eos = IdealGas::new(config.gamma).map_err(HydroError::Invalid)?;
        let mut dx = [1.0; MAX_DIMS];
        for (a, d) in dx.iter_mut().enumerate().take(dims) {
            *d = 1.0 / config.extents[a] as f64;
        }
        let kind = ElementKind::Vector(layout.ncomp());
        let u = rt.register_field(&topology, "U", kind)?;
        let u_star = rt.register_field(&topology, "U*", kind)?;
        let l0 = rt.register_field(&topology, "L0", kind)?;
        let l1 = rt.register_field(&topology, "L1", kind)?;
        let rad_fields = if config.radiation {
            let rad_topo = Arc::new(base.with_periodic(&periodic).map_err(RuntimeError::from)?);
            let op = rt.register_field(&rad_topo, "rad:operator", ElementKind::Vector(operator_components(dims)))?;
            let x = rt.register_field(&rad_topo, "rad:E", ElementKind::Scalar)?;
            Some((op, x))
        } else {
            None
        };
        rt.submit(Self::init_spec(config, layout, &eos, dx, scenario, &u))?;
        let initial_totals = rt.submit(Self::totals_spec(layout, &u))?;
        Ok(Self {
            config: config.clone(),
            layout,
            eos,
            topology,
            dx,
            boundaries,
            u,
            u_star,
            l0,
            l1,
            rad_fields,
            time: 0.0,
            steps: 0,
            history: Vec::new(),
            initial_totals,
            riemann: riemann_registry().get(&config.riemann)?(),
            closure: closure_registry().get(&config.closure)?(),
        })
    }

    fn init_spec(
        config: &HydroConfig,
        layout: Layout,
        eos: &IdealGas,
        dx: [f64; MAX_DIMS],
        scenario: Arc<dyn Scenario>,
        u: &FieldHandle,
    ) -> TaskSpec {
        let (cfg, eos, h) = (config.clone(), *eos, u.clone());
        let dims = layout.dims;
        TaskSpec::new("hydro:init", move |ctx| {
            let mut uv = ctx.view_mut(&h)?;
            let nc = layout.ncomp();
            ctx.for_each_cell(&mut uv, |cell, out| {
                // cell average of the conserved state by tensor Gauss quadrature
                out.fill(0.0);
                let mut q = [0.0; 8];
                let mut c = [0.0; 8];
                let points = 3usize.pow(dims as u32);
                for p in 0..points {
                    let mut x = [0.0; MAX_DIMS];
                    let mut w = 1.0;
                    let mut idx = p;
                    for a in 0..dims {
                        let (node, weight) = GAUSS[idx % 3];
                        idx /= 3;
                        x[a] = (cell.global[a] as f64 + 0.5 + node) * dx[a];
                        w *= weight;
                    }
                    scenario.primitive(&cfg, layout, x, &mut q[..nc]);
                    eos.to_conserved(layout, &q[..nc], &mut c[..nc]);
                    for k in 0..nc {
                        out[k] += w * c[k];
                    }
                }
            });
            scheme::check_state(uv.block(), layout, &eos, uv.values(), "initial state")?;
            Ok(Partial::None)
        })
        .write_discard(u)
    }

    fn totals_spec(layout: Layout, u: &FieldHandle) -> TaskSpec {
        let h = u.clone();
        let nc = layout.ncomp();
        TaskSpec::new("hydro:totals", move |ctx| {
            let uv = ctx.view(&h)?;
            let vals = uv.values();
            let sums = ctx.sum_cells_vec(uv.block(), 2 * nc, |cell, out| {
                let s = &vals[cell.offset * nc..(cell.offset + 1) * nc];
                for k in 0..nc {
                    out[k] = s[k];
                    out[nc + k] = s[k].abs();
                }
            });
            Ok(Partial::SumVec(sums))
        })
        .read_owned(u)
    }

    /// Cell-centre coordinates of global cell `g`.
    pub fn cell_center(&self, g: [usize; MAX_DIMS]) -> [f64; MAX_DIMS] {
        let mut x = [0.0; MAX_DIMS];
        for a in 0..self.layout.dims {
            x[a] = (g[a] as f64 + 0.5) * self.dx[a];
        }
        x
    }

    pub fn done(&self) -> bool {
        self.time >= self.config.end_time || self.steps >= self.config.max_steps
    }

    /// `CFL · min dx/(|u|+a)` over the current state, reduced across ranks.
    pub fn compute_dt(&self, rt: &mut Runtime, wrap: SpecWrap<'_>) -> Result<f64, HydroError> {
        let (h, layout, eos, dx) = (self.u.clone(), self.layout, self.eos, self.dx);
        let spec = TaskSpec::new("hydro:dt", move |ctx| {
            let uv = ctx.view(&h)?;
            let local = scheme::min_crossing_time(uv.block(), layout, &eos, &dx, uv.values())?;
            Ok(Partial::Min(local))
        })
        .read_owned(&self.u);
        let min = rt.submit(wrap(spec))?.wait_scalar()?;
        let dt = self.config.cfl * min;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(HydroError::BadTimeStep(dt));
        }
        Ok(dt)
    }

    fn boundary_spec(&self, field: &FieldHandle, label: &str) -> TaskSpec {
        let (h, layout, bcs) = (field.clone(), self.layout, self.boundaries);
        TaskSpec::new(label, move |ctx| {
            let mut v = ctx.view_mut(&h)?;
            let block = v.block();
            scheme::apply_boundaries(block, layout, &bcs, v.values_mut());
            Ok(Partial::None)
        })
        .read_write(field)
    }

    fn rhs_spec(&self, input: &FieldHandle, output: &FieldHandle, label: &str) -> TaskSpec {
        let (ih, oh) = (input.clone(), output.clone());
        let (layout, eos, dx, solver) = (self.layout, self.eos, self.dx, self.riemann.clone());
        TaskSpec::new(label, move |ctx| {
            let uv = ctx.view(&ih)?;
            let mut lv = ctx.view_mut(&oh)?;
            scheme::advective_rhs(uv.block(), layout, &eos, solver.as_ref(), &dx, uv.values(), lv.values_mut())?;
            Ok(Partial::None)
        })
        .read(input)
        .write_discard(output)
    }

    /// Submits boundary fill and `L(U)` of the current state into `L0`.
    pub fn submit_rhs(&self, rt: &mut Runtime, wrap: SpecWrap<'_>) -> Result<(), HydroError> {
        rt.submit(wrap(self.boundary_spec(&self.u, "hydro:bc:U")))?;
        rt.submit(wrap(self.rhs_spec(&self.u, &self.l0, "hydro:L0")))?;
        Ok(())
    }

    /// The advective time derivative of the current state, gathered.
    pub fn rhs(&self, rt: &mut Runtime) -> Result<Vec<f64>, HydroError> {
        self.submit_rhs(rt, &mut |s| s)?;
        Ok(rt.gather(&self.l0)?)
    }

    /// Submits one Heun step of the advective part.
    pub fn heun_step(&self, rt: &mut Runtime, dt: f64, wrap: SpecWrap<'_>) -> Result<(), HydroError> {
        let (layout, eos) = (self.layout, self.eos);
        self.submit_rhs(rt, wrap)?;
        let (uh, sh, l0h) = (self.u.clone(), self.u_star.clone(), self.l0.clone());
        let predictor = TaskSpec::new("hydro:predictor", move |ctx| {
            let uv = ctx.view(&uh)?;
            let lv = ctx.view(&l0h)?;
            let mut sv = ctx.view_mut(&sh)?;
            let (u, l) = (uv.values(), lv.values());
            let nc = layout.ncomp();
            ctx.for_each_cell(&mut sv, |cell, out| {
                let o = cell.offset * nc;
                for k in 0..nc {
                    out[k] = u[o + k] + dt * l[o + k];
                }
            });
            scheme::check_state(sv.block(), layout, &eos, sv.values(), "predictor")?;
            Ok(Partial::None)
        })
        .read_owned(&self.u)
        .read_owned(&self.l0)
        .write_discard(&self.u_star);
        rt.submit(wrap(predictor))?;
        rt.submit(wrap(self.boundary_spec(&self.u_star, "hydro:bc:U*")))?;
        rt.submit(wrap(self.rhs_spec(&self.u_star, &self.l1, "hydro:L1")))?;
        let (uh, l0h, l1h) = (self.u.clone(), self.l0.clone(), self.l1.clone());
        let corrector = TaskSpec::new("hydro:corrector", move |ctx| {
            let a = ctx.view(&l0h)?;
            let b = ctx.view(&l1h)?;
            let mut uv = ctx.view_mut(&uh)?;
            let (l0, l1) = (a.values(), b.values());
            let nc = layout.ncomp();
            ctx.for_each_cell(&mut uv, |cell, out| {
                let o = cell.offset * nc;
                for k in 0..nc {
                    out[k] += 0.5 * dt * (l0[o + k] + l1[o + k]);
                }
            });
            scheme::check_state(uv.block(), layout, &eos, uv.values(), "corrector")?;
            Ok(Partial::None)
        })
        .read_write(&self.u)
        .read_owned(&self.l0)
        .read_owned(&self.l1);
        rt.submit(wrap(corrector))?;
        Ok(())
    }

    /// Submits a backward-Euler diffusion step of `E_rad` over `dt`; the
    /// result resolves to the Jacobi iteration count.
    pub fn radiation_step(&self, rt: &mut Runtime, dt: f64, wrap: SpecWrap<'_>) -> Result<TaskResult, HydroError> {
        let (op, x) = self
            .rad_fields
            .clone()
            .ok_or_else(|| HydroError::Invalid("radiation is disabled".into()))?;
        let (uh, oh, xh) = (self.u.clone(), op.clone(), x.clone());
        let (layout, dx, eos, closure) = (self.layout, self.dx, self.eos, self.closure.clone());
        let params = RadiationParams {
            light_speed: self.config.light_speed,
            opacity: self.config.opacity,
        };
        let assemble = TaskSpec::new("radiation:assemble", move |ctx| {
            let uv = ctx.view(&uh)?;
            let mut ov = ctx.view_mut(&oh)?;
            let mut xv = ctx.view_mut(&xh)?;
            let op_block = ov.block();
            radiation::assemble_block(
                layout,
                closure.as_ref(),
                params,
                &dx,
                dt,
                uv.block(),
                uv.values(),
                op_block,
                ov.values_mut(),
                xv.values_mut(),
            );
            Ok(Partial::None)
        })
        .read(&self.u)
        .write_discard(&op)
        .write_discard(&x);
        rt.submit(wrap(assemble))?;
        let solve = radiation::jacobi_spec(
            "radiation:jacobi",
            &x,
            &op,
            layout.dims,
            self.config.jacobi_tolerance,
            self.config.jacobi_max_iters,
        );
        let iterations = rt.submit(wrap(solve))?;
        let (uh, xh) = (self.u.clone(), x.clone());
        let rad = layout.rad().expect("radiation component");
        let write_back = TaskSpec::new("radiation:update", move |ctx| {
            let xv = ctx.view(&xh)?;
            let mut uv = ctx.view_mut(&uh)?;
            let xb = xv.block();
            let xs = xv.values();
            ctx.for_each_cell(&mut uv, |cell, out| {
                out[rad] = xs[xb.offset(cell.local)];
            });
            scheme::check_state(uv.block(), layout, &eos, uv.values(), "radiation step")?;
            Ok(Partial::None)
        })
        .read_write(&self.u)
        .read_owned(&x);
        rt.submit(wrap(write_back))?;
        Ok(iterations)
    }

    /// Submits one full step and returns its `dt`.
    pub fn step(&mut self, rt: &mut Runtime) -> Result<f64, HydroError> {
        self.step_with(rt, &mut |s| s)
    }

    pub fn step_with(&mut self, rt: &mut Runtime, wrap: SpecWrap<'_>) -> Result<f64, HydroError> {
        let remaining = self.config.end_time - self.time;
        let mut dt = match self.config.fixed_dt {
            Some(dt) => dt,
            None => self.compute_dt(rt, wrap)?,
        };
        let last = remaining > 0.0 && dt >= remaining;
        if last {
            dt = remaining;
        }
        self.heun_step(rt, dt, wrap)?;
        let jacobi = if self.config.radiation {
            Some(self.radiation_step(rt, dt, wrap)?)
        } else {
            None
        };
        let totals = rt.submit(wrap(Self::totals_spec(self.layout, &self.u)))?;
        self.time = if last { self.config.end_time } else { self.time + dt };
        self.steps += 1;
        self.history.push(StepRecord {
            time: self.time,
            dt,
            totals,
            jacobi,
        });
        Ok(dt)
    }

    /// Steps until the end time (or the step cap) and collects diagnostics.
    pub fn run(&mut self, rt: &mut Runtime) -> Result<HydroReport, HydroError> {
        while !self.done() {
            self.step(rt)?;
        }
        rt.fence()?;
        self.report()
    }

    /// Waits for the recorded diagnostics.
    pub fn report(&self) -> Result<HydroReport, HydroError> {
        let vector = |r: &TaskResult| -> Result<Vec<f64>, HydroError> {
            match r.wait()? {
                TaskValue::Vector(v) => Ok(v),
                other => Err(RuntimeError::WrongValueKind {
                    task: r.id(),
                    found: format!("{other:?}"),
                }
                .into()),
            }
        };
        let nc = self.layout.ncomp();
        let first = vector(&self.initial_totals)?;
        let mut totals = vec![first[..nc].to_vec()];
        for rec in &self.history {
            totals.push(vector(&rec.totals)?[..nc].to_vec());
        }
        // components that start at zero are measured against the mass scale
        let scale: Vec<f64> = (0..nc)
            .map(|k| if first[nc + k] > 0.0 { first[nc + k] } else { first[nc] })
            .collect();
        let drift = totals
            .iter()
            .flat_map(|t| (0..nc).map(|k| (t[k] - totals[0][k]).abs() / scale[k]))
            .fold(0.0, f64::max);
        let mut jacobi_iterations = Vec::new();
        for rec in &self.history {
            if let Some(j) = &rec.jacobi {
                jacobi_iterations.push(j.wait_scalar()? as usize);
            }
        }
        Ok(HydroReport {
            steps: self.steps,
            time: self.time,
            dts: self.history.iter().map(|r| r.dt).collect(),
            totals,
            drift,
            jacobi_iterations,
        })
    }

    /// Conserved state in global layout.
    pub fn state(&self, rt: &mut Runtime) -> Result<Vec<f64>, HydroError> {
        Ok(rt.gather(&self.u)?)
    }

    /// Primitive state per cell in global layout.
    pub fn primitives(&self, rt: &mut Runtime) -> Result<Vec<Vec<f64>>, HydroError> {
        let u = self.state(rt)?;
        let nc = self.layout.ncomp();
        u.chunks(nc)
            .enumerate()
            .map(|(k, c)| {
                let mut q = vec![0.0; nc];
                self.eos.to_primitive(self.layout, c, &mut q).map_err(|v| HydroError::InvalidState {
                    stage: "output",
                    cell: self.global_index(k).map(|v| v as isize),
                    violation: v,
                })?;
                Ok(q)
            })
            .collect()
    }

    /// Global cell index of position `k` in gathered output.
    pub fn global_index(&self, k: usize) -> [usize; MAX_DIMS] {
        let e = self.topology.extents();
        let mut g = [0; MAX_DIMS];
        let mut rest = k;
        for (a, &n) in e.iter().enumerate() {
            g[a] = rest % n;
            rest /= n;
        }
        g
    }
}

