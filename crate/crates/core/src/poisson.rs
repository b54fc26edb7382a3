//! Red-black Gauss-Seidel solver for the 2D Poisson equation `Δp = f`.
//!
//! Cell-centered grid, `dx = Lx / Nx`. Physical boundary ghosts hold the
//! Dirichlet value `g`; since the boundary lies half a cell outside the last
//! owned cell, the stencil uses the mirrored value `2g - p` there, which
//! keeps the scheme second order. Each solve task runs a fixed number of
//! red-black iterations, so successive solves form a dependent pipeline.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::config::{ConfigError, KeyValues};
use crate::reduce::{ExactSum, Partial};
use crate::runtime::{ElementKind, FieldHandle, Runtime, RuntimeError, TaskResult, TaskSpec};
use crate::topology::{LocalBlock, MeshTopology, Side};

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonConfig {
    pub extents: [usize; 2],
    pub colors: [usize; 2],
    pub lengths: [f64; 2],
    /// Dirichlet value on the whole boundary.
    pub boundary: f64,
    /// Stop once the residual norm drops below this.
    pub tolerance: f64,
    pub max_tasks: usize,
    /// Red-black iterations per solve task.
    pub sweeps_per_task: usize,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            extents: [64, 64],
            colors: [1, 1],
            lengths: [1.0, 1.0],
            boundary: 0.0,
            tolerance: 1e-8,
            max_tasks: 10_000,
            sweeps_per_task: 50,
        }
    }
}

impl PoissonConfig {
    pub fn square(n: usize, colors: [usize; 2]) -> Self {
        Self {
            extents: [n, n],
            colors,
            ..Self::default()
        }
    }

    /// Applies the keys present in `kv` on top of `self`.
    pub fn apply(mut self, kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.check_known(CONFIG_KEYS)?;
        if let Some(v) = pair(kv, "extents")? {
            self.extents = v;
        }
        if let Some(v) = pair(kv, "colors")? {
            self.colors = v;
        }
        if let Some(v) = pair(kv, "lengths")? {
            self.lengths = v;
        }
        if let Some(v) = kv.get("boundary")? {
            self.boundary = v;
        }
        if let Some(v) = kv.get("tolerance")? {
            self.tolerance = v;
        }
        if let Some(v) = kv.get("max_tasks")? {
            self.max_tasks = v;
        }
        if let Some(v) = kv.get("sweeps_per_task")? {
            self.sweeps_per_task = v;
        }
        Ok(self)
    }
}

fn pair<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<[T; 2]>, ConfigError> {
    kv.get_list::<T>(key)?
        .map(|v| {
            <[T; 2]>::try_from(v).map_err(|_| ConfigError::Value {
                key: key.into(),
                value: kv.raw(key).unwrap_or_default().into(),
            })
        })
        .transpose()
}

pub const CONFIG_KEYS: &[&str] = &[
    "extents",
    "colors",
    "lengths",
    "boundary",
    "tolerance",
    "max_tasks",
    "sweeps_per_task",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonProblem {
    pub config: PoissonConfig,
    pub dx: f64,
    pub dy: f64,
    pub topology: Arc<MeshTopology>,
}

impl PoissonProblem {
    pub fn new(config: &PoissonConfig) -> Result<Self, RuntimeError> {
        let [lx, ly] = config.lengths;
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(RuntimeError::InvalidConfig(format!("domain lengths must be positive, got {lx}, {ly}")));
        }
        if !(config.tolerance > 0.0) {
            return Err(RuntimeError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                config.tolerance
            )));
        }
        let topology = Arc::new(MeshTopology::decompose(&config.extents, &config.colors)?);
        Ok(Self {
            config: config.clone(),
            dx: lx / config.extents[0] as f64,
            dy: ly / config.extents[1] as f64,
            topology,
        })
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Manufactured solution `sin(πx/Lx)·sin(πy/Ly)`.
    pub fn exact(&self, x: f64, y: f64) -> f64 {
        let [lx, ly] = self.config.lengths;
        (PI * x / lx).sin() * (PI * y / ly).sin()
    }

    /// Right-hand side matching [`PoissonProblem::exact`].
    pub fn rhs(&self, x: f64, y: f64) -> f64 {
        let [lx, ly] = self.config.lengths;
        -PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly)) * self.exact(x, y)
    }
}

/// One neighbor of a cell in the five-point stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Interior(f64),
    /// Physical boundary with this Dirichlet value.
    Dirichlet(f64),
}

impl Neighbor {
    /// Contribution to the numerator and extra diagonal weight (in units of
    /// the axis' inverse squared spacing).
    fn split(self) -> (f64, f64) {
        match self {
            Neighbor::Interior(v) => (v, 0.0),
            Neighbor::Dirichlet(g) => (2.0 * g, 1.0),
        }
    }
}

/// Gauss-Seidel update of one cell: `nbrs` are west, east, south, north.
/// Pass `dy = f64::INFINITY` for a one-dimensional row.
pub fn gsm_update(nbrs: [Neighbor; 4], f: f64, dx: f64, dy: f64) -> f64 {
    let (idx2, idy2) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    stencil_update(nbrs, f, idx2, idy2)
}

#[inline]
fn stencil_update(nbrs: [Neighbor; 4], f: f64, idx2: f64, idy2: f64) -> f64 {
    let (sx, dxb) = (nbrs[0].split(), nbrs[1].split());
    let (sy, dyb) = (nbrs[2].split(), nbrs[3].split());
    let num = (sx.0 + dxb.0) * idx2 + (sy.0 + dyb.0) * idy2 - f;
    let diag = (2.0 + sx.1 + dxb.1) * idx2 + (2.0 + sy.1 + dyb.1) * idy2;
    num / diag
}

#[inline]
fn stencil_residual(nbrs: [Neighbor; 4], p: f64, f: f64, idx2: f64, idy2: f64) -> f64 {
    let (sx, dxb) = (nbrs[0].split(), nbrs[1].split());
    let (sy, dyb) = (nbrs[2].split(), nbrs[3].split());
    let diag = (2.0 + sx.1 + dxb.1) * idx2 + (2.0 + sy.1 + dyb.1) * idy2;
    (sx.0 + dxb.0) * idx2 + (sy.0 + dyb.0) * idy2 - diag * p - f
}

/// Index arithmetic for one color's block of a scalar 2D field.
#[derive(Clone, Copy)]
struct Grid {
    nx: usize,
    ny: usize,
    h: usize,
    row: usize,
    gx: usize,
    gy: usize,
    west: bool,
    east: bool,
    south: bool,
    north: bool,
}

impl Grid {
    fn new(block: &LocalBlock) -> Self {
        Self {
            nx: block.owned_extent(0),
            ny: block.owned_extent(1),
            h: block.halo(0),
            row: block.stride(1),
            gx: block.owned_range(0).start,
            gy: block.owned_range(1).start,
            west: block.is_boundary(0, Side::Low),
            east: block.is_boundary(0, Side::High),
            south: block.is_boundary(1, Side::Low),
            north: block.is_boundary(1, Side::High),
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (j + self.h) * self.row + i + self.h
    }

    #[inline]
    fn neighbors(&self, p: &[f64], i: usize, j: usize) -> [Neighbor; 4] {
        let off = self.offset(i, j);
        let pick = |boundary: bool, at: usize| {
            if boundary {
                Neighbor::Dirichlet(p[at])
            } else {
                Neighbor::Interior(p[at])
            }
        };
        [
            pick(self.west && i == 0, off - 1),
            pick(self.east && i + 1 == self.nx, off + 1),
            pick(self.south && j == 0, off - self.row),
            pick(self.north && j + 1 == self.ny, off + self.row),
        ]
    }
}

/// Updates every owned cell with `(i + j) % 2 == parity` (global indices).
/// Cells of one parity only read the other parity, so the in-place order
/// within a half-sweep does not matter.
pub fn gsm_sweep(block: &LocalBlock, p: &mut [f64], f: &[f64], parity: usize, dx: f64, dy: f64) {
    let g = Grid::new(block);
    let (idx2, idy2) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    for j in 0..g.ny {
        let first = (parity + g.gx + g.gy + j) % 2;
        for i in (first..g.nx).step_by(2) {
            let nbrs = g.neighbors(p, i, j);
            let off = g.offset(i, j);
            p[off] = stencil_update(nbrs, f[off], idx2, idy2);
        }
    }
}

fn residual_squares(block: &LocalBlock, p: &[f64], f: &[f64], dx: f64, dy: f64) -> ExactSum {
    let g = Grid::new(block);
    let (idx2, idy2) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    let mut acc = ExactSum::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let off = g.offset(i, j);
            let r = stencil_residual(g.neighbors(p, i, j), p[off], f[off], idx2, idy2);
            acc.add(r * r);
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub p: FieldHandle,
    pub f: FieldHandle,
    /// Red-black iterations submitted so far.
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonReport {
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub solve_tasks: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Poisson {
    pub problem: PoissonProblem,
    pub state: SolverState,
}

impl Poisson {
    /// Registers `p` and `f`, fills `f` with the manufactured right-hand side
    /// and sets `p` to zero with Dirichlet values in the boundary ghosts.
    pub fn init(rt: &mut Runtime, config: &PoissonConfig) -> Result<Self, RuntimeError> {
        let problem = PoissonProblem::new(config)?;
        let p = rt.register_field(&problem.topology, "p", ElementKind::Scalar)?;
        let f = rt.register_field(&problem.topology, "f", ElementKind::Scalar)?;
        let (ph, fh, prob) = (p.clone(), f.clone(), problem.clone());
        rt.submit(
            TaskSpec::new("poisson:init", move |ctx| {
                let mut fv = ctx.view_mut(&fh)?;
                ctx.for_each_cell(&mut fv, |c, out| {
                    let (x, y) = prob.cell_center(c.global[0], c.global[1]);
                    out[0] = prob.rhs(x, y);
                });
                let mut pv = ctx.view_mut(&ph)?;
                let block = pv.block();
                let g = prob.config.boundary;
                for b in block.boundary_ranges() {
                    for cell in block.slab_cells(b.axis, b.local.clone()) {
                        pv.values_mut()[cell.offset] = g;
                    }
                }
                ctx.for_each_cell(&mut pv, |_, out| out[0] = 0.0);
                Ok(Partial::None)
            })
            .write_discard(&p)
            .write_discard(&f),
        )?;
        Ok(Self {
            problem,
            state: SolverState {
                p,
                f,
                iterations: 0,
                residuals: Vec::new(),
            },
        })
    }

    /// One solve task: `sweeps_per_task` red-black iterations, each half
    /// sweep preceded by a ghost exchange.
    pub fn solve_spec(&self) -> TaskSpec {
        let (p, f) = (self.state.p.clone(), self.state.f.clone());
        let (dx, dy) = (self.problem.dx, self.problem.dy);
        let sweeps = self.problem.config.sweeps_per_task;
        TaskSpec::new("poisson:solve", move |ctx| {
            let mut pv = ctx.view_mut(&p)?;
            let fv = ctx.view(&f)?;
            let block = pv.block();
            for _ in 0..sweeps {
                for parity in [0, 1] {
                    ctx.exchange(&mut pv)?;
                    gsm_sweep(block, pv.values_mut(), fv.values(), parity, dx, dy);
                }
            }
            Ok(Partial::None)
        })
        .read_write(&self.state.p)
        .read_owned(&self.state.f)
    }

    /// Residual norm `‖A·p − f‖₂` as a task; the value is the sum of squares.
    pub fn residual_spec(&self) -> TaskSpec {
        let (p, f) = (self.state.p.clone(), self.state.f.clone());
        let (dx, dy) = (self.problem.dx, self.problem.dy);
        TaskSpec::new("poisson:residual", move |ctx| {
            let pv = ctx.view(&p)?;
            let fv = ctx.view(&f)?;
            Ok(Partial::Sum(residual_squares(pv.block(), pv.values(), fv.values(), dx, dy)))
        })
        .read(&self.state.p)
        .read_owned(&self.state.f)
    }

    pub fn solve_task(&mut self, rt: &mut Runtime) -> Result<TaskResult, RuntimeError> {
        self.submit_solve(rt, self.solve_spec())
    }

    /// Submits a (possibly wrapped) solve spec and advances the counters.
    pub fn submit_solve(&mut self, rt: &mut Runtime, spec: TaskSpec) -> Result<TaskResult, RuntimeError> {
        let r = rt.submit(spec)?;
        self.state.iterations += self.problem.config.sweeps_per_task;
        Ok(r)
    }

    /// Submits a residual task, waits for it and records the norm.
    pub fn residual(&mut self, rt: &mut Runtime) -> Result<f64, RuntimeError> {
        let spec = self.residual_spec();
        self.wait_residual(rt.submit(spec)?)
    }

    pub fn wait_residual(&mut self, result: TaskResult) -> Result<f64, RuntimeError> {
        let r = result.wait_scalar()?.sqrt();
        self.state.residuals.push(r);
        Ok(r)
    }

    /// Solve tasks until the residual drops below the tolerance or the task
    /// budget runs out. Not converging is reported, not an error.
    pub fn run(&mut self, rt: &mut Runtime) -> Result<PoissonReport, RuntimeError> {
        let cfg = &self.problem.config;
        let (tol, max_tasks) = (cfg.tolerance, cfg.max_tasks);
        let mut tasks = 0;
        let mut converged = false;
        while tasks < max_tasks {
            self.solve_task(rt)?;
            tasks += 1;
            if self.residual(rt)? < tol {
                converged = true;
                break;
            }
        }
        Ok(PoissonReport {
            residuals: self.state.residuals.clone(),
            converged,
            solve_tasks: tasks,
            iterations: self.state.iterations,
        })
    }

    pub fn pressure(&self, rt: &mut Runtime) -> Result<Vec<f64>, RuntimeError> {
        rt.gather(&self.state.p)
    }

    /// Largest pointwise deviation from the manufactured solution.
    pub fn linf_error(&self, rt: &mut Runtime) -> Result<f64, RuntimeError> {
        let p = self.pressure(rt)?;
        let [nx, _] = self.problem.config.extents;
        Ok(p.iter()
            .enumerate()
            .map(|(k, &v)| {
                let (x, y) = self.problem.cell_center(k % nx, k / nx);
                (v - self.problem.exact(x, y)).abs()
            })
            .fold(0.0, f64::max))
    }
}
