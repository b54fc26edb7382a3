//! Quick self-checks against closed-form references, run by the CLI.

use std::fmt;

use crate::exec::ExecutorConfig;
use crate::hydro::exact::ExactRiemann;
use crate::hydro::scenario::Sod;
use crate::hydro::scheme::heun;
use crate::hydro::weno::weno5z;
use crate::hydro::{Hydro, HydroConfig};
use crate::poisson::{Poisson, PoissonConfig};
use crate::runtime::Runtime;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    /// Human-readable acceptance rule.
    pub rule: String,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<26} {:>12.6e}  ({})", self.name, self.measured, self.rule)
    }
}

fn within(name: &'static str, measured: f64, target: f64, tol: f64) -> Check {
    Check {
        name,
        measured,
        rule: format!("{target} ± {tol}"),
        passed: (measured - target).abs() <= tol,
    }
}

fn below(name: &'static str, measured: f64, bound: f64) -> Check {
    Check {
        name,
        measured,
        rule: format!("< {bound:e}"),
        passed: measured < bound,
    }
}

fn poisson_error(n: usize, colors: [usize; 2]) -> Result<(f64, Vec<f64>), String> {
    let mut rt = Runtime::new(ExecutorConfig::sequential(colors[0] * colors[1])).map_err(|e| e.to_string())?;
    let cfg = PoissonConfig {
        tolerance: 1e-9,
        ..PoissonConfig::square(n, colors)
    };
    let mut p = Poisson::init(&mut rt, &cfg).map_err(|e| e.to_string())?;
    p.run(&mut rt).map_err(|e| e.to_string())?;
    let err = p.linf_error(&mut rt).map_err(|e| e.to_string())?;
    Ok((err, p.pressure(&mut rt).map_err(|e| e.to_string())?))
}

fn sod(executor: &str, colors: usize, cells: usize, steps: Option<usize>) -> Result<(Hydro, Runtime), String> {
    let cfg = HydroConfig {
        colors: vec![colors],
        max_steps: steps.unwrap_or(usize::MAX),
        ..HydroConfig::cube("sod", 1, cells)
    };
    let mut rt = Runtime::new(cfg.executor(executor, 1)).map_err(|e| e.to_string())?;
    let mut h = Hydro::init(&mut rt, &cfg).map_err(|e| e.to_string())?;
    h.run(&mut rt).map_err(|e| e.to_string())?;
    Ok((h, rt))
}

/// Runs every check; an error means a check could not execute at all.
pub fn run_checks() -> Result<Vec<Check>, String> {
    let mut out = Vec::new();

    let errs: Vec<f64> = [16, 32, 64]
        .into_iter()
        .map(|n| poisson_error(n, [1, 1]).map(|r| r.0))
        .collect::<Result<_, _>>()?;
    out.push(within("poisson_order", (errs[1] / errs[2]).log2(), 2.0, 0.2));
    let (_, single) = poisson_error(32, [1, 1])?;
    let (_, multi) = poisson_error(32, [2, 2])?;
    let mismatched = single.iter().zip(&multi).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    out.push(below("poisson_rank_mismatches", mismatched as f64, 1.0));

    let (h, mut rt) = sod("async_dag", 4, 400, None)?;
    let exact = ExactRiemann::new(Sod::LEFT, Sod::RIGHT, 1.4)?;
    let q = h.primitives(&mut rt).map_err(|e| e.to_string())?;
    let l1: f64 = q
        .iter()
        .enumerate()
        .map(|(i, c)| (c[0] - exact.at((i as f64 + 0.5) / 400.0, 0.5, 0.2).rho).abs() / 400.0)
        .sum();
    out.push(below("sod_density_l1", l1, 1e-2));

    let (a, mut ra) = sod("sequential", 2, 200, Some(20))?;
    let (b, mut rb) = sod("async_dag", 2, 200, Some(20))?;
    let (sa, sb) = (a.state(&mut ra).map_err(|e| e.to_string())?, b.state(&mut rb).map_err(|e| e.to_string())?);
    let mismatched = sa.iter().zip(&sb).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    out.push(below("executor_mismatches", mismatched as f64, 1.0));

    let weno_err = |h: f64| {
        let v: [f64; 5] = std::array::from_fn(|k| {
            let lo = 0.3 + (k as f64 - 2.0) * h;
            (lo.cos() - (lo + h).cos()) / h
        });
        (weno5z(v) - (0.3 + h).sin()).abs()
    };
    out.push(within("weno_order", (weno_err(0.05) / weno_err(0.025)).log2(), 5.0, 0.5));

    out.push(within("heun_scalar", heun(1.0, 0.1, |y| -y), 0.905, 0.0));
    Ok(out)
}
