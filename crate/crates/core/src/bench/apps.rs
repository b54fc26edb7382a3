//! Applications the harness can time, one iteration at a time.

use std::sync::Arc;

use super::stats::Aggregation;
use crate::hydro::{Hydro, HydroConfig, SpecWrap};
use crate::poisson::{Poisson, PoissonConfig};
use crate::registry::Registry;
use crate::runtime::Runtime;

/// Splits `ranks` into `dims` near-equal power-of-two factors, largest
/// first. `None` unless `ranks` is a power of two.
pub fn split_pow2(value: usize, dims: usize) -> Option<Vec<usize>> {
    if !value.is_power_of_two() {
        return None;
    }
    let bits = value.trailing_zeros() as usize;
    Some(
        (0..dims)
            .map(|a| 1usize << (bits / dims + usize::from(a < bits % dims)))
            .collect(),
    )
}

/// Global extents and color grid for `cells` total cells over `ranks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPlan {
    pub extents: Vec<usize>,
    pub colors: Vec<usize>,
}

impl GridPlan {
    /// Blocks of equal power-of-two shape, `cells / ranks` cells each.
    pub fn power_of_two(cells: usize, ranks: usize, dims: usize, min_block: usize) -> Result<Self, String> {
        if ranks == 0 || cells % ranks != 0 {
            return Err(format!("{cells} cells do not split evenly over {ranks} ranks"));
        }
        let per_rank = cells / ranks;
        let block = split_pow2(per_rank, dims)
            .ok_or_else(|| format!("per-rank size {per_rank} is not a power of two"))?;
        let colors = split_pow2(ranks, dims).ok_or_else(|| format!("rank count {ranks} is not a power of two"))?;
        if let Some(b) = block.iter().find(|&&b| b < min_block) {
            return Err(format!("per-rank block side {b} is below the minimum {min_block}"));
        }
        Ok(Self {
            extents: block.iter().zip(&colors).map(|(b, c)| b * c).collect(),
            colors,
        })
    }
}

/// A prepared application instance; `iteration` submits one timed unit of
/// work through `wrap`.
pub trait BenchInstance {
    fn iteration(&mut self, rt: &mut Runtime, wrap: SpecWrap<'_>) -> Result<(), String>;
}

pub trait BenchApp: Send + Sync {
    fn name(&self) -> &'static str;
    fn aggregation(&self) -> Aggregation;
    fn plan(&self, cells: usize, ranks: usize) -> Result<GridPlan, String>;
    fn prepare(&self, rt: &mut Runtime, plan: &GridPlan) -> Result<Box<dyn BenchInstance>, String>;
}

/// One red-black solve task (its configured sweeps) per iteration.
#[derive(Debug, Default)]
pub struct PoissonApp;

struct PoissonInstance(Poisson);

impl BenchInstance for PoissonInstance {
    fn iteration(&mut self, rt: &mut Runtime, wrap: SpecWrap<'_>) -> Result<(), String> {
        let spec = wrap(self.0.solve_spec());
        self.0.submit_solve(rt, spec).map(|_| ()).map_err(|e| e.to_string())
    }
}

impl BenchApp for PoissonApp {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn aggregation(&self) -> Aggregation {
        Aggregation::Mean95
    }

    fn plan(&self, cells: usize, ranks: usize) -> Result<GridPlan, String> {
        GridPlan::power_of_two(cells, ranks, 2, 1)
    }

    fn prepare(&self, rt: &mut Runtime, plan: &GridPlan) -> Result<Box<dyn BenchInstance>, String> {
        let config = PoissonConfig {
            extents: [plan.extents[0], plan.extents[1]],
            colors: [plan.colors[0], plan.colors[1]],
            ..PoissonConfig::default()
        };
        let p = Poisson::init(rt, &config).map_err(|e| e.to_string())?;
        Ok(Box::new(PoissonInstance(p)))
    }
}

/// Far beyond any benchmark's reach; steps are never clipped.
const BENCH_END_TIME: f64 = 1e9;

/// One full 3D operator-split step of the shock scenario per iteration.
#[derive(Debug)]
pub struct HydroApp {
    pub radiation: bool,
}

struct HydroInstance(Hydro);

impl BenchInstance for HydroInstance {
    fn iteration(&mut self, rt: &mut Runtime, wrap: SpecWrap<'_>) -> Result<(), String> {
        self.0.step_with(rt, wrap).map(|_| ()).map_err(|e| e.to_string())
    }
}

impl BenchApp for HydroApp {
    fn name(&self) -> &'static str {
        if self.radiation {
            "hydro"
        } else {
            "hydro_norad"
        }
    }

    fn aggregation(&self) -> Aggregation {
        Aggregation::MedianOfRunMedians
    }

    fn plan(&self, cells: usize, ranks: usize) -> Result<GridPlan, String> {
        GridPlan::power_of_two(cells, ranks, 3, crate::hydro::scheme::STENCIL_HALO)
    }

    fn prepare(&self, rt: &mut Runtime, plan: &GridPlan) -> Result<Box<dyn BenchInstance>, String> {
        let config = HydroConfig {
            scenario: "rankine_hugoniot".into(),
            extents: plan.extents.clone(),
            colors: plan.colors.clone(),
            radiation: self.radiation,
            end_time: BENCH_END_TIME,
            benchmark: true,
            ..HydroConfig::default()
        };
        let h = Hydro::init(rt, &config).map_err(|e| e.to_string())?;
        Ok(Box::new(HydroInstance(h)))
    }
}

pub type AppFactory = fn() -> Arc<dyn BenchApp>;

pub fn app_registry() -> Registry<AppFactory> {
    let mut r: Registry<AppFactory> = Registry::new("benchmark app");
    r.register("poisson", "2D red-black Gauss-Seidel, one solve task per iteration", || {
        Arc::new(PoissonApp)
    });
    r.register("hydro", "3D shock with radiation diffusion, one step per iteration", || {
        Arc::new(HydroApp { radiation: true })
    });
    r.register_with_aliases(
        "hydro_norad",
        &["hydro-norad"],
        "3D shock, hydrodynamics only, one step per iteration",
        || Arc::new(HydroApp { radiation: false }),
    );
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans() {
        assert_eq!(split_pow2(8, 3), Some(vec![2, 2, 2]));
        assert_eq!(split_pow2(32, 2), Some(vec![8, 4]));
        assert_eq!(split_pow2(6, 2), None);
        let p = GridPlan::power_of_two(1 << 16, 4, 2, 1).unwrap();
        assert_eq!((p.extents, p.colors), (vec![256, 256], vec![2, 2]));
        let p = GridPlan::power_of_two(1 << 15, 2, 2, 1).unwrap();
        assert_eq!((p.extents, p.colors), (vec![256, 128], vec![2, 1]));
        assert!(GridPlan::power_of_two(64, 8, 3, 3).is_err());
        assert!(GridPlan::power_of_two(100, 3, 2, 1).is_err());
    }
}
