//! Task-based parallel runtime on structured grids with inferred
//! dependencies, two executors over a simulated multi-rank transport, and
//! the Poisson and radiation-hydrodynamics applications used to benchmark
//! them.

pub mod bench;
pub mod config;
pub mod exec;
pub mod hydro;
pub mod poisson;
pub mod reduce;
pub mod registry;
pub mod runtime;
pub mod topology;
pub mod validate;
