//! Scaling harness: size sweeps, strong and weak scaling over simulated
//! ranks, timed inside task bodies and written as one flat CSV.
//!
//! CSV columns, in order: `app, mode, executor, collective, ranks, workers,
//! global_size, per_rank_size, run, metric, value, unit, p2p_msgs,
//! coll_msg_ops, coll_rounds, mean, median, min, max, ci95_half_width,
//! samples, error`. Sizes count cells. `run` is empty on aggregate rows.
//! Communication counters cover the timed iterations of the last run.
//! Rows for infeasible points carry the reason in `error` and leave the
//! measurement columns empty.

pub mod apps;
pub mod stats;
pub mod timing;

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use apps::{app_registry, BenchApp, BenchInstance, GridPlan};
pub use stats::{summarize, Aggregation, StatSummary};
pub use timing::{timed_task, Timer, TimingSample};

use crate::config::{ConfigError, KeyValues};
use crate::exec::transport::CommStats;
use crate::exec::ExecutorConfig;
use crate::registry::UnknownName;
use crate::runtime::Runtime;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Unknown(#[from] UnknownName),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid benchmark configuration: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One rank, sizes doubling from `size`.
    SizeSweep,
    /// Fixed global size `size` across the rank list.
    Strong,
    /// Fixed per-rank size `size` across the rank list.
    Weak,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SizeSweep => "size_sweep",
            Mode::Strong => "strong",
            Mode::Weak => "weak",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "size_sweep" | "sweep" => Ok(Mode::SizeSweep),
            "strong" => Ok(Mode::Strong),
            "weak" => Ok(Mode::Weak),
            other => Err(format!("unknown mode '{other}' (available: size_sweep, strong, weak)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub app: String,
    pub mode: Mode,
    pub executor: String,
    pub collective: String,
    /// Ascending rank counts; ignored by `size_sweep`.
    pub ranks: Vec<usize>,
    pub workers: usize,
    /// Cells: global for `strong`, per rank for `weak`, first point of
    /// `size_sweep`.
    pub size: usize,
    /// Points in a size sweep.
    pub sweep_steps: usize,
    pub runs: usize,
    pub iterations: usize,
    /// Untimed iterations at the start of every run.
    pub warmup: usize,
    pub output: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            app: "poisson".into(),
            mode: Mode::Weak,
            executor: "sequential".into(),
            collective: "binomial_tree".into(),
            ranks: vec![1, 2, 4, 8],
            workers: 1,
            size: 1 << 16,
            sweep_steps: 5,
            runs: 10,
            iterations: 5,
            warmup: 0,
            output: PathBuf::from("bench.csv"),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "app",
    "mode",
    "executor",
    "collective",
    "ranks",
    "workers",
    "size",
    "size_per_rank",
    "global_size",
    "sweep_steps",
    "runs",
    "iterations",
    "warmup",
    "output",
];

impl BenchConfig {
    /// Applies the keys present in `kv` on top of `self`.
    pub fn apply(mut self, kv: &KeyValues) -> Result<Self, BenchError> {
        kv.check_known(CONFIG_KEYS)?;
        for key in ["app", "executor", "collective"] {
            if let Some(v) = kv.raw(key) {
                let slot = match key {
                    "app" => &mut self.app,
                    "executor" => &mut self.executor,
                    _ => &mut self.collective,
                };
                *slot = v.to_string();
            }
        }
        if let Some(v) = kv.raw("output") {
            self.output = PathBuf::from(v);
        }
        if let Some(v) = kv.get("mode")? {
            self.mode = v;
        }
        if let Some(v) = kv.get_list("ranks")? {
            self.ranks = v;
        }
        for key in ["size", "size_per_rank", "global_size"] {
            if let Some(v) = kv.get(key)? {
                self.size = v;
            }
        }
        macro_rules! scalar {
            ($($key:literal => $field:ident),*) => {$(
                if let Some(v) = kv.get($key)? {
                    self.$field = v;
                }
            )*};
        }
        scalar!("workers" => workers, "sweep_steps" => sweep_steps, "runs" => runs,
            "iterations" => iterations, "warmup" => warmup);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Invalid(m.into()));
        app_registry().get(&self.app)?;
        ExecutorConfig::default()
            .with_executor(&self.executor)
            .with_collective(&self.collective)
            .validate()
            .map_err(|e| BenchError::Invalid(e.to_string()))?;
        if self.mode != Mode::SizeSweep {
            if self.ranks.is_empty() || self.ranks.contains(&0) {
                return bad("rank list must be non-empty with positive entries");
            }
            if self.ranks.windows(2).any(|w| w[0] >= w[1]) {
                return bad("rank list must be strictly ascending");
            }
        }
        if self.runs == 0 || self.iterations == 0 {
            return bad("runs and iterations must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.size == 0 {
            return bad("size must be positive");
        }
        if self.mode == Mode::SizeSweep && self.sweep_steps == 0 {
            return bad("sweep_steps must be at least 1");
        }
        Ok(())
    }

    /// `(ranks, global cells)` for every point, in output order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        match self.mode {
            Mode::SizeSweep => (0..self.sweep_steps).map(|k| (1, self.size << k)).collect(),
            Mode::Strong => self.ranks.iter().map(|&p| (p, self.size)).collect(),
            Mode::Weak => self.ranks.iter().map(|&p| (p, self.size * p)).collect(),
        }
    }

    fn executor_config(&self, ranks: usize) -> ExecutorConfig {
        ExecutorConfig {
            ranks,
            workers_per_rank: self.workers,
            ..ExecutorConfig::default()
        }
        .with_executor(&self.executor)
        .with_collective(&self.collective)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub app: String,
    pub mode: Mode,
    pub executor: String,
    pub collective: String,
    pub ranks: usize,
    pub workers: usize,
    pub global_size: usize,
    pub per_rank_size: usize,
    pub run: Option<usize>,
    pub metric: String,
    pub value: Option<f64>,
    pub unit: String,
    pub p2p_msgs: Option<u64>,
    pub coll_msg_ops: Option<u64>,
    pub coll_rounds: Option<u64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub ci95_half_width: Option<f64>,
    pub samples: Option<usize>,
    pub error: Option<String>,
}

impl BenchRow {
    pub fn summary(&self) -> Option<StatSummary> {
        Some(StatSummary {
            mean: self.mean?,
            median: self.median?,
            min: self.min?,
            max: self.max?,
            ci95_half_width: self.ci95_half_width?,
            samples: self.samples?,
        })
    }

    /// Columns that do not depend on the clock.
    pub fn without_timing(&self) -> Self {
        Self {
            value: None,
            mean: None,
            median: None,
            min: None,
            max: None,
            ci95_half_width: None,
            ..self.clone()
        }
    }
}

pub const CSV_HEADER: &[&str] = &[
    "app",
    "mode",
    "executor",
    "collective",
    "ranks",
    "workers",
    "global_size",
    "per_rank_size",
    "run",
    "metric",
    "value",
    "unit",
    "p2p_msgs",
    "coll_msg_ops",
    "coll_rounds",
    "mean",
    "median",
    "min",
    "max",
    "ci95_half_width",
    "samples",
    "error",
];

pub fn metric_name(aggregation: Aggregation) -> &'static str {
    match aggregation {
        Aggregation::Mean95 => "mean_iteration_time",
        Aggregation::MedianOfRunMedians => "median_iteration_time",
    }
}

/// Measurements of one point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub summary: StatSummary,
    /// Iteration times, `runs[r][i]`.
    pub runs: Vec<Vec<f64>>,
    pub comm: CommStats,
}

/// Times `config.iterations` iterations of `app` on a fresh runtime per run.
pub fn measure_point(
    config: &BenchConfig,
    app: &dyn BenchApp,
    plan: &GridPlan,
    ranks: usize,
) -> Result<PointResult, String> {
    let mut runs = Vec::with_capacity(config.runs);
    let mut comm = CommStats::default();
    for run in 0..config.runs {
        let mut rt = Runtime::new(config.executor_config(ranks)).map_err(|e| e.to_string())?;
        let mut instance = app.prepare(&mut rt, plan)?;
        for _ in 0..config.warmup {
            instance.iteration(&mut rt, &mut |s| s)?;
        }
        rt.fence().map_err(|e| e.to_string())?;
        rt.reset_comm_stats();
        let timer = Timer::new(ranks);
        for it in 0..config.iterations {
            instance.iteration(&mut rt, &mut |s| timer.wrap(s, run, it))?;
        }
        rt.fence().map_err(|e| e.to_string())?;
        comm = rt.comm_stats();
        let times = timer.iteration_times();
        runs.push((0..config.iterations).map(|it| times.get(&(run, it)).copied().unwrap_or(0.0)).collect());
    }
    let summary = summarize(&runs, app.aggregation()).map_err(|e| e.to_string())?;
    Ok(PointResult { summary, runs, comm })
}

/// Runs every point of `config` and returns one row per point. Points that
/// cannot be planned or fail at run time yield error rows.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    config.validate()?;
    let app = (app_registry().get(&config.app)?)();
    let metric = metric_name(app.aggregation());
    let mut rows = Vec::new();
    for (ranks, global) in config.points() {
        let mut row = BenchRow {
            app: app.name().into(),
            mode: config.mode,
            executor: config.executor.clone(),
            collective: config.collective.clone(),
            ranks,
            workers: config.workers,
            global_size: global,
            per_rank_size: global / ranks,
            run: None,
            metric: metric.into(),
            value: None,
            unit: "s".into(),
            p2p_msgs: None,
            coll_msg_ops: None,
            coll_rounds: None,
            mean: None,
            median: None,
            min: None,
            max: None,
            ci95_half_width: None,
            samples: None,
            error: None,
        };
        match app.plan(global, ranks).and_then(|plan| measure_point(config, app.as_ref(), &plan, ranks)) {
            Ok(r) => {
                let s = r.summary;
                row.value = Some(s.value(app.aggregation()));
                row.p2p_msgs = Some(r.comm.total_point_to_point());
                row.coll_msg_ops = Some(r.comm.max_collective_message_ops());
                row.coll_rounds = Some(r.comm.max_collective_rounds());
                row.mean = Some(s.mean);
                row.median = Some(s.median);
                row.min = Some(s.min);
                row.max = Some(s.max);
                row.ci95_half_width = Some(s.ci95_half_width);
                row.samples = Some(s.samples);
            }
            Err(e) => row.error = Some(e),
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses rows back, rejecting a header that differs from [`CSV_HEADER`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(BenchError::Invalid(format!("unexpected CSV header: {}", header.join(","))));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_csv_file(path: &Path, rows: &[BenchRow]) -> Result<(), BenchError> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<BenchRow>, BenchError> {
    read_csv(std::fs::File::open(path)?)
}
