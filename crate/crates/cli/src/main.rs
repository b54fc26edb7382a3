use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use taskgrid::bench::{run_benchmark, write_csv_file, BenchConfig, Mode};
use taskgrid::config::KeyValues;
use taskgrid::exec::ExecutorConfig;
use taskgrid::hydro::{Boundary, Hydro, HydroConfig};
use taskgrid::poisson::{Poisson, PoissonConfig};
use taskgrid::runtime::Runtime;

/// Task-graph runtime driver: scaling benchmarks, single application runs
/// and self-checks.
#[derive(Debug, Parser)]
#[command(name = "taskgrid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time an application over a rank list or a size sweep and write CSV.
    Bench(BenchArgs),
    /// Run one application to completion and write its final state.
    Run(RunArgs),
    /// Run the built-in reference checks; nonzero exit if any fails.
    Validate,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Application: poisson, hydro or hydro_norad.
    #[arg(long, required_unless_present = "config")]
    app: Option<String>,
    /// size_sweep, strong or weak.
    #[arg(long, default_value = "weak")]
    mode: Mode,
    /// Executor: sequential or async_dag.
    #[arg(long, default_value = "sequential")]
    executor: String,
    /// Allreduce algorithm: binomial_tree or star.
    #[arg(long, default_value = "binomial_tree")]
    collective: String,
    /// Ascending rank counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    ranks: Vec<usize>,
    /// Worker threads per rank.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Cells per rank (weak mode).
    #[arg(long, conflicts_with_all = ["global_size", "size"])]
    size_per_rank: Option<usize>,
    /// Total cells (strong mode).
    #[arg(long, conflicts_with = "size")]
    global_size: Option<usize>,
    /// Problem size in cells, read according to the mode.
    #[arg(long)]
    size: Option<usize>,
    /// Sizes in a size sweep, doubling each time.
    #[arg(long, default_value_t = 5)]
    sweep_steps: usize,
    /// Independent runs, each on a fresh runtime.
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Timed iterations per run.
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    /// Untimed iterations at the start of each run.
    #[arg(long, default_value_t = 0)]
    warmup: usize,
    /// CSV output path.
    #[arg(long, default_value = "bench.csv")]
    output: PathBuf,
    /// key = value file; its entries override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Application: poisson or hydro.
    #[arg(long)]
    app: String,
    /// Hydro scenario: sod, rankine_hugoniot, smooth_wave or uniform.
    #[arg(long, default_value = "sod")]
    scenario: String,
    /// Cells per axis.
    #[arg(long)]
    cells: Option<usize>,
    /// Hydro dimensions (1 to 3); poisson is always 2D.
    #[arg(long, default_value_t = 1)]
    dims: usize,
    /// Color grid, one entry per axis.
    #[arg(long, value_delimiter = ',')]
    colors: Option<Vec<usize>>,
    #[arg(long, default_value = "sequential")]
    executor: String,
    #[arg(long, default_value = "binomial_tree")]
    collective: String,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Hydro end time.
    #[arg(long)]
    end_time: Option<f64>,
    /// Enable radiation diffusion (hydro).
    #[arg(long)]
    radiation: bool,
    /// Final-state CSV path.
    #[arg(long, default_value = "final_state.csv")]
    output: PathBuf,
    /// key = value file with application keys; overrides the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load(path: &Option<PathBuf>) -> Result<KeyValues> {
    match path {
        Some(p) => KeyValues::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(KeyValues::default()),
    }
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = BenchConfig {
        mode: args.mode,
        executor: args.executor,
        collective: args.collective,
        ranks: args.ranks,
        workers: args.workers,
        sweep_steps: args.sweep_steps,
        runs: args.runs,
        iterations: args.iterations,
        warmup: args.warmup,
        output: args.output,
        ..BenchConfig::default()
    };
    if let Some(app) = args.app {
        config.app = app;
    }
    if let Some(size) = args.size_per_rank.or(args.global_size).or(args.size) {
        config.size = size;
    }
    let config = config.apply(&load(&args.config)?)?;
    let rows = run_benchmark(&config)?;
    for r in &rows {
        match (&r.error, r.value) {
            (Some(e), _) => eprintln!("ranks {:>3}  size {:>10}  skipped: {e}", r.ranks, r.global_size),
            (None, Some(v)) => println!("ranks {:>3}  size {:>10}  {} {v:.6e} s", r.ranks, r.global_size, r.metric),
            (None, None) => {}
        }
    }
    write_csv_file(&config.output, &rows)?;
    println!("wrote {} rows to {}", rows.len(), config.output.display());
    Ok(())
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn run_hydro(args: RunArgs, mut kv: KeyValues) -> Result<()> {
    let mut cfg = HydroConfig::cube(&args.scenario, args.dims, args.cells.unwrap_or(400));
    if let Some(c) = args.colors {
        cfg.colors = c;
    }
    if let Some(t) = args.end_time {
        cfg.end_time = t;
    }
    cfg.radiation = args.radiation;
    let output = kv.remove("output").map(PathBuf::from).unwrap_or(args.output);
    let cfg = cfg.apply(&kv)?;
    let exec = ExecutorConfig {
        collective: args.collective,
        ..cfg.executor(&args.executor, args.workers)
    };
    let mut rt = Runtime::new(exec)?;
    let mut h = Hydro::init(&mut rt, &cfg)?;
    let report = h.run(&mut rt)?;
    print!("{}: {} steps to t = {}", cfg.scenario, report.steps, report.time);
    if h.boundaries[..cfg.dims()].iter().all(|b| *b == Boundary::Periodic) {
        print!(", relative drift of conserved totals {:.3e}", report.drift);
    }
    println!();
    if cfg.benchmark {
        println!("benchmark mode: state output disabled");
        return Ok(());
    }
    let q = h.primitives(&mut rt)?;
    let dims = cfg.dims();
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = axes[..dims].iter().map(|a| format!("i{a}")).collect();
    header.extend(axes[..dims].iter().map(|a| a.to_string()));
    header.push("rho".into());
    header.extend(axes[..dims].iter().map(|a| format!("u{a}")));
    header.push("p".into());
    if cfg.radiation {
        header.push("e_rad".into());
    }
    let rows = q.iter().enumerate().map(|(k, c)| {
        let g = h.global_index(k);
        let x = h.cell_center(g);
        let mut row: Vec<String> = g[..dims].iter().map(usize::to_string).collect();
        row.extend(x[..dims].iter().map(f64::to_string));
        row.extend(c.iter().map(f64::to_string));
        row
    });
    write_rows(&output, &header, rows)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn run_poisson(args: RunArgs, mut kv: KeyValues) -> Result<()> {
    let n = args.cells.unwrap_or(64);
    let mut cfg = PoissonConfig::square(n, [1, 1]);
    if let Some(c) = args.colors {
        cfg.colors = <[usize; 2]>::try_from(c).map_err(|c| anyhow::anyhow!("--colors needs 2 entries, got {c:?}"))?;
    }
    let output = kv.remove("output").map(PathBuf::from).unwrap_or(args.output);
    let cfg = cfg.apply(&kv)?;
    let exec = ExecutorConfig {
        ranks: cfg.colors[0] * cfg.colors[1],
        workers_per_rank: args.workers,
        ..ExecutorConfig::default()
    }
    .with_executor(&args.executor)
    .with_collective(&args.collective);
    let mut rt = Runtime::new(exec)?;
    let mut p = Poisson::init(&mut rt, &cfg)?;
    let report = p.run(&mut rt)?;
    println!(
        "poisson {}x{}: {} solve tasks, residual {:.3e}, converged {}, max error {:.3e}",
        cfg.extents[0],
        cfg.extents[1],
        report.solve_tasks,
        report.residuals.last().copied().unwrap_or(f64::NAN),
        report.converged,
        p.linf_error(&mut rt)?
    );
    let field = p.pressure(&mut rt)?;
    let nx = cfg.extents[0];
    let header: Vec<String> = ["i", "j", "x", "y", "p", "exact"].map(String::from).to_vec();
    let rows = field.iter().enumerate().map(|(k, &v)| {
        let (x, y) = p.problem.cell_center(k % nx, k / nx);
        vec![
            (k % nx).to_string(),
            (k / nx).to_string(),
            x.to_string(),
            y.to_string(),
            v.to_string(),
            p.problem.exact(x, y).to_string(),
        ]
    });
    write_rows(&output, &header, rows)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let kv = load(&args.config)?;
    match args.app.as_str() {
        "hydro" => run_hydro(args, kv),
        "poisson" => run_poisson(args, kv),
        other => bail!("unknown app '{other}' for run (available: hydro, poisson)"),
    }
}

fn validate() -> Result<()> {
    let checks = taskgrid::validate::run_checks().map_err(anyhow::Error::msg)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench(a) => bench(a),
        Command::Run(a) => run(a),
        Command::Validate => validate(),
    }
}
