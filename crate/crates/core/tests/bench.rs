mod common;

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskgrid::bench::{
    read_csv, read_csv_file, run_benchmark, summarize, timed_task, write_csv, write_csv_file, Aggregation,
    BenchConfig, Mode, Timer, CSV_HEADER,
};
use taskgrid::exec::ExecutorConfig;
use taskgrid::hydro::{Hydro, HydroConfig};
use taskgrid::poisson::{Poisson, PoissonConfig};
use taskgrid::reduce::Partial;
use taskgrid::runtime::{Runtime, TaskSpec};

use common::stats_oracle::{oracle, random_runs, to_seconds};

fn poisson_fields(timed: bool) -> (Vec<f64>, Vec<(u64, u64)>, Vec<f64>) {
    let mut rt = Runtime::new(ExecutorConfig::async_dag(4, 2)).unwrap();
    let mut p = Poisson::init(&mut rt, &PoissonConfig::square(32, [2, 2])).unwrap();
    let timer = Timer::new(4);
    let mut residuals = Vec::new();
    for it in 0..3 {
        let spec = p.solve_spec();
        let spec = if timed { timer.wrap(spec, 0, it) } else { spec };
        p.submit_solve(&mut rt, spec).unwrap();
        let r = p.residual_spec();
        let r = if timed { timer.wrap(r, 0, it) } else { r };
        residuals.push(rt.submit(r).unwrap().wait_scalar().unwrap());
    }
    let field = p.pressure(&mut rt).unwrap();
    if timed {
        assert_eq!(timer.samples().len(), 3 * 2 * 4);
    }
    (field, rt.edges().to_vec(), residuals)
}

#[test]
fn timing_leaves_poisson_untouched() {
    let (a, ea, ra) = poisson_fields(false);
    let (b, eb, rb) = poisson_fields(true);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(ea, eb);
    assert_eq!(ra, rb);
}

fn hydro_state(timed: bool) -> (Vec<f64>, Vec<(u64, u64)>) {
    let mut rt = Runtime::new(ExecutorConfig::async_dag(2, 1)).unwrap();
    let cfg = HydroConfig {
        extents: vec![16, 4, 4],
        colors: vec![2, 1, 1],
        radiation: true,
        ..HydroConfig::cube("rankine_hugoniot", 3, 4)
    };
    let mut h = Hydro::init(&mut rt, &cfg).unwrap();
    let timer = Timer::new(2);
    for it in 0..3 {
        if timed {
            h.step_with(&mut rt, &mut |s| timer.wrap(s, 0, it)).unwrap();
        } else {
            h.step(&mut rt).unwrap();
        }
    }
    if timed {
        assert!(timer.iteration_times().len() == 3);
    }
    (h.state(&mut rt).unwrap(), rt.edges().to_vec())
}

#[test]
fn timing_leaves_hydro_untouched() {
    let (a, ea) = hydro_state(false);
    let (b, eb) = hydro_state(true);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(ea, eb);
}

#[test]
fn sleep_sample_covers_the_sleep() {
    let mut rt = Runtime::new(ExecutorConfig::sequential(2)).unwrap();
    let timer = Timer::new(2);
    let nap = TaskSpec::new("nap", |_| {
        std::thread::sleep(Duration::from_millis(10));
        Ok(Partial::None)
    });
    timed_task(&mut rt, &timer, nap, 0, 0).unwrap();
    timed_task(&mut rt, &timer, TaskSpec::new("idle", |_| Ok(Partial::None)), 0, 1).unwrap();
    rt.fence().unwrap();
    let samples = timer.samples();
    assert_eq!(samples.len(), 4);
    for s in &samples {
        assert!(s.stop >= s.start);
        if s.label == "nap" {
            assert!(s.duration() >= 0.010 && s.duration() < 0.060, "{}", s.duration());
        }
    }
    assert_eq!(rt.edges(), &[]);
}

#[test]
fn summary_matches_integer_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..100 {
        let units = random_runs(&mut rng);
        let runs = to_seconds(&units);
        let o = oracle(&units);
        let m = summarize(&runs, Aggregation::Mean95).unwrap();
        assert_eq!(
            (m.mean, m.median, m.min, m.max, m.ci95_half_width, m.samples),
            (o.mean, o.median_all, o.min, o.max, o.ci95, o.samples)
        );
        let h = summarize(&runs, Aggregation::MedianOfRunMedians).unwrap();
        assert_eq!((h.median, h.min, h.max), (o.median_of_medians, o.min, o.max));
    }
}

fn small(mode: Mode, ranks: Vec<usize>, size: usize) -> BenchConfig {
    BenchConfig {
        mode,
        ranks,
        size,
        runs: 1,
        iterations: 2,
        ..BenchConfig::default()
    }
}

#[test]
fn weak_poisson_writes_one_row_per_rank_count() {
    let rows = run_benchmark(&small(Mode::Weak, vec![1, 2, 4], 1 << 16)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weak.csv");
    write_csv_file(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let back = read_csv_file(&path).unwrap();
    assert_eq!(back, rows);
    for (r, p) in back.iter().zip([1, 2, 4]) {
        assert_eq!((r.ranks, r.per_rank_size, r.global_size), (p, 1 << 16, p << 16));
        assert!(r.error.is_none());
        let s = r.summary().unwrap();
        assert!(s.min <= s.median && s.median <= s.max && s.ci95_half_width >= 0.0);
        assert_eq!(r.value, Some(s.mean));
    }
    assert_eq!(back[0].p2p_msgs, Some(0));
    assert!(back[2].p2p_msgs.unwrap() > 0);
}

#[test]
fn strong_mode_conserves_total_work() {
    let rows = run_benchmark(&small(Mode::Strong, vec![1, 4], 1 << 12)).unwrap();
    assert_eq!(rows[0].global_size, rows[1].global_size);
    assert_eq!(rows[1].per_rank_size * 4, rows[0].per_rank_size);
}

#[test]
fn repeated_runs_differ_only_in_timing() {
    let cfg = BenchConfig {
        runs: 2,
        warmup: 1,
        ..small(Mode::Weak, vec![1, 2], 1 << 10)
    };
    let strip = |rows: Vec<_>| rows.iter().map(taskgrid::bench::BenchRow::without_timing).collect::<Vec<_>>();
    let a = strip(run_benchmark(&cfg).unwrap());
    let b = strip(run_benchmark(&cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a[1].samples, Some(4));
}

#[test]
fn infeasible_points_get_error_rows() {
    let rows = run_benchmark(&small(Mode::Weak, vec![1, 3, 4], 1 << 10)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].error.as_deref().unwrap().contains("power of two"));
    assert!(rows[1].value.is_none());
    assert!(rows[0].error.is_none() && rows[2].error.is_none());
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows).unwrap();
    assert_eq!(read_csv(&buf[..]).unwrap(), rows);
}

#[test]
fn hydro_apps_report_medians() {
    for app in ["hydro", "hydro_norad"] {
        let cfg = BenchConfig {
            app: app.into(),
            executor: "async_dag".into(),
            runs: 2,
            ..small(Mode::Weak, vec![1, 2], 512)
        };
        let rows = run_benchmark(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.error.is_none()), "{rows:?}");
        assert_eq!(rows[0].metric, "median_iteration_time");
        assert_eq!(rows[1].global_size, 1024);
        assert!(rows[1].coll_rounds.unwrap() > 0);
    }
}

#[test]
fn size_sweep_doubles_on_one_rank() {
    let cfg = BenchConfig {
        sweep_steps: 3,
        ..small(Mode::SizeSweep, vec![], 256)
    };
    let rows = run_benchmark(&cfg).unwrap();
    let sizes: Vec<_> = rows.iter().map(|r| (r.ranks, r.global_size)).collect();
    assert_eq!(sizes, vec![(1, 256), (1, 512), (1, 1024)]);
}

#[test]
fn foreign_header_is_rejected() {
    let err = read_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("header"));
}
