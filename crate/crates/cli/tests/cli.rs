use std::path::Path;
use std::process::{Command, Output};

fn taskgrid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taskgrid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn weak_bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrid(
        dir.path(),
        &[
            "bench", "--app", "poisson", "--mode", "weak", "--ranks", "1,2,4", "--size-per-rank", "65536", "--runs",
            "1", "--iterations", "1",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("app,mode,executor,collective,ranks,workers,global_size,per_rank_size,run,metric,"));
}

#[test]
fn hydro_run_writes_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrid(dir.path(), &["run", "--app", "hydro", "--scenario", "sod", "--cells", "400"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let state = std::fs::read_to_string(dir.path().join("final_state.csv")).unwrap();
    let mut lines = state.lines();
    assert_eq!(lines.next(), Some("ix,x,rho,ux,p"));
    assert_eq!(lines.count(), 400);
}

#[test]
fn missing_required_flag_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrid(dir.path(), &["run", "--scenario", "sod"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--app"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrid(dir.path(), &["bench", "--app", "poisson", "--bogus", "1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.cfg"), "app = poisson\nranks = 1, 2\noutput = mine.csv\n").unwrap();
    let out = taskgrid(
        dir.path(),
        &["bench", "--ranks", "1,2,4", "--size", "1024", "--runs", "1", "--iterations", "1", "--config", "b.cfg"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("mine.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(!dir.path().join("bench.csv").exists());
}

#[test]
fn benchmark_mode_suppresses_state_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h.cfg"), "benchmark = on\nend_time = 0.01\n").unwrap();
    let out = taskgrid(dir.path(), &["run", "--app", "hydro", "--cells", "64", "--config", "h.cfg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!dir.path().join("final_state.csv").exists());
}

#[test]
fn bad_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.cfg"), "extent = 8, 8\n").unwrap();
    let out = taskgrid(dir.path(), &["run", "--app", "poisson", "--config", "p.cfg"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown key 'extent'"), "{}", stderr(&out));
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrid(dir.path(), &["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
