//! Clock captures taken inside task bodies.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::Mutex;

use crate::runtime::{Runtime, RuntimeError, TaskBody, TaskResult, TaskSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSample {
    pub run: usize,
    pub iteration: usize,
    pub label: String,
    pub rank: usize,
    /// Seconds since the timer was created.
    pub start: f64,
    pub stop: f64,
}

impl TimingSample {
    pub fn duration(&self) -> f64 {
        self.stop - self.start
    }
}

/// Per-rank sample buffers. Each rank instance only touches its own buffer,
/// so the locks are never contended and timing adds no ordering between
/// tasks.
#[derive(Debug, Clone)]
pub struct Timer {
    origin: Instant,
    buffers: Arc<Vec<Mutex<Vec<TimingSample>>>>,
}

impl Timer {
    pub fn new(ranks: usize) -> Self {
        Self {
            origin: Instant::now(),
            buffers: Arc::new((0..ranks).map(|_| Mutex::new(Vec::new())).collect()),
        }
    }

    /// Wraps the body of `spec` with clock captures tagged `(run, iteration)`.
    /// Accesses, and therefore inferred edges, are unchanged.
    pub fn wrap(&self, spec: TaskSpec, run: usize, iteration: usize) -> TaskSpec {
        let inner = spec.body().clone();
        let label = spec.label().to_string();
        let (origin, buffers) = (self.origin, self.buffers.clone());
        let body: TaskBody = Arc::new(move |ctx| {
            let start = origin.elapsed().as_secs_f64();
            let out = inner(ctx);
            let stop = origin.elapsed().as_secs_f64();
            buffers[ctx.rank()].lock().push(TimingSample {
                run,
                iteration,
                label: label.clone(),
                rank: ctx.rank(),
                start,
                stop,
            });
            out
        });
        spec.with_body(body)
    }

    /// All samples, rank by rank.
    pub fn samples(&self) -> Vec<TimingSample> {
        self.buffers.iter().flat_map(|b| b.lock().clone()).collect()
    }

    /// Wall time of each `(run, iteration)`: the largest per-rank span from
    /// the first start to the last stop.
    pub fn iteration_times(&self) -> BTreeMap<(usize, usize), f64> {
        let mut spans: BTreeMap<(usize, usize, usize), (f64, f64)> = BTreeMap::new();
        for s in self.samples() {
            let e = spans.entry((s.run, s.iteration, s.rank)).or_insert((s.start, s.stop));
            e.0 = e.0.min(s.start);
            e.1 = e.1.max(s.stop);
        }
        let mut out: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for ((run, it, _), (a, b)) in spans {
            let t = out.entry((run, it)).or_insert(0.0);
            *t = t.max(b - a);
        }
        out
    }
}

/// Submits `spec` wrapped by `timer`.
pub fn timed_task(
    rt: &mut Runtime,
    timer: &Timer,
    spec: TaskSpec,
    run: usize,
    iteration: usize,
) -> Result<TaskResult, RuntimeError> {
    rt.submit(timer.wrap(spec, run, iteration))
}
