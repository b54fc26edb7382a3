//! Executors, the simulated transport, ghost exchange and collectives.
//!
//! A task runs as a gang: one instance per rank, all started together, so
//! instances can exchange ghosts and reduce values with each other while
//! they run. Executors decide only when a gang starts.

pub mod async_dag;
pub mod collective;
pub mod halo;
pub mod sequential;
pub mod transport;

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::Duration;

use parking_lot::Mutex;

use crate::reduce::{Partial, TaskValue};
use crate::registry::Registry;
use crate::runtime::task::{Binding, ResultSlot, TaskBody, TaskContext, TaskError};
use crate::runtime::{Runtime, RuntimeError, TaskId};
use collective::{collective_registry, AllreduceAlgorithm};
use transport::{CommError, CommStats, RankComm, Transport};

pub use async_dag::AsyncDag;
pub use sequential::Sequential;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutorConfig {
    /// Registered executor name, e.g. `sequential` or `async_dag`.
    pub executor: String,
    /// Simulated ranks; equals the color count of every topology used.
    pub ranks: usize,
    /// Worker threads per rank for data-parallel cell loops. The DAG
    /// executor also runs this many tasks at once.
    pub workers_per_rank: usize,
    /// Registered allreduce algorithm name.
    pub collective: String,
    /// Longest a rank waits for a single message.
    pub timeout: Duration,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            executor: "sequential".into(),
            ranks: 1,
            workers_per_rank: 1,
            collective: "binomial_tree".into(),
            timeout: Duration::from_secs(300),
        }
    }
}

impl ExecutorConfig {
    pub fn sequential(ranks: usize) -> Self {
        Self {
            ranks,
            ..Self::default()
        }
    }

    pub fn async_dag(ranks: usize, workers_per_rank: usize) -> Self {
        Self {
            executor: "async_dag".into(),
            ranks,
            workers_per_rank,
            ..Self::default()
        }
    }

    pub fn with_collective(mut self, name: &str) -> Self {
        self.collective = name.into();
        self
    }

    pub fn with_executor(mut self, name: &str) -> Self {
        self.executor = name.into();
        self
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.ranks == 0 {
            return Err(RuntimeError::InvalidConfig("ranks must be at least 1".into()));
        }
        if self.workers_per_rank == 0 {
            return Err(RuntimeError::InvalidConfig("workers per rank must be at least 1".into()));
        }
        executor_registry().get(&self.executor)?;
        collective_registry().get(&self.collective)?;
        Ok(())
    }
}

/// Execution record of one task; `start` and `finish` come from one global
/// counter, so they order events across workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub task: TaskId,
    pub label: String,
    pub start: u64,
    pub finish: u64,
    /// False when the task was skipped because an earlier task failed.
    pub ran: bool,
}

/// A submitted task ready to hand to an executor.
pub struct TaskLaunch {
    pub(crate) id: TaskId,
    pub(crate) label: String,
    pub(crate) bindings: Vec<Binding>,
    pub(crate) body: TaskBody,
    pub(crate) slot: Arc<ResultSlot>,
}

impl TaskLaunch {
    pub fn id(&self) -> TaskId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// State shared by the control thread and every executor thread.
pub struct Shared {
    pub(crate) transport: Transport,
    collective: Arc<dyn AllreduceAlgorithm>,
    ranks: usize,
    workers: usize,
    failure: Mutex<Option<RuntimeError>>,
    clock: AtomicU64,
    log: Mutex<Vec<LogEntry>>,
}

impl Shared {
    pub(crate) fn new(config: &ExecutorConfig) -> Result<Self, RuntimeError> {
        config.validate()?;
        let collective = collective_registry().get(&config.collective)?();
        Ok(Self {
            transport: Transport::with_timeout(config.ranks, config.timeout),
            collective,
            ranks: config.ranks,
            workers: config.workers_per_rank,
            failure: Mutex::new(None),
            clock: AtomicU64::new(0),
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub(crate) fn failure(&self) -> Option<RuntimeError> {
        self.failure.lock().clone()
    }

    pub(crate) fn log(&self) -> Vec<LogEntry> {
        self.log.lock().clone()
    }
}

pub trait Executor: Send {
    fn name(&self) -> &'static str;

    /// Queues `launch`; `deps` are earlier task ids it must follow. Never
    /// waits for execution.
    fn submit(&mut self, launch: TaskLaunch, deps: &[TaskId]);

    /// Waits until every submitted task has resolved.
    fn fence(&mut self);
}

pub type ExecutorFactory = fn(Arc<Shared>) -> Box<dyn Executor>;

pub fn executor_registry() -> &'static Registry<ExecutorFactory> {
    static REGISTRY: OnceLock<Registry<ExecutorFactory>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg: Registry<ExecutorFactory> = Registry::new("executor");
        reg.register_with_aliases(
            "sequential",
            &["seq", "mpi", "sync"],
            "one task at a time in submission order, all ranks in lockstep",
            |shared| Box::new(Sequential::new(shared)),
        )
        .register_with_aliases(
            "async_dag",
            &["async", "dag", "amtr"],
            "tasks start as soon as their inferred dependencies finish",
            |shared| Box::new(AsyncDag::new(shared)),
        );
        reg
    })
}

/// Runs one task to completion and resolves its result. Called by executor
/// threads.
pub(crate) fn run_launch(shared: &Shared, launch: TaskLaunch) {
    let earlier = shared.failure();
    let start = shared.clock.fetch_add(1, Ordering::SeqCst);
    let (outcome, ran) = match earlier {
        Some(cause) => (
            Err(RuntimeError::Aborted {
                task: launch.id,
                label: launch.label.clone(),
                failed: cause.task().unwrap_or(launch.id),
            }),
            false,
        ),
        None => (run_gang(shared, &launch), true),
    };
    if let (Err(e), true) = (&outcome, ran) {
        shared.failure.lock().get_or_insert_with(|| e.clone());
    }
    let finish = shared.clock.fetch_add(1, Ordering::SeqCst);
    shared.log.lock().push(LogEntry {
        task: launch.id,
        label: launch.label.clone(),
        start,
        finish,
        ran,
    });
    shared.transport.retire(launch.id);
    launch.slot.resolve(outcome);
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".into()
    }
}

fn run_instance(shared: &Shared, launch: &TaskLaunch, rank: usize) -> Result<Partial, TaskError> {
    let comm = RankComm::new(&shared.transport, rank, shared.ranks, launch.id);
    let mut ctx = TaskContext::new(
        launch.id,
        &launch.label,
        comm,
        &*shared.collective,
        shared.workers,
        &launch.bindings,
    );
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
        let partial = (launch.body)(&mut ctx)?;
        if partial.is_none() {
            Ok(partial)
        } else {
            ctx.allreduce(partial)
        }
    }))
    .unwrap_or_else(|p| Err(panic_message(p).into()));
    if outcome.is_err() {
        // wake ranks still blocked on this task's messages
        ctx.abort();
    }
    outcome
}

fn run_gang(shared: &Shared, launch: &TaskLaunch) -> Result<TaskValue, RuntimeError> {
    let results: Vec<Result<Partial, TaskError>> = if shared.ranks == 1 {
        vec![run_instance(shared, launch, 0)]
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = (0..shared.ranks)
                .map(|rank| s.spawn(move || run_instance(shared, launch, rank)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("rank instance panicked")).collect()
        })
    };
    // Report the root cause rather than a rank that was woken by the abort.
    let is_echo = |e: &TaskError| matches!(e.downcast_ref::<CommError>(), Some(CommError::Aborted { .. }));
    let failed = results
        .iter()
        .enumerate()
        .filter_map(|(rank, r)| r.as_ref().err().map(|e| (rank, e)))
        .min_by_key(|(rank, e)| (is_echo(e), *rank));
    if let Some((rank, e)) = failed {
        return Err(RuntimeError::TaskFailed {
            task: launch.id,
            label: launch.label.clone(),
            rank,
            message: e.to_string(),
        });
    }
    let first = results.into_iter().next().expect("at least one rank");
    Ok(first.expect("checked above").finish())
}

/// Runs `program` on a fresh runtime and returns its value together with the
/// communication counters of the whole run.
pub fn run_program<T>(
    config: &ExecutorConfig,
    program: impl FnOnce(&mut Runtime) -> Result<T, RuntimeError>,
) -> Result<(T, CommStats), RuntimeError> {
    let mut rt = Runtime::new(config.clone())?;
    let value = program(&mut rt)?;
    rt.fence()?;
    Ok((value, rt.comm_stats()))
}

pub fn run_sequential<T>(
    program: impl FnOnce(&mut Runtime) -> Result<T, RuntimeError>,
    config: &ExecutorConfig,
) -> Result<(T, CommStats), RuntimeError> {
    run_program(&config.clone().with_executor("sequential"), program)
}

pub fn run_async<T>(
    program: impl FnOnce(&mut Runtime) -> Result<T, RuntimeError>,
    config: &ExecutorConfig,
) -> Result<(T, CommStats), RuntimeError> {
    run_program(&config.clone().with_executor("async_dag"), program)
}
