//! Fields, privileges and task submission with inferred dependencies.
//!
//! The control thread registers fields and submits tasks. Each submission
//! is matched against the access history of the fields it declares, which
//! yields the edges handed to the executor. Ghost cells of a field become
//! stale on every write; a later read that includes ghosts gets an exchange
//! task inserted in front of it.

pub mod deps;
pub mod field;
pub mod task;

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::exec::transport::CommStats;
use crate::exec::{executor_registry, Executor, ExecutorConfig, LogEntry, Shared, TaskLaunch};
use crate::reduce::Partial;
use crate::registry::UnknownName;
use crate::topology::{MeshTopology, TopologyError};

pub use deps::{infer_edges, AccessHistory, TaskId};
pub use field::{ElementKind, FieldHandle, FieldId};
pub use task::{
    FieldAccess, FieldView, FieldViewMut, Privilege, TaskBody, TaskContext, TaskError, TaskResult, TaskSpec,
};

use field::FieldData;
use task::{Binding, ResultSlot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Unknown(#[from] UnknownName),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("field '{name}' is already registered on this topology")]
    DuplicateField { name: String },
    #[error("field '{name}': topology has {colors} colors but the runtime has {ranks} ranks")]
    TopologyMismatch { name: String, colors: usize, ranks: usize },
    #[error("field '{name}' is not registered with this runtime")]
    UnknownField { name: String },
    #[error("task '{label}' declares field '{field}' more than once")]
    DuplicateAccess { label: String, field: String },
    #[error("task '{label}' did not declare field '{field}'")]
    Undeclared { label: String, field: String },
    #[error("task '{label}' has read-only access to field '{field}'")]
    ReadOnlyWrite { label: String, field: String },
    #[error("task '{label}': field '{field}' on color {color} is in use by a concurrent task")]
    Conflict { label: String, field: String, color: usize },
    #[error("task {task} '{label}' failed on rank {rank}: {message}")]
    TaskFailed {
        task: TaskId,
        label: String,
        rank: usize,
        message: String,
    },
    #[error("task {task} '{label}' skipped after task {failed} failed")]
    Aborted { task: TaskId, label: String, failed: TaskId },
    #[error("task {task} resolved to {found}")]
    WrongValueKind { task: TaskId, found: String },
}

impl RuntimeError {
    /// Id of the task this error belongs to, if any.
    pub fn task(&self) -> Option<TaskId> {
        match self {
            RuntimeError::TaskFailed { task, .. } | RuntimeError::Aborted { task, .. } => Some(*task),
            _ => None,
        }
    }
}

static NEXT_RUNTIME: AtomicU64 = AtomicU64::new(1);

pub struct Runtime {
    id: u64,
    config: ExecutorConfig,
    shared: Arc<Shared>,
    executor: Box<dyn Executor>,
    fields: Vec<Arc<FieldData>>,
    names: HashSet<(usize, String)>,
    stale: Vec<bool>,
    history: AccessHistory,
    edges: Vec<(TaskId, TaskId)>,
    labels: Vec<String>,
}

impl Runtime {
    pub fn new(config: ExecutorConfig) -> Result<Self, RuntimeError> {
        let shared = Arc::new(Shared::new(&config)?);
        let executor = executor_registry().get(&config.executor)?(shared.clone());
        Ok(Self {
            id: NEXT_RUNTIME.fetch_add(1, Ordering::Relaxed),
            config,
            shared,
            executor,
            fields: Vec::new(),
            names: HashSet::new(),
            stale: Vec::new(),
            history: AccessHistory::new(),
            edges: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    pub fn ranks(&self) -> usize {
        self.config.ranks
    }

    pub fn executor_name(&self) -> &'static str {
        self.executor.name()
    }

    /// Allocates zeroed storage for `name` on every color of `topology`.
    pub fn register_field(
        &mut self,
        topology: &Arc<MeshTopology>,
        name: &str,
        kind: ElementKind,
    ) -> Result<FieldHandle, RuntimeError> {
        if topology.color_count() != self.ranks() {
            return Err(RuntimeError::TopologyMismatch {
                name: name.into(),
                colors: topology.color_count(),
                ranks: self.ranks(),
            });
        }
        if kind.components() == 0 {
            return Err(RuntimeError::InvalidConfig(format!("field '{name}' has no components")));
        }
        let key = (Arc::as_ptr(topology) as usize, name.to_string());
        if !self.names.insert(key) {
            return Err(RuntimeError::DuplicateField { name: name.into() });
        }
        let data = FieldData::new(self.fields.len(), self.id, name, topology.clone(), kind);
        let handle = data.handle.clone();
        self.fields.push(Arc::new(data));
        self.stale.push(false);
        Ok(handle)
    }

    fn resolve(&self, field: &FieldHandle) -> Result<&Arc<FieldData>, RuntimeError> {
        if field.runtime != self.id {
            return Err(RuntimeError::UnknownField {
                name: field.name().into(),
            });
        }
        self.fields.get(field.id).ok_or_else(|| RuntimeError::UnknownField {
            name: field.name().into(),
        })
    }

    /// Appends a task to the program and returns its deferred result.
    pub fn submit(&mut self, spec: TaskSpec) -> Result<TaskResult, RuntimeError> {
        let mut seen = HashSet::new();
        for a in &spec.accesses {
            self.resolve(&a.field)?;
            if !seen.insert(a.field.id) {
                return Err(RuntimeError::DuplicateAccess {
                    label: spec.label.clone(),
                    field: a.field.name().into(),
                });
            }
        }
        for a in &spec.accesses {
            let id = a.field.id;
            if a.privilege == Privilege::ReadOnly && a.halo && self.stale[id] && !self.fields[id].halo.is_empty() {
                self.submit_exchange(&a.field.clone());
            }
        }
        Ok(self.enqueue(spec))
    }

    fn submit_exchange(&mut self, field: &FieldHandle) {
        let f = field.clone();
        let spec = TaskSpec::new(format!("exchange:{}", field.name()), move |ctx| {
            let mut view = ctx.view_mut(&f)?;
            ctx.exchange(&mut view)?;
            Ok(Partial::None)
        })
        .read_write(field);
        self.enqueue(spec);
        self.stale[field.id] = false;
    }

    fn enqueue(&mut self, spec: TaskSpec) -> TaskResult {
        let id = self.labels.len() as TaskId;
        let accesses: Vec<(FieldId, Privilege)> = spec.accesses.iter().map(|a| (a.field.id, a.privilege)).collect();
        let deps = infer_edges(&self.history, &accesses);
        self.history.record(id, &accesses);
        self.edges.extend(deps.iter().map(|&d| (d, id)));
        for &(field, privilege) in &accesses {
            if privilege.writes() {
                self.stale[field] = true;
            }
        }
        let slot = Arc::new(ResultSlot::default());
        let result = TaskResult::new(id, &spec.label, slot.clone());
        let bindings = spec
            .accesses
            .iter()
            .map(|a| Binding {
                field: self.fields[a.field.id].clone(),
                privilege: a.privilege,
            })
            .collect();
        self.labels.push(spec.label.clone());
        self.executor.submit(
            TaskLaunch {
                id,
                label: spec.label,
                bindings,
                body: spec.body,
                slot,
            },
            &deps,
        );
        result
    }

    /// Waits for every submitted task; returns the first failure, if any.
    pub fn fence(&mut self) -> Result<(), RuntimeError> {
        self.executor.fence();
        match self.shared.failure() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Owned values of `field` in global layout (axis 0 fastest, components
    /// interleaved), after all submitted tasks have run.
    pub fn gather(&mut self, field: &FieldHandle) -> Result<Vec<f64>, RuntimeError> {
        let data = self.resolve(field)?.clone();
        self.fence()?;
        Ok(data.gather())
    }

    /// The full local storage of one color, halo included.
    pub fn gather_block(&mut self, field: &FieldHandle, color: usize) -> Result<Vec<f64>, RuntimeError> {
        let data = self.resolve(field)?.clone();
        if color >= data.storage.len() {
            return Err(TopologyError::ColorOutOfRange {
                color,
                count: data.storage.len(),
            }
            .into());
        }
        self.fence()?;
        let values = data.storage[color].read().clone();
        Ok(values)
    }

    /// Exact communication counters, after all submitted tasks have run.
    pub fn comm_stats(&mut self) -> CommStats {
        self.executor.fence();
        self.shared.transport.comm_stats()
    }

    pub fn reset_comm_stats(&mut self) {
        self.executor.fence();
        self.shared.transport.reset_stats();
    }

    /// Every inferred edge `(from, to)` so far, in submission order of `to`.
    pub fn edges(&self) -> &[(TaskId, TaskId)] {
        &self.edges
    }

    pub fn task_count(&self) -> usize {
        self.labels.len()
    }

    pub fn task_label(&self, task: TaskId) -> Option<&str> {
        self.labels.get(task as usize).map(String::as_str)
    }

    /// Execution records of all finished tasks, in completion order.
    pub fn execution_log(&mut self) -> Vec<LogEntry> {
        self.executor.fence();
        self.shared.log()
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.executor.fence();
    }
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime")
            .field("config", &self.config)
            .field("fields", &self.fields.len())
            .field("tasks", &self.labels.len())
            .finish()
    }
}
