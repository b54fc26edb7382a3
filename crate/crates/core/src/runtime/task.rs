//! Task specifications, deferred results and the per-rank task context.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;
use std::thread;

use parking_lot::lock_api::{ArcRwLockReadGuard, ArcRwLockWriteGuard};
use parking_lot::{Condvar, Mutex, RawRwLock};

use super::deps::TaskId;
use super::field::{FieldData, FieldHandle};
use super::RuntimeError;
use crate::exec::collective::AllreduceAlgorithm;
use crate::exec::transport::RankComm;
use crate::reduce::{ExactSum, Partial, TaskValue};
use crate::topology::{Cell, LocalBlock, MAX_DIMS};

pub type TaskError = Box<dyn std::error::Error + Send + Sync>;

pub type TaskBody = Arc<dyn Fn(&mut TaskContext<'_>) -> Result<Partial, TaskError> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Privilege {
    ReadOnly,
    /// Prior contents are dead: no ghost exchange and no carried values.
    WriteDiscard,
    ReadWrite,
}

impl Privilege {
    pub fn writes(self) -> bool {
        !matches!(self, Privilege::ReadOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldAccess {
    pub field: FieldHandle,
    pub privilege: Privilege,
    /// Read access includes ghost cells; the runtime refreshes stale ghosts
    /// before the task runs.
    pub halo: bool,
}

impl FieldAccess {
    pub fn ro(field: &FieldHandle) -> Self {
        Self {
            field: field.clone(),
            privilege: Privilege::ReadOnly,
            halo: true,
        }
    }

    /// Read-only access to owned cells only; never triggers an exchange.
    pub fn ro_owned(field: &FieldHandle) -> Self {
        Self {
            halo: false,
            ..Self::ro(field)
        }
    }

    pub fn rw(field: &FieldHandle) -> Self {
        Self {
            field: field.clone(),
            privilege: Privilege::ReadWrite,
            halo: false,
        }
    }

    pub fn wo(field: &FieldHandle) -> Self {
        Self {
            field: field.clone(),
            privilege: Privilege::WriteDiscard,
            halo: false,
        }
    }
}

#[derive(Clone)]
pub struct TaskSpec {
    pub(crate) label: String,
    pub(crate) accesses: Vec<FieldAccess>,
    pub(crate) body: TaskBody,
}

impl TaskSpec {
    pub fn new<F>(label: impl Into<String>, body: F) -> Self
    where
        F: Fn(&mut TaskContext<'_>) -> Result<Partial, TaskError> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            accesses: Vec::new(),
            body: Arc::new(body),
        }
    }

    pub fn access(mut self, access: FieldAccess) -> Self {
        self.accesses.push(access);
        self
    }

    pub fn read(self, field: &FieldHandle) -> Self {
        self.access(FieldAccess::ro(field))
    }

    pub fn read_owned(self, field: &FieldHandle) -> Self {
        self.access(FieldAccess::ro_owned(field))
    }

    pub fn read_write(self, field: &FieldHandle) -> Self {
        self.access(FieldAccess::rw(field))
    }

    pub fn write_discard(self, field: &FieldHandle) -> Self {
        self.access(FieldAccess::wo(field))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn accesses(&self) -> &[FieldAccess] {
        &self.accesses
    }

    pub fn body(&self) -> &TaskBody {
        &self.body
    }

    /// Replaces the body, keeping label and accesses.
    pub fn with_body(mut self, body: TaskBody) -> Self {
        self.body = body;
        self
    }
}

impl fmt::Debug for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskSpec")
            .field("label", &self.label)
            .field("accesses", &self.accesses)
            .finish_non_exhaustive()
    }
}

#[derive(Default)]
pub(crate) struct ResultSlot {
    value: Mutex<Option<Result<TaskValue, RuntimeError>>>,
    ready: Condvar,
}

impl ResultSlot {
    pub fn resolve(&self, value: Result<TaskValue, RuntimeError>) {
        let mut slot = self.value.lock();
        debug_assert!(slot.is_none(), "task resolved twice");
        *slot = Some(value);
        self.ready.notify_all();
    }
}

/// Deferred handle to a submitted task's value.
#[derive(Clone)]
pub struct TaskResult {
    id: TaskId,
    label: Arc<str>,
    slot: Arc<ResultSlot>,
}

impl TaskResult {
    pub(crate) fn new(id: TaskId, label: &str, slot: Arc<ResultSlot>) -> Self {
        Self {
            id,
            label: label.into(),
            slot,
        }
    }

    pub fn id(&self) -> TaskId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_ready(&self) -> bool {
        self.slot.value.lock().is_some()
    }

    /// Blocks until the task has run; later calls return the cached value.
    pub fn wait(&self) -> Result<TaskValue, RuntimeError> {
        let mut slot = self.slot.value.lock();
        while slot.is_none() {
            self.slot.ready.wait(&mut slot);
        }
        slot.clone().expect("resolved")
    }

    pub fn wait_scalar(&self) -> Result<f64, RuntimeError> {
        match self.wait()? {
            TaskValue::Scalar(v) => Ok(v),
            other => Err(RuntimeError::WrongValueKind {
                task: self.id,
                found: format!("{other:?}"),
            }),
        }
    }
}

impl fmt::Debug for TaskResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskResult")
            .field("id", &self.id)
            .field("label", &self.label)
            .field("ready", &self.is_ready())
            .finish()
    }
}

pub(crate) struct Binding {
    pub field: Arc<FieldData>,
    pub privilege: Privilege,
}

/// What one rank instance of a task sees while it runs.
pub struct TaskContext<'a> {
    task: TaskId,
    label: &'a str,
    comm: RankComm<'a>,
    collective: &'a dyn AllreduceAlgorithm,
    workers: usize,
    bindings: &'a [Binding],
}

type ReadGuard = ArcRwLockReadGuard<RawRwLock, Vec<f64>>;
type WriteGuard = ArcRwLockWriteGuard<RawRwLock, Vec<f64>>;

/// Read access to this rank's block of a field, ghosts included.
pub struct FieldView<'a> {
    field: &'a FieldData,
    block: &'a LocalBlock,
    data: ReadGuard,
}

/// Write access to this rank's block of a field.
pub struct FieldViewMut<'a> {
    field: &'a FieldData,
    block: &'a LocalBlock,
    data: WriteGuard,
}

macro_rules! view_common {
    ($t:ident) => {
        impl<'a> $t<'a> {
            pub fn block(&self) -> &'a LocalBlock {
                self.block
            }

            pub fn ncomp(&self) -> usize {
                self.field.ncomp()
            }

            pub fn name(&self) -> &str {
                self.field.handle.name()
            }

            pub fn values(&self) -> &[f64] {
                &self.data
            }

            /// Component `c` of the cell at block-local coordinates `local`.
            pub fn at(&self, local: [isize; MAX_DIMS], c: usize) -> f64 {
                self.data[self.block.offset(local) * self.ncomp() + c]
            }

            /// All components of the cell at storage offset `offset`.
            pub fn cell(&self, offset: usize) -> &[f64] {
                let n = self.ncomp();
                &self.data[offset * n..offset * n + n]
            }
        }
    };
}

view_common!(FieldView);
view_common!(FieldViewMut);

impl<'a> FieldViewMut<'a> {
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn cell_mut(&mut self, offset: usize) -> &mut [f64] {
        let n = self.ncomp();
        &mut self.data[offset * n..offset * n + n]
    }

    pub fn set(&mut self, local: [isize; MAX_DIMS], c: usize, value: f64) {
        let at = self.block.offset(local) * self.ncomp() + c;
        self.data[at] = value;
    }
}

impl<'a> TaskContext<'a> {
    pub(crate) fn new(
        task: TaskId,
        label: &'a str,
        comm: RankComm<'a>,
        collective: &'a dyn AllreduceAlgorithm,
        workers: usize,
        bindings: &'a [Binding],
    ) -> Self {
        Self {
            task,
            label,
            comm,
            collective,
            workers: workers.max(1),
            bindings,
        }
    }

    pub fn task_id(&self) -> TaskId {
        self.task
    }

    pub fn label(&self) -> &str {
        self.label
    }

    /// This instance's rank, which is also its color.
    pub fn rank(&self) -> usize {
        self.comm.rank()
    }

    pub fn ranks(&self) -> usize {
        self.comm.size()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn binding(&self, field: &FieldHandle) -> Result<&'a Binding, RuntimeError> {
        self.bindings
            .iter()
            .find(|b| b.field.handle == *field)
            .ok_or_else(|| RuntimeError::Undeclared {
                label: self.label.to_string(),
                field: field.name().to_string(),
            })
    }

    /// The local block of `field` on this rank.
    pub fn block(&self, field: &FieldHandle) -> Result<&'a LocalBlock, RuntimeError> {
        let b = self.binding(field)?;
        Ok(&b.field.blocks[self.rank()])
    }

    pub fn view(&self, field: &FieldHandle) -> Result<FieldView<'a>, RuntimeError> {
        let b = self.binding(field)?;
        let rank = self.rank();
        let data = b.field.storage[rank].try_read_arc().ok_or_else(|| RuntimeError::Conflict {
            label: self.label.to_string(),
            field: field.name().to_string(),
            color: rank,
        })?;
        Ok(FieldView {
            field: &b.field,
            block: &b.field.blocks[rank],
            data,
        })
    }

    pub fn view_mut(&self, field: &FieldHandle) -> Result<FieldViewMut<'a>, RuntimeError> {
        let b = self.binding(field)?;
        if !b.privilege.writes() {
            return Err(RuntimeError::ReadOnlyWrite {
                label: self.label.to_string(),
                field: field.name().to_string(),
            });
        }
        let rank = self.rank();
        let data = b.field.storage[rank].try_write_arc().ok_or_else(|| RuntimeError::Conflict {
            label: self.label.to_string(),
            field: field.name().to_string(),
            color: rank,
        })?;
        Ok(FieldViewMut {
            field: &b.field,
            block: &b.field.blocks[rank],
            data,
        })
    }

    /// Refreshes the ghost cells of `view` from the owning ranks. Collective
    /// over the task's ranks.
    pub fn exchange(&mut self, view: &mut FieldViewMut<'_>) -> Result<(), TaskError> {
        let halo = &view.field.halo;
        if halo.is_empty() {
            return Ok(());
        }
        if let Err(e) = halo.exchange(&mut self.comm, &mut view.data) {
            self.comm.abort();
            return Err(e.into());
        }
        Ok(())
    }

    /// Combines `value` across the task's ranks in ascending rank order.
    pub fn allreduce(&mut self, value: Partial) -> Result<Partial, TaskError> {
        match self.collective.allreduce(&mut self.comm, value) {
            Ok(v) => Ok(v),
            Err(e) => {
                self.comm.abort();
                Err(e.into())
            }
        }
    }

    pub(crate) fn abort(&self) {
        self.comm.abort();
    }

    fn plane_chunks(&self, block: &LocalBlock) -> (usize, Vec<Range<usize>>) {
        let axis = block.dims() - 1;
        let planes = block.owned_extent(axis);
        let chunks = self.workers.min(planes).max(1);
        let ranges = (0..chunks)
            .map(|c| (c * planes / chunks)..((c + 1) * planes / chunks))
            .collect();
        (axis, ranges)
    }

    /// Applies `kernel` to every owned cell of `out`. The kernel receives
    /// the cell and that cell's components. Cells may be visited in any
    /// order and in parallel.
    pub fn for_each_cell<F>(&self, out: &mut FieldViewMut<'_>, kernel: F)
    where
        F: Fn(Cell, &mut [f64]) + Sync,
    {
        let block = out.block;
        let n = out.ncomp();
        let (axis, chunks) = self.plane_chunks(block);
        let data: &mut [f64] = &mut out.data;
        if chunks.len() == 1 {
            for cell in cells_in(block, axis, chunks[0].clone()) {
                kernel(cell, &mut data[cell.offset * n..cell.offset * n + n]);
            }
            return;
        }
        // Planes along the slowest used axis are contiguous in storage.
        let plane_len = block.stride(axis) * n;
        let h = block.halo(axis);
        let mut rest = data;
        let mut consumed = 0;
        let mut parts = Vec::with_capacity(chunks.len());
        for r in &chunks {
            let end = (r.end + h) * plane_len;
            let (head, tail) = rest.split_at_mut(end - consumed);
            let start = (r.start + h) * plane_len;
            parts.push((r.clone(), start, &mut head[start - consumed..]));
            consumed = end;
            rest = tail;
        }
        let kernel = &kernel;
        thread::scope(|s| {
            for (planes, base, chunk) in parts {
                s.spawn(move || {
                    for cell in cells_in(block, axis, planes) {
                        let at = cell.offset * n - base;
                        kernel(cell, &mut chunk[at..at + n]);
                    }
                });
            }
        });
    }

    fn map_chunks<R, F>(&self, block: &LocalBlock, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut dyn Iterator<Item = Cell>) -> R + Sync,
    {
        let (axis, chunks) = self.plane_chunks(block);
        if chunks.len() == 1 {
            return vec![f(&mut cells_in(block, axis, chunks[0].clone()))];
        }
        let f = &f;
        thread::scope(|s| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|planes| s.spawn(move || f(&mut cells_in(block, axis, planes))))
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    }

    /// Exact sum of `kernel` over the owned cells of `block`; the result does
    /// not depend on the worker count.
    pub fn sum_cells<F>(&self, block: &LocalBlock, kernel: F) -> ExactSum
    where
        F: Fn(Cell) -> f64 + Sync,
    {
        let parts = self.map_chunks(block, |cells| cells.map(&kernel).collect::<ExactSum>());
        let mut total = ExactSum::new();
        for p in &parts {
            total.merge(p);
        }
        total
    }

    /// Exact per-component sums; `kernel` fills `n` values for each cell.
    pub fn sum_cells_vec<F>(&self, block: &LocalBlock, n: usize, kernel: F) -> Vec<ExactSum>
    where
        F: Fn(Cell, &mut [f64]) + Sync,
    {
        let parts = self.map_chunks(block, |cells| {
            let mut acc = vec![ExactSum::new(); n];
            let mut buf = vec![0.0; n];
            for cell in cells {
                kernel(cell, &mut buf);
                for (a, &v) in acc.iter_mut().zip(&buf) {
                    a.add(v);
                }
            }
            acc
        });
        let mut total = vec![ExactSum::new(); n];
        for p in &parts {
            for (t, v) in total.iter_mut().zip(p) {
                t.merge(v);
            }
        }
        total
    }

    /// Minimum of `kernel` over owned cells; NaN if any value is NaN.
    pub fn min_cells<F>(&self, block: &LocalBlock, kernel: F) -> f64
    where
        F: Fn(Cell) -> f64 + Sync,
    {
        self.map_chunks(block, |cells| cells.map(&kernel).fold(f64::INFINITY, nan_min))
            .into_iter()
            .fold(f64::INFINITY, nan_min)
    }

    /// Maximum of `kernel` over owned cells; NaN if any value is NaN.
    pub fn max_cells<F>(&self, block: &LocalBlock, kernel: F) -> f64
    where
        F: Fn(Cell) -> f64 + Sync,
    {
        self.map_chunks(block, |cells| cells.map(&kernel).fold(f64::NEG_INFINITY, nan_max))
            .into_iter()
            .fold(f64::NEG_INFINITY, nan_max)
    }
}

fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Owned cells whose coordinate along `axis` lies in `planes`, layout order.
fn cells_in(block: &LocalBlock, axis: usize, planes: Range<usize>) -> impl Iterator<Item = Cell> + '_ {
    let mut r = [0..block.owned_extent(0), 0..block.owned_extent(1), 0..block.owned_extent(2)];
    r[axis] = planes;
    let [r0, r1, r2] = r;
    r2.flat_map(move |k| {
        let r0 = r0.clone();
        r1.clone()
            .flat_map(move |j| r0.clone().map(move |i| block.cell([i as isize, j as isize, k as isize])))
    })
}
