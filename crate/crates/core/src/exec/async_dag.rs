//! Dataflow executor: a task starts once every task it depends on has
//! finished. Ready tasks go to a fixed worker pool, lowest task id first.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use parking_lot::{Condvar, Mutex};

use super::{run_launch, Executor, Shared, TaskLaunch};
use crate::runtime::TaskId;

struct Node {
    remaining: usize,
    dependents: Vec<TaskId>,
    launch: Option<TaskLaunch>,
}

#[derive(Default)]
struct DagState {
    /// Submitted tasks that have not finished yet.
    nodes: HashMap<TaskId, Node>,
    ready: BTreeMap<TaskId, TaskLaunch>,
    shutdown: bool,
}

#[derive(Default)]
struct Scheduler {
    state: Mutex<DagState>,
    changed: Condvar,
}

pub struct AsyncDag {
    scheduler: Arc<Scheduler>,
    workers: Vec<JoinHandle<()>>,
}

impl AsyncDag {
    pub fn new(shared: Arc<Shared>) -> Self {
        let scheduler = Arc::new(Scheduler::default());
        let workers = (0..shared.workers())
            .map(|w| {
                let (shared, scheduler) = (shared.clone(), scheduler.clone());
                thread::Builder::new()
                    .name(format!("dag-worker-{w}"))
                    .spawn(move || worker(&shared, &scheduler))
                    .expect("spawn worker thread")
            })
            .collect();
        Self { scheduler, workers }
    }
}

fn worker(shared: &Shared, scheduler: &Scheduler) {
    loop {
        let launch = {
            let mut st = scheduler.state.lock();
            loop {
                if let Some((_, launch)) = st.ready.pop_first() {
                    break launch;
                }
                if st.shutdown {
                    return;
                }
                scheduler.changed.wait(&mut st);
            }
        };
        let id = launch.id;
        run_launch(shared, launch);
        let mut st = scheduler.state.lock();
        let node = st.nodes.remove(&id).expect("running task is tracked");
        for d in node.dependents {
            let dep = st.nodes.get_mut(&d).expect("dependent is tracked");
            dep.remaining -= 1;
            if dep.remaining == 0 {
                let launch = dep.launch.take().expect("waiting task holds its launch");
                st.ready.insert(d, launch);
            }
        }
        scheduler.changed.notify_all();
    }
}

impl Executor for AsyncDag {
    fn name(&self) -> &'static str {
        "async_dag"
    }

    fn submit(&mut self, launch: TaskLaunch, deps: &[TaskId]) {
        let id = launch.id;
        let mut st = self.scheduler.state.lock();
        let mut remaining = 0;
        for &d in deps {
            assert!(d < id, "dependency {d} of task {id} is not an earlier task");
            if let Some(node) = st.nodes.get_mut(&d) {
                node.dependents.push(id);
                remaining += 1;
            }
        }
        let launch = if remaining == 0 {
            st.ready.insert(id, launch);
            None
        } else {
            Some(launch)
        };
        st.nodes.insert(
            id,
            Node {
                remaining,
                dependents: Vec::new(),
                launch,
            },
        );
        self.scheduler.changed.notify_all();
    }

    fn fence(&mut self) {
        let mut st = self.scheduler.state.lock();
        while !st.nodes.is_empty() {
            self.scheduler.changed.wait(&mut st);
        }
    }
}

impl Drop for AsyncDag {
    fn drop(&mut self) {
        self.fence();
        self.scheduler.state.lock().shutdown = true;
        self.scheduler.changed.notify_all();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
