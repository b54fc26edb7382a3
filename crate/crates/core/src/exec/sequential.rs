//! Bulk-synchronous executor: one task at a time in submission order.

use std::sync::mpsc::{self, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use parking_lot::{Condvar, Mutex};

use super::{run_launch, Executor, Shared, TaskLaunch};
use crate::runtime::TaskId;

#[derive(Default)]
struct Pending {
    count: Mutex<usize>,
    done: Condvar,
}

pub struct Sequential {
    tx: Option<Sender<TaskLaunch>>,
    pending: Arc<Pending>,
    driver: Option<JoinHandle<()>>,
}

impl Sequential {
    pub fn new(shared: Arc<Shared>) -> Self {
        let (tx, rx) = mpsc::channel::<TaskLaunch>();
        let pending = Arc::new(Pending::default());
        let p = pending.clone();
        let driver = thread::Builder::new()
            .name("sequential-driver".into())
            .spawn(move || {
                for launch in rx {
                    run_launch(&shared, launch);
                    let mut count = p.count.lock();
                    *count -= 1;
                    if *count == 0 {
                        p.done.notify_all();
                    }
                }
            })
            .expect("spawn driver thread");
        Self {
            tx: Some(tx),
            pending,
            driver: Some(driver),
        }
    }
}

impl Executor for Sequential {
    fn name(&self) -> &'static str {
        "sequential"
    }

    fn submit(&mut self, launch: TaskLaunch, _deps: &[TaskId]) {
        // Submission order already satisfies every inferred edge.
        *self.pending.count.lock() += 1;
        self.tx
            .as_ref()
            .expect("executor running")
            .send(launch)
            .expect("driver thread alive");
    }

    fn fence(&mut self) {
        let mut count = self.pending.count.lock();
        while *count > 0 {
            self.pending.done.wait(&mut count);
        }
    }
}

impl Drop for Sequential {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(driver) = self.driver.take() {
            let _ = driver.join();
        }
    }
}
