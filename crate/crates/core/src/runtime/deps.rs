//! Dependency inference from declared field accesses.

use std::collections::HashMap;

use super::field::FieldId;
use super::Privilege;

pub type TaskId = u64;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct FieldHistory {
    last_writer: Option<TaskId>,
    readers: Vec<TaskId>,
}

/// Per-field summary of the accesses submitted so far: the last writer and
/// the readers since that write. Older accesses are dominated and dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessHistory {
    fields: HashMap<FieldId, FieldHistory>,
}

impl AccessHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, task: TaskId, accesses: &[(FieldId, Privilege)]) {
        for &(field, privilege) in accesses {
            let h = self.fields.entry(field).or_default();
            if privilege.writes() {
                h.last_writer = Some(task);
                h.readers.clear();
            } else {
                h.readers.push(task);
            }
        }
    }

    pub fn last_writer(&self, field: FieldId) -> Option<TaskId> {
        self.fields.get(&field).and_then(|h| h.last_writer)
    }
}

/// Predecessors of a new task with `accesses`, ascending and deduplicated.
///
/// A read depends on the last writer. A write depends on the readers since
/// the last writer, or on the last writer itself when there were none; the
/// writer-to-writer edge is implied through the readers and left out.
pub fn infer_edges(history: &AccessHistory, accesses: &[(FieldId, Privilege)]) -> Vec<TaskId> {
    let mut deps = Vec::new();
    for &(field, privilege) in accesses {
        let Some(h) = history.fields.get(&field) else {
            continue;
        };
        if privilege.writes() && !h.readers.is_empty() {
            deps.extend_from_slice(&h.readers);
        } else if let Some(w) = h.last_writer {
            deps.push(w);
        }
    }
    deps.sort_unstable();
    deps.dedup();
    deps
}

#[cfg(test)]
mod tests {
    use super::*;
    use Privilege::*;

    #[test]
    fn reader_after_writer() {
        let mut h = AccessHistory::new();
        h.record(1, &[(0, ReadWrite)]);
        assert_eq!(infer_edges(&h, &[(0, ReadOnly)]), vec![1]);
    }

    #[test]
    fn writer_after_readers() {
        let mut h = AccessHistory::new();
        h.record(1, &[(0, ReadWrite)]);
        h.record(2, &[(0, ReadOnly)]);
        h.record(3, &[(0, ReadOnly)]);
        assert_eq!(infer_edges(&h, &[(0, WriteDiscard)]), vec![2, 3]);
    }

    #[test]
    fn empty_history() {
        assert!(infer_edges(&AccessHistory::new(), &[(0, ReadOnly)]).is_empty());
    }

    #[test]
    fn writer_chain_and_dedup() {
        let mut h = AccessHistory::new();
        h.record(1, &[(0, ReadWrite), (1, ReadWrite)]);
        assert_eq!(infer_edges(&h, &[(0, ReadOnly), (1, ReadWrite)]), vec![1]);
        h.record(2, &[(0, ReadWrite)]);
        assert_eq!(h.last_writer(0), Some(2));
        assert_eq!(infer_edges(&h, &[(0, ReadWrite)]), vec![2]);
    }
}
