//! In-process message transport between simulated ranks.
//!
//! Each rank owns a mailbox keyed by `(source, tag)`; messages with the same
//! key are delivered in send order. Every send and receive is counted so the
//! communication cost of a program can be asserted exactly.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use thiserror::Error;

use crate::reduce::Partial;

pub type Rank = usize;

/// Message tag: owning task, per-instance operation sequence number and a
/// sub-index (transfer number or collective phase).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag {
    pub task: u64,
    pub seq: u32,
    pub sub: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Cells(Vec<f64>),
    Reduction { comm_size: usize, value: Partial },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageEnvelope {
    pub source: Rank,
    pub dest: Rank,
    pub tag: Tag,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traffic {
    PointToPoint,
    Collective,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommError {
    #[error("rank {rank} outside communicator of size {size}")]
    RankOutOfRange { rank: Rank, size: usize },
    #[error("rank {dest} timed out waiting for a message from rank {from} ({tag:?})")]
    Timeout { from: Rank, dest: Rank, tag: Tag },
    #[error("task {task} was aborted while communicating")]
    Aborted { task: u64 },
    #[error("mismatched collective on rank {rank}: {detail}")]
    Mismatch { rank: Rank, detail: String },
    #[error("rank {rank} received an unexpected payload ({detail})")]
    UnexpectedPayload { rank: Rank, detail: String },
}

/// Exact per-rank communication counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RankCounters {
    pub point_to_point_sends: u64,
    pub collective_sends: u64,
    pub collective_receives: u64,
    /// Sequential communication steps on this rank's critical path.
    pub collective_rounds: u64,
}

impl RankCounters {
    /// Messages sent plus received by this rank during collectives.
    pub fn collective_message_ops(&self) -> u64 {
        self.collective_sends + self.collective_receives
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommStats {
    pub ranks: Vec<RankCounters>,
}

impl CommStats {
    pub fn total_point_to_point(&self) -> u64 {
        self.ranks.iter().map(|r| r.point_to_point_sends).sum()
    }

    /// Collective messages sent, summed over ranks.
    pub fn total_collective_messages(&self) -> u64 {
        self.ranks.iter().map(|r| r.collective_sends).sum()
    }

    pub fn max_collective_message_ops(&self) -> u64 {
        self.ranks.iter().map(RankCounters::collective_message_ops).max().unwrap_or(0)
    }

    pub fn max_collective_rounds(&self) -> u64 {
        self.ranks.iter().map(|r| r.collective_rounds).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.ranks.iter().all(|r| *r == RankCounters::default())
    }
}

#[derive(Default)]
struct AtomicCounters {
    p2p_sends: AtomicU64,
    coll_sends: AtomicU64,
    coll_recvs: AtomicU64,
    coll_rounds: AtomicU64,
}

#[derive(Default)]
struct Mailbox {
    queues: Mutex<HashMap<(Rank, Tag), VecDeque<MessageEnvelope>>>,
    ready: Condvar,
}

pub struct Transport {
    ranks: usize,
    mailboxes: Vec<Mailbox>,
    counters: Vec<AtomicCounters>,
    aborted: Mutex<HashSet<u64>>,
    timeout: Duration,
    adhoc: AtomicU64,
}

impl std::fmt::Debug for Transport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transport")
            .field("ranks", &self.ranks)
            .field("timeout", &self.timeout)
            .finish()
    }
}

/// Task ids handed out for collectives issued outside any runtime task.
const ADHOC_BASE: u64 = 1 << 62;

impl Transport {
    pub fn new(ranks: usize) -> Self {
        Self::with_timeout(ranks, Duration::from_secs(300))
    }

    pub fn with_timeout(ranks: usize, timeout: Duration) -> Self {
        assert!(ranks >= 1, "transport needs at least one rank");
        Self {
            ranks,
            mailboxes: (0..ranks).map(|_| Mailbox::default()).collect(),
            counters: (0..ranks).map(|_| AtomicCounters::default()).collect(),
            aborted: Mutex::new(HashSet::new()),
            timeout,
            adhoc: AtomicU64::new(ADHOC_BASE),
        }
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    pub(crate) fn next_adhoc_task(&self) -> u64 {
        self.adhoc.fetch_add(1, Ordering::Relaxed)
    }

    fn check_rank(&self, rank: Rank) -> Result<(), CommError> {
        if rank >= self.ranks {
            return Err(CommError::RankOutOfRange {
                rank,
                size: self.ranks,
            });
        }
        Ok(())
    }

    pub fn send(&self, envelope: MessageEnvelope, traffic: Traffic) -> Result<(), CommError> {
        self.check_rank(envelope.source)?;
        self.check_rank(envelope.dest)?;
        let counters = &self.counters[envelope.source];
        match traffic {
            Traffic::PointToPoint => counters.p2p_sends.fetch_add(1, Ordering::Relaxed),
            Traffic::Collective => counters.coll_sends.fetch_add(1, Ordering::Relaxed),
        };
        let mailbox = &self.mailboxes[envelope.dest];
        let key = (envelope.source, envelope.tag);
        mailbox.queues.lock().entry(key).or_default().push_back(envelope);
        mailbox.ready.notify_all();
        Ok(())
    }

    /// Blocks until a message from `source` with `tag` reaches `dest`.
    pub fn recv(&self, dest: Rank, source: Rank, tag: Tag, traffic: Traffic) -> Result<MessageEnvelope, CommError> {
        self.check_rank(dest)?;
        self.check_rank(source)?;
        let mailbox = &self.mailboxes[dest];
        let deadline = Instant::now() + self.timeout;
        let mut queues = mailbox.queues.lock();
        loop {
            if let Some(queue) = queues.get_mut(&(source, tag)) {
                if let Some(env) = queue.pop_front() {
                    if queue.is_empty() {
                        queues.remove(&(source, tag));
                    }
                    if traffic == Traffic::Collective {
                        self.counters[dest].coll_recvs.fetch_add(1, Ordering::Relaxed);
                    }
                    return Ok(env);
                }
            }
            if self.aborted.lock().contains(&tag.task) {
                return Err(CommError::Aborted { task: tag.task });
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(CommError::Timeout { from: source, dest, tag });
            }
            // Wake periodically so aborts are noticed even without a send.
            let wait = (deadline - now).min(Duration::from_millis(50));
            mailbox.ready.wait_for(&mut queues, wait);
        }
    }

    pub fn count_round(&self, rank: Rank) {
        self.counters[rank].coll_rounds.fetch_add(1, Ordering::Relaxed);
    }

    /// Fails every pending and future receive of `task`.
    pub fn abort(&self, task: u64) {
        self.aborted.lock().insert(task);
        for mailbox in &self.mailboxes {
            let _guard = mailbox.queues.lock();
            mailbox.ready.notify_all();
        }
    }

    /// Drops undelivered messages and the abort mark of a finished task.
    pub fn retire(&self, task: u64) {
        self.aborted.lock().remove(&task);
        for mailbox in &self.mailboxes {
            mailbox.queues.lock().retain(|(_, tag), _| tag.task != task);
        }
    }

    pub fn comm_stats(&self) -> CommStats {
        CommStats {
            ranks: self
                .counters
                .iter()
                .map(|c| RankCounters {
                    point_to_point_sends: c.p2p_sends.load(Ordering::Relaxed),
                    collective_sends: c.coll_sends.load(Ordering::Relaxed),
                    collective_receives: c.coll_recvs.load(Ordering::Relaxed),
                    collective_rounds: c.coll_rounds.load(Ordering::Relaxed),
                })
                .collect(),
        }
    }

    pub fn reset_stats(&self) {
        for c in &self.counters {
            c.p2p_sends.store(0, Ordering::Relaxed);
            c.coll_sends.store(0, Ordering::Relaxed);
            c.coll_recvs.store(0, Ordering::Relaxed);
            c.coll_rounds.store(0, Ordering::Relaxed);
        }
    }
}

/// One rank's endpoint for the duration of a task instance.
pub struct RankComm<'a> {
    transport: &'a Transport,
    rank: Rank,
    size: usize,
    task: u64,
    seq: u32,
}

impl<'a> RankComm<'a> {
    pub fn new(transport: &'a Transport, rank: Rank, size: usize, task: u64) -> Self {
        Self {
            transport,
            rank,
            size,
            task,
            seq: 0,
        }
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn task(&self) -> u64 {
        self.task
    }

    pub fn transport(&self) -> &'a Transport {
        self.transport
    }

    /// Starts a new communication operation. All ranks of a task issue the
    /// same sequence of operations, so matching tags line up.
    pub fn next_tag(&mut self) -> Tag {
        let tag = Tag {
            task: self.task,
            seq: self.seq,
            sub: 0,
        };
        self.seq += 1;
        tag
    }

    pub fn send(&self, dest: Rank, tag: Tag, payload: Payload, traffic: Traffic) -> Result<(), CommError> {
        if dest >= self.size {
            return Err(CommError::RankOutOfRange {
                rank: dest,
                size: self.size,
            });
        }
        self.transport.send(
            MessageEnvelope {
                source: self.rank,
                dest,
                tag,
                payload,
            },
            traffic,
        )
    }

    pub fn recv(&self, source: Rank, tag: Tag, traffic: Traffic) -> Result<Payload, CommError> {
        if source >= self.size {
            return Err(CommError::RankOutOfRange {
                rank: source,
                size: self.size,
            });
        }
        Ok(self.transport.recv(self.rank, source, tag, traffic)?.payload)
    }

    pub fn count_round(&self) {
        self.transport.count_round(self.rank);
    }

    pub fn abort(&self) {
        self.transport.abort(self.task);
    }
}
