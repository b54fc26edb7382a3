//! Allreduce algorithms over the simulated transport.
//!
//! [`Star`] funnels every contribution through rank 0, which serves as the
//! single communication handler; [`BinomialTree`] reduces up and broadcasts
//! down a binomial tree. Both combine contributions in ascending rank order.

use std::fmt;
use std::sync::{Arc, OnceLock};
use std::thread;

use crate::exec::transport::{CommError, Payload, RankComm, Tag, Traffic, Transport};
use crate::reduce::Partial;
use crate::registry::Registry;

pub trait AllreduceAlgorithm: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Collective call: every rank of the communicator must call this with
    /// its own contribution; every rank receives the combined value.
    fn allreduce(&self, comm: &mut RankComm<'_>, value: Partial) -> Result<Partial, CommError>;
}

const REDUCE: u32 = 0;
const BROADCAST: u32 = 1;

fn phase(tag: Tag, sub: u32) -> Tag {
    Tag { sub, ..tag }
}

fn send_partial(comm: &RankComm<'_>, dest: usize, tag: Tag, value: &Partial) -> Result<(), CommError> {
    comm.send(
        dest,
        tag,
        Payload::Reduction {
            comm_size: comm.size(),
            value: value.clone(),
        },
        Traffic::Collective,
    )?;
    comm.count_round();
    Ok(())
}

fn recv_partial(comm: &RankComm<'_>, source: usize, tag: Tag) -> Result<Partial, CommError> {
    let payload = comm.recv(source, tag, Traffic::Collective)?;
    comm.count_round();
    match payload {
        Payload::Reduction { comm_size, value } if comm_size == comm.size() => Ok(value),
        Payload::Reduction { comm_size, .. } => {
            comm.abort();
            Err(CommError::Mismatch {
                rank: comm.rank(),
                detail: format!(
                    "rank {source} uses a communicator of size {comm_size}, this rank {}",
                    comm.size()
                ),
            })
        }
        Payload::Cells(_) => Err(CommError::UnexpectedPayload {
            rank: comm.rank(),
            detail: "cell data during a collective".into(),
        }),
    }
}

fn combine(comm: &RankComm<'_>, low: Partial, high: Partial) -> Result<Partial, CommError> {
    low.combine(high).map_err(|(a, b)| {
        comm.abort();
        CommError::Mismatch {
            rank: comm.rank(),
            detail: format!("cannot combine a {a} contribution with a {b} contribution"),
        }
    })
}

fn check_membership(comm: &RankComm<'_>) -> Result<(), CommError> {
    if comm.rank() >= comm.size() || comm.size() > comm.transport().ranks() {
        comm.abort();
        return Err(CommError::Mismatch {
            rank: comm.rank(),
            detail: format!(
                "communicator of size {} does not fit rank {} on a {}-rank transport",
                comm.size(),
                comm.rank(),
                comm.transport().ranks()
            ),
        });
    }
    Ok(())
}

/// Root-centred allreduce: gather to rank 0, fold, send back.
///
/// Rank 0 performs `2(P-1)` message operations in `2(P-1)` rounds.
#[derive(Debug, Default, Clone, Copy)]
pub struct Star;

impl AllreduceAlgorithm for Star {
    fn name(&self) -> &'static str {
        "star"
    }

    fn allreduce(&self, comm: &mut RankComm<'_>, value: Partial) -> Result<Partial, CommError> {
        check_membership(comm)?;
        let tag = comm.next_tag();
        let size = comm.size();
        if size == 1 {
            return Ok(value);
        }
        if comm.rank() == 0 {
            let mut acc = value;
            for source in 1..size {
                let v = recv_partial(comm, source, phase(tag, REDUCE))?;
                acc = combine(comm, acc, v)?;
            }
            for dest in 1..size {
                send_partial(comm, dest, phase(tag, BROADCAST), &acc)?;
            }
            Ok(acc)
        } else {
            send_partial(comm, 0, phase(tag, REDUCE), &value)?;
            recv_partial(comm, 0, phase(tag, BROADCAST))
        }
    }
}

/// Binomial-tree reduce to rank 0 followed by a binomial-tree broadcast.
///
/// No rank takes part in more than `2 * ceil(log2 P)` rounds.
#[derive(Debug, Default, Clone, Copy)]
pub struct BinomialTree;

impl AllreduceAlgorithm for BinomialTree {
    fn name(&self) -> &'static str {
        "binomial_tree"
    }

    fn allreduce(&self, comm: &mut RankComm<'_>, value: Partial) -> Result<Partial, CommError> {
        check_membership(comm)?;
        let tag = comm.next_tag();
        let (rank, size) = (comm.rank(), comm.size());
        if size == 1 {
            return Ok(value);
        }
        // Reduce: at step `mask`, ranks with that bit set hand their subtree
        // (ranks rank..rank+mask) to rank - mask and drop out.
        let mut acc = value;
        let mut mask = 1;
        while mask < size {
            if rank & mask != 0 {
                send_partial(comm, rank - mask, phase(tag, REDUCE), &acc)?;
                break;
            }
            if rank + mask < size {
                let v = recv_partial(comm, rank + mask, phase(tag, REDUCE))?;
                acc = combine(comm, acc, v)?;
            }
            mask <<= 1;
        }
        // Broadcast: receive from the parent (lowest set bit cleared), then
        // forward to children at decreasing distances.
        let top = size.next_power_of_two();
        let mut span = if rank == 0 {
            top
        } else {
            let low_bit = rank & rank.wrapping_neg();
            acc = recv_partial(comm, rank - low_bit, phase(tag, BROADCAST))?;
            low_bit
        };
        span >>= 1;
        while span >= 1 {
            if rank + span < size {
                send_partial(comm, rank + span, phase(tag, BROADCAST), &acc)?;
            }
            span >>= 1;
        }
        Ok(acc)
    }
}

pub type CollectiveFactory = fn() -> Arc<dyn AllreduceAlgorithm>;

pub fn collective_registry() -> &'static Registry<CollectiveFactory> {
    static REGISTRY: OnceLock<Registry<CollectiveFactory>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg: Registry<CollectiveFactory> = Registry::new("collective algorithm");
        reg.register_with_aliases(
            "star",
            &["root", "linear"],
            "gather to rank 0 and send back; rank 0 is the single communication handler",
            || Arc::new(Star),
        )
        .register_with_aliases(
            "binomial_tree",
            &["binomial", "tree"],
            "binomial-tree reduce followed by a binomial-tree broadcast",
            || Arc::new(BinomialTree),
        );
        reg
    })
}

/// Runs one allreduce with every rank on its own thread. Used outside
/// runtime tasks (tests, validation).
pub fn allreduce_all(
    transport: &Transport,
    algorithm: &dyn AllreduceAlgorithm,
    contributions: Vec<Partial>,
) -> Vec<Result<Partial, CommError>> {
    let size = contributions.len();
    let task = transport.next_adhoc_task();
    let results = thread::scope(|s| {
        let handles: Vec<_> = contributions
            .into_iter()
            .enumerate()
            .map(|(rank, value)| {
                s.spawn(move || {
                    let mut comm = RankComm::new(transport, rank, size, task);
                    algorithm.allreduce(&mut comm, value)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    });
    transport.retire(task);
    results
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::{ReduceOp, TaskValue};

    fn ceil_log2(p: usize) -> u64 {
        (usize::BITS - (p - 1).leading_zeros()) as u64
    }

    fn run(algo: &dyn AllreduceAlgorithm, p: usize, op: ReduceOp, f: impl Fn(usize) -> f64) -> (Vec<f64>, Transport) {
        let t = Transport::new(p);
        let values = (0..p).map(|r| Partial::from_op(op, f(r))).collect();
        let out = allreduce_all(&t, algo, values)
            .into_iter()
            .map(|r| r.unwrap().finish().scalar().unwrap())
            .collect();
        (out, t)
    }

    #[test]
    fn rank_sum_on_four() {
        for algo in [&Star as &dyn AllreduceAlgorithm, &BinomialTree] {
            let (out, _) = run(algo, 4, ReduceOp::Sum, |r| r as f64);
            assert_eq!(out, vec![6.0; 4], "{}", algo.name());
        }
    }

    #[test]
    fn star_counts() {
        let (_, t) = run(&Star, 8, ReduceOp::Sum, |r| r as f64);
        let stats = t.comm_stats();
        assert_eq!(stats.ranks[0].collective_message_ops(), 14);
        assert_eq!(stats.ranks[0].collective_rounds, 14);
        assert_eq!(stats.ranks[5].collective_rounds, 2);
        let (_, t) = run(&Star, 4, ReduceOp::Max, |r| r as f64);
        assert_eq!(t.comm_stats().total_collective_messages(), 6);
    }

    #[test]
    fn tree_rounds() {
        for p in [1, 2, 3, 4, 5, 7, 8, 13, 16] {
            let (out, t) = run(&BinomialTree, p, ReduceOp::Max, |r| (r * 3 % 5) as f64);
            let expected = (0..p).map(|r| (r * 3 % 5) as f64).fold(f64::MIN, f64::max);
            assert!(out.iter().all(|&v| v == expected));
            let stats = t.comm_stats();
            assert_eq!(stats.max_collective_rounds(), if p == 1 { 0 } else { 2 * ceil_log2(p) }, "P={p}");
            assert_eq!(stats.total_collective_messages(), 2 * (p as u64 - 1));
        }
    }

    #[test]
    fn single_rank_is_free() {
        let (out, t) = run(&Star, 1, ReduceOp::Min, |_| 3.5);
        assert_eq!(out, vec![3.5]);
        assert!(t.comm_stats().is_zero());
    }

    #[test]
    fn mismatched_kinds_fail_everywhere() {
        let t = Transport::new(3);
        let results = allreduce_all(&t, &BinomialTree, vec![Partial::sum(1.0), Partial::Max(1.0), Partial::sum(2.0)]);
        assert!(results.iter().all(Result::is_err));
        assert!(results.iter().any(|r| matches!(r, Err(CommError::Mismatch { .. }))));
    }

    #[test]
    fn mismatched_sizes_fail() {
        let t = Transport::new(2);
        let results = thread::scope(|s| {
            let a = s.spawn(|| BinomialTree.allreduce(&mut RankComm::new(&t, 0, 2, 9), Partial::sum(1.0)));
            let b = s.spawn(|| Star.allreduce(&mut RankComm::new(&t, 1, 3, 9), Partial::sum(1.0)));
            [a.join().unwrap(), b.join().unwrap()]
        });
        assert!(results.iter().all(Result::is_err));
    }

    #[test]
    fn registry_names() {
        let reg = collective_registry();
        assert_eq!(reg.get("star").unwrap()().name(), "star");
        assert_eq!(reg.get("tree").unwrap()().name(), "binomial_tree");
        assert!(reg.get("ring").is_err());
    }

    #[test]
    fn vector_sums() {
        let t = Transport::new(3);
        let contributions = (0..3)
            .map(|r| Partial::SumVec(vec![crate::reduce::ExactSum::from_value(r as f64); 2]))
            .collect();
        for r in allreduce_all(&t, &Star, contributions) {
            assert_eq!(r.unwrap().finish(), TaskValue::Vector(vec![3.0, 3.0]));
        }
    }
}
