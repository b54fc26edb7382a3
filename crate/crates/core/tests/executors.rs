use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use taskgrid::exec::collective::{allreduce_all, collective_registry, BinomialTree, Star};
use taskgrid::exec::transport::Transport;
use taskgrid::exec::{run_async, run_sequential, ExecutorConfig};
use taskgrid::reduce::{Partial, ReduceOp};
use taskgrid::runtime::{ElementKind, FieldHandle, Runtime, TaskSpec};
use taskgrid::topology::{MeshTopology, MAX_DIMS};

fn fill_index(rt: &mut Runtime, f: &FieldHandle) {
    let h = f.clone();
    let ext = f.topology().extents().to_vec();
    rt.submit(
        TaskSpec::new("fill", move |ctx| {
            let mut v = ctx.view_mut(&h)?;
            let ext = &ext;
            ctx.for_each_cell(&mut v, |c, out| {
                let mut lin = 0;
                for axis in (0..ext.len()).rev() {
                    lin = lin * ext[axis] + c.global[axis];
                }
                out[0] = 1.0 + lin as f64;
            });
            Ok(Partial::None)
        })
        .write_discard(f),
    )
    .unwrap();
}

fn touch_ghosts(rt: &mut Runtime, f: &FieldHandle) {
    rt.submit(TaskSpec::new("reader", |_| Ok(Partial::None)).read(f)).unwrap();
}

/// Expected ghost contents of every color, computed from global indices.
fn check_ghosts(rt: &mut Runtime, topo: &MeshTopology, f: &FieldHandle) {
    let ext = topo.extents().to_vec();
    for color in 0..topo.color_count() {
        let block = topo.local_block(color).unwrap();
        let data = rt.gather_block(f, color).unwrap();
        for g in block.ghost_ranges() {
            for cell in block.slab_cells(g.axis, g.local.clone()) {
                let mut global = block.local_to_global(cell.local);
                let n = ext[g.axis] as isize;
                global[g.axis] = global[g.axis].rem_euclid(n);
                let mut lin = 0;
                for axis in (0..ext.len()).rev() {
                    lin = lin * ext[axis] + global[axis] as usize;
                }
                assert_eq!(data[cell.offset], 1.0 + lin as f64, "color {color} ghost {:?}", cell.local);
            }
        }
        for b in block.boundary_ranges() {
            for cell in block.slab_cells(b.axis, b.local.clone()) {
                assert_eq!(data[cell.offset], 0.0);
            }
        }
    }
}

#[test]
fn periodic_two_rank_ghosts() {
    let topo = Arc::new(MeshTopology::decompose(&[8], &[2]).unwrap().with_periodic(&[true]).unwrap());
    let mut rt = Runtime::new(ExecutorConfig::sequential(2)).unwrap();
    let f = rt.register_field(&topo, "f", ElementKind::Scalar).unwrap();
    fill_index(&mut rt, &f);
    touch_ghosts(&mut rt, &f);
    let left = rt.gather_block(&f, 0).unwrap();
    // rank 0: ghost, owned 0..4, ghost
    assert_eq!(left, vec![8.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(rt.comm_stats().total_point_to_point(), 4);
}

#[test]
fn owner_write_visible_after_exchange() {
    let topo = Arc::new(MeshTopology::decompose(&[4], &[2]).unwrap());
    let mut rt = Runtime::new(ExecutorConfig::async_dag(2, 1)).unwrap();
    let f = rt.register_field(&topo, "f", ElementKind::Scalar).unwrap();
    let h = f.clone();
    rt.submit(
        TaskSpec::new("write42", move |ctx| {
            let mut v = ctx.view_mut(&h)?;
            if ctx.rank() == 1 {
                v.set([0, 0, 0], 0, 42.0);
            }
            Ok(Partial::None)
        })
        .read_write(&f),
    )
    .unwrap();
    let h = f.clone();
    let seen = rt
        .submit(
            TaskSpec::new("peek", move |ctx| {
                let v = ctx.view(&h)?;
                Ok(Partial::Max(if ctx.rank() == 0 { v.at([2, 0, 0], 0) } else { f64::MIN }))
            })
            .read(&f),
        )
        .unwrap();
    assert_eq!(seen.wait_scalar().unwrap(), 42.0);
    let labels: Vec<String> = rt.execution_log().into_iter().map(|e| e.label).collect();
    assert_eq!(labels, ["write42", "exchange:f", "peek"]);
}

#[test]
fn exchange_is_skipped_when_fresh_or_discarded() {
    let topo = Arc::new(MeshTopology::decompose(&[8, 8], &[2, 2]).unwrap());
    let mut rt = Runtime::new(ExecutorConfig::sequential(4)).unwrap();
    let f = rt.register_field(&topo, "f", ElementKind::Scalar).unwrap();
    touch_ghosts(&mut rt, &f);
    assert_eq!(rt.comm_stats().total_point_to_point(), 0);
    fill_index(&mut rt, &f);
    touch_ghosts(&mut rt, &f);
    touch_ghosts(&mut rt, &f);
    assert_eq!(rt.comm_stats().total_point_to_point(), 8);
    assert_eq!(rt.task_count(), 5);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn full_exchange_fills_every_ghost(
        dims in 1usize..=3,
        ext in prop::array::uniform3(3usize..9),
        cols in prop::array::uniform3(1usize..4),
        periodic in prop::array::uniform3(any::<bool>()),
        halo in 1usize..3,
    ) {
        let extents = &ext[..dims];
        let colors: Vec<usize> = (0..dims).map(|a| cols[a].min(extents[a] / halo).max(1)).collect();
        let topo = MeshTopology::decompose(extents, &colors)
            .and_then(|t| t.with_halo(halo))
            .and_then(|t| t.with_periodic(&periodic[..dims]));
        prop_assume!(topo.is_ok());
        let topo = Arc::new(topo.unwrap());
        let ranks = topo.color_count();
        let mut rt = Runtime::new(ExecutorConfig::async_dag(ranks, 2)).unwrap();
        let f = rt.register_field(&topo, "f", ElementKind::Scalar).unwrap();
        fill_index(&mut rt, &f);
        rt.reset_comm_stats();
        touch_ghosts(&mut rt, &f);
        check_ghosts(&mut rt, &topo, &f);
        prop_assert_eq!(rt.comm_stats().total_point_to_point(), topo.exchange_plan().len() as u64);
        let _ = MAX_DIMS;
    }

    #[test]
    fn collectives_fold_all_contributions(
        p in prop::sample::select(vec![1usize, 2, 3, 4, 8, 16]),
        values in prop::collection::vec(-1e6f64..1e6, 16),
        max in any::<bool>(),
    ) {
        let op = if max { ReduceOp::Max } else { ReduceOp::Sum };
        let expected = if max {
            values[..p].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            values[..p].iter().copied().collect::<taskgrid::reduce::ExactSum>().value()
        };
        for name in ["star", "binomial_tree"] {
            let algo = collective_registry().get(name).unwrap()();
            let t = Transport::new(p);
            let out = allreduce_all(&t, &*algo, values[..p].iter().map(|&v| Partial::from_op(op, v)).collect());
            for r in out {
                prop_assert_eq!(r.unwrap().finish().scalar().unwrap().to_bits(), expected.to_bits());
            }
        }
    }
}

fn ceil_log2(p: usize) -> u64 {
    (usize::BITS - (p - 1).leading_zeros()) as u64
}

#[test]
fn collective_cost_model() {
    for p in [2usize, 4, 8, 16] {
        let t = Transport::new(p);
        allreduce_all(&t, &Star, (0..p).map(|r| Partial::sum(r as f64)).collect());
        let star = t.comm_stats();
        assert_eq!(star.ranks[0].collective_message_ops(), 2 * (p as u64 - 1));
        assert_eq!(star.ranks[0].collective_rounds, 2 * (p as u64 - 1));
        let t = Transport::new(p);
        allreduce_all(&t, &BinomialTree, (0..p).map(|r| Partial::sum(r as f64)).collect());
        let tree = t.comm_stats();
        assert_eq!(tree.max_collective_rounds(), 2 * ceil_log2(p));
        if p >= 4 {
            assert!(star.max_collective_rounds() > tree.max_collective_rounds());
        }
    }
}

fn sleepy_chains(rt: &mut Runtime, chains: usize, len: usize, nap: Duration) -> Result<(), taskgrid::runtime::RuntimeError> {
    let topo = Arc::new(MeshTopology::decompose(&[4], &[rt.ranks()]).unwrap());
    for c in 0..chains {
        let f = rt.register_field(&topo, &format!("chain{c}"), ElementKind::Scalar)?;
        for k in 0..len {
            rt.submit(
                TaskSpec::new(format!("c{c}k{k}"), move |_| {
                    std::thread::sleep(nap);
                    Ok(Partial::None)
                })
                .read_write(&f),
            )?;
        }
    }
    Ok(())
}

#[test]
fn independent_chains_overlap() {
    let nap = Duration::from_millis(50);
    let t0 = Instant::now();
    run_sequential(|rt| sleepy_chains(rt, 2, 4, nap), &ExecutorConfig::sequential(1)).unwrap();
    let sequential = t0.elapsed();
    let t0 = Instant::now();
    run_async(|rt| sleepy_chains(rt, 2, 4, nap), &ExecutorConfig::async_dag(1, 2)).unwrap();
    let dag = t0.elapsed();
    assert!(dag.as_secs_f64() <= 0.75 * sequential.as_secs_f64(), "{dag:?} vs {sequential:?}");

    let t0 = Instant::now();
    run_async(|rt| sleepy_chains(rt, 1, 4, nap), &ExecutorConfig::async_dag(1, 2)).unwrap();
    assert!(t0.elapsed() >= 4 * nap);
}

#[test]
fn comm_stats_are_deterministic() {
    let program = |rt: &mut Runtime| {
        let topo = Arc::new(MeshTopology::decompose(&[8, 8], &[2, 2]).unwrap().with_periodic(&[true, false]).unwrap());
        let f = rt.register_field(&topo, "f", ElementKind::Scalar)?;
        for _ in 0..3 {
            fill_index(rt, &f);
            rt.submit(TaskSpec::new("sum", |ctx| Ok(Partial::sum(ctx.rank() as f64))).read(&f))?;
        }
        Ok(())
    };
    for collective in ["star", "binomial_tree"] {
        let config = ExecutorConfig::async_dag(4, 2).with_collective(collective);
        let (_, a) = run_async(program, &config).unwrap();
        let (_, b) = run_async(program, &config).unwrap();
        let (_, c) = run_sequential(program, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.total_point_to_point(), 3 * 12);
    }
}

#[test]
fn executor_registry_rejects_unknown() {
    let err = Runtime::new(ExecutorConfig::default().with_executor("warp")).unwrap_err();
    assert!(err.to_string().contains("sequential, async_dag"), "{err}");
    assert!(Runtime::new(ExecutorConfig::default().with_collective("ring")).is_err());
    assert!(Runtime::new(ExecutorConfig { ranks: 0, ..ExecutorConfig::default() }).is_err());
}
