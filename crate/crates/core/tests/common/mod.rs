//! Random task programs and an independent global-array interpreter for them.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use taskgrid::exec::{ExecutorConfig, LogEntry};
use taskgrid::reduce::{ExactSum, Partial, TaskValue};
use taskgrid::runtime::{ElementKind, FieldAccess, Runtime, RuntimeError, TaskSpec};
use taskgrid::topology::MeshTopology;

pub const EXTENTS: [usize; 2] = [6, 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Access {
    Read,
    ReadOwned,
    ReadWrite,
    WriteDiscard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTask {
    /// One optional access per field.
    pub accesses: Vec<Option<Access>>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomProgram {
    pub fields: usize,
    pub tasks: Vec<RandomTask>,
}

pub fn random_program(rng: &mut impl Rng, max_tasks: usize, max_fields: usize) -> RandomProgram {
    let fields = rng.random_range(1..=max_fields);
    let ntasks = rng.random_range(2..=max_tasks);
    let tasks = (0..ntasks)
        .map(|t| {
            let mut accesses: Vec<Option<Access>> = (0..fields)
                .map(|_| match rng.random_range(0..6) {
                    0 => None,
                    1 | 2 => Some(Access::Read),
                    3 => Some(Access::ReadOwned),
                    4 => Some(Access::ReadWrite),
                    _ => Some(Access::WriteDiscard),
                })
                .collect();
            if accesses.iter().all(Option::is_none) {
                accesses[rng.random_range(0..fields)] = Some(Access::ReadWrite);
            }
            RandomTask {
                accesses,
                constant: (t + 1) as f64 * 0.125,
            }
        })
        .collect();
    RandomProgram { fields, tasks }
}

fn cell_index(g: [usize; 2]) -> usize {
    g[1] * EXTENTS[0] + g[0]
}

fn left(g: [usize; 2]) -> [usize; 2] {
    [(g[0] + EXTENTS[0] - 1) % EXTENTS[0], g[1]]
}

fn new_value(task: &RandomTask, own: f64, rw: bool, reads: &[(Access, f64)], linear: usize) -> f64 {
    let mut v = if rw { 0.5 * own } else { 0.0 };
    for &(_, r) in reads {
        v += 0.25 * r;
    }
    v + task.constant + 0.001 * linear as f64
}

/// Values each task returns and the final field contents, computed on global
/// arrays in submission order.
pub fn interpret(program: &RandomProgram) -> (Vec<TaskValue>, Vec<Vec<f64>>) {
    let n = EXTENTS[0] * EXTENTS[1];
    let mut fields = vec![vec![0.0; n]; program.fields];
    let mut values = Vec::new();
    for task in &program.tasks {
        let old = fields.clone();
        let mut sum = ExactSum::new();
        let mut any_read = false;
        for (f, a) in task.accesses.iter().enumerate() {
            if matches!(a, Some(Access::Read | Access::ReadOwned)) {
                any_read = true;
                for v in &old[f] {
                    sum.add(*v);
                }
            }
        }
        for (f, a) in task.accesses.iter().enumerate() {
            let rw = match a {
                Some(Access::ReadWrite) => true,
                Some(Access::WriteDiscard) => false,
                _ => continue,
            };
            for j in 0..EXTENTS[1] {
                for i in 0..EXTENTS[0] {
                    let g = [i, j];
                    let reads: Vec<(Access, f64)> = task
                        .accesses
                        .iter()
                        .enumerate()
                        .filter_map(|(r, ra)| match ra {
                            Some(Access::Read) => Some((Access::Read, old[r][cell_index(left(g))])),
                            Some(Access::ReadOwned) => Some((Access::ReadOwned, old[r][cell_index(g)])),
                            _ => None,
                        })
                        .collect();
                    fields[f][cell_index(g)] = new_value(task, old[f][cell_index(g)], rw, &reads, cell_index(g));
                }
            }
        }
        values.push(if any_read {
            TaskValue::Scalar(sum.value())
        } else {
            TaskValue::Unit
        });
    }
    (values, fields)
}

pub fn color_grid(ranks: usize) -> [usize; 2] {
    match ranks {
        1 => [1, 1],
        2 => [2, 1],
        3 => [3, 1],
        4 => [2, 2],
        6 => [3, 2],
        _ => panic!("no color grid for {ranks} ranks"),
    }
}

pub struct Execution {
    pub values: Vec<TaskValue>,
    pub fields: Vec<Vec<f64>>,
    pub edges: Vec<(u64, u64)>,
    pub log: Vec<LogEntry>,
}

/// Runs `program` on the runtime; the program's tasks read the left
/// neighbor of halo-read fields through ghost cells.
pub fn execute(program: &RandomProgram, config: &ExecutorConfig) -> Result<Execution, RuntimeError> {
    let topo = Arc::new(
        MeshTopology::decompose(&EXTENTS, &color_grid(config.ranks))?.with_periodic(&[true, true])?,
    );
    let mut rt = Runtime::new(config.clone())?;
    let handles: Vec<_> = (0..program.fields)
        .map(|f| rt.register_field(&topo, &format!("f{f}"), ElementKind::Scalar))
        .collect::<Result<_, _>>()?;
    let mut results = Vec::new();
    for (t, task) in program.tasks.iter().enumerate() {
        let mut spec_accesses = Vec::new();
        for (f, a) in task.accesses.iter().enumerate() {
            if let Some(a) = a {
                let h = &handles[f];
                spec_accesses.push(match a {
                    Access::Read => FieldAccess::ro(h),
                    Access::ReadOwned => FieldAccess::ro_owned(h),
                    Access::ReadWrite => FieldAccess::rw(h),
                    Access::WriteDiscard => FieldAccess::wo(h),
                });
            }
        }
        let task_c = task.clone();
        let hs = handles.clone();
        let mut spec = TaskSpec::new(format!("t{t}"), move |ctx| {
            let mut reads = Vec::new();
            let mut writes = Vec::new();
            for (f, a) in task_c.accesses.iter().enumerate() {
                match a {
                    Some(a @ (Access::Read | Access::ReadOwned)) => reads.push((*a, ctx.view(&hs[f])?)),
                    Some(a @ (Access::ReadWrite | Access::WriteDiscard)) => {
                        writes.push((*a == Access::ReadWrite, ctx.view_mut(&hs[f])?))
                    }
                    None => {}
                }
            }
            let mut sum = ExactSum::new();
            for (_, r) in &reads {
                sum.merge(&ctx.sum_cells(r.block(), |c| r.values()[c.offset]));
            }
            for (rw, w) in &mut writes {
                let rw = *rw;
                let reads = &reads;
                let task_c = &task_c;
                ctx.for_each_cell(w, |cell, out| {
                    let rv: Vec<(Access, f64)> = reads
                        .iter()
                        .map(|(a, r)| {
                            let mut l = cell.local;
                            if *a == Access::Read {
                                l[0] -= 1;
                            }
                            (*a, r.at(l, 0))
                        })
                        .collect();
                    let g = [cell.global[0], cell.global[1]];
                    out[0] = new_value(task_c, out[0], rw, &rv, cell_index(g));
                });
            }
            Ok(if reads.is_empty() { Partial::None } else { Partial::Sum(sum) })
        });
        for a in spec_accesses {
            spec = spec.access(a);
        }
        results.push(rt.submit(spec)?);
    }
    let values = results.iter().map(|r| r.wait()).collect::<Result<Vec<_>, _>>()?;
    let fields = handles.iter().map(|h| rt.gather(h)).collect::<Result<Vec<_>, _>>()?;
    Ok(Execution {
        values,
        fields,
        edges: rt.edges().to_vec(),
        log: rt.execution_log(),
    })
}

/// Every edge's source finished before its target started.
pub fn edges_respected(edges: &[(u64, u64)], log: &[LogEntry]) -> Result<(), String> {
    let find = |t: u64| log.iter().find(|e| e.task == t).ok_or(format!("task {t} missing from log"));
    for &(a, b) in edges {
        let (ea, eb) = (find(a)?, find(b)?);
        if ea.finish >= eb.start {
            return Err(format!("edge {a}->{b} violated: {ea:?} vs {eb:?}"));
        }
    }
    Ok(())
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub mod stats_oracle;
pub mod hydro_oracle;
pub mod poisson_oracle;
