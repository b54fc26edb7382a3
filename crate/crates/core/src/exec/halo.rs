//! Point-to-point ghost exchange driven by a topology's exchange plan.

use crate::exec::transport::{CommError, Payload, RankComm, Tag, Traffic};
use crate::topology::{LocalBlock, MeshTopology};

#[derive(Debug, Clone)]
struct SlabCopy {
    transfer: u32,
    peer: usize,
    /// Cell offsets in the block's storage, in slab order.
    offsets: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct ColorSchedule {
    sends: Vec<SlabCopy>,
    recvs: Vec<SlabCopy>,
}

/// The exchange plan resolved to storage offsets for every color.
#[derive(Debug, Clone)]
pub struct HaloSchedule {
    colors: Vec<ColorSchedule>,
    transfers: usize,
    ncomp: usize,
}

impl HaloSchedule {
    pub fn new(topology: &MeshTopology, blocks: &[LocalBlock], ncomp: usize) -> Self {
        let plan = topology.exchange_plan();
        let mut colors = vec![ColorSchedule::default(); blocks.len()];
        for (idx, t) in plan.transfers.iter().enumerate() {
            let sender = &blocks[t.send_color];
            let start = sender.owned_range(t.axis).start;
            let local = (t.source.start - start) as isize..(t.source.end - start) as isize;
            colors[t.send_color].sends.push(SlabCopy {
                transfer: idx as u32,
                peer: t.recv_color,
                offsets: sender.slab_cells(t.axis, local).iter().map(|c| c.offset).collect(),
            });
            let receiver = &blocks[t.recv_color];
            colors[t.recv_color].recvs.push(SlabCopy {
                transfer: idx as u32,
                peer: t.send_color,
                offsets: receiver.slab_cells(t.axis, t.ghost.clone()).iter().map(|c| c.offset).collect(),
            });
        }
        Self {
            colors,
            transfers: plan.len(),
            ncomp,
        }
    }

    /// Number of transfers in one full exchange.
    pub fn len(&self) -> usize {
        self.transfers
    }

    pub fn is_empty(&self) -> bool {
        self.transfers == 0
    }

    /// Sends this rank's owned slabs and fills its ghost slabs. Every rank of
    /// the communicator must call this for the same field.
    pub fn exchange(&self, comm: &mut RankComm<'_>, data: &mut [f64]) -> Result<(), CommError> {
        let tag = comm.next_tag();
        let color = &self.colors[comm.rank()];
        let n = self.ncomp;
        for s in &color.sends {
            let mut buf = Vec::with_capacity(s.offsets.len() * n);
            for &off in &s.offsets {
                buf.extend_from_slice(&data[off * n..off * n + n]);
            }
            comm.send(s.peer, Tag { sub: s.transfer, ..tag }, Payload::Cells(buf), Traffic::PointToPoint)?;
        }
        for r in &color.recvs {
            let sub_tag = Tag { sub: r.transfer, ..tag };
            let Payload::Cells(buf) = comm.recv(r.peer, sub_tag, Traffic::PointToPoint)? else {
                return Err(CommError::UnexpectedPayload {
                    rank: comm.rank(),
                    detail: "reduction during a ghost exchange".into(),
                });
            };
            if buf.len() != r.offsets.len() * n {
                return Err(CommError::UnexpectedPayload {
                    rank: comm.rank(),
                    detail: format!("ghost slab of {} values, expected {}", buf.len(), r.offsets.len() * n),
                });
            }
            for (&off, vals) in r.offsets.iter().zip(buf.chunks_exact(n)) {
                data[off * n..off * n + n].copy_from_slice(vals);
            }
        }
        Ok(())
    }
}
