//! Named per-cell storage on a topology, one block per color.

use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;

use crate::exec::halo::HaloSchedule;
use crate::topology::{LocalBlock, MeshTopology};

pub type FieldId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Scalar,
    /// Fixed-length vector per cell, stored interleaved.
    Vector(usize),
}

impl ElementKind {
    pub fn components(self) -> usize {
        match self {
            ElementKind::Scalar => 1,
            ElementKind::Vector(n) => n,
        }
    }
}

/// Cheap, cloneable reference to a registered field.
#[derive(Clone)]
pub struct FieldHandle {
    pub(crate) id: FieldId,
    pub(crate) runtime: u64,
    name: Arc<str>,
    topology: Arc<MeshTopology>,
    kind: ElementKind,
}

impl FieldHandle {
    pub fn id(&self) -> FieldId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn topology(&self) -> &Arc<MeshTopology> {
        &self.topology
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }
}

impl fmt::Debug for FieldHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldHandle")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish()
    }
}

impl PartialEq for FieldHandle {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.runtime == other.runtime
    }
}

impl Eq for FieldHandle {}

pub(crate) type Block = Arc<RwLock<Vec<f64>>>;

pub(crate) struct FieldData {
    pub handle: FieldHandle,
    pub blocks: Vec<LocalBlock>,
    pub storage: Vec<Block>,
    pub halo: HaloSchedule,
}

impl FieldData {
    pub fn new(id: FieldId, runtime: u64, name: &str, topology: Arc<MeshTopology>, kind: ElementKind) -> Self {
        let blocks: Vec<LocalBlock> = (0..topology.color_count())
            .map(|c| topology.local_block(c).expect("color in range"))
            .collect();
        let n = kind.components();
        let storage = blocks
            .iter()
            .map(|b| Arc::new(RwLock::new(vec![0.0; b.local_len() * n])))
            .collect();
        let halo = HaloSchedule::new(&topology, &blocks, n);
        Self {
            handle: FieldHandle {
                id,
                runtime,
                name: name.into(),
                topology,
                kind,
            },
            blocks,
            storage,
            halo,
        }
    }

    pub fn ncomp(&self) -> usize {
        self.handle.components()
    }

    /// Owned values of every color, assembled in global layout.
    pub fn gather(&self) -> Vec<f64> {
        let topo = self.handle.topology();
        let n = self.ncomp();
        let ext = topo.extents();
        let e = [ext[0], ext.get(1).copied().unwrap_or(1), ext.get(2).copied().unwrap_or(1)];
        let mut out = vec![0.0; topo.cell_count() * n];
        for (block, store) in self.blocks.iter().zip(&self.storage) {
            let data = store.read();
            for cell in block.owned_cells() {
                let g = cell.global;
                let at = ((g[2] * e[1] + g[1]) * e[0] + g[0]) * n;
                out[at..at + n].copy_from_slice(&data[cell.offset * n..cell.offset * n + n]);
            }
        }
        out
    }
}
