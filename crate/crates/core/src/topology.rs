//! Block decomposition of structured grids into colors, with ghost and
//! boundary ranges and the face-halo exchange plan.
//!
//! Axis 0 varies fastest, both for the linear color id and for the cell
//! layout of a block. Unused axes (for 1D and 2D meshes) have extent 1, one
//! color and no halo, so all index arithmetic is done on three axes.

use std::ops::Range;

use thiserror::Error;

pub const MAX_DIMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("mesh dimensionality must be 1..=3, got {0}")]
    BadDims(usize),
    #[error("color grid has {colors} axes but the mesh has {extents}")]
    AxisCountMismatch { extents: usize, colors: usize },
    #[error("axis {axis} has zero extent")]
    ZeroExtent { axis: usize },
    #[error("axis {axis} has zero colors")]
    ZeroColors { axis: usize },
    #[error("axis {axis}: {colors} colors exceed the {extent} cells available")]
    TooManyColors {
        axis: usize,
        colors: usize,
        extent: usize,
    },
    #[error("halo depth must be at least 1")]
    ZeroHalo,
    #[error("axis {axis}: smallest block has {block} cells, fewer than the halo depth {halo}")]
    BlockSmallerThanHalo { axis: usize, block: usize, halo: usize },
    #[error("color {color} out of range (topology has {count} colors)")]
    ColorOutOfRange { color: usize, count: usize },
    #[error("global index {index:?} lies outside the mesh")]
    IndexOutOfRange { index: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Low,
    High,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Low, Side::High];
}

/// n-dimensional structured grid split into a tensor-product block grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshTopology {
    dims: usize,
    extents: [usize; MAX_DIMS],
    colors: [usize; MAX_DIMS],
    halo: usize,
    periodic: [bool; MAX_DIMS],
    /// Block boundaries per axis, `colors[a] + 1` entries.
    starts: [Vec<usize>; MAX_DIMS],
}

impl MeshTopology {
    /// Splits `extents` into `colors` blocks per axis. Leading blocks absorb
    /// the remainder of an uneven split. Halo depth 1, no periodic axes.
    pub fn decompose(extents: &[usize], colors: &[usize]) -> Result<Self, TopologyError> {
        let dims = extents.len();
        if !(1..=MAX_DIMS).contains(&dims) {
            return Err(TopologyError::BadDims(dims));
        }
        if colors.len() != dims {
            return Err(TopologyError::AxisCountMismatch {
                extents: dims,
                colors: colors.len(),
            });
        }
        let mut ext = [1; MAX_DIMS];
        let mut col = [1; MAX_DIMS];
        let mut starts: [Vec<usize>; MAX_DIMS] = [vec![0, 1], vec![0, 1], vec![0, 1]];
        for axis in 0..dims {
            let (n, c) = (extents[axis], colors[axis]);
            if n == 0 {
                return Err(TopologyError::ZeroExtent { axis });
            }
            if c == 0 {
                return Err(TopologyError::ZeroColors { axis });
            }
            if c > n {
                return Err(TopologyError::TooManyColors {
                    axis,
                    colors: c,
                    extent: n,
                });
            }
            ext[axis] = n;
            col[axis] = c;
            let (base, extra) = (n / c, n % c);
            let mut s = Vec::with_capacity(c + 1);
            let mut at = 0;
            s.push(0);
            for b in 0..c {
                at += base + usize::from(b < extra);
                s.push(at);
            }
            starts[axis] = s;
        }
        let topo = Self {
            dims,
            extents: ext,
            colors: col,
            halo: 1,
            periodic: [false; MAX_DIMS],
            starts,
        };
        topo.check_halo()?;
        Ok(topo)
    }

    pub fn with_halo(mut self, halo: usize) -> Result<Self, TopologyError> {
        if halo == 0 {
            return Err(TopologyError::ZeroHalo);
        }
        self.halo = halo;
        self.check_halo()?;
        Ok(self)
    }

    /// Marks axes periodic; missing trailing entries count as non-periodic.
    pub fn with_periodic(mut self, periodic: &[bool]) -> Result<Self, TopologyError> {
        self.periodic = [false; MAX_DIMS];
        for (axis, &p) in periodic.iter().enumerate().take(self.dims) {
            self.periodic[axis] = p;
        }
        self.check_halo()?;
        Ok(self)
    }

    fn check_halo(&self) -> Result<(), TopologyError> {
        for axis in 0..self.dims {
            if self.colors[axis] > 1 || self.periodic[axis] {
                let block = self.extents[axis] / self.colors[axis];
                if block < self.halo {
                    return Err(TopologyError::BlockSmallerThanHalo {
                        axis,
                        block,
                        halo: self.halo,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dims]
    }

    pub fn color_grid(&self) -> &[usize] {
        &self.colors[..self.dims]
    }

    pub fn halo_depth(&self) -> usize {
        self.halo
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic[..self.dims]
    }

    pub fn color_count(&self) -> usize {
        self.colors.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn color_coords(&self, color: usize) -> [usize; MAX_DIMS] {
        let c0 = color % self.colors[0];
        let rest = color / self.colors[0];
        [c0, rest % self.colors[1], rest / self.colors[1]]
    }

    pub fn color_at(&self, coords: [usize; MAX_DIMS]) -> usize {
        coords[0] + self.colors[0] * (coords[1] + self.colors[1] * coords[2])
    }

    /// Global owned interval of block `coord` along `axis`.
    pub fn block_range(&self, axis: usize, coord: usize) -> Range<usize> {
        self.starts[axis][coord]..self.starts[axis][coord + 1]
    }

    pub fn owned_range(&self, color: usize, axis: usize) -> Range<usize> {
        self.block_range(axis, self.color_coords(color)[axis])
    }

    fn block_of(&self, axis: usize, index: usize) -> usize {
        // starts is sorted; the block is the last start <= index
        self.starts[axis].partition_point(|&s| s <= index) - 1
    }

    /// Owning color and owner-local index (relative to the owned start) of a
    /// global cell.
    pub fn global_to_local(&self, global: &[usize]) -> Result<(usize, [usize; MAX_DIMS]), TopologyError> {
        let mut coords = [0; MAX_DIMS];
        let mut local = [0; MAX_DIMS];
        for axis in 0..MAX_DIMS {
            let g = global.get(axis).copied().unwrap_or(0);
            if g >= self.extents[axis] || (axis >= self.dims && g != 0) {
                return Err(TopologyError::IndexOutOfRange {
                    index: global.to_vec(),
                });
            }
            coords[axis] = self.block_of(axis, g);
            local[axis] = g - self.starts[axis][coords[axis]];
        }
        Ok((self.color_at(coords), local))
    }

    pub fn local_to_global(&self, color: usize, local: &[usize]) -> Result<[usize; MAX_DIMS], TopologyError> {
        self.check_color(color)?;
        let mut global = [0; MAX_DIMS];
        for axis in 0..MAX_DIMS {
            let r = self.owned_range(color, axis);
            let l = local.get(axis).copied().unwrap_or(0);
            if l >= r.len() {
                return Err(TopologyError::IndexOutOfRange {
                    index: local.to_vec(),
                });
            }
            global[axis] = r.start + l;
        }
        Ok(global)
    }

    fn check_color(&self, color: usize) -> Result<(), TopologyError> {
        if color >= self.color_count() {
            return Err(TopologyError::ColorOutOfRange {
                color,
                count: self.color_count(),
            });
        }
        Ok(())
    }

    pub fn local_block(&self, color: usize) -> Result<LocalBlock, TopologyError> {
        self.check_color(color)?;
        let coords = self.color_coords(color);
        let mut owned: [Range<usize>; MAX_DIMS] = [0..1, 0..1, 0..1];
        let mut halo = [0; MAX_DIMS];
        for axis in 0..MAX_DIMS {
            owned[axis] = self.block_range(axis, coords[axis]);
            if axis < self.dims {
                halo[axis] = self.halo;
            }
        }
        let mut ghosts = Vec::new();
        let mut boundaries = Vec::new();
        for axis in 0..self.dims {
            let h = self.halo;
            let n = owned[axis].len() as isize;
            let c = coords[axis];
            let count = self.colors[axis];
            for side in Side::BOTH {
                let local = match side {
                    Side::Low => -(h as isize)..0,
                    Side::High => n..n + h as isize,
                };
                let neighbor = match side {
                    Side::Low if c > 0 => Some(c - 1),
                    Side::Low if self.periodic[axis] => Some(count - 1),
                    Side::High if c + 1 < count => Some(c + 1),
                    Side::High if self.periodic[axis] => Some(0),
                    _ => None,
                };
                match neighbor {
                    Some(nc) => {
                        let nr = self.block_range(axis, nc);
                        let source = match side {
                            Side::Low => nr.end - h..nr.end,
                            Side::High => nr.start..nr.start + h,
                        };
                        let mut ncoords = coords;
                        ncoords[axis] = nc;
                        ghosts.push(GhostRange {
                            axis,
                            side,
                            local,
                            owner: self.color_at(ncoords),
                            source,
                        });
                    }
                    None => boundaries.push(BoundaryRange { axis, side, local }),
                }
            }
        }
        let mut local_ext = [1; MAX_DIMS];
        let mut strides = [1; MAX_DIMS];
        for axis in 0..MAX_DIMS {
            local_ext[axis] = owned[axis].len() + 2 * halo[axis];
            if axis > 0 {
                strides[axis] = strides[axis - 1] * local_ext[axis - 1];
            }
        }
        Ok(LocalBlock {
            color,
            coords,
            dims: self.dims,
            owned,
            halo,
            ghosts,
            boundaries,
            local_ext,
            strides,
        })
    }

    /// Face-halo transfers filling every ghost range of every color.
    pub fn exchange_plan(&self) -> ExchangePlan {
        let mut transfers = Vec::new();
        for color in 0..self.color_count() {
            let block = self.local_block(color).expect("color in range");
            for g in block.ghosts {
                transfers.push(Transfer {
                    send_color: g.owner,
                    recv_color: color,
                    axis: g.axis,
                    side: g.side,
                    source: g.source,
                    ghost: g.local,
                });
            }
        }
        ExchangePlan { transfers }
    }
}

/// A ghost slab of a block: cells `local` along `axis` (block-local
/// coordinates, spanning the owned range on the other axes) mirror the owned
/// cells `source` (global indices) of color `owner`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostRange {
    pub axis: usize,
    pub side: Side,
    pub local: Range<isize>,
    pub owner: usize,
    pub source: Range<usize>,
}

/// Ghost slab outside the physical domain, filled by boundary conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryRange {
    pub axis: usize,
    pub side: Side,
    pub local: Range<isize>,
}

/// One color's view of the mesh: owned cells plus the halo layout.
///
/// Local coordinates are relative to the first owned cell, so owned cells
/// run over `0..n` and halo cells over `-h..0` and `n..n+h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalBlock {
    color: usize,
    coords: [usize; MAX_DIMS],
    dims: usize,
    owned: [Range<usize>; MAX_DIMS],
    halo: [usize; MAX_DIMS],
    ghosts: Vec<GhostRange>,
    boundaries: Vec<BoundaryRange>,
    local_ext: [usize; MAX_DIMS],
    strides: [usize; MAX_DIMS],
}

impl LocalBlock {
    pub fn color(&self) -> usize {
        self.color
    }

    pub fn color_coords(&self) -> [usize; MAX_DIMS] {
        self.coords
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Global owned interval along `axis`.
    pub fn owned_range(&self, axis: usize) -> Range<usize> {
        self.owned[axis].clone()
    }

    pub fn owned_extent(&self, axis: usize) -> usize {
        self.owned[axis].len()
    }

    pub fn owned_count(&self) -> usize {
        self.owned.iter().map(|r| r.len()).product()
    }

    pub fn halo(&self, axis: usize) -> usize {
        self.halo[axis]
    }

    pub fn ghost_ranges(&self) -> &[GhostRange] {
        &self.ghosts
    }

    pub fn boundary_ranges(&self) -> &[BoundaryRange] {
        &self.boundaries
    }

    pub fn is_boundary(&self, axis: usize, side: Side) -> bool {
        self.boundaries.iter().any(|b| b.axis == axis && b.side == side)
    }

    /// Number of cells including the full halo padding.
    pub fn local_len(&self) -> usize {
        self.local_ext.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn offset(&self, local: [isize; MAX_DIMS]) -> usize {
        let mut off = 0isize;
        for axis in 0..MAX_DIMS {
            off += (local[axis] + self.halo[axis] as isize) * self.strides[axis] as isize;
        }
        debug_assert!(off >= 0 && (off as usize) < self.local_len(), "{local:?} outside block");
        off as usize
    }

    #[inline]
    pub fn local_to_global(&self, local: [isize; MAX_DIMS]) -> [isize; MAX_DIMS] {
        let mut g = [0; MAX_DIMS];
        for axis in 0..MAX_DIMS {
            g[axis] = self.owned[axis].start as isize + local[axis];
        }
        g
    }

    pub fn cell(&self, local: [isize; MAX_DIMS]) -> Cell {
        let g = self.local_to_global(local);
        Cell {
            local,
            global: [g[0] as usize, g[1] as usize, g[2] as usize],
            offset: self.offset(local),
        }
    }

    /// Owned cells in layout order (axis 0 fastest).
    pub fn owned_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.owned_cells_in(0..self.owned_extent(MAX_DIMS - 1))
    }

    /// Owned cells whose slowest-axis local coordinate lies in `planes`.
    pub fn owned_cells_in(&self, planes: Range<usize>) -> impl Iterator<Item = Cell> + '_ {
        let (n0, n1) = (self.owned_extent(0), self.owned_extent(1));
        planes.flat_map(move |k| {
            (0..n1).flat_map(move |j| (0..n0).map(move |i| self.cell([i as isize, j as isize, k as isize])))
        })
    }

    /// Every cell of a slab: `range` along `axis`, owned range on the others.
    pub fn slab_cells(&self, axis: usize, range: Range<isize>) -> Vec<Cell> {
        let mut axes: [Range<isize>; MAX_DIMS] = [
            0..self.owned_extent(0) as isize,
            0..self.owned_extent(1) as isize,
            0..self.owned_extent(2) as isize,
        ];
        axes[axis] = range;
        let mut out = Vec::with_capacity(axes.iter().map(|r| r.len()).product());
        for k in axes[2].clone() {
            for j in axes[1].clone() {
                for i in axes[0].clone() {
                    let local = [i, j, k];
                    let g = self.local_to_global(local);
                    out.push(Cell {
                        local,
                        // ghost slabs may lie outside the domain; wrap is the
                        // caller's concern, so clamp the unsigned view at 0
                        global: [g[0].max(0) as usize, g[1].max(0) as usize, g[2].max(0) as usize],
                        offset: self.offset(local),
                    });
                }
            }
        }
        out
    }
}

/// A cell handed to kernels: block-local coordinates, global index and the
/// cell's offset in the block's storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub local: [isize; MAX_DIMS],
    pub global: [usize; MAX_DIMS],
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub send_color: usize,
    pub recv_color: usize,
    pub axis: usize,
    /// Side of the receiving block the ghost slab sits on.
    pub side: Side,
    /// Sender-owned global cells along `axis`.
    pub source: Range<usize>,
    /// Receiver-local ghost coordinates along `axis`.
    pub ghost: Range<isize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExchangePlan {
    pub transfers: Vec<Transfer>,
}

impl ExchangePlan {
    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    pub fn sends_from(&self, color: usize) -> impl Iterator<Item = (usize, &Transfer)> {
        self.transfers.iter().enumerate().filter(move |(_, t)| t.send_color == color)
    }

    pub fn receives_at(&self, color: usize) -> impl Iterator<Item = (usize, &Transfer)> {
        self.transfers.iter().enumerate().filter(move |(_, t)| t.recv_color == color)
    }
}
