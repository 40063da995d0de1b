//! Implicit cells of the 2-skeleton of a cubical grid.
//!
//! Every cell is anchored at its lowest-corner vertex. A cell id packs the
//! anchor's linear index and one of seven kinds: the vertex itself, the edges
//! along x, y, z, and the squares spanning xy, xz, yz.

use crate::volume::{Grid, VoxelIndex};

pub const KINDS: u64 = 7;

/// Packed cell identifier: `anchor * 7 + kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub u64);

impl CellId {
    #[inline]
    pub fn vertex(lin: usize) -> Self {
        CellId(lin as u64 * KINDS)
    }

    #[inline]
    pub fn edge(lin: usize, axis: u8) -> Self {
        debug_assert!(axis < 3);
        CellId(lin as u64 * KINDS + 1 + axis as u64)
    }

    /// Square spanning axes `plane_axes(orientation)`.
    #[inline]
    pub fn square(lin: usize, orientation: u8) -> Self {
        debug_assert!(orientation < 3);
        CellId(lin as u64 * KINDS + 4 + orientation as u64)
    }

    #[inline]
    pub fn anchor(self) -> usize {
        (self.0 / KINDS) as usize
    }

    #[inline]
    pub fn kind(self) -> u8 {
        (self.0 % KINDS) as u8
    }

    #[inline]
    pub fn dim(self) -> u8 {
        match self.kind() {
            0 => 0,
            1..=3 => 1,
            _ => 2,
        }
    }

    /// Axis for edges, plane index for squares, 0 for vertices.
    #[inline]
    pub fn orientation(self) -> u8 {
        match self.kind() {
            0 => 0,
            k @ 1..=3 => k - 1,
            k => k - 4,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Axes spanned by square orientation 0 (xy), 1 (xz), 2 (yz).
#[inline]
pub const fn plane_axes(orientation: u8) -> (usize, usize) {
    match orientation {
        0 => (0, 1),
        1 => (0, 2),
        _ => (1, 2),
    }
}

#[inline]
pub const fn plane_of(a: usize, b: usize) -> u8 {
    match (a, b) {
        (0, 1) | (1, 0) => 0,
        (0, 2) | (2, 0) => 1,
        _ => 2,
    }
}

/// Human-readable cell description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub dim: u8,
    pub anchor: VoxelIndex,
    pub orientation: u8,
}

/// Incidence queries on a fixed grid shape.
#[derive(Debug, Clone, Copy)]
pub struct CubicalComplex {
    dims: [usize; 3],
    strides: [usize; 3],
}

impl CubicalComplex {
    pub fn new(grid: &Grid) -> Self {
        let d = grid.dims;
        Self {
            dims: d,
            strides: [1, d[0], d[0] * d[1]],
        }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Size of the id space (`vertex_count * 7`).
    #[inline]
    pub fn id_space(&self) -> usize {
        self.vertex_count() * KINDS as usize
    }

    #[inline]
    fn coord(&self, lin: usize, axis: usize) -> usize {
        (lin / self.strides[axis]) % self.dims[axis]
    }

    #[inline]
    fn extends(&self, lin: usize, axis: usize) -> bool {
        self.coord(lin, axis) + 1 < self.dims[axis]
    }

    pub fn is_valid(&self, c: CellId) -> bool {
        let lin = c.anchor();
        if lin >= self.vertex_count() {
            return false;
        }
        match c.dim() {
            0 => true,
            1 => self.extends(lin, c.orientation() as usize),
            _ => {
                let (a, b) = plane_axes(c.orientation());
                self.extends(lin, a) && self.extends(lin, b)
            }
        }
    }

    pub fn describe(&self, c: CellId) -> Cell {
        let lin = c.anchor();
        Cell {
            dim: c.dim(),
            anchor: VoxelIndex::new(self.coord(lin, 0), self.coord(lin, 1), self.coord(lin, 2)),
            orientation: c.orientation(),
        }
    }

    pub fn id_of(&self, cell: Cell) -> CellId {
        let a = cell.anchor;
        let lin = a.i + self.dims[0] * (a.j + self.dims[1] * a.k);
        match cell.dim {
            0 => CellId::vertex(lin),
            1 => CellId::edge(lin, cell.orientation),
            _ => CellId::square(lin, cell.orientation),
        }
    }

    /// Endpoints of an edge.
    #[inline]
    pub fn edge_vertices(&self, e: CellId) -> [usize; 2] {
        let lin = e.anchor();
        [lin, lin + self.strides[e.orientation() as usize]]
    }

    /// Corners of a square.
    #[inline]
    pub fn square_vertices(&self, s: CellId) -> [usize; 4] {
        let lin = s.anchor();
        let (a, b) = plane_axes(s.orientation());
        let (sa, sb) = (self.strides[a], self.strides[b]);
        [lin, lin + sa, lin + sb, lin + sa + sb]
    }

    /// Vertices of any cell (1, 2 or 4 of them).
    pub fn vertices(&self, c: CellId) -> impl Iterator<Item = usize> {
        let (arr, n) = match c.dim() {
            0 => ([c.anchor(), 0, 0, 0], 1),
            1 => {
                let [a, b] = self.edge_vertices(c);
                ([a, b, 0, 0], 2)
            }
            _ => (self.square_vertices(c), 4),
        };
        arr.into_iter().take(n)
    }

    /// The four edges bounding a square.
    #[inline]
    pub fn square_edges(&self, s: CellId) -> [CellId; 4] {
        let lin = s.anchor();
        let (a, b) = plane_axes(s.orientation());
        [
            CellId::edge(lin, a as u8),
            CellId::edge(lin, b as u8),
            CellId::edge(lin + self.strides[b], a as u8),
            CellId::edge(lin + self.strides[a], b as u8),
        ]
    }

    /// Squares that contain an edge (up to four in 3D).
    pub fn edge_cofaces(&self, e: CellId, out: &mut Vec<CellId>) {
        out.clear();
        let lin = e.anchor();
        let a = e.orientation() as usize;
        for b in 0..3 {
            if b == a || self.dims[b] < 2 {
                continue;
            }
            let plane = plane_of(a, b);
            let up = CellId::square(lin, plane);
            if self.is_valid(up) {
                out.push(up);
            }
            if self.coord(lin, b) > 0 {
                let down = CellId::square(lin - self.strides[b], plane);
                if self.is_valid(down) {
                    out.push(down);
                }
            }
        }
    }

    /// Edge joining two face-adjacent vertices.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<CellId> {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        (0..3)
            .find(|&a| hi - lo == self.strides[a] && self.extends(lo, a) && self.dims[a] > 1)
            .map(|a| CellId::edge(lo, a as u8))
    }

    /// Every valid cell id in ascending id order.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.id_space() as u64)
            .map(CellId)
            .filter(|&c| self.is_valid(c))
    }

    pub fn cell_count(&self) -> usize {
        let [x, y, z] = self.dims;
        let v = x * y * z;
        let e = (x - 1) * y * z + x * (y - 1) * z + x * y * (z - 1);
        let s = (x - 1) * (y - 1) * z + (x - 1) * y * (z - 1) + x * (y - 1) * (z - 1);
        v + e + s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_enumeration() {
        for dims in [[1, 1, 1], [2, 1, 1], [2, 2, 1], [3, 4, 5]] {
            let g = Grid::unit(dims).unwrap();
            let cx = CubicalComplex::new(&g);
            assert_eq!(cx.cells().count(), cx.cell_count(), "{dims:?}");
        }
    }

    #[test]
    fn boundary_edges_are_faces_of_square() {
        let g = Grid::unit([3, 3, 3]).unwrap();
        let cx = CubicalComplex::new(&g);
        let mut cof = Vec::new();
        for s in cx.cells().filter(|c| c.dim() == 2) {
            let sv: Vec<usize> = cx.square_vertices(s).to_vec();
            for e in cx.square_edges(s) {
                assert!(cx.is_valid(e));
                for v in cx.edge_vertices(e) {
                    assert!(sv.contains(&v));
                }
                cx.edge_cofaces(e, &mut cof);
                assert!(cof.contains(&s));
            }
        }
    }

    #[test]
    fn describe_round_trip() {
        let g = Grid::unit([3, 4, 2]).unwrap();
        let cx = CubicalComplex::new(&g);
        for c in cx.cells() {
            assert_eq!(cx.id_of(cx.describe(c)), c);
        }
    }
}
