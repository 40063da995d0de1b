use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{DensityField, Grid};

/// Undirected graph on voxels. Vertices are kept sorted by voxel index and
/// edges sorted lexicographically, so two graphs with the same edge set are
/// identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct MorseGraph {
    grid: Grid,
    voxels: Vec<usize>,
    density: Vec<f32>,
    edges: Vec<[u32; 2]>,
    /// `(neighbour, edge index)` per vertex, sorted by neighbour.
    adj: Vec<Vec<(u32, u32)>>,
}

/// Maximal chain between two non-degree-2 vertices, or a closed loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    /// Graph vertex indices from one end to the other. Loops repeat the first
    /// vertex at the end.
    pub vertices: Vec<u32>,
    pub edges: Vec<u32>,
}

impl Arc {
    pub fn is_loop(&self) -> bool {
        self.vertices.len() > 1 && self.vertices.first() == self.vertices.last()
    }
}

impl MorseGraph {
    /// Build from voxel-index edges; self-loops and duplicates are dropped.
    pub fn from_voxel_edges(
        field: &DensityField,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let grid = *field.grid();
        let mut raw: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        if let Some(&(_, b)) = raw.iter().max_by_key(|e| e.1) {
            if b >= grid.len() {
                return Err(Error::invalid(format!("voxel {b} lies outside the grid")));
            }
        }
        raw.sort_unstable();
        raw.dedup();
        let mut voxels: Vec<usize> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
        voxels.sort_unstable();
        voxels.dedup();
        let idx = |v: usize| voxels.binary_search(&v).unwrap() as u32;
        let edges: Vec<[u32; 2]> = raw.iter().map(|&(a, b)| [idx(a), idx(b)]).collect();
        let density = voxels.iter().map(|&v| field.at(v)).collect();
        Ok(Self::assemble(grid, voxels, density, edges))
    }

    fn assemble(grid: Grid, voxels: Vec<usize>, density: Vec<f32>, edges: Vec<[u32; 2]>) -> Self {
        let mut adj = vec![Vec::new(); voxels.len()];
        for (i, &[a, b]) in edges.iter().enumerate() {
            adj[a as usize].push((b, i as u32));
            adj[b as usize].push((a, i as u32));
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        Self {
            grid,
            voxels,
            density,
            edges,
            adj,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn vertex_count(&self) -> usize {
        self.voxels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Voxel linear index of each vertex (ascending).
    pub fn voxels(&self) -> &[usize] {
        &self.voxels
    }

    pub fn voxel(&self, v: usize) -> usize {
        self.voxels[v]
    }

    pub fn density(&self, v: usize) -> f32 {
        self.density[v]
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn vertex_of_voxel(&self, lin: usize) -> Option<usize> {
        self.voxels.binary_search(&lin).ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&(u, _)| u as usize)
    }

    /// Physical position of a vertex.
    pub fn position(&self, v: usize) -> [f64; 3] {
        self.grid.position_of(self.voxels[v])
    }

    /// Component label per vertex (labels numbered by smallest vertex) and
    /// the component count.
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut label = vec![u32::MAX; self.vertex_count()];
        let mut count = 0u32;
        let mut queue = VecDeque::new();
        for s in 0..self.vertex_count() {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for u in self.neighbors(v) {
                    if label[u] == u32::MAX {
                        label[u] = count;
                        queue.push_back(u);
                    }
                }
            }
            count += 1;
        }
        (label, count as usize)
    }

    /// Decompose into arcs split at vertices of degree other than 2. Loops
    /// without such a vertex start at their smallest vertex.
    pub fn arcs(&self) -> Vec<Arc> {
        let mut used = vec![false; self.edge_count()];
        let mut out = Vec::new();
        let walk = |start: usize, first: (u32, u32), used: &mut Vec<bool>| {
            let mut vertices = vec![start as u32];
            let mut edges = Vec::new();
            let (mut cur, mut e) = first;
            loop {
                used[e as usize] = true;
                vertices.push(cur);
                edges.push(e);
                if self.degree(cur as usize) != 2 || cur as usize == start {
                    break;
                }
                match self.adj[cur as usize]
                    .iter()
                    .find(|&&(_, f)| !used[f as usize])
                {
                    Some(&next) => (cur, e) = next,
                    None => break,
                }
            }
            Arc { vertices, edges }
        };
        for v in 0..self.vertex_count() {
            if self.degree(v) == 2 {
                continue;
            }
            for &inc in &self.adj[v] {
                if !used[inc.1 as usize] {
                    out.push(walk(v, inc, &mut used));
                }
            }
        }
        for v in 0..self.vertex_count() {
            if let Some(&inc) = self.adj[v].iter().find(|&&(_, e)| !used[e as usize]) {
                out.push(walk(v, inc, &mut used));
            }
        }
        out
    }

    /// Copy without the given edges; vertices left isolated are dropped.
    pub fn without_edges(&self, removed: &[bool]) -> Self {
        assert_eq!(removed.len(), self.edge_count());
        let mut keep_v = vec![false; self.vertex_count()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if !removed[e] {
                keep_v[a as usize] = true;
                keep_v[b as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.vertex_count()];
        let mut voxels = Vec::new();
        let mut density = Vec::new();
        for v in 0..self.vertex_count() {
            if keep_v[v] {
                remap[v] = voxels.len() as u32;
                voxels.push(self.voxels[v]);
                density.push(self.density[v]);
            }
        }
        let edges = self
            .edges
            .iter()
            .zip(removed)
            .filter(|(_, &r)| !r)
            .map(|(&[a, b], _)| [remap[a as usize], remap[b as usize]])
            .collect();
        Self::assemble(self.grid, voxels, density, edges)
    }

    /// `index i j k x y z density` per vertex.
    pub fn format_vertices(&self) -> String {
        let mut s = String::from("# index i j k x y z density\n");
        for v in 0..self.vertex_count() {
            let vi = self.grid.voxel(self.voxels[v]);
            let p = self.position(v);
            let _ = writeln!(
                s,
                "{v} {} {} {} {} {} {} {}",
                vi.i, vi.j, vi.k, p[0], p[1], p[2], self.density[v]
            );
        }
        s
    }

    /// `a b` per edge, in vertex indices.
    pub fn format_edges(&self) -> String {
        let mut s = String::from("# a b\n");
        for &[a, b] in &self.edges {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    pub fn write_text(&self, vertices: &Path, edges: &Path) -> Result<()> {
        std::fs::write(vertices, self.format_vertices()).map_err(|e| Error::io(vertices, e))?;
        std::fs::write(edges, self.format_edges()).map_err(|e| Error::io(edges, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(n: usize) -> DensityField {
        DensityField::new(Grid::unit([n, n, 1]).unwrap(), vec![1.0; n * n]).unwrap()
    }

    #[test]
    fn canonical_regardless_of_input_order() {
        let f = line_field(4);
        let a = MorseGraph::from_voxel_edges(&f, [(0, 1), (1, 2), (5, 1)]).unwrap();
        let b = MorseGraph::from_voxel_edges(&f, [(1, 5), (2, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 3);
        assert!(MorseGraph::from_voxel_edges(&f, [(0, 99)]).is_err());
    }

    #[test]
    fn arcs_split_at_branch_points() {
        // Y shape: 0-1-2 then 2-3, 2-6 (grid 4x4).
        let f = line_field(4);
        let g =
            MorseGraph::from_voxel_edges(&f, [(0, 1), (1, 2), (2, 3), (2, 6), (6, 10)]).unwrap();
        let arcs = g.arcs();
        assert_eq!(arcs.len(), 3);
        let total: usize = arcs.iter().map(|a| a.edges.len()).sum();
        assert_eq!(total, g.edge_count());
    }

    #[test]
    fn pure_cycle_is_one_loop() {
        let f = line_field(3);
        let g = MorseGraph::from_voxel_edges(&f, [(0, 1), (1, 4), (4, 3), (3, 0)]).unwrap();
        let arcs = g.arcs();
        assert_eq!(arcs.len(), 1);
        assert!(arcs[0].is_loop());
        assert_eq!(arcs[0].vertices[0], 0);
        assert_eq!(arcs[0].edges.len(), 4);
    }

    #[test]
    fn removing_edges_drops_isolated_vertices() {
        let f = line_field(3);
        let g = MorseGraph::from_voxel_edges(&f, [(0, 1), (1, 2), (4, 5)]).unwrap();
        assert_eq!(g.components().1, 2);
        let h = g.without_edges(&[false, false, true]);
        assert_eq!(h.vertex_count(), 3);
        assert_eq!(h.components().1, 1);
    }
}
