//! Rooted spanning forest of the Morse graph.
//!
//! Edges cost `2 d / (rho_u + rho_v)`, so paths through bright voxels are
//! cheap. Every reachable vertex joins the root it is closest to (ties to the
//! lower root index) along a shortest path.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::dist;
use crate::morse::MorseGraph;
use crate::tree::{SkeletonForest, SkeletonTree, TreeNode};

const NONE: u32 = u32::MAX;

/// Cost of traversing an edge of physical length `d`. Infinite when both
/// densities are zero.
pub fn edge_weight(d: f64, rho_u: f64, rho_v: f64) -> f64 {
    let s = rho_u + rho_v;
    if s > 0.0 {
        2.0 * d / s
    } else {
        f64::INFINITY
    }
}

fn graph_edge_weight(graph: &MorseGraph, u: usize, v: usize) -> f64 {
    edge_weight(
        dist(graph.position(u), graph.position(v)),
        graph.density(u) as f64,
        graph.density(v) as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ForestMethod {
    /// Multi-source shortest-path trees.
    #[default]
    ShortestPath,
    /// Multi-root minimum spanning forest.
    MinimumSpanning,
}

/// Roots snapped onto graph vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootSet {
    vertices: Vec<usize>,
}

impl RootSet {
    /// Snap each physical position to the nearest graph vertex within
    /// `radius` voxels (distance measured in voxel units; ties to the lower
    /// vertex index).
    pub fn snap(graph: &MorseGraph, positions: &[[f64; 3]], radius: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("at least one root is required"));
        }
        let grid = graph.grid();
        let mut vertices = Vec::with_capacity(positions.len());
        for (r, &p) in positions.iter().enumerate() {
            let q = grid.to_voxel_coords(p);
            let mut best: Option<(f64, usize)> = None;
            for v in 0..graph.vertex_count() {
                let a = grid.voxel(graph.voxel(v)).as_array().map(|c| c as f64);
                let d = dist(a, q);
                if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, v));
                }
            }
            let Some((_, v)) = best else {
                return Err(Error::invalid(format!(
                    "root {r} at {p:?} has no graph vertex within {radius} voxels"
                )));
            };
            if let Some(other) = vertices.iter().position(|&w| w == v) {
                return Err(Error::invalid(format!(
                    "roots {other} and {r} snap to the same graph vertex"
                )));
            }
            vertices.push(v);
        }
        Ok(Self { vertices })
    }

    /// Roots given directly as graph vertex indices.
    pub fn from_vertices(graph: &MorseGraph, vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::invalid("at least one root is required"));
        }
        for (i, &v) in vertices.iter().enumerate() {
            if v >= graph.vertex_count() {
                return Err(Error::invalid(format!(
                    "root vertex {v} is not in the graph"
                )));
            }
            if vertices[..i].contains(&v) {
                return Err(Error::invalid(format!("root vertex {v} given twice")));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Total order on non-NaN distances for the heap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Root assignment, distance and parent per graph vertex, plus the order in
/// which vertices were settled.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub root: Vec<Option<usize>>,
    pub distance: Vec<f64>,
    pub parent: Vec<Option<usize>>,
    settled: Vec<usize>,
}

fn shortest_paths(graph: &MorseGraph, roots: &RootSet) -> Assignment {
    let n = graph.vertex_count();
    let mut dist_to = vec![f64::INFINITY; n];
    let mut root_of = vec![NONE; n];
    let mut parent = vec![NONE; n];
    let mut done = vec![false; n];
    let mut settled = Vec::new();
    let mut heap = BinaryHeap::new();
    for (r, &v) in roots.vertices().iter().enumerate() {
        dist_to[v] = 0.0;
        root_of[v] = r as u32;
        heap.push(Reverse((Dist(0.0), r as u32, v as u32)));
    }
    while let Some(Reverse((Dist(d), r, v))) = heap.pop() {
        let v = v as usize;
        if done[v] || d != dist_to[v] || r != root_of[v] {
            continue;
        }
        done[v] = true;
        settled.push(v);
        for u in graph.neighbors(v) {
            if done[u] {
                continue;
            }
            let w = graph_edge_weight(graph, v, u);
            if !w.is_finite() {
                continue;
            }
            let nd = d + w;
            if nd < dist_to[u] || (nd == dist_to[u] && r < root_of[u]) {
                dist_to[u] = nd;
                root_of[u] = r;
                parent[u] = v as u32;
                heap.push(Reverse((Dist(nd), r, u as u32)));
            }
        }
    }
    finish(dist_to, root_of, parent, settled)
}

fn spanning_forest(graph: &MorseGraph, roots: &RootSet) -> Assignment {
    let n = graph.vertex_count();
    let mut dist_to = vec![f64::INFINITY; n];
    let mut root_of = vec![NONE; n];
    let mut parent = vec![NONE; n];
    let mut settled = Vec::new();
    // (edge weight, target vertex, source vertex)
    let mut heap = BinaryHeap::new();
    let push_edges =
        |v: usize, heap: &mut BinaryHeap<Reverse<(Dist, u32, u32)>>, root_of: &[u32]| {
            for u in graph.neighbors(v) {
                if root_of[u] == NONE {
                    let w = graph_edge_weight(graph, v, u);
                    if w.is_finite() {
                        heap.push(Reverse((Dist(w), u as u32, v as u32)));
                    }
                }
            }
        };
    for (r, &v) in roots.vertices().iter().enumerate() {
        dist_to[v] = 0.0;
        root_of[v] = r as u32;
        settled.push(v);
    }
    for &v in roots.vertices() {
        push_edges(v, &mut heap, &root_of);
    }
    while let Some(Reverse((Dist(w), u, v))) = heap.pop() {
        let (u, v) = (u as usize, v as usize);
        if root_of[u] != NONE {
            continue;
        }
        root_of[u] = root_of[v];
        parent[u] = v as u32;
        dist_to[u] = dist_to[v] + w;
        settled.push(u);
        push_edges(u, &mut heap, &root_of);
    }
    finish(dist_to, root_of, parent, settled)
}

fn finish(
    dist_to: Vec<f64>,
    root_of: Vec<u32>,
    parent: Vec<u32>,
    settled: Vec<usize>,
) -> Assignment {
    let opt = |x: u32| (x != NONE).then_some(x as usize);
    Assignment {
        root: root_of.into_iter().map(opt).collect(),
        distance: dist_to,
        parent: parent.into_iter().map(opt).collect(),
        settled,
    }
}

/// Root, distance and parent for every vertex.
pub fn assign_roots(graph: &MorseGraph, roots: &RootSet, method: ForestMethod) -> Assignment {
    match method {
        ForestMethod::ShortestPath => shortest_paths(graph, roots),
        ForestMethod::MinimumSpanning => spanning_forest(graph, roots),
    }
}

/// One tree per root; nodes appear in settle order, so parents precede
/// children. Unreachable vertices are counted in `dropped`.
pub fn build_forest(
    graph: &MorseGraph,
    roots: &RootSet,
    method: ForestMethod,
) -> Result<SkeletonForest> {
    let a = assign_roots(graph, roots, method);
    let mut nodes: Vec<Vec<TreeNode>> = vec![Vec::new(); roots.len()];
    let mut local = vec![usize::MAX; graph.vertex_count()];
    for &v in &a.settled {
        let r = a.root[v].expect("settled vertices have a root");
        let parent = a.parent[v].map(|p| local[p]);
        local[v] = nodes[r].len();
        let mut node = TreeNode::new(graph.position(v), parent);
        node.source = Some(graph.voxel(v));
        node.distance = a.distance[v];
        nodes[r].push(node);
    }
    Ok(SkeletonForest {
        trees: nodes.into_iter().map(SkeletonTree::from_ordered).collect(),
        dropped: graph.vertex_count() - a.settled.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{DensityField, Grid};

    #[test]
    fn weight_formula() {
        assert_eq!(edge_weight(1.0, 4.0, 4.0), 0.25);
        assert_eq!(edge_weight(1.0, 3.0, 1.0), 0.5);
        assert_eq!(edge_weight(1.0, 0.0, 0.0), f64::INFINITY);
    }

    fn path_graph(values: &[f32]) -> MorseGraph {
        let n = values.len();
        let f = DensityField::new(Grid::unit([n, 1, 1]).unwrap(), values.to_vec()).unwrap();
        MorseGraph::from_voxel_edges(&f, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn single_root_path_accumulates() {
        let g = path_graph(&[4.0, 4.0, 2.0, 2.0]);
        let roots = RootSet::snap(&g, &[[0.2, 0.0, 0.0]], 5.0).unwrap();
        let f = build_forest(&g, &roots, ForestMethod::ShortestPath).unwrap();
        assert_eq!(f.trees.len(), 1);
        let d: Vec<f64> = f.trees[0].nodes().iter().map(|n| n.distance).collect();
        assert_eq!(d, vec![0.0, 0.25, 0.25 + 2.0 / 6.0, 0.25 + 2.0 / 6.0 + 0.5]);
        assert_eq!(f.dropped, 0);
    }

    #[test]
    fn dumbbell_splits_between_roots_and_ties_go_low() {
        let g = path_graph(&[1.0; 5]);
        let roots = RootSet::snap(&g, &[[4.0, 0.0, 0.0], [0.0, 0.0, 0.0]], 1.0).unwrap();
        let a = assign_roots(&g, &roots, ForestMethod::ShortestPath);
        // Vertex 2 is equidistant and goes to root index 0 (at x = 4).
        assert_eq!(a.root, vec![Some(1), Some(1), Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn snapping_errors() {
        let g = path_graph(&[1.0; 5]);
        assert!(RootSet::snap(&g, &[[40.0, 0.0, 0.0]], 5.0).is_err());
        assert!(RootSet::snap(&g, &[[1.0, 0.0, 0.0], [1.1, 0.0, 0.0]], 5.0).is_err());
        assert!(RootSet::snap(&g, &[], 5.0).is_err());
    }

    #[test]
    fn cycle_drops_the_heavy_chord() {
        // Square 0-1-3-2 on a 2x2 grid; vertex 3 is dim so 1-3 and 2-3 are
        // expensive, and one of them is left out.
        let f =
            DensityField::new(Grid::unit([2, 2, 1]).unwrap(), vec![4.0, 4.0, 4.0, 1.0]).unwrap();
        let g = MorseGraph::from_voxel_edges(&f, [(0, 1), (1, 3), (3, 2), (2, 0)]).unwrap();
        let roots = RootSet::from_vertices(&g, vec![0]).unwrap();
        let fo = build_forest(&g, &roots, ForestMethod::ShortestPath).unwrap();
        let t = &fo.trees[0];
        assert_eq!(t.len(), 4);
        // Vertex 3 hangs off vertex 1 (lower index wins the tie).
        let three = t.nodes().iter().position(|n| n.source == Some(3)).unwrap();
        assert_eq!(t.node(t.parent(three).unwrap()).source, Some(1));
    }

    #[test]
    fn unreachable_vertices_are_dropped() {
        let f =
            DensityField::new(Grid::unit([4, 1, 1]).unwrap(), vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let g = MorseGraph::from_voxel_edges(&f, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let roots = RootSet::from_vertices(&g, vec![0]).unwrap();
        for m in [ForestMethod::ShortestPath, ForestMethod::MinimumSpanning] {
            let fo = build_forest(&g, &roots, m).unwrap();
            assert_eq!(fo.node_count(), 3);
            assert_eq!(fo.dropped, 1);
        }
    }
}
