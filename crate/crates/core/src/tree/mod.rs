//! Rooted skeleton trees: scoring, simplification and summarization.
//!
//! A [`SkeletonTree`] keeps its nodes in topological order: node 0 is the
//! root and every parent index is smaller than its child's. All editing
//! operations return a new tree that preserves this order.

mod assoc;
mod scores;
mod simplify;
mod summary;
pub mod swc;

pub use assoc::{associate_voxels, Association};
pub use scores::{density_scores, smooth_scores, tree_vector_scores, weighted_scores};
pub use simplify::{
    leaf_burner, resolve_threshold, root_grower, simplify, Strategy, ThresholdMode,
};
pub use summary::{assign_thickness, assign_weights, branch_lengths, top_k_branches};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Physical position.
    pub position: [f64; 3],
    pub parent: Option<usize>,
    /// Graph vertex (voxel linear index) this node was built from.
    pub source: Option<usize>,
    /// Weighted shortest-path distance to the root.
    pub distance: f64,
    pub density_score: f64,
    pub vector_score: f64,
    pub weighted_score: f64,
    pub score: f64,
    pub weight: f64,
    pub radius: f64,
}

impl TreeNode {
    pub fn new(position: [f64; 3], parent: Option<usize>) -> Self {
        Self {
            position,
            parent,
            source: None,
            distance: 0.0,
            density_score: 0.0,
            vector_score: 0.0,
            weighted_score: 0.0,
            score: 0.0,
            weight: 0.0,
            radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTree {
    nodes: Vec<TreeNode>,
    children: Vec<Vec<usize>>,
    /// Mixing weight used for `weighted_score`, once computed.
    alpha: Option<f64>,
    smoothed: bool,
}

impl SkeletonTree {
    /// Build from nodes in any order; they are reordered breadth-first from
    /// the unique root (children in input order). Returns the tree and, for
    /// each new node, its input index.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<(Self, Vec<usize>)> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::structure("tree has no nodes"));
        }
        let mut roots = Vec::new();
        let mut kids = vec![Vec::new(); n];
        for (i, node) in nodes.iter().enumerate() {
            match node.parent {
                None => roots.push(i),
                Some(p) if p >= n || p == i => {
                    return Err(Error::structure(format!("node {i} has invalid parent {p}")))
                }
                Some(p) => kids[p].push(i),
            }
        }
        if roots.len() != 1 {
            return Err(Error::structure(format!(
                "tree must have exactly one root, found {}",
                roots.len()
            )));
        }
        let mut order = Vec::with_capacity(n);
        order.push(roots[0]);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            order.extend_from_slice(&kids[u]);
        }
        if order.len() != n {
            return Err(Error::structure("parent links contain a cycle"));
        }
        let mut new_index = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut out = Vec::with_capacity(n);
        for &old in &order {
            let mut node = nodes[old].clone();
            node.parent = node.parent.map(|p| new_index[p]);
            out.push(node);
        }
        Ok((Self::from_ordered(out), order))
    }

    /// Build from nodes already in topological order (root first).
    pub(crate) fn from_ordered(nodes: Vec<TreeNode>) -> Self {
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match node.parent {
                None => assert_eq!(i, 0, "only node 0 may be the root"),
                Some(p) => {
                    assert!(p < i, "parents must precede children");
                    children[p].push(i);
                }
            }
        }
        Self {
            nodes,
            children,
            alpha: None,
            smoothed: false,
        }
    }

    /// Chain or tree from positions and parent indices (`None` = root).
    pub fn from_parents(positions: &[[f64; 3]], parents: &[Option<usize>]) -> Result<Self> {
        if positions.len() != parents.len() {
            return Err(Error::structure("positions and parents differ in length"));
        }
        let nodes = positions
            .iter()
            .zip(parents)
            .map(|(&p, &par)| TreeNode::new(p, par))
            .collect();
        Ok(Self::from_nodes(nodes)?.0)
    }

    /// Keep the nodes flagged in `keep`. The root must be kept and every kept
    /// node's parent must be kept.
    pub fn retain(&self, keep: &[bool]) -> Self {
        assert!(keep[0], "the root is never removed");
        let mut map = vec![usize::MAX; self.len()];
        let mut nodes = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            let mut node = node.clone();
            node.parent = node.parent.map(|p| {
                assert!(keep[p], "kept node {i} has a removed parent");
                map[p]
            });
            map[i] = nodes.len();
            nodes.push(node);
        }
        let mut t = Self::from_ordered(nodes);
        t.alpha = self.alpha;
        t.smoothed = self.smoothed;
        t
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    #[inline]
    pub fn nodes_mut(&mut self) -> &mut [TreeNode] {
        &mut self.nodes
    }

    #[inline]
    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    #[inline]
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes[i].parent
    }

    #[inline]
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    #[inline]
    pub fn position(&self, i: usize) -> [f64; 3] {
        self.nodes[i].position
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Non-root nodes without children.
    pub fn leaves(&self) -> Vec<usize> {
        (1..self.len())
            .filter(|&i| self.children[i].is_empty())
            .collect()
    }

    /// Number of tree edges incident to `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.children[i].len() + usize::from(self.nodes[i].parent.is_some())
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn is_smoothed(&self) -> bool {
        self.smoothed
    }

    /// Total Euclidean length of all edges.
    pub fn cable_length(&self) -> f64 {
        (1..self.len())
            .map(|i| {
                crate::geom::dist(
                    self.position(i),
                    self.position(self.nodes[i].parent.unwrap()),
                )
            })
            .sum()
    }

    /// Unbranched segments: maximal chains whose interior nodes have degree 2.
    /// Each segment starts at a non-degree-2 node (or the root) and is listed
    /// from the root side.
    pub fn segments(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for start in 0..self.len() {
            let is_break = start == 0 || self.degree(start) != 2;
            if !is_break {
                continue;
            }
            for &c in &self.children[start] {
                let mut seg = vec![start, c];
                let mut cur = c;
                while self.degree(cur) == 2 && cur != 0 {
                    cur = self.children[cur][0];
                    seg.push(cur);
                }
                out.push(seg);
            }
        }
        out
    }
}

/// A forest of trees, one per root.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkeletonForest {
    pub trees: Vec<SkeletonTree>,
    /// Graph vertices not reachable from any root.
    pub dropped: usize,
}

impl SkeletonForest {
    pub fn node_count(&self) -> usize {
        self.trees.iter().map(SkeletonTree::len).sum()
    }
}

/// Knobs for scoring and simplifying trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplificationConfig {
    pub strategy: Strategy,
    pub tau: f64,
    pub threshold_mode: ThresholdMode,
    pub alpha: f64,
    pub hops: usize,
    /// Density association cap (µm).
    pub beta: f64,
    /// Summary weight association cap (µm).
    pub beta_w: f64,
    /// Thickness association cap (µm).
    pub zeta: f64,
    pub thickness_c: f64,
}

impl Default for SimplificationConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::RootGrower,
            tau: 0.2,
            threshold_mode: ThresholdMode::Relative,
            alpha: 0.9,
            hops: 10,
            beta: 1.0,
            beta_w: 300.0,
            zeta: 20.0,
            thickness_c: 1.0,
        }
    }
}

impl SimplificationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::Config("tau must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must lie in [0, 1]".into()));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("beta_w", self.beta_w),
            ("zeta", self.zeta),
            ("thickness_c", self.thickness_c),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Straight chain along x with unit spacing.
    pub fn chain(n: usize) -> SkeletonTree {
        let pos: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let par: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
        SkeletonTree::from_parents(&pos, &par).unwrap()
    }
}
