//! Persistence-simplified discrete gradient and its 1-unstable manifolds.
//!
//! Negative edges of low persistence form a forest in which every tree holds
//! exactly one surviving maximum (its sink). Each high-persistence edge,
//! extended by the forest paths from both endpoints to their sinks, is a
//! ridge line; their union is the Morse graph.

mod graph;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use graph::{Arc, MorseGraph};

use crate::error::{Error, Result};
use crate::persistence::{
    build_filtration, compute_persistence, CellId, Filtration, Partner, PersistencePairing,
};
use crate::volume::DensityField;

const NONE: u32 = u32::MAX;

/// Which edges seed unstable manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorseConfig {
    /// Persistence threshold in density units.
    pub epsilon: f64,
    /// Include positive edges whose 1-cycle persists longer than epsilon.
    pub include_positive: bool,
    /// Include edges whose 1-cycle never dies.
    pub include_essential: bool,
}

impl Default for MorseConfig {
    fn default() -> Self {
        Self {
            epsilon: 256.0,
            include_positive: true,
            include_essential: true,
        }
    }
}

impl MorseConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

/// Parent links within the low-persistence negative-edge forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientForest {
    parent: Vec<u32>,
    sink: Vec<u32>,
    sinks: Vec<usize>,
}

impl GradientForest {
    /// Next vertex towards the sink; `None` at a sink.
    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NONE => None,
            p => Some(p as usize),
        }
    }

    pub fn sink(&self, v: usize) -> usize {
        self.sink[v] as usize
    }

    /// Sinks in filtration order (highest density first).
    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    /// `v, parent(v), ..., sink(v)`.
    pub fn path_to_sink(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    Ok(())
}

/// Forest of negative edges with persistence `<= epsilon`, oriented towards
/// the one critical vertex of each tree.
pub fn build_gradient_forest(
    filt: &Filtration,
    pairing: &PersistencePairing,
    epsilon: f64,
) -> Result<GradientForest> {
    check_epsilon(epsilon)?;
    let cx = filt.complex();
    let n = cx.vertex_count();
    let [nx, ny, _] = cx.dims();
    let strides = [1usize, nx, nx * ny];
    // Bit 2a: neighbour at -axis a, bit 2a+1: neighbour at +axis a.
    let mut mask = vec![0u8; n];
    for p in pairing.vertex_edge_pairs() {
        if p.persistence <= epsilon {
            let [a, b] = cx.edge_vertices(p.death);
            let axis = p.death.orientation();
            mask[a] |= 1 << (2 * axis + 1);
            mask[b] |= 1 << (2 * axis);
        }
    }
    let mut parent = vec![NONE; n];
    let mut sink = vec![NONE; n];
    let mut sinks = Vec::new();
    let mut queue = VecDeque::new();
    let is_critical = |v: usize| match pairing.partner(CellId::vertex(v)) {
        Some(Partner::Essential) => true,
        Some(Partner::Cell(_)) => pairing
            .persistence_of(CellId::vertex(v))
            .is_ok_and(|p| p > epsilon),
        None => false,
    };
    for &c in filt.order() {
        if c.dim() != 0 || !is_critical(c.anchor()) {
            continue;
        }
        let root = c.anchor();
        debug_assert_eq!(sink[root], NONE, "two critical vertices in one forest tree");
        sinks.push(root);
        sink[root] = root as u32;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let m = mask[v];
            for bit in 0..6u8 {
                if m & (1 << bit) == 0 {
                    continue;
                }
                let s = strides[(bit / 2) as usize];
                let u = if bit % 2 == 0 { v - s } else { v + s };
                if sink[u] == NONE {
                    sink[u] = root as u32;
                    parent[u] = v as u32;
                    queue.push_back(u);
                }
            }
        }
    }
    debug_assert!(
        sink.iter().all(|&s| s != NONE),
        "forest tree without a critical vertex"
    );
    Ok(GradientForest {
        parent,
        sink,
        sinks,
    })
}

/// Edges whose manifolds make up the graph, in filtration order.
pub fn critical_edges(
    filt: &Filtration,
    pairing: &PersistencePairing,
    cfg: &MorseConfig,
) -> Result<Vec<CellId>> {
    check_epsilon(cfg.epsilon)?;
    let mut out = Vec::new();
    for &c in filt.order() {
        if c.dim() != 1 {
            continue;
        }
        let keep = match pairing.partner(c) {
            Some(Partner::Essential) => cfg.include_essential,
            Some(Partner::Cell(p)) if p.dim() == 0 => pairing.persistence_of(c)? > cfg.epsilon,
            Some(Partner::Cell(_)) => {
                cfg.include_positive && pairing.persistence_of(c)? > cfg.epsilon
            }
            None => false,
        };
        if keep {
            out.push(c);
        }
    }
    Ok(out)
}

/// Vertex path of the unstable manifold of a critical edge: from the sink of
/// one endpoint, through the edge, to the sink of the other.
pub fn unstable_manifold(
    edge: CellId,
    filt: &Filtration,
    pairing: &PersistencePairing,
    forest: &GradientForest,
    cfg: &MorseConfig,
) -> Result<Vec<usize>> {
    if edge.dim() != 1 || filt.rank(edge).is_none() {
        return Err(Error::invalid("not an edge of the complex"));
    }
    let critical = match pairing.partner(edge) {
        Some(Partner::Essential) => cfg.include_essential,
        Some(Partner::Cell(p)) => {
            (p.dim() == 0 || cfg.include_positive) && pairing.persistence_of(edge)? > cfg.epsilon
        }
        None => false,
    };
    if !critical {
        return Err(Error::invalid(format!(
            "edge {} is not critical at epsilon {}",
            edge.0, cfg.epsilon
        )));
    }
    let [a, b] = filt.complex().edge_vertices(edge);
    let mut path = forest.path_to_sink(a);
    path.reverse();
    path.extend(forest.path_to_sink(b));
    Ok(path)
}

/// Union of all unstable manifolds, given precomputed persistence.
pub fn morse_graph_from(
    field: &DensityField,
    filt: &Filtration,
    pairing: &PersistencePairing,
    forest: &GradientForest,
    cfg: &MorseConfig,
) -> Result<MorseGraph> {
    let cx = filt.complex();
    let mut edges = Vec::new();
    // A vertex whose sink path has been emitted; later walks stop there.
    let mut done = vec![false; cx.vertex_count()];
    for e in critical_edges(filt, pairing, cfg)? {
        let [a, b] = cx.edge_vertices(e);
        edges.push((a, b));
        for start in [a, b] {
            let mut cur = start;
            while !done[cur] {
                done[cur] = true;
                match forest.parent(cur) {
                    Some(p) => {
                        edges.push((cur, p));
                        cur = p;
                    }
                    None => break,
                }
            }
        }
    }
    MorseGraph::from_voxel_edges(field, edges)
}

/// Persistence, forest and graph in one call.
pub fn extract_morse_graph(field: &DensityField, cfg: &MorseConfig) -> Result<MorseGraph> {
    let filt = build_filtration(field)?;
    let pairing = compute_persistence(&filt);
    let forest = build_gradient_forest(&filt, &pairing, cfg.epsilon)?;
    morse_graph_from(field, &filt, &pairing, &forest, cfg)
}
