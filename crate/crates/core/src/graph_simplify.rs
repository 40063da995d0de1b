//! Cleanup of the Morse graph before the spanning forest: arcs stranded in
//! empty background, and low-scoring paths judged by local flow direction.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{abs_cosine, dist, sub};
use crate::morse::MorseGraph;
use crate::volume::DensityField;

/// True when some non-zero voxel lies within `radius` voxels (Euclidean, in
/// index space) of voxel `lin`.
fn near_signal(field: &DensityField, lin: usize, radius: f64) -> bool {
    let grid = field.grid();
    let v = grid.voxel(lin).as_array();
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let lo = |a: usize| (v[a] as isize - r).max(0) as usize;
    let hi = |a: usize| (v[a] as isize + r).min(grid.dims[a] as isize - 1) as usize;
    for k in lo(2)..=hi(2) {
        for j in lo(1)..=hi(1) {
            for i in lo(0)..=hi(0) {
                let d = [
                    i as f64 - v[0] as f64,
                    j as f64 - v[1] as f64,
                    k as f64 - v[2] as f64,
                ];
                if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2
                    && field.at(i + grid.dims[0] * (j + grid.dims[1] * k)) > 0.0
                {
                    return true;
                }
            }
        }
    }
    false
}

/// Delete arcs none of whose voxels is within `min_distance` voxels of a
/// non-zero voxel.
pub fn remove_boundary_arcs(
    graph: &MorseGraph,
    field: &DensityField,
    min_distance: f64,
) -> Result<MorseGraph> {
    if !(min_distance >= 0.0) {
        return Err(Error::invalid("min_distance must be non-negative"));
    }
    if field.grid() != graph.grid() {
        return Err(Error::structure("graph and field grids differ"));
    }
    let near: Vec<bool> = (0..graph.vertex_count())
        .into_par_iter()
        .map(|v| near_signal(field, graph.voxel(v), min_distance))
        .collect();
    let mut removed = vec![false; graph.edge_count()];
    for arc in graph.arcs() {
        if !arc.vertices.iter().any(|&v| near[v as usize]) {
            for &e in &arc.edges {
                removed[e as usize] = true;
            }
        }
    }
    Ok(graph.without_edges(&removed))
}

/// Per-node unit direction; `None` marks a degenerate neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub vectors: Vec<Option<[f64; 3]>>,
    pub radius: usize,
    pub sigma: f64,
}

/// Flip so the largest-magnitude component is positive.
fn canonical_sign(v: [f64; 3]) -> [f64; 3] {
    let mut big = 0;
    for a in 1..3 {
        if v[a].abs() > v[big].abs() {
            big = a;
        }
    }
    if v[big] < 0.0 {
        v.map(|c| -c)
    } else {
        v
    }
}

/// Top eigenvector of the weighted covariance of `points`. `None` when the
/// weights sum to zero or the covariance vanishes.
pub fn principal_direction(points: &[[f64; 3]], weights: &[f64]) -> Option<[f64; 3]> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut mean = [0.0; 3];
    for (p, &w) in points.iter().zip(weights) {
        for a in 0..3 {
            mean[a] += w * p[a];
        }
    }
    mean = mean.map(|m| m / total);
    let mut cov = Matrix3::<f64>::zeros();
    for (p, &w) in points.iter().zip(weights) {
        let d = sub(*p, mean);
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += w * d[r] * d[c];
            }
        }
    }
    cov /= total;
    let eig = SymmetricEigen::new(cov);
    let mut best = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    if !(eig.eigenvalues[best] > 0.0) {
        return None;
    }
    let col = eig.eigenvectors.column(best);
    let n = col.norm();
    Some(canonical_sign([col[0] / n, col[1] / n, col[2] / n]))
}

/// Principal direction of the density in the `(2r+1)^3` cube around a voxel.
pub fn local_flow(field: &DensityField, lin: usize, radius: usize) -> Option<[f64; 3]> {
    let grid = field.grid();
    let v = grid.voxel(lin).as_array();
    let lo = |a: usize| v[a].saturating_sub(radius);
    let hi = |a: usize| (v[a] + radius).min(grid.dims[a] - 1);
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for k in lo(2)..=hi(2) {
        for j in lo(1)..=hi(1) {
            for i in lo(0)..=hi(0) {
                let l = i + grid.dims[0] * (j + grid.dims[1] * k);
                let rho = field.at(l);
                if rho > 0.0 {
                    pts.push(grid.position_of(l));
                    w.push(rho as f64);
                }
            }
        }
    }
    principal_direction(&pts, &w)
}

/// Gaussian average over graph hops (`exp(-h^2 / 2 sigma^2)`, cut at 3 sigma)
/// with every neighbour flipped to agree with the centre before summing.
pub fn diffuse_vectors(
    raw: &[Option<[f64; 3]>],
    adjacency: &[Vec<usize>],
    sigma: f64,
) -> Vec<Option<[f64; 3]>> {
    if sigma <= 0.0 {
        return raw.to_vec();
    }
    let max_hops = (3.0 * sigma).ceil() as usize;
    (0..raw.len())
        .into_par_iter()
        .map(|v| {
            let mut hops = vec![(v, 0usize)];
            let mut seen = std::collections::HashSet::from([v]);
            let mut q = VecDeque::from([(v, 0usize)]);
            while let Some((u, h)) = q.pop_front() {
                if h == max_hops {
                    continue;
                }
                for &x in &adjacency[u] {
                    if seen.insert(x) {
                        hops.push((x, h + 1));
                        q.push_back((x, h + 1));
                    }
                }
            }
            let mut acc = [0.0; 3];
            let reference = raw[v];
            for (u, h) in hops {
                let Some(d) = raw[u] else { continue };
                let w = (-((h * h) as f64) / (2.0 * sigma * sigma)).exp();
                let r = reference.unwrap_or(acc);
                let s = if d[0] * r[0] + d[1] * r[1] + d[2] * r[2] < 0.0 {
                    -w
                } else {
                    w
                };
                for a in 0..3 {
                    acc[a] += s * d[a];
                }
            }
            let n = (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt();
            (n > 0.0).then(|| canonical_sign(acc.map(|c| c / n)))
        })
        .collect()
}

/// Local PCA direction at every graph node, diffused over the graph.
pub fn estimate_flow_vectors(
    graph: &MorseGraph,
    field: &DensityField,
    radius: usize,
    sigma: f64,
) -> Result<FlowField> {
    if radius < 1 {
        return Err(Error::invalid("neighbourhood radius must be at least 1"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("diffusion sigma must be non-negative"));
    }
    let raw: Vec<Option<[f64; 3]>> = (0..graph.vertex_count())
        .into_par_iter()
        .map(|v| local_flow(field, graph.voxel(v), radius))
        .collect();
    let adj: Vec<Vec<usize>> = (0..graph.vertex_count())
        .map(|v| graph.neighbors(v).collect())
        .collect();
    Ok(FlowField {
        vectors: diffuse_vectors(&raw, &adj, sigma),
        radius,
        sigma,
    })
}

/// |cos| between each node's flow vector and the chord joining the nodes
/// `hop` steps before and after it (clamped at the path ends).
pub fn vector_score_along_path(
    positions: &[[f64; 3]],
    flow: &[Option<[f64; 3]>],
    hop: usize,
) -> Vec<f64> {
    assert_eq!(positions.len(), flow.len());
    let n = positions.len();
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(hop);
            let b = (i + hop).min(n.saturating_sub(1));
            match flow[i] {
                Some(f) => abs_cosine(sub(positions[b], positions[a]), f),
                None => 0.0,
            }
        })
        .collect()
}

/// Length-normalised trapezoidal integral of `c * (alpha + v)` along a path.
pub fn path_score(
    positions: &[[f64; 3]],
    vector_scores: &[f64],
    intensity: &[f64],
    alpha: f64,
) -> f64 {
    let g: Vec<f64> = intensity
        .iter()
        .zip(vector_scores)
        .map(|(c, v)| c * (alpha + v))
        .collect();
    let mut integral = 0.0;
    let mut length = 0.0;
    for i in 1..positions.len() {
        let ds = dist(positions[i - 1], positions[i]);
        integral += 0.5 * (g[i - 1] + g[i]) * ds;
        length += ds;
    }
    if length > 0.0 {
        integral / length
    } else {
        g.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    /// Paths scoring below this are removal candidates.
    pub threshold: f64,
    pub alpha: f64,
    /// Densities are capped at this value before integration.
    pub intensity_cap: f64,
    pub hop: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            alpha: 0.0,
            intensity_cap: 1.0,
            hop: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub graph: MorseGraph,
    /// Score of every arc of the input graph, by arc index.
    pub scores: Vec<f64>,
    pub removed: Vec<usize>,
}

/// Remove low-scoring arcs, lowest first (ties by arc index), skipping any
/// whose removal would change the number of connected components. After
/// each removal the scan restarts, so skipped arcs are re-examined.
pub fn prune_paths(
    graph: &MorseGraph,
    flow: &FlowField,
    cfg: &PruneConfig,
) -> Result<PruneOutcome> {
    if !(cfg.threshold >= 0.0) || !(cfg.intensity_cap > 0.0) || !(cfg.alpha >= 0.0) {
        return Err(Error::invalid(
            "prune threshold, alpha and intensity cap must be non-negative",
        ));
    }
    if flow.vectors.len() != graph.vertex_count() {
        return Err(Error::invalid("flow field does not match the graph"));
    }
    let arcs = graph.arcs();
    let scores: Vec<f64> = arcs
        .iter()
        .map(|arc| {
            let pos: Vec<[f64; 3]> = arc
                .vertices
                .iter()
                .map(|&v| graph.position(v as usize))
                .collect();
            let fl: Vec<Option<[f64; 3]>> = arc
                .vertices
                .iter()
                .map(|&v| flow.vectors[v as usize])
                .collect();
            let vs = vector_score_along_path(&pos, &fl, cfg.hop);
            let c: Vec<f64> = arc
                .vertices
                .iter()
                .map(|&v| (graph.density(v as usize) as f64).min(cfg.intensity_cap))
                .collect();
            path_score(&pos, &vs, &c, cfg.alpha)
        })
        .collect();
    let mut candidates: Vec<usize> = (0..arcs.len())
        .filter(|&a| scores[a] < cfg.threshold)
        .collect();
    candidates.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut removed = prune_arcs(&ArcGraph::new(graph), &candidates);

    let mut edge_gone = vec![false; graph.edge_count()];
    for &a in &removed {
        for &e in &arcs[a].edges {
            edge_gone[e as usize] = true;
        }
    }
    removed.sort_unstable();
    Ok(PruneOutcome {
        graph: graph.without_edges(&edge_gone),
        scores,
        removed,
    })
}

/// Arcs as a multigraph over their end vertices.
pub(crate) struct ArcGraph {
    ends: Vec<(usize, usize)>,
    /// `(arc, other end)` per end node.
    adj: Vec<Vec<(usize, usize)>>,
}

impl ArcGraph {
    fn new(graph: &MorseGraph) -> Self {
        let mut id = std::collections::HashMap::new();
        let mut ends = Vec::new();
        for arc in graph.arcs() {
            let mut node = |v: u32| {
                let n = id.len();
                *id.entry(v).or_insert(n)
            };
            let s = node(arc.vertices[0]);
            let t = node(*arc.vertices.last().unwrap());
            ends.push((s, t));
        }
        Self::from_ends(id.len(), ends)
    }

    pub(crate) fn from_ends(nodes: usize, ends: Vec<(usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); nodes];
        for (a, &(s, t)) in ends.iter().enumerate() {
            adj[s].push((a, t));
            if s != t {
                adj[t].push((a, s));
            }
        }
        Self { ends, adj }
    }
}

/// Remove candidate arcs (given lowest score first) one at a time, always
/// taking the first whose removal keeps the number of non-trivial components.
/// Returns the removed arcs in removal order.
///
/// A candidate that is not removable can only become removable when one of
/// its end nodes loses an arc (it turns into a pendant), so after each
/// removal only candidates sharing an end node are re-queued.
pub(crate) fn prune_arcs(g: &ArcGraph, candidates: &[usize]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; g.ends.len()];
    for (r, &a) in candidates.iter().enumerate() {
        rank[a] = r;
    }
    let mut live = vec![true; g.ends.len()];
    let mut degree: Vec<usize> = g.adj.iter().map(Vec::len).collect();
    let mut pending: std::collections::BTreeSet<usize> = (0..candidates.len()).collect();
    let mut removed = Vec::new();
    let mut search = BiSearch::new(g.adj.len());
    while let Some(r) = pending.pop_first() {
        let a = candidates[r];
        let (s, t) = g.ends[a];
        let (so, to) = (degree[s] > 1, degree[t] > 1);
        let removable = if s == t || !so || !to {
            // Loop or pendant: safe exactly when something else remains.
            so || to
        } else {
            search.connected(g, &live, a, s, t)
        };
        if !removable {
            continue;
        }
        live[a] = false;
        removed.push(a);
        degree[s] -= 1;
        if s != t {
            degree[t] -= 1;
        }
        for v in [s, t] {
            for &(b, _) in &g.adj[v] {
                if live[b] && rank[b] != usize::MAX {
                    pending.insert(rank[b]);
                }
            }
        }
    }
    removed
}

/// Bidirectional BFS that stops as soon as either side is exhausted, so a
/// bridge costs only the size of its smaller side.
struct BiSearch {
    mark: Vec<u32>,
    stamp: u32,
}

impl BiSearch {
    fn new(n: usize) -> Self {
        Self {
            mark: vec![0; n],
            stamp: 0,
        }
    }

    fn connected(&mut self, g: &ArcGraph, live: &[bool], skip: usize, s: usize, t: usize) -> bool {
        self.stamp += 2;
        let tags = [self.stamp, self.stamp + 1];
        self.mark[s] = tags[0];
        self.mark[t] = tags[1];
        let mut fronts = [VecDeque::from([s]), VecDeque::from([t])];
        loop {
            // Grow whichever side has the smaller frontier.
            let side = usize::from(fronts[0].len() > fronts[1].len());
            let Some(v) = fronts[side].pop_front() else {
                return false;
            };
            for &(b, u) in &g.adj[v] {
                if b == skip || !live[b] {
                    continue;
                }
                if self.mark[u] == tags[1 - side] {
                    return true;
                }
                if self.mark[u] != tags[side] {
                    self.mark[u] = tags[side];
                    fronts[side].push_back(u);
                }
            }
        }
    }
}
