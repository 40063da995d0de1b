use rayon::prelude::*;

use super::{associate_voxels, SkeletonTree};
use crate::error::{Error, Result};
use crate::graph_simplify::vector_score_along_path;
use crate::volume::DensityField;

/// Sum of density over the voxels whose nearest node (within `beta`, ties to
/// the smaller node index) is each node.
pub fn density_scores(tree: &SkeletonTree, field: &DensityField, beta: f64) -> Vec<f64> {
    let assoc = associate_voxels(&tree.positions(), field, beta, true, |v| v > 0.0);
    assoc.accumulate(tree.len(), |lin| field.at(lin) as f64)
}

/// Vector score per tree node: each unbranched segment is scored with
/// [`vector_score_along_path`]; nodes shared by several segments (branch
/// points and the root) take the mean of their per-segment scores.
pub fn tree_vector_scores(tree: &SkeletonTree, flow: &[Option<[f64; 3]>], hop: usize) -> Vec<f64> {
    assert_eq!(flow.len(), tree.len());
    let mut sum = vec![0.0; tree.len()];
    let mut count = vec![0usize; tree.len()];
    for seg in tree.segments() {
        let pos: Vec<[f64; 3]> = seg.iter().map(|&i| tree.position(i)).collect();
        let fl: Vec<Option<[f64; 3]>> = seg.iter().map(|&i| flow[i]).collect();
        for (&i, s) in seg.iter().zip(vector_score_along_path(&pos, &fl, hop)) {
            sum[i] += s;
            count[i] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

/// Store density and vector scores and their mix
/// `alpha * density + (1 - alpha) * vector`.
pub fn weighted_scores(
    tree: &mut SkeletonTree,
    density: &[f64],
    vector: &[f64],
    alpha: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha must lie in [0, 1]"));
    }
    if density.len() != tree.len() || vector.len() != tree.len() {
        return Err(Error::invalid("score vectors must have one entry per node"));
    }
    for (i, n) in tree.nodes.iter_mut().enumerate() {
        n.density_score = density[i];
        n.vector_score = vector[i];
        n.weighted_score = alpha * density[i] + (1.0 - alpha) * vector[i];
        n.score = n.weighted_score;
    }
    tree.alpha = Some(alpha);
    tree.smoothed = false;
    Ok(())
}

/// Nodes within `k` hops of `v` along its ancestor chain and its subtree,
/// including `v` itself.
pub(crate) fn hop_window(tree: &SkeletonTree, v: usize, k: usize) -> Vec<usize> {
    let mut out = vec![v];
    let mut cur = v;
    for _ in 0..k {
        match tree.parent(cur) {
            Some(p) => {
                out.push(p);
                cur = p;
            }
            None => break,
        }
    }
    let mut frontier = vec![v];
    for _ in 0..k {
        let next: Vec<usize> = frontier
            .iter()
            .flat_map(|&u| tree.children(u).iter().copied())
            .collect();
        if next.is_empty() {
            break;
        }
        out.extend_from_slice(&next);
        frontier = next;
    }
    out
}

/// Replace each node's score by the mean weighted score over its k-hop
/// ancestor/descendant window. A tree can be smoothed once.
pub fn smooth_scores(tree: &mut SkeletonTree, k: usize) -> Result<()> {
    if tree.smoothed {
        return Err(Error::invalid("scores were already smoothed"));
    }
    let smoothed: Vec<f64> = (0..tree.len())
        .into_par_iter()
        .map(|v| {
            let w = hop_window(tree, v, k);
            w.iter().map(|&u| tree.nodes[u].weighted_score).sum::<f64>() / w.len() as f64
        })
        .collect();
    for (n, s) in tree.nodes.iter_mut().zip(smoothed) {
        n.score = s;
    }
    tree.smoothed = true;
    Ok(())
}
