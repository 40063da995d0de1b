use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SkeletonTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Repeatedly delete low-score leaves.
    LeafBurner,
    /// Grow from the root through high-score nodes.
    RootGrower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Threshold is `tau` times the mean node score.
    Relative,
    Absolute,
}

/// Absolute score threshold for a tree.
pub fn resolve_threshold(tree: &SkeletonTree, tau: f64, mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::Absolute => tau,
        ThresholdMode::Relative => {
            let mean = tree.nodes().iter().map(|n| n.score).sum::<f64>() / tree.len() as f64;
            tau * mean
        }
    }
}

/// Fixed point of deleting any non-root leaf with `score <= threshold`.
pub fn leaf_burner(tree: &SkeletonTree, threshold: f64) -> SkeletonTree {
    let n = tree.len();
    let mut live_children: Vec<usize> = (0..n).map(|i| tree.children(i).len()).collect();
    let mut keep = vec![true; n];
    let burnable = |i: usize| i != 0 && tree.node(i).score <= threshold;
    let mut queue: VecDeque<usize> = (0..n)
        .filter(|&i| live_children[i] == 0 && burnable(i))
        .collect();
    while let Some(i) = queue.pop_front() {
        keep[i] = false;
        let p = tree.parent(i).expect("root is never burned");
        live_children[p] -= 1;
        if live_children[p] == 0 && burnable(p) {
            queue.push_back(p);
        }
    }
    tree.retain(&keep)
}

/// Maximal root-containing subtree whose non-root nodes all have
/// `score >= threshold`.
pub fn root_grower(tree: &SkeletonTree, threshold: f64) -> SkeletonTree {
    let mut keep = vec![false; tree.len()];
    keep[0] = true;
    // Parents precede children, so one forward pass suffices.
    for i in 1..tree.len() {
        let p = tree.parent(i).unwrap();
        keep[i] = keep[p] && tree.node(i).score >= threshold;
    }
    tree.retain(&keep)
}

pub fn simplify(tree: &SkeletonTree, strategy: Strategy, threshold: f64) -> SkeletonTree {
    match strategy {
        Strategy::LeafBurner => leaf_burner(tree, threshold),
        Strategy::RootGrower => root_grower(tree, threshold),
    }
}
