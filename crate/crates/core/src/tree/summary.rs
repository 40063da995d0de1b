use super::{associate_voxels, SkeletonTree};
use crate::error::{Error, Result};
use crate::geom::dist;
use crate::volume::DensityField;

/// Weight-preserving summary: every voxel within `beta_w` (strictly) of the
/// node set hands its density to its nearest node. Returns the total mass
/// that was assigned.
pub fn assign_weights(tree: &mut SkeletonTree, field: &DensityField, beta_w: f64) -> Result<f64> {
    if !(beta_w > 0.0) {
        return Err(Error::invalid("beta_w must be positive"));
    }
    let assoc = associate_voxels(&tree.positions(), field, beta_w, false, |v| v > 0.0);
    let w = assoc.accumulate(tree.len(), |lin| field.at(lin) as f64);
    let total = w.iter().sum();
    for (n, w) in tree.nodes_mut().iter_mut().zip(w) {
        n.weight = w;
    }
    Ok(total)
}

/// Radius `c * sqrt(N)` where `N` counts foreground voxels (density above
/// `foreground`) whose nearest node within `zeta` is the node; nodes with no
/// voxels get radius `c`.
pub fn assign_thickness(
    tree: &mut SkeletonTree,
    field: &DensityField,
    zeta: f64,
    c: f64,
    foreground: f32,
) -> Result<()> {
    if !(zeta > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("zeta and c must be positive"));
    }
    let assoc = associate_voxels(&tree.positions(), field, zeta, true, |v| v > foreground);
    let counts = assoc.accumulate(tree.len(), |_| 1.0);
    for (n, count) in tree.nodes_mut().iter_mut().zip(counts) {
        n.radius = if count == 0.0 { c } else { c * count.sqrt() };
    }
    Ok(())
}

/// Physical root-to-node path length for every node.
fn depth_lengths(tree: &SkeletonTree) -> Vec<f64> {
    let mut len = vec![0.0; tree.len()];
    for i in 1..tree.len() {
        let p = tree.parent(i).unwrap();
        len[i] = len[p] + dist(tree.position(i), tree.position(p));
    }
    len
}

/// `(leaf, root-to-leaf length)` for every leaf, longest first (ties by
/// node index).
pub fn branch_lengths(tree: &SkeletonTree) -> Vec<(usize, f64)> {
    let len = depth_lengths(tree);
    let mut out: Vec<(usize, f64)> = tree.leaves().into_iter().map(|l| (l, len[l])).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Union of the `k` longest root-to-leaf branches.
pub fn top_k_branches(tree: &SkeletonTree, k: usize) -> Result<SkeletonTree> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let branches = branch_lengths(tree);
    if k >= branches.len() {
        return Ok(tree.clone());
    }
    let mut keep = vec![false; tree.len()];
    keep[0] = true;
    for &(leaf, _) in &branches[..k] {
        let mut cur = leaf;
        while !keep[cur] {
            keep[cur] = true;
            cur = tree.parent(cur).unwrap();
        }
    }
    Ok(tree.retain(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    #[test]
    fn single_node_weight_is_total_mass() {
        let g = Grid::unit([4, 4, 4]).unwrap();
        let f = DensityField::new(g, (0..64).map(|v| (v % 5) as f32).collect()).unwrap();
        let mut t = SkeletonTree::from_parents(&[[1.5, 1.5, 1.5]], &[None]).unwrap();
        let total = assign_weights(&mut t, &f, 100.0).unwrap();
        assert_eq!(total, f.sum());
        assert_eq!(t.node(0).weight, f.sum());
    }

    #[test]
    fn far_voxels_contribute_nothing() {
        let g = Grid::unit([10, 1, 1]).unwrap();
        let f = DensityField::new(g, vec![1.0; 10]).unwrap();
        let mut t = SkeletonTree::from_parents(&[[0.0; 3]], &[None]).unwrap();
        // Strict cap: voxels at distance 0, 1, 2 only.
        assign_weights(&mut t, &f, 3.0).unwrap();
        assert_eq!(t.node(0).weight, 3.0);
    }

    #[test]
    fn thickness_formula() {
        let g = Grid::unit([3, 3, 1]).unwrap();
        let f = DensityField::new(g, vec![1.0; 9]).unwrap();
        // Second node is far outside the grid and collects nothing.
        let mut t =
            SkeletonTree::from_parents(&[[1.0, 1.0, 0.0], [2.0, 40.0, 0.0]], &[None, Some(0)])
                .unwrap();
        assign_thickness(&mut t, &f, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(t.node(0).radius, 3.0);
        assert_eq!(t.node(1).radius, 1.0);
    }

    #[test]
    fn top_k_keeps_longest() {
        // Star: root with arms of length 5, 3 and 1 along different axes.
        let mut pos = vec![[0.0; 3]];
        let mut par = vec![None];
        for (axis, len) in [(0usize, 5), (1, 3), (2, 1)] {
            let mut prev = 0;
            for s in 1..=len {
                let mut p = [0.0; 3];
                p[axis] = s as f64;
                pos.push(p);
                par.push(Some(prev));
                prev = pos.len() - 1;
            }
        }
        let t = SkeletonTree::from_parents(&pos, &par).unwrap();
        let s = top_k_branches(&t, 2).unwrap();
        assert_eq!(s.len(), 1 + 5 + 3);
        assert_eq!(top_k_branches(&t, 3).unwrap(), t);
        assert_eq!(top_k_branches(&t, 10).unwrap(), t);
        assert!(top_k_branches(&t, 0).is_err());
    }
}
