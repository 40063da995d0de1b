use rayon::prelude::*;

use crate::geom::dist2;
use crate::volume::DensityField;

/// Per-voxel nearest node, `None` when no node lies within the cap or the
/// voxel was filtered out.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub node_of: Vec<Option<u32>>,
}

impl Association {
    /// Sum `value(voxel)` per node, in voxel order.
    pub fn accumulate(&self, n_nodes: usize, mut value: impl FnMut(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; n_nodes];
        for (lin, node) in self.node_of.iter().enumerate() {
            if let Some(n) = node {
                out[*n as usize] += value(lin);
            }
        }
        out
    }
}

/// Dense bucket grid over the nodes' bounding box. Cells are cubes sized so
/// that an average cell holds a handful of nodes.
struct Buckets {
    cell: f64,
    lo: [f64; 3],
    dims: [i64; 3],
    /// CSR layout: nodes of cell `c` are `items[start[c]..start[c + 1]]`,
    /// in ascending node order.
    start: Vec<u32>,
    items: Vec<u32>,
}

impl Buckets {
    fn new(points: &[[f64; 3]], min_cell: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 3];
            hi = [0.0; 3];
        }
        let ext = [0, 1, 2].map(|a| (hi[a] - lo[a]).max(min_cell));
        let cell =
            ((ext[0] * ext[1] * ext[2] / points.len().max(1) as f64).cbrt() * 2.0).max(min_cell);
        let dims = ext.map(|e| (e / cell).floor() as i64 + 1);
        let n_cells = (dims[0] * dims[1] * dims[2]) as usize;
        let key = |p: &[f64; 3]| -> usize {
            let k =
                [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell).floor() as i64).clamp(0, dims[a] - 1));
            (k[0] + dims[0] * (k[1] + dims[1] * k[2])) as usize
        };
        let mut start = vec![0u32; n_cells + 1];
        for p in points {
            start[key(p) + 1] += 1;
        }
        for c in 0..n_cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = key(p);
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Self {
            cell,
            lo,
            dims,
            start,
            items,
        }
    }

    /// Nearest node to `p` with squared distance accepted by `within`, ties
    /// to the smaller index. Scans Chebyshev rings of cells outward and stops
    /// once no unvisited cell can hold a strictly closer node.
    fn nearest(
        &self,
        nodes: &[[f64; 3]],
        p: [f64; 3],
        within: impl Fn(f64) -> bool,
    ) -> Option<u32> {
        if self.items.is_empty() {
            return None;
        }
        // Cell of p, possibly outside the grid.
        let kp = [0, 1, 2].map(|a| ((p[a] - self.lo[a]) / self.cell).floor() as i64);
        // Distance from p to the grid box bounds the first useful ring.
        let max_ring = (0..3)
            .map(|a| kp[a].abs().max((kp[a] - (self.dims[a] - 1)).abs()))
            .max()
            .unwrap();
        let mut best: Option<(f64, u32)> = None;
        for r in 0..=max_ring {
            // Every node in ring r is at least (r - 1) * cell away.
            let reach = (r - 1).max(0) as f64 * self.cell;
            let reach2 = reach * reach;
            if let Some((bd, _)) = best {
                if bd < reach2 {
                    break;
                }
            }
            if r > 0 && !within(reach2) {
                break;
            }
            let range = |a: usize| (kp[a] - r).max(0)..=(kp[a] + r).min(self.dims[a] - 1);
            for z in range(2) {
                for y in range(1) {
                    let on_yz = (z - kp[2]).abs() == r || (y - kp[1]).abs() == r;
                    let xs: Vec<i64> = if on_yz {
                        range(0).collect()
                    } else {
                        [kp[0] - r, kp[0] + r]
                            .into_iter()
                            .filter(|&x| x >= 0 && x < self.dims[0] && (r > 0 || x == kp[0]))
                            .collect()
                    };
                    for x in xs {
                        let c = (x + self.dims[0] * (y + self.dims[1] * z)) as usize;
                        for &n in &self.items[self.start[c] as usize..self.start[c + 1] as usize] {
                            let d2 = dist2(p, nodes[n as usize]);
                            if !within(d2) {
                                continue;
                            }
                            let better = match best {
                                None => true,
                                Some((bd, bn)) => d2 < bd || (d2 == bd && n < bn),
                            };
                            if better {
                                best = Some((d2, n));
                            }
                        }
                    }
                }
            }
        }
        best.map(|(_, n)| n)
    }
}

/// Associate every voxel accepted by `accept` with its nearest node within
/// `cap` (physical units). `inclusive` selects `d <= cap` versus `d < cap`.
/// Ties go to the smaller node index.
pub fn associate_voxels(
    nodes: &[[f64; 3]],
    field: &DensityField,
    cap: f64,
    inclusive: bool,
    accept: impl Fn(f32) -> bool + Sync,
) -> Association {
    let grid = field.grid();
    let cap2 = cap * cap;
    let within = |d2: f64| if inclusive { d2 <= cap2 } else { d2 < cap2 };
    let min_spacing = grid.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    let buckets = Buckets::new(nodes, min_spacing);
    let values = field.values();
    let node_of = (0..field.len())
        .into_par_iter()
        .map(|lin| {
            if !accept(values[lin]) {
                return None;
            }
            buckets.nearest(nodes, grid.position_of(lin), within)
        })
        .collect();
    Association { node_of }
}
