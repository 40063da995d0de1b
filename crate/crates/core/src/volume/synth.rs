//! Tubular test volumes rendered around a skeleton tree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DensityField, Grid};
use crate::error::{Error, Result};
use crate::geom::point_segment_dist2;
use crate::tree::SkeletonTree;

/// Removes `[start, start + length)` (fractions of the segment, measured from
/// the parent end) of the segment joining node `arc` to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub arc: usize,
    pub start: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub grid: Grid,
    /// Tube profile width in physical units.
    pub tube_sigma: f64,
    pub peak: f64,
    pub noise_sigma: f64,
    #[serde(default)]
    pub gaps: Vec<Gap>,
    /// Extra blob of `tip_boost * peak` at the root and every leaf, so that
    /// tube ends are local maxima.
    #[serde(default)]
    pub tip_boost: f64,
    pub seed: u64,
}

/// Segments of the skeleton that remain after cutting out the gaps.
pub(crate) fn visible_segments(
    tree: &SkeletonTree,
    gaps: &[Gap],
) -> Result<Vec<([f64; 3], [f64; 3])>> {
    for g in gaps {
        if g.arc >= tree.len() || tree.parent(g.arc).is_none() {
            return Err(Error::invalid(format!(
                "gap refers to node {} which has no parent arc",
                g.arc
            )));
        }
        if !(g.start >= 0.0 && g.length >= 0.0 && g.start + g.length <= 1.0 + 1e-12) {
            return Err(Error::invalid(format!("gap fractions out of range: {g:?}")));
        }
    }
    let mut out = Vec::new();
    for n in 0..tree.len() {
        let Some(p) = tree.parent(n) else { continue };
        let a = tree.position(p);
        let b = tree.position(n);
        let lerp = |t: f64| [0, 1, 2].map(|d| a[d] + t * (b[d] - a[d]));
        // Intervals of [0, 1] left visible.
        let mut cuts: Vec<(f64, f64)> = gaps
            .iter()
            .filter(|g| g.arc == n && g.length > 0.0)
            .map(|g| (g.start, (g.start + g.length).min(1.0)))
            .collect();
        cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut t = 0.0;
        for (s, e) in cuts {
            if s > t {
                out.push((lerp(t), lerp(s)));
            }
            t = t.max(e);
        }
        if t < 1.0 {
            out.push((lerp(t), lerp(1.0)));
        }
    }
    if out.is_empty() && tree.len() == 1 {
        let p = tree.position(0);
        out.push((p, p));
    }
    Ok(out)
}

/// Render `peak * exp(-d^2 / 2 sigma^2)` around the non-gapped skeleton, add
/// zero-mean Gaussian noise and clamp at zero. Noise is drawn per voxel in
/// linear order, so the output depends only on the parameters.
pub fn synth_tree_volume(tree: &SkeletonTree, params: &SynthParams) -> Result<DensityField> {
    let grid = params.grid;
    if !(params.tube_sigma > 0.0) {
        return Err(Error::invalid("tube_sigma must be positive"));
    }
    if !(params.peak >= 0.0) || !(params.noise_sigma >= 0.0) || !(params.tip_boost >= 0.0) {
        return Err(Error::invalid(
            "peak, noise_sigma and tip_boost must be non-negative",
        ));
    }
    let hi = grid.position(grid.voxel(grid.len() - 1));
    for n in 0..tree.len() {
        let p = tree.position(n);
        if (0..3).any(|a| p[a] < grid.origin[a] - 1e-9 || p[a] > hi[a] + 1e-9) {
            return Err(Error::invalid(format!(
                "skeleton node {n} at {p:?} lies outside the volume"
            )));
        }
    }
    let segments = visible_segments(tree, &params.gaps)?;

    let sigma = params.tube_sigma;
    // Beyond this distance the profile underflows f32.
    let cutoff = if params.peak > 0.0 {
        sigma * (2.0 * (params.peak / 1e-46).ln()).max(0.0).sqrt()
    } else {
        0.0
    };

    let mut d2 = vec![f64::INFINITY; grid.len()];
    if params.peak > 0.0 {
        for &(a, b) in &segments {
            for_each_in_box(&grid, a, b, cutoff, |lin, p| {
                let q = point_segment_dist2(p, a, b);
                if q < d2[lin] {
                    d2[lin] = q;
                }
            });
        }
    }

    let mut boost = vec![0.0f64; grid.len()];
    if params.tip_boost > 0.0 && params.peak > 0.0 {
        let ends = (0..tree.len()).filter(|&n| n == 0 || tree.children(n).is_empty());
        for n in ends {
            let c = tree.position(n);
            for_each_in_box(&grid, c, c, cutoff, |lin, p| {
                let q = crate::geom::dist2(p, c);
                boost[lin] += params.tip_boost * params.peak * (-q / (2.0 * sigma * sigma)).exp();
            });
        }
    }

    let noise = (params.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, params.noise_sigma).expect("finite sigma"));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let values = d2
        .into_iter()
        .zip(boost)
        .map(|(q, extra)| {
            let signal = extra
                + if q.is_finite() {
                    params.peak * (-q / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                };
            let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
            (signal + eps).max(0.0) as f32
        })
        .collect();
    DensityField::new(grid, values)
}

/// Visit every voxel inside the box spanned by `a`, `b` grown by `pad`.
fn for_each_in_box(
    grid: &Grid,
    a: [f64; 3],
    b: [f64; 3],
    pad: f64,
    mut f: impl FnMut(usize, [f64; 3]),
) {
    let lo = [0, 1, 2].map(|d| a[d].min(b[d]) - pad);
    let hi = [0, 1, 2].map(|d| a[d].max(b[d]) + pad);
    let range = |d: usize| {
        let l = ((lo[d] - grid.origin[d]) / grid.spacing[d]).ceil().max(0.0) as usize;
        let h = ((hi[d] - grid.origin[d]) / grid.spacing[d]).floor();
        let h = if h < 0.0 {
            None
        } else {
            Some((h as usize).min(grid.dims[d] - 1))
        };
        h.filter(|&h| h >= l).map(|h| l..=h)
    };
    let (Some(ri), Some(rj), Some(rk)) = (range(0), range(1), range(2)) else {
        return;
    };
    for k in rk {
        for j in rj.clone() {
            for i in ri.clone() {
                let v = super::VoxelIndex::new(i, j, k);
                f(grid.linear(v), grid.position(v));
            }
        }
    }
}
