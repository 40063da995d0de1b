//! Seeded tube and Y-junction phantoms with known centrelines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{dot, norm};
use crate::tree::SkeletonTree;
use crate::volume::{synth_tree_volume, DensityField, Gap, Grid, SynthParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomShape {
    /// One straight segment.
    Tube,
    /// A root arm and two branches meeting at a junction.
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub shape: PhantomShape,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Tube profile width (physical units).
    pub tube_sigma: f64,
    pub peak: f64,
    /// Noise standard deviation as a fraction of `peak`.
    pub noise: f64,
    /// End blob amplitude as a fraction of `peak`.
    pub tip_boost: f64,
    /// Length of a dark gap cut into the first branch (physical units).
    pub gap: f64,
    /// Minimum distance of the centreline from the volume border (voxels).
    pub margin: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            shape: PhantomShape::Y,
            dims: [64, 64, 64],
            spacing: [1.0; 3],
            tube_sigma: 1.2,
            peak: 65535.0,
            noise: 0.0,
            tip_boost: 0.25,
            gap: 0.0,
            margin: 8.0,
            seed: 0,
        }
    }
}

/// Ground-truth skeleton and its rendered volume.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub truth: SkeletonTree,
    pub field: DensityField,
    pub gaps: Vec<Gap>,
}

impl Phantom {
    pub fn root(&self) -> [f64; 3] {
        self.truth.position(0)
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = norm(v);
        if n > 1e-6 {
            return v.map(|c| c / n);
        }
    }
}

/// Largest `t` with `c + t * u` inside `[lo, hi]` on every axis.
fn reach(c: [f64; 3], u: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> f64 {
    (0..3)
        .map(|a| {
            if u[a] > 1e-12 {
                (hi[a] - c[a]) / u[a]
            } else if u[a] < -1e-12 {
                (lo[a] - c[a]) / u[a]
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let grid = Grid::new(spec.dims, spec.spacing, [0.0; 3])?;
    if !(spec.noise >= 0.0 && spec.tip_boost >= 0.0 && spec.gap >= 0.0 && spec.margin >= 0.0) {
        return Err(Error::invalid(
            "noise, tip_boost, gap and margin must be non-negative",
        ));
    }
    let lo = [0, 1, 2].map(|a| spec.margin * spec.spacing[a]);
    let hi = [0, 1, 2].map(|a| (spec.dims[a] as f64 - 1.0 - spec.margin) * spec.spacing[a]);
    if (0..3).any(|a| hi[a] - lo[a] < 4.0 * spec.spacing[a]) {
        return Err(Error::invalid("volume too small for the margin"));
    }
    let mid = [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a]));
    let min_arm = 0.25 * (0..3).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (positions, parents, gap_arm) = loop {
        let jitter = [0, 1, 2].map(|a| rng.random_range(-1.5..1.5) * spec.spacing[a]);
        let c = [0, 1, 2].map(|a| mid[a] + jitter[a]);
        match spec.shape {
            PhantomShape::Tube => {
                let u = unit_vector(&mut rng);
                let t_pos = reach(c, u, lo, hi);
                let t_neg = reach(c, u.map(|x| -x), lo, hi);
                if t_pos + t_neg < 2.0 * min_arm {
                    continue;
                }
                let a = [0, 1, 2].map(|k| c[k] - t_neg * u[k]);
                let b = [0, 1, 2].map(|k| c[k] + t_pos * u[k]);
                break (vec![a, b], vec![None, Some(0)], 1);
            }
            PhantomShape::Y => {
                let dirs = [
                    unit_vector(&mut rng),
                    unit_vector(&mut rng),
                    unit_vector(&mut rng),
                ];
                // Arms at least ~70 degrees apart.
                let spread = (0..3).all(|i| (i + 1..3).all(|j| dot(dirs[i], dirs[j]) < 0.34));
                if !spread {
                    continue;
                }
                let ends: Vec<[f64; 3]> = dirs
                    .iter()
                    .map(|&u| {
                        let t = reach(c, u, lo, hi);
                        [0, 1, 2].map(|k| c[k] + t * u[k])
                    })
                    .collect();
                if ends.iter().any(|e| crate::geom::dist(*e, c) < min_arm) {
                    continue;
                }
                break (
                    vec![ends[0], c, ends[1], ends[2]],
                    vec![None, Some(0), Some(1), Some(1)],
                    2,
                );
            }
        }
    };
    let truth = SkeletonTree::from_parents(&positions, &parents)?;
    let mut gaps = Vec::new();
    if spec.gap > 0.0 {
        let len = crate::geom::dist(
            truth.position(gap_arm),
            truth.position(truth.parent(gap_arm).unwrap()),
        );
        let frac = (spec.gap / len).min(0.5);
        gaps.push(Gap {
            arc: gap_arm,
            start: 0.5 - frac / 2.0,
            length: frac,
        });
    }
    let params = SynthParams {
        grid,
        tube_sigma: spec.tube_sigma,
        peak: spec.peak,
        noise_sigma: spec.noise * spec.peak,
        gaps: gaps.clone(),
        tip_boost: spec.tip_boost,
        seed: spec.seed ^ 0x05ee_d0ff_1e1d,
    };
    let field = synth_tree_volume(&truth, &params)?;
    Ok(Phantom { truth, field, gaps })
}
