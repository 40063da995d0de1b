use rayon::prelude::*;

use super::{DensityField, Grid};
use crate::error::{Error, Result};

/// Normalized 1D Gaussian taps for offsets `-radius..=radius`, with
/// `sigma = radius / 2`. Radius 0 yields the single tap `[1.0]`.
pub fn gaussian_kernel(radius: usize) -> Vec<f64> {
    if radius == 0 {
        return vec![1.0];
    }
    let sigma = radius as f64 / 2.0;
    let r = radius as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Whole-sample mirror: `... c b | a b c ... | b a ...`.
#[inline]
fn mirror(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m < n as i64 {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let n = dims[axis];
    (0..src.len())
        .into_par_iter()
        .map(|lin| {
            let pos = (lin / stride) % n;
            let base = lin - pos * stride;
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let q = mirror(pos as i64 + t as i64 - r, n);
                acc += w * src[base + q * stride];
            }
            acc
        })
        .collect()
}

/// Separable Gaussian smoothing in voxel units, truncated at `±kernel_radius`.
pub fn gaussian_filter(field: &DensityField, kernel_radius: usize) -> DensityField {
    if kernel_radius == 0 {
        return field.clone();
    }
    let taps = gaussian_kernel(kernel_radius);
    let dims = field.dims();
    let mut buf: Vec<f64> = field.values().iter().map(|&v| v as f64).collect();
    for axis in 0..3 {
        if dims[axis] > 1 {
            buf = convolve_axis(&buf, dims, axis, &taps);
        }
    }
    let values = buf.into_iter().map(|v| v.max(0.0) as f32).collect();
    DensityField::new(*field.grid(), values).expect("smoothing preserves shape and sign")
}

/// Block-sum downsampling. Trailing partial blocks are summed as they are,
/// so total mass is preserved. Output voxels sit at block centres.
pub fn downsample_sum(field: &DensityField, factors: [usize; 3]) -> Result<DensityField> {
    if factors.contains(&0) {
        return Err(Error::invalid(format!(
            "downsample factors must be positive, got {factors:?}"
        )));
    }
    if factors == [1, 1, 1] {
        return Ok(field.clone());
    }
    let g = field.grid();
    let out_dims = [0, 1, 2].map(|a| g.dims[a].div_ceil(factors[a]));
    let spacing = [0, 1, 2].map(|a| g.spacing[a] * factors[a] as f64);
    let origin = [0, 1, 2].map(|a| g.origin[a] + (factors[a] as f64 - 1.0) / 2.0 * g.spacing[a]);
    let out_grid = Grid::new(out_dims, spacing, origin)?;
    let src = field.values();
    let values: Vec<f32> = (0..out_grid.len())
        .into_par_iter()
        .map(|lin| {
            let o = out_grid.voxel(lin);
            let lo = [o.i * factors[0], o.j * factors[1], o.k * factors[2]];
            let hi = [0, 1, 2].map(|a| (lo[a] + factors[a]).min(g.dims[a]));
            let mut acc = 0.0f64;
            for k in lo[2]..hi[2] {
                for j in lo[1]..hi[1] {
                    let row = g.dims[0] * (j + g.dims[1] * k);
                    for i in lo[0]..hi[0] {
                        acc += src[row + i] as f64;
                    }
                }
            }
            acc as f32
        })
        .collect();
    DensityField::new(out_grid, values)
}
