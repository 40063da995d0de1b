//! Regular 3D grids carrying a non-negative scalar density.
//!
//! Voxel `(i, j, k)` has linear index `i + nx * (j + ny * k)` (x fastest, the
//! VTK point order) and sits at physical position `origin + (i*sx, j*sy, k*sz)`.

mod filter;
mod synth;
pub mod vtk;

pub use filter::{downsample_sum, gaussian_filter, gaussian_kernel};
pub use synth::{synth_tree_volume, Gap, SynthParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Address of a grid vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }
}

/// Shape and placement of a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!(
                "grid dims must be positive, got {dims:?}"
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!(
                "grid spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid(format!(
                "grid origin must be finite, got {origin:?}"
            )));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("grid too large"))?;
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit spacing, zero origin.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, v: VoxelIndex) -> bool {
        v.i < self.dims[0] && v.j < self.dims[1] && v.k < self.dims[2]
    }

    #[inline]
    pub fn linear(&self, v: VoxelIndex) -> usize {
        debug_assert!(self.contains(v));
        v.i + self.dims[0] * (v.j + self.dims[1] * v.k)
    }

    #[inline]
    pub fn voxel(&self, lin: usize) -> VoxelIndex {
        let [nx, ny, _] = self.dims;
        VoxelIndex {
            i: lin % nx,
            j: (lin / nx) % ny,
            k: lin / (nx * ny),
        }
    }

    #[inline]
    pub fn position(&self, v: VoxelIndex) -> [f64; 3] {
        [
            self.origin[0] + v.i as f64 * self.spacing[0],
            self.origin[1] + v.j as f64 * self.spacing[1],
            self.origin[2] + v.k as f64 * self.spacing[2],
        ]
    }

    #[inline]
    pub fn position_of(&self, lin: usize) -> [f64; 3] {
        self.position(self.voxel(lin))
    }

    /// Continuous voxel coordinates of a physical point.
    pub fn to_voxel_coords(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Nearest voxel to a physical point, if the point rounds into the grid.
    pub fn nearest_voxel(&self, p: [f64; 3]) -> Option<VoxelIndex> {
        let c = self.to_voxel_coords(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = c[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            out[a] = r as usize;
        }
        Some(VoxelIndex::new(out[0], out[1], out[2]))
    }

    /// Face-adjacent neighbours of a voxel, in the fixed order
    /// -x, +x, -y, +y, -z, +z.
    pub fn neighbors(&self, lin: usize) -> impl Iterator<Item = usize> + '_ {
        let v = self.voxel(lin);
        let [nx, ny, nz] = self.dims;
        let sx = 1;
        let sy = nx;
        let sz = nx * ny;
        [
            (v.i > 0).then(|| lin - sx),
            (v.i + 1 < nx).then(|| lin + sx),
            (v.j > 0).then(|| lin - sy),
            (v.j + 1 < ny).then(|| lin + sy),
            (v.k > 0).then(|| lin - sz),
            (v.k + 1 < nz).then(|| lin + sz),
        ]
        .into_iter()
        .flatten()
    }
}

/// A scalar density sampled at the vertices of a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f32>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f32>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::structure(format!(
                "expected {} values for dims {:?}, got {}",
                grid.len(),
                grid.dims,
                values.len()
            )));
        }
        if let Some((idx, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::structure(format!(
                "density must be finite and non-negative; value {v} at index {idx}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Field of zeros.
    pub fn zeros(grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(VoxelIndex) -> f32) -> Result<Self> {
        let values = (0..grid.len()).map(|lin| f(grid.voxel(lin))).collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    #[inline]
    pub fn origin(&self) -> [f64; 3] {
        self.grid.origin
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, lin: usize) -> f32 {
        self.values[lin]
    }

    #[inline]
    pub fn get(&self, v: VoxelIndex) -> f32 {
        self.values[self.grid.linear(v)]
    }

    /// Sum of all values, accumulated in f64 in linear order.
    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::unit([0, 2, 2]).is_err());
        assert!(Grid::new([2, 2, 2], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        let g = Grid::unit([2, 2, 2]).unwrap();
        assert!(matches!(
            DensityField::new(g, vec![0.0; 7]),
            Err(Error::Structure(_))
        ));
        assert!(DensityField::new(g, vec![-1.0; 8]).is_err());
        assert!(DensityField::new(g, vec![f32::NAN; 8]).is_err());
    }

    #[test]
    fn neighbor_order_is_fixed() {
        let g = Grid::unit([3, 3, 3]).unwrap();
        let c = g.linear(VoxelIndex::new(1, 1, 1));
        let n: Vec<_> = g.neighbors(c).collect();
        assert_eq!(n, vec![c - 1, c + 1, c - 3, c + 3, c - 9, c + 9]);
        assert_eq!(g.neighbors(0).count(), 3);
    }

    proptest! {
        #[test]
        fn index_round_trip(nx in 1usize..9, ny in 1usize..9, nz in 1usize..9,
                            sx in 0.1f64..20.0, ox in -50.0f64..50.0, seed in 0usize..10_000) {
            let g = Grid::new([nx, ny, nz], [sx, 1.0, 2.5], [ox, 0.0, -1.0]).unwrap();
            let lin = seed % g.len();
            let v = g.voxel(lin);
            prop_assert!(g.contains(v));
            prop_assert_eq!(g.linear(v), lin);
            let p = g.position(v);
            prop_assert_eq!(g.nearest_voxel(p), Some(v));
        }
    }
}
