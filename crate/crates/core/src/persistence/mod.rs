//! Superlevel-set persistence of a density on the 2-skeleton of its cubical
//! grid.
//!
//! A cell's value is the minimum density over its vertices. Cells enter the
//! filtration by decreasing value; ties go to lower dimension, then lower
//! anchor index, then orientation. This order is a total order in which
//! every face precedes its cofaces.

mod cells;
mod pairs;

use std::fmt::Write as _;

use rayon::prelude::*;

pub use cells::{plane_axes, Cell, CellId, CubicalComplex};
pub use pairs::{
    compute_persistence, one_dim_pairs, zero_dim_pairs, Pair, Partner, PersistencePairing,
};

use crate::error::{Error, Result};
use crate::volume::{DensityField, Grid};

pub(crate) const NO_RANK: u32 = u32::MAX;

/// Filtration order of every valid cell.
#[derive(Debug, Clone)]
pub struct Filtration {
    grid: Grid,
    complex: CubicalComplex,
    values: Vec<f32>,
    order: Vec<CellId>,
    rank: Vec<u32>,
}

#[inline]
fn value_key(v: f32) -> u32 {
    // `+ 0.0` folds -0.0 into +0.0; values are non-negative so bit order is
    // numeric order, and negation gives descending order.
    !(v + 0.0).to_bits()
}

/// Build the filtration of `-density`.
pub fn build_filtration(field: &DensityField) -> Result<Filtration> {
    let grid = *field.grid();
    let complex = CubicalComplex::new(&grid);
    if complex.id_space() >= u64::MAX as usize / 2 || complex.cell_count() >= NO_RANK as usize {
        return Err(Error::invalid("volume too large for the filtration index"));
    }
    let values = field.values().to_vec();
    let n = complex.vertex_count();
    let mut keys: Vec<u128> = (0..n)
        .into_par_iter()
        .flat_map_iter(|lin| {
            let values = &values;
            (0..cells::KINDS)
                .map(move |k| CellId(lin as u64 * cells::KINDS + k))
                .filter(|&c| complex.is_valid(c))
                .map(move |c| {
                    let f = complex
                        .vertices(c)
                        .map(|v| values[v])
                        .fold(f32::INFINITY, f32::min);
                    ((value_key(f) as u128) << 96)
                        | ((c.dim() as u128) << 88)
                        | ((lin as u128) << 8)
                        | c.orientation() as u128
                })
        })
        .collect();
    keys.par_sort_unstable();

    let order: Vec<CellId> = keys
        .par_iter()
        .map(|&k| {
            let lin = ((k >> 8) & ((1u128 << 80) - 1)) as usize;
            let dim = ((k >> 88) & 0xff) as u8;
            let o = (k & 0xff) as u8;
            match dim {
                0 => CellId::vertex(lin),
                1 => CellId::edge(lin, o),
                _ => CellId::square(lin, o),
            }
        })
        .collect();
    drop(keys);
    let mut rank = vec![NO_RANK; complex.id_space()];
    for (r, c) in order.iter().enumerate() {
        rank[c.index()] = r as u32;
    }
    Ok(Filtration {
        grid,
        complex,
        values,
        order,
        rank,
    })
}

impl Filtration {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn complex(&self) -> &CubicalComplex {
        &self.complex
    }

    /// Cells in filtration order.
    pub fn order(&self) -> &[CellId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Position of a cell in the filtration; `None` for ids outside the grid.
    #[inline]
    pub fn rank(&self, c: CellId) -> Option<u32> {
        self.rank.get(c.index()).copied().filter(|&r| r != NO_RANK)
    }

    #[inline]
    pub(crate) fn rank_unchecked(&self, c: CellId) -> u32 {
        self.rank[c.index()]
    }

    /// Filtration value (minimum vertex density).
    #[inline]
    pub fn value(&self, c: CellId) -> f32 {
        self.complex
            .vertices(c)
            .map(|v| self.values[v])
            .fold(f32::INFINITY, f32::min)
    }

    #[inline]
    pub fn vertex_value(&self, lin: usize) -> f32 {
        self.values[lin]
    }

    pub fn vertex_values(&self) -> &[f32] {
        &self.values
    }
}

/// Text dump of a persistence diagram: one `dim birth death` line per pair
/// with persistence above `min_persistence` (pass a negative value to keep
/// zero-length pairs), and `inf` for essential classes. Birth and death are
/// density values.
pub fn format_diagram(
    filtration: &Filtration,
    pairing: &PersistencePairing,
    min_persistence: f64,
) -> String {
    let mut out = String::from("# dim birth death\n");
    for p in pairing
        .vertex_edge_pairs()
        .iter()
        .chain(pairing.edge_square_pairs())
    {
        if !(p.persistence > min_persistence) {
            continue;
        }
        let _ = writeln!(
            out,
            "{} {} {}",
            p.birth.dim(),
            filtration.value(p.birth),
            filtration.value(p.death)
        );
    }
    for &c in pairing.essential() {
        let _ = writeln!(out, "{} {} inf", c.dim(), filtration.value(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(dims: [usize; 3], v: Vec<f32>) -> DensityField {
        DensityField::new(Grid::unit(dims).unwrap(), v).unwrap()
    }

    #[test]
    fn faces_precede_cofaces() {
        let f = field([3, 3, 2], (0..18).map(|i| ((i * 7) % 5) as f32).collect());
        let filt = build_filtration(&f).unwrap();
        let cx = filt.complex();
        for &c in filt.order() {
            let r = filt.rank(c).unwrap();
            match c.dim() {
                1 => {
                    for v in cx.edge_vertices(c) {
                        assert!(filt.rank(CellId::vertex(v)).unwrap() < r);
                    }
                }
                2 => {
                    for e in cx.square_edges(c) {
                        assert!(filt.rank(e).unwrap() < r);
                    }
                }
                _ => {}
            }
        }
    }

    #[test]
    fn ties_broken_by_dim_then_anchor() {
        let f = field([2, 2, 1], vec![1.0; 4]);
        let filt = build_filtration(&f).unwrap();
        let dims: Vec<u8> = filt.order().iter().map(|c| c.dim()).collect();
        assert_eq!(dims, vec![0, 0, 0, 0, 1, 1, 1, 1, 2]);
        let anchors: Vec<usize> = filt.order()[..4].iter().map(|c| c.anchor()).collect();
        assert_eq!(anchors, vec![0, 1, 2, 3]);
    }

    #[test]
    fn negative_zero_sorts_with_zero() {
        let f = field([3, 1, 1], vec![-0.0, 1.0, 0.0]);
        let filt = build_filtration(&f).unwrap();
        let v: Vec<usize> = filt
            .order()
            .iter()
            .filter(|c| c.dim() == 0)
            .map(|c| c.anchor())
            .collect();
        assert_eq!(v, vec![1, 0, 2]);
    }

    proptest! {
        #[test]
        fn order_is_sorted_by_descending_value(vals in proptest::collection::vec(0u8..6, 24)) {
            let f = field([4, 3, 2], vals.iter().map(|&v| v as f32).collect());
            let filt = build_filtration(&f).unwrap();
            prop_assert_eq!(filt.len(), filt.complex().cell_count());
            for w in filt.order().windows(2) {
                prop_assert!(filt.value(w[0]) >= filt.value(w[1]));
            }
        }
    }
}
