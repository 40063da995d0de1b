use super::{Filtration, NO_RANK};
use crate::error::{Error, Result};
use crate::persistence::CellId;

/// A persistence pair. `persistence` is the density drop from birth to death.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub birth: CellId,
    pub death: CellId,
    pub persistence: f64,
}

/// What a cell is matched with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partner {
    Cell(CellId),
    Essential,
}

/// All persistence pairs of a filtration plus per-cell lookup.
#[derive(Debug, Clone)]
pub struct PersistencePairing {
    vertex_edge: Vec<Pair>,
    edge_square: Vec<Pair>,
    essential: Vec<CellId>,
    /// Rank of the partner cell, `ESSENTIAL`, or `NO_RANK` for ids outside
    /// the complex. Indexed by cell id.
    partner: Vec<u32>,
    order: Vec<CellId>,
    values: Vec<f32>,
    complex: super::CubicalComplex,
}

const ESSENTIAL: u32 = NO_RANK - 1;

impl PersistencePairing {
    pub fn vertex_edge_pairs(&self) -> &[Pair] {
        &self.vertex_edge
    }

    pub fn edge_square_pairs(&self) -> &[Pair] {
        &self.edge_square
    }

    /// Essential cells, in filtration order.
    pub fn essential(&self) -> &[CellId] {
        &self.essential
    }

    pub fn partner(&self, c: CellId) -> Option<Partner> {
        match *self.partner.get(c.index())? {
            NO_RANK => None,
            ESSENTIAL => Some(Partner::Essential),
            r => Some(Partner::Cell(self.order[r as usize])),
        }
    }

    /// Persistence of the pair containing `c`; `+inf` for essential cells.
    pub fn persistence_of(&self, c: CellId) -> Result<f64> {
        match self.partner(c) {
            None => Err(Error::Lookup(format!("cell {} is not in the complex", c.0))),
            Some(Partner::Essential) => Ok(f64::INFINITY),
            Some(Partner::Cell(p)) => Ok((self.value(c) as f64 - self.value(p) as f64).abs()),
        }
    }

    /// An edge is negative when it kills a component (paired with a vertex).
    pub fn is_negative_edge(&self, e: CellId) -> bool {
        e.dim() == 1 && matches!(self.partner(e), Some(Partner::Cell(p)) if p.dim() == 0)
    }

    fn value(&self, c: CellId) -> f32 {
        self.complex
            .vertices(c)
            .map(|v| self.values[v])
            .fold(f32::INFINITY, f32::min)
    }

    pub fn complex(&self) -> &super::CubicalComplex {
        &self.complex
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }
}

/// Vertex-edge pairs by a union-find sweep. Returns the pairs, the essential
/// vertices, and the positive (cycle-creating) edges in filtration order.
pub fn zero_dim_pairs(filt: &Filtration) -> (Vec<Pair>, Vec<CellId>, Vec<CellId>) {
    let cx = filt.complex();
    let n = cx.vertex_count();
    let mut uf = UnionFind {
        parent: (0..n as u32).collect(),
    };
    // Oldest vertex of each component, indexed by its root.
    let mut creator: Vec<u32> = (0..n as u32).collect();
    let mut pairs = Vec::new();
    let mut positive = Vec::new();
    for &c in filt.order() {
        if c.dim() != 1 {
            continue;
        }
        let [a, b] = cx.edge_vertices(c);
        let (ra, rb) = (uf.find(a as u32), uf.find(b as u32));
        if ra == rb {
            positive.push(c);
            continue;
        }
        let (ca, cb) = (creator[ra as usize], creator[rb as usize]);
        let rank_of = |v: u32| filt.rank_unchecked(CellId::vertex(v as usize));
        let (young, old) = if rank_of(ca) > rank_of(cb) {
            (ca, cb)
        } else {
            (cb, ca)
        };
        let young_cell = CellId::vertex(young as usize);
        pairs.push(Pair {
            birth: young_cell,
            death: c,
            persistence: filt.vertex_value(young as usize) as f64 - filt.value(c) as f64,
        });
        uf.parent[ra as usize] = rb;
        creator[rb as usize] = old;
    }
    let mut essential: Vec<CellId> = (0..n as u32)
        .filter(|&v| uf.find(v) == v)
        .map(|v| CellId::vertex(creator[v as usize] as usize))
        .collect();
    essential.sort_by_key(|&c| filt.rank_unchecked(c));
    (pairs, essential, positive)
}

/// Edge-square pairs from the positive edges by reducing coboundary columns
/// in reverse filtration order. Negative edges never carry a 1-class, so
/// their columns are skipped. Returns the pairs and the essential edges and
/// squares.
pub fn one_dim_pairs(filt: &Filtration, positive_edges: &[CellId]) -> (Vec<Pair>, Vec<CellId>) {
    let cx = filt.complex();
    // Column index owning each square rank as its pivot.
    let mut pivot_owner: Vec<u32> = vec![NO_RANK; filt.len()];
    let mut columns: Vec<Vec<u32>> = Vec::new();
    let mut pairs = Vec::new();
    let mut essential = Vec::new();
    let mut cof = Vec::with_capacity(4);
    let mut col: Vec<u32> = Vec::new();
    let mut scratch: Vec<u32> = Vec::new();
    for &e in positive_edges.iter().rev() {
        cx.edge_cofaces(e, &mut cof);
        col.clear();
        col.extend(cof.iter().map(|&s| filt.rank_unchecked(s)));
        col.sort_unstable();
        loop {
            let Some(&pivot) = col.first() else {
                essential.push(e);
                break;
            };
            match pivot_owner[pivot as usize] {
                j if j != NO_RANK => {
                    symmetric_difference(&col, &columns[j as usize], &mut scratch);
                    std::mem::swap(&mut col, &mut scratch);
                }
                _ => {
                    let s = filt.order()[pivot as usize];
                    pairs.push(Pair {
                        birth: e,
                        death: s,
                        persistence: filt.value(e) as f64 - filt.value(s) as f64,
                    });
                    pivot_owner[pivot as usize] = columns.len() as u32;
                    columns.push(col.clone());
                    break;
                }
            }
        }
    }
    // Squares never used as a pivot create 2-classes that never die.
    for &c in filt.order() {
        if c.dim() == 2 && pivot_owner[filt.rank_unchecked(c) as usize] == NO_RANK {
            essential.push(c);
        }
    }
    essential.sort_by_key(|&c| filt.rank_unchecked(c));
    pairs.sort_by_key(|p| filt.rank_unchecked(p.birth));
    (pairs, essential)
}

fn symmetric_difference(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Full pairing of the filtration.
pub fn compute_persistence(filt: &Filtration) -> PersistencePairing {
    let (vertex_edge, ess0, positive) = zero_dim_pairs(filt);
    let (edge_square, ess12) = one_dim_pairs(filt, &positive);
    let mut partner = vec![NO_RANK; filt.complex().id_space()];
    for p in vertex_edge.iter().chain(&edge_square) {
        partner[p.birth.index()] = filt.rank_unchecked(p.death);
        partner[p.death.index()] = filt.rank_unchecked(p.birth);
    }
    let mut essential = ess0;
    essential.extend(ess12);
    essential.sort_by_key(|&c| filt.rank_unchecked(c));
    for c in &essential {
        partner[c.index()] = ESSENTIAL;
    }
    PersistencePairing {
        vertex_edge,
        edge_square,
        essential,
        partner,
        order: filt.order().to_vec(),
        values: filt.vertex_values().to_vec(),
        complex: *filt.complex(),
    }
}
