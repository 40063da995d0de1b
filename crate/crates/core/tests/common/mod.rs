//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dmskel::morse::MorseGraph;
use dmskel::persistence::{CubicalComplex, PersistencePairing};
use dmskel::tree::SkeletonTree;
use dmskel::volume::{DensityField, Grid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A cell described by its dimension and sorted corner coordinates.
pub type Shape = (usize, Vec<[usize; 3]>);

struct OracleCell {
    shape: Shape,
    value: f32,
    /// (anchor linear index, kind) with kinds 0 vertex, 1..3 edges along
    /// x/y/z, 4..6 squares in the xy/xz/yz planes.
    anchor: usize,
    kind: u8,
    faces: Vec<usize>,
}

fn lin(d: [usize; 3], p: [usize; 3]) -> usize {
    p[0] + d[0] * (p[1] + d[1] * p[2])
}

fn add(p: [usize; 3], a: usize) -> [usize; 3] {
    let mut q = p;
    q[a] += 1;
    q
}

/// Enumerate the 2-skeleton, sort it by the documented total order and run
/// the textbook column reduction over Z/2 on the full boundary matrix.
/// Returns finite pairs as (birth, death) shapes and essential shapes.
pub fn naive_pairs(
    dims: [usize; 3],
    values: &[f32],
) -> (BTreeSet<(Shape, Shape)>, BTreeSet<Shape>) {
    let val = |p: [usize; 3]| values[lin(dims, p)];
    let mut cells: Vec<OracleCell> = Vec::new();
    let inside = |p: [usize; 3]| (0..3).all(|a| p[a] < dims[a]);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x, y, z];
                let l = lin(dims, p);
                cells.push(OracleCell {
                    shape: (0, vec![p]),
                    value: val(p),
                    anchor: l,
                    kind: 0,
                    faces: vec![],
                });
                for a in 0..3 {
                    let q = add(p, a);
                    if inside(q) {
                        let mut v = vec![p, q];
                        v.sort();
                        cells.push(OracleCell {
                            shape: (1, v),
                            value: val(p).min(val(q)),
                            anchor: l,
                            kind: 1 + a as u8,
                            faces: vec![],
                        });
                    }
                }
                for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
                    let (q, r, s) = (add(p, a), add(p, b), add(add(p, a), b));
                    if inside(s) {
                        let mut v = vec![p, q, r, s];
                        v.sort();
                        let m = [p, q, r, s]
                            .iter()
                            .map(|&c| val(c))
                            .fold(f32::INFINITY, f32::min);
                        cells.push(OracleCell {
                            shape: (2, v),
                            value: m,
                            anchor: l,
                            kind: 4 + k as u8,
                            faces: vec![],
                        });
                    }
                }
            }
        }
    }
    cells.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.shape.0.cmp(&b.shape.0))
            .then(a.anchor.cmp(&b.anchor))
            .then(a.kind.cmp(&b.kind))
    });
    // Faces: cells of one dimension lower whose corners are a subset.
    let index: std::collections::HashMap<Shape, usize> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.shape.clone(), i))
        .collect();
    for i in 0..cells.len() {
        let (d, v) = cells[i].shape.clone();
        let faces: Vec<usize> = match d {
            0 => vec![],
            1 => v.iter().map(|&p| index[&(0, vec![p])]).collect(),
            _ => {
                let mut f = Vec::new();
                for x in 0..4 {
                    for y in x + 1..4 {
                        let diff = (0..3).filter(|&a| v[x][a] != v[y][a]).count();
                        if diff == 1 {
                            f.push(index[&(1, vec![v[x], v[y]])]);
                        }
                    }
                }
                assert_eq!(f.len(), 4);
                f
            }
        };
        cells[i].faces = faces;
    }
    let n = cells.len();
    let words = n.div_ceil(64);
    let mut cols: Vec<Vec<u64>> = cells
        .iter()
        .map(|c| {
            let mut b = vec![0u64; words];
            for &f in &c.faces {
                b[f / 64] ^= 1 << (f % 64);
            }
            b
        })
        .collect();
    let low = |b: &[u64]| -> Option<usize> {
        (0..b.len())
            .rev()
            .find(|&w| b[w] != 0)
            .map(|w| w * 64 + 63 - b[w].leading_zeros() as usize)
    };
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut pairs = BTreeSet::new();
    let mut paired = vec![false; n];
    for j in 0..n {
        while let Some(l) = low(&cols[j]) {
            match owner[l] {
                Some(k) => {
                    let other = cols[k].clone();
                    for (a, b) in cols[j].iter_mut().zip(&other) {
                        *a ^= b;
                    }
                }
                None => {
                    owner[l] = Some(j);
                    paired[l] = true;
                    paired[j] = true;
                    pairs.insert((cells[l].shape.clone(), cells[j].shape.clone()));
                    break;
                }
            }
        }
    }
    let essential = (0..n)
        .filter(|&i| !paired[i])
        .map(|i| cells[i].shape.clone())
        .collect();
    (pairs, essential)
}

pub fn shape_of(cx: &CubicalComplex, grid: &Grid, c: dmskel::persistence::CellId) -> Shape {
    let mut v: Vec<[usize; 3]> = cx.vertices(c).map(|l| grid.voxel(l).as_array()).collect();
    v.sort();
    (c.dim() as usize, v)
}

/// Library pairing in the oracle's representation.
pub fn library_pairs(
    grid: &Grid,
    pairing: &PersistencePairing,
) -> (BTreeSet<(Shape, Shape)>, BTreeSet<Shape>) {
    let cx = pairing.complex();
    let pairs = pairing
        .vertex_edge_pairs()
        .iter()
        .chain(pairing.edge_square_pairs())
        .map(|p| (shape_of(cx, grid, p.birth), shape_of(cx, grid, p.death)))
        .collect();
    let ess = pairing
        .essential()
        .iter()
        .map(|&c| shape_of(cx, grid, c))
        .collect();
    (pairs, ess)
}

/// Random field of up to `max`³ voxels; integer-valued fields have many ties.
pub fn random_field(r: &mut ChaCha8Rng, max: usize, integer: bool) -> DensityField {
    let dims = [
        r.random_range(1..=max),
        r.random_range(1..=max),
        r.random_range(1..=max),
    ];
    let grid = Grid::unit(dims).unwrap();
    let vals = (0..grid.len())
        .map(|_| {
            if integer {
                r.random_range(0..4) as f32
            } else {
                r.random_range(0.0f32..100.0)
            }
        })
        .collect();
    DensityField::new(grid, vals).unwrap()
}

/// Independent O(n²) single-source shortest paths with the edge cost
/// `2 d / (rho_u + rho_v)`.
pub fn dijkstra(graph: &MorseGraph, source: usize) -> Vec<f64> {
    let n = graph.vertex_count();
    let mut d = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    d[source] = 0.0;
    loop {
        let mut best = None;
        for v in 0..n {
            if !done[v] && d[v].is_finite() && best.is_none_or(|b: usize| d[v] < d[b]) {
                best = Some(v);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        for v in graph.neighbors(u) {
            let (p, q) = (graph.position(u), graph.position(v));
            let len =
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            let s = graph.density(u) as f64 + graph.density(v) as f64;
            if s <= 0.0 {
                continue;
            }
            let nd = d[u] + 2.0 * len / s;
            if nd < d[v] {
                d[v] = nd;
            }
        }
    }
    d
}

/// Random spatial graph: vertices are random voxels of a 16³ grid linked to
/// their nearest neighbours, plus a few long chords. Densities may be zero.
pub fn random_graph(r: &mut ChaCha8Rng, max_nodes: usize) -> MorseGraph {
    let grid = Grid::new([16, 16, 16], [1.0, 1.0, 2.0], [0.0; 3]).unwrap();
    let vals: Vec<f32> = (0..grid.len())
        .map(|_| {
            if r.random_bool(0.05) {
                0.0
            } else {
                r.random_range(1.0f32..1000.0)
            }
        })
        .collect();
    let field = DensityField::new(grid, vals).unwrap();
    let n = r.random_range(2..=max_nodes);
    let mut voxels: Vec<usize> = Vec::new();
    while voxels.len() < n {
        let v = r.random_range(0..grid.len());
        if !voxels.contains(&v) {
            voxels.push(v);
        }
    }
    let pos: Vec<[f64; 3]> = voxels.iter().map(|&v| grid.position_of(v)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            let da: f64 = (0..3).map(|k| (pos[a][k] - pos[i][k]).powi(2)).sum();
            let db: f64 = (0..3).map(|k| (pos[b][k] - pos[i][k]).powi(2)).sum();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let k = r.random_range(1..=3).min(order.len());
        for &j in &order[..k] {
            edges.push((voxels[i], voxels[j]));
        }
        if r.random_bool(0.03) {
            edges.push((voxels[i], voxels[r.random_range(0..n)]));
        }
    }
    MorseGraph::from_voxel_edges(&field, edges).unwrap()
}

/// Brute-force Voronoi sums over voxels accepted by `take` (which returns
/// the voxel's contribution): each voxel goes to its nearest node by squared
/// distance, ties to the lower node index, if within `cap` (`<=` when
/// `inclusive`, else `<`).
pub fn voronoi_sums(
    positions: &[[f64; 3]],
    field: &DensityField,
    cap: f64,
    inclusive: bool,
    mut take: impl FnMut(f32) -> Option<f64>,
) -> (Vec<f64>, f64) {
    let grid = field.grid();
    let mut sums = vec![0.0; positions.len()];
    let mut total = 0.0;
    for l in 0..grid.len() {
        let Some(v) = take(field.at(l)) else { continue };
        let x = grid.position_of(l);
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in positions.iter().enumerate() {
            let d2: f64 = (0..3).map(|k| (x[k] - p[k]) * (x[k] - p[k])).sum();
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, i));
            }
        }
        if let Some((d2, i)) = best {
            let ok = if inclusive {
                d2 <= cap * cap
            } else {
                d2 < cap * cap
            };
            if ok {
                sums[i] += v;
                total += v;
            }
        }
    }
    (sums, total)
}

/// Random tree with `n` nodes: each node attaches to a random earlier node.
pub fn random_tree(r: &mut ChaCha8Rng, n: usize, spread: f64) -> SkeletonTree {
    let mut pos = vec![[0.0; 3]; n];
    let mut parents = vec![None; n];
    for i in 1..n {
        let p = r.random_range(0..i);
        parents[i] = Some(p);
        pos[i] = [0, 1, 2].map(|k| pos[p][k] + r.random_range(-spread..spread));
    }
    SkeletonTree::from_parents(&pos, &parents).unwrap()
}

/// Node positions of a tree as a set of bit patterns (for subset checks).
pub fn position_set(t: &SkeletonTree) -> BTreeSet<[u64; 3]> {
    t.positions().iter().map(|p| p.map(f64::to_bits)).collect()
}
