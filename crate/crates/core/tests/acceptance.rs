//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL`/`SKIP` line;
//! the process exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use dmskel::config::{EpsilonMode, Mode, PipelineConfig};
use dmskel::eval::{self, discretize, f1_vs_bound_sweep, match_metrics};
use dmskel::forest::{assign_roots, ForestMethod, RootSet};
use dmskel::morse::{extract_morse_graph, MorseConfig};
use dmskel::persistence::{build_filtration, compute_persistence};
use dmskel::phantom::{make_phantom, PhantomShape, PhantomSpec};
use dmskel::pipeline::{parse_roots, run_pipeline};
use dmskel::tree::{assign_weights, leaf_burner, root_grower, smooth_scores, swc, weighted_scores};
use dmskel::volume::{vtk, DensityField, Grid};

// Pinned tolerances and thresholds.
const PERSISTENCE_FIELDS: usize = 200;
const PERSISTENCE_MAX_SIDE: usize = 6;
const PERSISTENCE_BUDGET: Duration = Duration::from_secs(60);
const FOREST_GRAPHS: usize = 100;
const FOREST_MAX_NODES: usize = 200;
const WEIGHT_FIXTURES: usize = 50;
const WEIGHT_REL_TOL: f64 = 1e-9;
const GAP_SEEDS: u64 = 100;
const GAP_VOXELS: f64 = 3.0;
const GAP_NOISE: f64 = 0.05;
const GAP_MIN_PASS: usize = 95;
/// A side of the gap is "reached" when a graph vertex lies this close (voxels)
/// to the centreline point 2 voxels beyond the gap edge.
const GAP_SIDE_RADIUS: f64 = 2.0;
/// Fixed persistence threshold, as a fraction of the value range, for the
/// noisy fixtures. At the absolute default (256) 5% noise on a 65535 peak
/// survives and the graph fills the background, so the gap check is also
/// run at a threshold that removes the noise.
const NOISY_EPSILON_FRACTION: f64 = 0.2;
const E2E_SEEDS: u64 = 100;
const E2E_BOUND: f64 = 2.0;
const E2E_MIN_F1: f64 = 0.95;
const E2E_MIN_PASS: usize = 90;
const E2E_TIME_BUDGET: Duration = Duration::from_secs(5);
const TAUS: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
const TAU_MAX_SPREAD: f64 = 0.05;
const NEST_TREES: u64 = 100;
const METRIC_PAIRS: u64 = 50;
const REFERENCE_TOL: f64 = 0.03;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

fn pass(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: Some(ok),
        detail: detail.into(),
    }
}

fn persistence_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut r = common::rng(0xa11ce);
    let mut mismatches = 0;
    for i in 0..PERSISTENCE_FIELDS {
        // Alternate integer (tied) and float (tie-free) fields.
        let f = common::random_field(&mut r, PERSISTENCE_MAX_SIDE, i % 2 == 0);
        let filt = build_filtration(&f).unwrap();
        let pairing = compute_persistence(&filt);
        if common::library_pairs(f.grid(), &pairing) != common::naive_pairs(f.dims(), f.values()) {
            mismatches += 1;
        }
    }
    let el = t0.elapsed();
    pass(
        mismatches == 0 && el < PERSISTENCE_BUDGET,
        format!("{mismatches} mismatches over {PERSISTENCE_FIELDS} fields in {:.1?} (budget {PERSISTENCE_BUDGET:?})", el),
    )
}

fn forest_oracle() -> Outcome {
    let mut r = common::rng(0xf0e57);
    let mut bad = 0;
    let mut vertices = 0;
    for _ in 0..FOREST_GRAPHS {
        let g = common::random_graph(&mut r, FOREST_MAX_NODES);
        let k = r.random_range(1..=4).min(g.vertex_count());
        let mut all: Vec<usize> = (0..g.vertex_count()).collect();
        all.shuffle(&mut r);
        let roots = RootSet::from_vertices(&g, all[..k].to_vec()).unwrap();
        let a = assign_roots(&g, &roots, ForestMethod::ShortestPath);
        let per_root: Vec<Vec<f64>> = roots
            .vertices()
            .iter()
            .map(|&s| common::dijkstra(&g, s))
            .collect();
        for v in 0..g.vertex_count() {
            vertices += 1;
            let mut best: Option<(f64, usize)> = None;
            for (ri, d) in per_root.iter().enumerate() {
                if d[v].is_finite() && best.is_none_or(|(bd, _)| d[v] < bd) {
                    best = Some((d[v], ri));
                }
            }
            let ok = match best {
                None => a.root[v].is_none(),
                Some((d, ri)) => a.root[v] == Some(ri) && a.distance[v] == d,
            };
            if !ok {
                bad += 1;
            }
        }
    }
    pass(
        bad == 0,
        format!("{bad} of {vertices} vertices differ from per-root oracles"),
    )
}

fn weight_conservation() -> Outcome {
    let mut r = common::rng(0x3e16);
    let mut worst: f64 = 0.0;
    for _ in 0..WEIGHT_FIXTURES {
        let dims = [
            r.random_range(4..24),
            r.random_range(4..24),
            r.random_range(2..16),
        ];
        let g = Grid::new(dims, [1.0, 1.0, r.random_range(1.0..3.0)], [0.0; 3]).unwrap();
        let f = DensityField::from_fn(g, |_| {
            if r.random_bool(0.4) {
                0.0
            } else {
                r.random_range(0.0f32..1000.0)
            }
        })
        .unwrap();
        let n = r.random_range(1..40);
        let mut t = common::random_tree(&mut r, n, 3.0);
        let shift = [0, 1, 2].map(|k| r.random_range(0.0..dims[k] as f64));
        let pos: Vec<[f64; 3]> = t
            .positions()
            .iter()
            .map(|p| [0, 1, 2].map(|k| p[k] + shift[k]))
            .collect();
        for (node, p) in t.nodes_mut().iter_mut().zip(pos) {
            node.position = p;
        }
        let bw = r.random_range(0.5..12.0);
        assign_weights(&mut t, &f, bw).unwrap();
        let got: f64 = t.nodes().iter().map(|n| n.weight).sum();
        // Mass of voxels within bw of any node.
        let grid = f.grid();
        let want: f64 = (0..grid.len())
            .filter(|&l| {
                let x = grid.position_of(l);
                t.positions()
                    .iter()
                    .any(|p| (0..3).map(|k| (x[k] - p[k]) * (x[k] - p[k])).sum::<f64>() < bw * bw)
            })
            .map(|l| f.at(l) as f64)
            .sum();
        let rel = if want == 0.0 {
            got.abs()
        } else {
            (got - want).abs() / want
        };
        worst = worst.max(rel);
    }
    pass(worst <= WEIGHT_REL_TOL, format!("worst relative error {worst:.3e} over {WEIGHT_FIXTURES} fixtures (tol {WEIGHT_REL_TOL:e})"))
}

/// Does the Morse graph at `epsilon` form one component with vertices near
/// both `near` and `far`? Also returns the vertex count.
fn bridges(field: &DensityField, epsilon: f64, near: [f64; 3], far: [f64; 3]) -> (bool, usize) {
    let cfg = MorseConfig {
        epsilon,
        ..MorseConfig::default()
    };
    let g = extract_morse_graph(field, &cfg).unwrap();
    let (_, count) = g.components();
    let reaches = |p: [f64; 3]| {
        (0..g.vertex_count()).any(|v| dmskel::geom::dist(g.position(v), p) <= GAP_SIDE_RADIUS)
    };
    (
        count == 1 && reaches(near) && reaches(far),
        g.vertex_count(),
    )
}

fn gap_bridging() -> Outcome {
    let (mut good, mut good_default, mut good_fixed) = (0, 0, 0);
    let (mut size_default, mut size_fixed) = (Vec::new(), Vec::new());
    for seed in 0..GAP_SEEDS {
        let spec = PhantomSpec {
            shape: PhantomShape::Y,
            gap: GAP_VOXELS,
            noise: GAP_NOISE,
            seed,
            ..PhantomSpec::default()
        };
        let p = make_phantom(&spec).unwrap();
        let gap = p.gaps[0];
        let a = p.truth.position(p.truth.parent(gap.arc).unwrap());
        let b = p.truth.position(gap.arc);
        let len = dmskel::geom::dist(a, b);
        let at = |t: f64| [0, 1, 2].map(|k| a[k] + t * (b[k] - a[k]));
        let near = at(gap.start - 2.0 / len);
        let far = at(gap.start + gap.length + 2.0 / len);
        let (d, nd) = bridges(&p.field, MorseConfig::default().epsilon, near, far);
        let range = (p.field.max() - p.field.min()) as f64;
        let (f, nf) = bridges(&p.field, NOISY_EPSILON_FRACTION * range, near, far);
        size_default.push(nd);
        size_fixed.push(nf);
        good_default += d as usize;
        good_fixed += f as usize;
        good += (d && f) as usize;
    }
    size_default.sort();
    size_fixed.sort();
    pass(
        good >= GAP_MIN_PASS,
        format!(
            "{good}/{GAP_SEEDS} gapped noisy Y volumes give one component reaching both sides at both thresholds \
             (need {GAP_MIN_PASS}); default eps {good_default} (median {} vertices), \
             eps {NOISY_EPSILON_FRACTION}*range {good_fixed} (median {} vertices)",
            size_default[size_default.len() / 2],
            size_fixed[size_fixed.len() / 2]
        ),
    )
}

fn run_and_score(p: &dmskel::phantom::Phantom, cfg: &PipelineConfig, bound: f64) -> f64 {
    let out = run_pipeline(&p.field, cfg).unwrap();
    let pred = discretize(&out.trees, 1.0).unwrap();
    let truth = discretize(std::slice::from_ref(&p.truth), 1.0).unwrap();
    match_metrics(&pred, &truth, bound).unwrap().f1
}

fn end_to_end() -> Outcome {
    let mut good = 0;
    let mut slowest = Duration::ZERO;
    let mut worst = f64::INFINITY;
    for seed in 0..E2E_SEEDS {
        let shape = if seed % 2 == 0 {
            PhantomShape::Tube
        } else {
            PhantomShape::Y
        };
        let p = make_phantom(&PhantomSpec {
            shape,
            seed,
            ..PhantomSpec::default()
        })
        .unwrap();
        let mut cfg = PipelineConfig::preset(Mode::SingleNeuron);
        cfg.forest.roots = vec![p.root()];
        let t0 = Instant::now();
        let f1 = run_and_score(&p, &cfg, E2E_BOUND);
        slowest = slowest.max(t0.elapsed());
        worst = worst.min(f1);
        if f1 >= E2E_MIN_F1 {
            good += 1;
        }
    }
    pass(
        good >= E2E_MIN_PASS && slowest < E2E_TIME_BUDGET,
        format!(
            "{good}/{E2E_SEEDS} 64^3 phantoms with F1 >= {E2E_MIN_F1} at bound {E2E_BOUND} (need {E2E_MIN_PASS}); min F1 {worst:.3}; slowest run {slowest:.2?} (budget {E2E_TIME_BUDGET:?})"
        ),
    )
}

fn tau_stability() -> Outcome {
    let p = make_phantom(&PhantomSpec {
        shape: PhantomShape::Y,
        noise: 0.05,
        seed: 12,
        ..PhantomSpec::default()
    })
    .unwrap();
    let f1s: Vec<f64> = TAUS
        .iter()
        .map(|&tau| {
            let mut cfg = PipelineConfig::default();
            cfg.forest.roots = vec![p.root()];
            cfg.persistence.epsilon_mode = EpsilonMode::RangeFraction;
            cfg.persistence.epsilon = NOISY_EPSILON_FRACTION;
            cfg.tree.tau = tau;
            run_and_score(&p, &cfg, E2E_BOUND)
        })
        .collect();
    let spread = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - f1s.iter().cloned().fold(f64::INFINITY, f64::min);
    let list: Vec<String> = f1s.iter().map(|f| format!("{f:.3}")).collect();
    pass(
        spread < TAU_MAX_SPREAD,
        format!(
            "F1 over tau {TAUS:?} at eps {NOISY_EPSILON_FRACTION}*range = [{}], spread {spread:.4} (< {TAU_MAX_SPREAD})",
            list.join(", ")
        ),
    )
}

fn nestedness() -> Outcome {
    let mut violations = 0;
    let taus: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    for seed in 0..NEST_TREES {
        let mut r = common::rng(0x7e57 + seed);
        let n = r.random_range(1..150);
        let mut t = common::random_tree(&mut r, n, 2.0);
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let vec_s: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        weighted_scores(&mut t, &raw, &vec_s, 0.9).unwrap();
        smooth_scores(&mut t, r.random_range(0..4)).unwrap();
        for simplify in [leaf_burner, root_grower] {
            let sets: Vec<_> = taus
                .iter()
                .map(|&x| common::position_set(&simplify(&t, x)))
                .collect();
            violations += sets.windows(2).filter(|w| !w[1].is_subset(&w[0])).count();
        }
    }
    pass(
        violations == 0,
        format!(
            "{violations} violations over {NEST_TREES} trees x 2 strategies x {} thresholds",
            taus.len()
        ),
    )
}

fn metric_sanity() -> Outcome {
    let mut asym = 0;
    let mut non_monotone = 0;
    let bounds: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
    for seed in 0..METRIC_PAIRS {
        let mut r = common::rng(0x3e7 + seed);
        let (na, nb) = (r.random_range(2..30), r.random_range(2..30));
        let a = common::random_tree(&mut r, na, 3.0);
        let b = common::random_tree(&mut r, nb, 3.0);
        let pa = discretize(std::slice::from_ref(&a), 1.0).unwrap();
        let pb = discretize(std::slice::from_ref(&b), 1.0).unwrap();
        let ab = f1_vs_bound_sweep(&pa, &pb, &bounds).unwrap();
        let ba = f1_vs_bound_sweep(&pb, &pa, &bounds).unwrap();
        asym += ab
            .iter()
            .zip(&ba)
            .filter(|(x, y)| x.precision != y.recall || x.recall != y.precision)
            .count();
        non_monotone += ab.windows(2).filter(|w| w[1].f1 < w[0].f1).count();
    }
    pass(
        asym == 0 && non_monotone == 0,
        format!("{asym} precision/recall asymmetries, {non_monotone} F1 decreases over {METRIC_PAIRS} pairs x {} bounds", bounds.len()),
    )
}

fn determinism() -> Outcome {
    let run_with = |threads: usize, f: &DensityField, cfg: &PipelineConfig| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let out = run_pipeline(f, cfg).unwrap();
            (
                swc::format_swc(&out.trees),
                swc::format_weights(&out.trees),
                out.log,
            )
        })
    };
    let mut fixtures = Vec::new();
    for seed in 0..6u64 {
        let shape = if seed % 2 == 0 {
            PhantomShape::Tube
        } else {
            PhantomShape::Y
        };
        let noise = if seed < 3 { 0.0 } else { 0.05 };
        let gap = if seed == 5 { GAP_VOXELS } else { 0.0 };
        let p = make_phantom(&PhantomSpec {
            shape,
            noise,
            gap,
            seed,
            ..PhantomSpec::default()
        })
        .unwrap();
        let mode = if seed == 4 {
            Mode::Tracer
        } else {
            Mode::SingleNeuron
        };
        let mut cfg = PipelineConfig::preset(mode);
        cfg.forest.roots = vec![p.root()];
        if seed == 3 {
            cfg.graph.prune_vectors = true;
            cfg.tree.alpha = 0.5;
        }
        fixtures.push((p.field, cfg));
    }
    let mut differ = 0;
    for (f, cfg) in &fixtures {
        if run_with(1, f, cfg) != run_with(8, f, cfg) {
            differ += 1;
        }
    }
    // Persistence pairings on the oracle fields.
    let mut r = common::rng(0xa11ce);
    for i in 0..40 {
        let f = common::random_field(&mut r, PERSISTENCE_MAX_SIDE, i % 2 == 0);
        let diag = |n: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap();
            pool.install(|| {
                let filt = build_filtration(&f).unwrap();
                dmskel::persistence::format_diagram(&filt, &compute_persistence(&filt), -1.0)
            })
        };
        if diag(1) != diag(8) {
            differ += 1;
        }
    }
    pass(
        differ == 0,
        format!(
            "{differ} of {} fixtures differ between 1 and 8 threads",
            fixtures.len() + 40
        ),
    )
}

/// Opt-in: a directory with `volume.vtk`, `truth.swc`, `roots.txt` and
/// optionally `expected.toml` holding `precision`, `recall`, `f1`.
fn real_data_reproduction() -> Outcome {
    let Some(dir) = std::env::var_os("DMSKEL_NEURON1_DIR").map(PathBuf::from) else {
        return Outcome {
            pass: None,
            detail: "set DMSKEL_NEURON1_DIR to a downloaded single-neuron region to run".into(),
        };
    };
    let field = vtk::read_vtk(dir.join("volume.vtk")).unwrap();
    let truth = swc::read_swc(dir.join("truth.swc")).unwrap();
    let roots = parse_roots(&std::fs::read_to_string(dir.join("roots.txt")).unwrap()).unwrap();
    let expected: toml::Table = std::fs::read_to_string(dir.join("expected.toml"))
        .map(|s| s.parse().unwrap())
        .unwrap_or_else(|_| {
            "precision = 0.900\nrecall = 0.940\nf1 = 0.920"
                .parse()
                .unwrap()
        });
    let mut cfg = PipelineConfig::preset(Mode::SingleNeuron);
    cfg.forest.roots = roots;
    let out = run_pipeline(&field, &cfg).unwrap();
    let pred = discretize(&out.trees, 1.0).unwrap();
    let t = discretize(&truth, 1.0).unwrap();
    let m = eval::match_metrics(&pred, &t, 4.0).unwrap();
    let want = |k: &str| expected[k].as_float().unwrap();
    let ok = (m.precision - want("precision")).abs() <= REFERENCE_TOL
        && (m.recall - want("recall")).abs() <= REFERENCE_TOL
        && (m.f1 - want("f1")).abs() <= REFERENCE_TOL;
    pass(
        ok,
        format!(
            "P/R/F1 = {:.3}/{:.3}/{:.3} (tol {REFERENCE_TOL})",
            m.precision, m.recall, m.f1
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("persistence oracle equivalence", persistence_oracle),
        ("shortest-path forest exactness", forest_oracle),
        ("weight conservation", weight_conservation),
        ("gap bridging", gap_bridging),
        ("end-to-end synthetic accuracy", end_to_end),
        ("threshold stability", tau_stability),
        ("simplification nestedness", nestedness),
        ("metric sanity", metric_sanity),
        ("determinism across thread counts", determinism),
        ("real-data reproduction (opt-in)", real_data_reproduction),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let o = f();
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("{tag} {name}: {} [{:.1?}]", o.detail, t0.elapsed());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
