//! End-to-end skeletonization and the file-level commands built on it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{EpsilonMode, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{self, MatchReport, RegionLabelVolume, RegionReport, RegionSource};
use crate::forest::{build_forest, RootSet};
use crate::graph_simplify::{
    diffuse_vectors, estimate_flow_vectors, local_flow, prune_paths, remove_boundary_arcs,
};
use crate::morse::{build_gradient_forest, morse_graph_from, MorseConfig, MorseGraph};
use crate::persistence::{build_filtration, compute_persistence, format_diagram};
use crate::phantom::{make_phantom, PhantomSpec};
use crate::tree::{self, swc, SkeletonForest, SkeletonTree};
use crate::volume::{downsample_sum, gaussian_filter, vtk, DensityField};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub trees: Vec<SkeletonTree>,
    pub graph: MorseGraph,
    /// Graph vertices unreachable from every root.
    pub dropped: usize,
    pub epsilon: f64,
    /// Stage summaries (no timings, so logs are reproducible).
    pub log: Vec<String>,
}

/// Downsample and smooth; rejects volumes without positive density.
pub fn preprocess(field: &DensityField, cfg: &PipelineConfig) -> Result<DensityField> {
    if !(field.max() > 0.0) {
        return Err(Error::NoSignal);
    }
    let mut f = if cfg.preprocess.downsample != [1, 1, 1] {
        downsample_sum(field, cfg.preprocess.downsample)?
    } else {
        field.clone()
    };
    if cfg.preprocess.gaussian_radius > 0 {
        f = gaussian_filter(&f, cfg.preprocess.gaussian_radius);
    }
    if !(f.max() > 0.0) {
        return Err(Error::NoSignal);
    }
    Ok(f)
}

pub fn resolve_epsilon(field: &DensityField, cfg: &PipelineConfig) -> f64 {
    match cfg.persistence.epsilon_mode {
        EpsilonMode::Absolute => cfg.persistence.epsilon,
        EpsilonMode::RangeFraction => {
            cfg.persistence.epsilon * (field.max() as f64 - field.min() as f64)
        }
    }
}

/// Morse graph after optional boundary cleanup and path pruning.
pub fn skeleton_graph(
    field: &DensityField,
    cfg: &PipelineConfig,
    log: &mut Vec<String>,
) -> Result<(MorseGraph, f64)> {
    let epsilon = resolve_epsilon(field, cfg);
    let morse_cfg = MorseConfig {
        epsilon,
        include_positive: cfg.persistence.include_positive,
        include_essential: cfg.persistence.include_essential,
    };
    let filt = build_filtration(field).map_err(|e| e.in_stage("persistence"))?;
    let pairing = compute_persistence(&filt);
    log.push(format!(
        "persistence: {} cells, {} vertex-edge pairs, {} edge-square pairs, {} essential",
        filt.len(),
        pairing.vertex_edge_pairs().len(),
        pairing.edge_square_pairs().len(),
        pairing.essential().len()
    ));
    let forest =
        build_gradient_forest(&filt, &pairing, epsilon).map_err(|e| e.in_stage("morse"))?;
    let mut graph = morse_graph_from(field, &filt, &pairing, &forest, &morse_cfg)
        .map_err(|e| e.in_stage("morse"))?;
    drop(pairing);
    drop(filt);
    log.push(format!(
        "morse: epsilon {epsilon}, {} sinks, {} vertices, {} edges",
        forest.sinks().len(),
        graph.vertex_count(),
        graph.edge_count()
    ));
    if cfg.graph.boundary_clean {
        graph = remove_boundary_arcs(&graph, field, cfg.graph.boundary_distance)
            .map_err(|e| e.in_stage("graph"))?;
        log.push(format!(
            "boundary cleanup: {} vertices, {} edges",
            graph.vertex_count(),
            graph.edge_count()
        ));
    }
    if cfg.graph.prune_vectors {
        let flow = estimate_flow_vectors(
            &graph,
            field,
            cfg.graph.nbhd_radius,
            cfg.graph.diffusion_sigma,
        )
        .map_err(|e| e.in_stage("graph"))?;
        let out = prune_paths(&graph, &flow, &cfg.graph.prune).map_err(|e| e.in_stage("graph"))?;
        log.push(format!(
            "path pruning: removed {} of {} arcs",
            out.removed.len(),
            out.scores.len()
        ));
        graph = out.graph;
    }
    if graph.is_empty() {
        return Err(
            Error::structure("the Morse graph is empty; try a lower epsilon").in_stage("morse"),
        );
    }
    Ok((graph, epsilon))
}

/// Root set from the configuration, or the brightest vertex when none is
/// given (ties to the lower voxel index).
pub fn resolve_roots(graph: &MorseGraph, cfg: &PipelineConfig) -> Result<RootSet> {
    if cfg.forest.roots.is_empty() {
        let best = (0..graph.vertex_count())
            .max_by(|&a, &b| {
                graph
                    .density(a)
                    .total_cmp(&graph.density(b))
                    .then(b.cmp(&a))
            })
            .ok_or_else(|| Error::structure("graph has no vertices"))?;
        RootSet::from_vertices(graph, vec![best])
    } else {
        RootSet::snap(graph, &cfg.forest.roots, cfg.forest.snap_radius)
    }
}

/// Flow vectors at tree nodes, diffused along tree edges.
fn tree_flow(
    tree: &SkeletonTree,
    field: &DensityField,
    cfg: &PipelineConfig,
) -> Vec<Option<[f64; 3]>> {
    let grid = field.grid();
    let raw: Vec<Option<[f64; 3]>> = tree
        .positions()
        .iter()
        .map(|&p| {
            grid.nearest_voxel(p)
                .and_then(|v| local_flow(field, grid.linear(v), cfg.graph.nbhd_radius))
        })
        .collect();
    let adj: Vec<Vec<usize>> = (0..tree.len())
        .map(|i| {
            tree.parent(i)
                .into_iter()
                .chain(tree.children(i).iter().copied())
                .collect()
        })
        .collect();
    diffuse_vectors(&raw, &adj, cfg.graph.diffusion_sigma)
}

/// Score, simplify and summarise one tree.
pub fn process_tree(
    mut t: SkeletonTree,
    field: &DensityField,
    cfg: &PipelineConfig,
) -> Result<SkeletonTree> {
    let sc = &cfg.tree;
    let density = tree::density_scores(&t, field, sc.beta);
    let vector = if sc.alpha < 1.0 {
        let flow = tree_flow(&t, field, cfg);
        tree::tree_vector_scores(&t, &flow, cfg.graph.prune.hop)
    } else {
        vec![0.0; t.len()]
    };
    tree::weighted_scores(&mut t, &density, &vector, sc.alpha)?;
    tree::smooth_scores(&mut t, sc.hops)?;
    let threshold = tree::resolve_threshold(&t, sc.tau, sc.threshold_mode);
    let mut s = tree::simplify(&t, sc.strategy, threshold);
    if cfg.output.top_k > 0 {
        s = tree::top_k_branches(&s, cfg.output.top_k)?;
    }
    tree::assign_weights(&mut s, field, sc.beta_w)?;
    tree::assign_thickness(
        &mut s,
        field,
        sc.zeta,
        sc.thickness_c,
        cfg.output.foreground,
    )?;
    Ok(s)
}

/// Run every stage on an in-memory volume.
pub fn run_pipeline(field: &DensityField, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mut log = Vec::new();
    let f = preprocess(field, cfg).map_err(|e| match e {
        Error::NoSignal => e,
        other => other.in_stage("preprocess"),
    })?;
    log.push(format!(
        "preprocess: dims {:?}, spacing {:?}, range [{}, {}]",
        f.dims(),
        f.spacing(),
        f.min(),
        f.max()
    ));
    let (graph, epsilon) = skeleton_graph(&f, cfg, &mut log)?;
    let roots = resolve_roots(&graph, cfg).map_err(|e| e.in_stage("forest"))?;
    let SkeletonForest { trees, dropped } =
        build_forest(&graph, &roots, cfg.forest.method).map_err(|e| e.in_stage("forest"))?;
    log.push(format!(
        "forest: {} roots, {} nodes, {} unreachable",
        roots.len(),
        trees.iter().map(SkeletonTree::len).sum::<usize>(),
        dropped
    ));
    let trees = trees
        .into_iter()
        .map(|t| process_tree(t, &f, cfg))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("tree"))?;
    for (i, t) in trees.iter().enumerate() {
        let w: f64 = t.nodes().iter().map(|n| n.weight).sum();
        log.push(format!(
            "tree {i}: {} nodes, {} leaves, cable length {}, total weight {}",
            t.len(),
            t.leaves().len(),
            t.cable_length(),
            w
        ));
    }
    Ok(PipelineOutput {
        trees,
        graph,
        dropped,
        epsilon,
        log,
    })
}

/// Paths written by [`cmd_skeletonize`].
#[derive(Debug, Clone)]
pub struct SkeletonizeOutputs {
    pub swc: PathBuf,
    pub weights: PathBuf,
    pub config: PathBuf,
    pub log: PathBuf,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Read the configured input, run, and write SWC, weights, the resolved
/// config and the run log into the output directory.
pub fn cmd_skeletonize(cfg: &PipelineConfig) -> Result<SkeletonizeOutputs> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input volume given".into()))?;
    let out_dir = cfg
        .output_dir
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    let field = vtk::read_vtk(input).map_err(|e| e.in_stage("read"))?;
    let run = run_pipeline(&field, cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outputs = SkeletonizeOutputs {
        swc: out_dir.join("skeleton.swc"),
        weights: out_dir.join("weights.txt"),
        config: out_dir.join("config.toml"),
        log: out_dir.join("run.log"),
    };
    write(&outputs.swc, swc::format_swc(&run.trees))?;
    write(&outputs.weights, swc::format_weights(&run.trees))?;
    write(&outputs.config, cfg.to_toml())?;
    let mut log = String::new();
    for line in &run.log {
        let _ = writeln!(log, "{line}");
    }
    write(&outputs.log, log)?;
    if cfg.output.export_graph {
        run.graph.write_text(
            &out_dir.join("graph_vertices.txt"),
            &out_dir.join("graph_edges.txt"),
        )?;
    }
    Ok(outputs)
}

/// Compare two SWC files at each bound after discretising both at `unit`.
pub fn cmd_evaluate(
    predicted: &Path,
    truth: &Path,
    bounds: &[f64],
    unit: f64,
) -> Result<Vec<MatchReport>> {
    let p = swc::read_swc(predicted)?;
    let t = swc::read_swc(truth)?;
    let pp = eval::discretize(&p, unit)?;
    let tp = eval::discretize(&t, unit)?;
    let reports = eval::f1_vs_bound_sweep(&pp, &tp, bounds)?;
    if reports
        .iter()
        .any(|r| r.precision.is_nan() || r.recall.is_nan() || r.f1.is_nan())
    {
        return Err(Error::structure("a metric evaluated to NaN"));
    }
    Ok(reports)
}

/// Region report for a weighted skeleton or a volume, with coverage against
/// an optional reference volume.
pub fn cmd_region_report(
    source: &Path,
    weights: Option<&Path>,
    labels: &Path,
    reference: Option<&Path>,
) -> Result<(RegionReport, Option<eval::Coverage>)> {
    let labels: RegionLabelVolume = eval::read_labels(labels)?;
    let report = if source
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("swc"))
    {
        let trees = match weights {
            Some(w) => swc::read_weighted_swc(source, w)?,
            None => swc::read_swc(source)?,
        };
        eval::region_report(RegionSource::Trees(&trees), &labels)?
    } else {
        let f = vtk::read_vtk(source)?;
        eval::region_report(RegionSource::Field(&f), &labels)?
    };
    let cov = match reference {
        Some(r) => {
            let f = vtk::read_vtk(r)?;
            let reference = eval::region_report(RegionSource::Field(&f), &labels)?;
            Some(eval::coverage(&reference, &report)?)
        }
        None => None,
    };
    Ok((report, cov))
}

/// Persistence diagram text for a volume after preprocessing.
pub fn cmd_persistence_diagram(
    input: &Path,
    cfg: &PipelineConfig,
    min_persistence: f64,
) -> Result<String> {
    let field = vtk::read_vtk(input)?;
    let f = preprocess(&field, cfg)?;
    let filt = build_filtration(&f)?;
    let pairing = compute_persistence(&filt);
    Ok(format_diagram(&filt, &pairing, min_persistence))
}

/// Files written by [`cmd_synth`].
#[derive(Debug, Clone)]
pub struct SynthOutputs {
    pub volume: PathBuf,
    pub truth: PathBuf,
}

/// Render a phantom from a TOML spec (the seed argument, when given,
/// overrides the spec's) into `phantom.vtk` and `truth.swc`.
pub fn cmd_synth(spec_toml: &str, seed: Option<u64>, out_dir: &Path) -> Result<SynthOutputs> {
    let mut spec: PhantomSpec =
        toml::from_str(spec_toml).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let p = make_phantom(&spec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outputs = SynthOutputs {
        volume: out_dir.join("phantom.vtk"),
        truth: out_dir.join("truth.swc"),
    };
    vtk::write_vtk(&p.field, &outputs.volume)?;
    swc::write_swc(std::slice::from_ref(&p.truth), &outputs.truth)?;
    Ok(outputs)
}

/// Root coordinates, one `x y z` (or `x,y,z`) triple per line; blank lines
/// and `#` comments are skipped.
pub fn parse_roots(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_triple(line).map_err(|m| Error::parse(i + 1, m))?);
    }
    Ok(out)
}

/// `x,y,z` or `x y z` as three finite numbers.
pub fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if parts.len() != 3 {
        return Err(format!("expected three coordinates, got `{s}`"));
    }
    let mut v = [0.0f64; 3];
    for (k, t) in parts.iter().enumerate() {
        v[k] = t.parse().map_err(|_| format!("bad coordinate `{t}`"))?;
        if !v[k].is_finite() {
            return Err(format!("coordinate `{t}` is not finite"));
        }
    }
    Ok(v)
}
