use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmskel::config::{EpsilonMode, Mode, PipelineConfig};
use dmskel::eval;
use dmskel::forest::ForestMethod;
use dmskel::pipeline::{self, parse_triple};
use dmskel::tree::{Strategy, ThresholdMode};
use dmskel::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dmskel",
    version,
    about = "Skeletonize 3D density volumes into rooted trees"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DMSKEL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a VTK volume.
    Skeletonize(SkeletonizeArgs),
    /// Compare a predicted SWC against a ground-truth SWC.
    Evaluate(EvaluateArgs),
    /// Per-region weight summary of a skeleton or volume.
    RegionReport(RegionArgs),
    /// Render a synthetic phantom and its ground-truth skeleton.
    Synth(SynthArgs),
    /// Print the persistence diagram of a volume.
    PersistenceDiagram(DiagramArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    gaussian_radius: Option<usize>,
    /// Block-sum factors, e.g. `2,2,1`.
    #[arg(long, value_parser = parse_factors)]
    downsample: Option<[usize; 3]>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?,
            None => String::new(),
        };
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(m) = self.mode {
            table.insert(
                "mode".into(),
                toml::Value::try_from(m).expect("mode serialises"),
            );
        }
        let mut cfg =
            PipelineConfig::from_toml_str(&toml::to_string(&table).expect("table serialises"))?;
        if let Some(r) = self.gaussian_radius {
            cfg.preprocess.gaussian_radius = r;
        }
        if let Some(d) = self.downsample {
            cfg.preprocess.downsample = d;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SkeletonizeArgs {
    /// Input volume (legacy VTK structured points).
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    base: ConfigArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    epsilon_mode: Option<EpsilonMode>,
    /// Drop positive edges from the critical set.
    #[arg(long)]
    no_positive_edges: bool,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    threshold_mode: Option<ThresholdMode>,
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Score smoothing window (hops).
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta_w: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    thickness_c: Option<f64>,
    /// Root position `x,y,z` in physical units; repeatable.
    #[arg(long = "root", value_parser = parse_point)]
    roots: Vec<[f64; 3]>,
    #[arg(long)]
    roots_file: Option<PathBuf>,
    #[arg(long)]
    snap_radius: Option<f64>,
    #[arg(long, value_enum)]
    forest_method: Option<ForestMethod>,
    #[arg(long)]
    prune_vectors: bool,
    #[arg(long)]
    vector_threshold: Option<f64>,
    #[arg(long)]
    nbhd_radius: Option<usize>,
    #[arg(long)]
    boundary_clean: bool,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    export_graph: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl SkeletonizeArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = self.base.resolve()?;
        macro_rules! set {
            ($field:expr, $v:expr) => {
                if let Some(v) = $v {
                    $field = v;
                }
            };
        }
        set!(c.input, self.input.clone().map(Some));
        set!(c.output_dir, self.output_dir.clone().map(Some));
        set!(c.persistence.epsilon, self.epsilon);
        set!(c.persistence.epsilon_mode, self.epsilon_mode);
        set!(c.tree.tau, self.tau);
        set!(c.tree.threshold_mode, self.threshold_mode);
        set!(c.tree.strategy, self.strategy);
        set!(c.tree.alpha, self.alpha);
        set!(c.tree.hops, self.hops);
        set!(c.tree.beta, self.beta);
        set!(c.tree.beta_w, self.beta_w);
        set!(c.tree.zeta, self.zeta);
        set!(c.tree.thickness_c, self.thickness_c);
        set!(c.forest.snap_radius, self.snap_radius);
        set!(c.forest.method, self.forest_method);
        set!(c.graph.prune.threshold, self.vector_threshold);
        set!(c.graph.nbhd_radius, self.nbhd_radius);
        set!(c.output.top_k, self.top_k);
        set!(c.seed, self.seed);
        if self.no_positive_edges {
            c.persistence.include_positive = false;
        }
        if self.prune_vectors {
            c.graph.prune_vectors = true;
        }
        if self.boundary_clean {
            c.graph.boundary_clean = true;
        }
        if self.export_graph {
            c.output.export_graph = true;
        }
        if !self.roots.is_empty() || self.roots_file.is_some() {
            let mut roots = self.roots.clone();
            if let Some(f) = &self.roots_file {
                let text = std::fs::read_to_string(f).map_err(|e| Error::Io {
                    path: f.clone(),
                    source: e,
                })?;
                roots.extend(pipeline::parse_roots(&text)?);
            }
            c.forest.roots = roots;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    predicted: PathBuf,
    truth: PathBuf,
    /// Match distance(s) in physical units; repeat for a sweep.
    #[arg(long = "bound", default_values_t = [4.0])]
    bounds: Vec<f64>,
    /// Maximum spacing of discretized edge points.
    #[arg(long, default_value_t = 1.0)]
    unit: f64,
    /// Also write a tab-separated report.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    /// Skeleton (`.swc`) or volume (`.vtk`).
    source: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Weight sidecar for an SWC source.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Reference volume for coverage.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Phantom spec (TOML); defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct DiagramArgs {
    input: PathBuf,
    #[command(flatten)]
    base: ConfigArgs,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Skip finite pairs with persistence at or below this; negative keeps all.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    min_persistence: f64,
}

fn parse_point(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_triple(s)
}

fn parse_factors(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad factor `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|_| "expected three factors".to_string())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Print without panicking when the reader goes away (`| head`).
fn stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Skeletonize(a) => {
            let cfg = a.resolve()?;
            let out = pipeline::cmd_skeletonize(&cfg)?;
            println!("wrote {}", out.swc.display());
        }
        Command::Evaluate(a) => {
            let reports = pipeline::cmd_evaluate(&a.predicted, &a.truth, &a.bounds, a.unit)?;
            stdout(&eval::format_match_reports(&reports));
            if let Some(p) = &a.tsv {
                write_file(p, &eval::format_match_tsv(&reports))?;
            }
        }
        Command::RegionReport(a) => {
            let (report, cov) = pipeline::cmd_region_report(
                &a.source,
                a.weights.as_deref(),
                &a.labels,
                a.reference.as_deref(),
            )?;
            stdout(&eval::format_region_report(&report, cov.as_ref()));
            if let Some(p) = &a.tsv {
                write_file(p, &eval::format_region_tsv(&report))?;
            }
        }
        Command::Synth(a) => {
            let text = match &a.spec {
                Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?,
                None => String::new(),
            };
            let out = pipeline::cmd_synth(&text, a.seed, &a.output_dir)?;
            println!("wrote {} and {}", out.volume.display(), out.truth.display());
        }
        Command::PersistenceDiagram(a) => {
            let cfg = a.base.resolve()?;
            let text = pipeline::cmd_persistence_diagram(&a.input, &cfg, a.min_persistence)?;
            match &a.output {
                Some(p) => write_file(p, &text)?,
                None => stdout(&text),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
