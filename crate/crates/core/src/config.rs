//! Pipeline configuration: two mode presets plus TOML overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestMethod;
use crate::graph_simplify::PruneConfig;
use crate::tree::{SimplificationConfig, Strategy, ThresholdMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Sparse single-neuron imaging: no smoothing, RootGrower.
    #[default]
    SingleNeuron,
    /// Dense tracer injections: Gaussian smoothing, boundary cleanup,
    /// LeafBurner.
    Tracer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonMode {
    /// Epsilon is in density units.
    #[default]
    Absolute,
    /// Epsilon is a fraction of `max - min` of the preprocessed density.
    RangeFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Gaussian filter radius in voxels (0 = off).
    pub gaussian_radius: usize,
    /// Block-sum downsampling factors per axis.
    pub downsample: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceConfig {
    pub epsilon: f64,
    pub epsilon_mode: EpsilonMode,
    pub include_positive: bool,
    pub include_essential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub boundary_clean: bool,
    /// Arcs farther than this (voxels) from any non-zero voxel are removed.
    pub boundary_distance: f64,
    pub prune_vectors: bool,
    pub prune: PruneConfig,
    /// Flow-vector neighbourhood half-width (voxels).
    pub nbhd_radius: usize,
    /// Flow diffusion width (graph hops).
    pub diffusion_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub method: ForestMethod,
    /// Root positions in physical units. Empty: the brightest graph vertex.
    pub roots: Vec<[f64; 3]>,
    /// Snap radius in voxels.
    pub snap_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Keep only the k longest branches (0 = all).
    pub top_k: usize,
    /// Density above which a voxel counts toward thickness.
    pub foreground: f32,
    /// Also write the Morse graph as vertex/edge tables.
    pub export_graph: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Echoed into the resolved config; the pipeline itself draws no random numbers.
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub persistence: PersistenceConfig,
    pub graph: GraphConfig,
    pub forest: ForestConfig,
    pub tree: SimplificationConfig,
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn preset(mode: Mode) -> Self {
        let tracer = mode == Mode::Tracer;
        Self {
            mode,
            input: None,
            output_dir: None,
            seed: 0,
            preprocess: PreprocessConfig {
                gaussian_radius: if tracer { 2 } else { 0 },
                downsample: [1, 1, 1],
            },
            persistence: PersistenceConfig {
                epsilon: 256.0,
                epsilon_mode: EpsilonMode::Absolute,
                include_positive: true,
                include_essential: true,
            },
            graph: GraphConfig {
                boundary_clean: tracer,
                boundary_distance: 2.0,
                prune_vectors: false,
                prune: PruneConfig::default(),
                nbhd_radius: 5,
                diffusion_sigma: 2.0,
            },
            forest: ForestConfig {
                method: ForestMethod::ShortestPath,
                roots: Vec::new(),
                snap_radius: 5.0,
            },
            tree: SimplificationConfig {
                strategy: if tracer {
                    Strategy::LeafBurner
                } else {
                    Strategy::RootGrower
                },
                tau: 0.2,
                threshold_mode: ThresholdMode::Relative,
                beta: if tracer { 50.0 } else { 1.0 },
                ..SimplificationConfig::default()
            },
            output: OutputConfig {
                top_k: 0,
                foreground: 0.0,
                export_graph: false,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.persistence.epsilon >= 0.0 && self.persistence.epsilon.is_finite()) {
            return Err(Error::Config(
                "persistence.epsilon must be a finite value >= 0".into(),
            ));
        }
        if self.preprocess.downsample.contains(&0) {
            return Err(Error::Config(
                "preprocess.downsample factors must be >= 1".into(),
            ));
        }
        if !(self.graph.boundary_distance >= 0.0) {
            return Err(Error::Config("graph.boundary_distance must be >= 0".into()));
        }
        if self.graph.nbhd_radius == 0 {
            return Err(Error::Config("graph.nbhd_radius must be >= 1".into()));
        }
        if !(self.graph.diffusion_sigma >= 0.0) {
            return Err(Error::Config("graph.diffusion_sigma must be >= 0".into()));
        }
        let p = &self.graph.prune;
        if !(p.threshold >= 0.0 && p.alpha >= 0.0 && p.intensity_cap > 0.0) {
            return Err(Error::Config("graph.prune values out of range".into()));
        }
        if !(self.forest.snap_radius >= 0.0) {
            return Err(Error::Config("forest.snap_radius must be >= 0".into()));
        }
        if self.forest.roots.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("forest.roots must be finite".into()));
        }
        self.tree.validate()
    }

    /// Parse TOML: the `mode` key (default single-neuron) selects the preset
    /// and every other key overrides it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mode = match user.get("mode") {
            None => Mode::default(),
            Some(v) => {
                Mode::deserialize(v.clone()).map_err(|e| Error::Config(format!("mode: {e}")))?
            }
        };
        let base =
            toml::Table::try_from(Self::preset(mode)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(base, user);
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Fully resolved TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::preset(Mode::default())
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_differ_where_expected() {
        let s = PipelineConfig::preset(Mode::SingleNeuron);
        let t = PipelineConfig::preset(Mode::Tracer);
        assert_eq!(s.persistence.epsilon, 256.0);
        assert_eq!(s.tree.tau, 0.2);
        assert_eq!(s.tree.strategy, Strategy::RootGrower);
        assert_eq!(t.tree.strategy, Strategy::LeafBurner);
        assert_eq!((s.tree.beta, t.tree.beta), (1.0, 50.0));
        assert!(t.graph.boundary_clean && !s.graph.boundary_clean);
        assert_eq!(t.preprocess.gaussian_radius, 2);
    }

    #[test]
    fn overrides_merge_into_preset() {
        let c = PipelineConfig::from_toml_str(
            "mode = \"tracer\"\n[persistence]\nepsilon = 10.0\n[tree]\ntau = 0.3\n",
        )
        .unwrap();
        assert_eq!(c.mode, Mode::Tracer);
        assert_eq!(c.persistence.epsilon, 10.0);
        assert_eq!(c.tree.tau, 0.3);
        assert_eq!(c.tree.strategy, Strategy::LeafBurner);
        assert_eq!(c.graph.nbhd_radius, 5);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = PipelineConfig::preset(Mode::Tracer);
        c.forest.roots = vec![[1.0, 2.0, 3.5]];
        c.input = Some("in.vtk".into());
        let back = PipelineConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(
            PipelineConfig::from_toml_str("[tree]\nalpha = 2.0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_toml_str("[persistence]\nbogus = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(PipelineConfig::from_toml_str("mode = \"nope\"").is_err());
    }
}
