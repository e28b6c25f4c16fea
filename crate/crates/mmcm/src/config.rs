//! Plain-text run configuration.
//!
//! A run is configured by `key = value` pairs — from a config file
//! (`--config`), from command-line flags, or both (flags win). Every key is
//! validated on load and unknown keys are rejected. The `preset` key selects
//! a block of defaults (desk-scale `synthetic`, or the `h36m`/`amass`
//! conventions) and is always applied first, no matter where it appears;
//! the remaining keys then override individual fields.
//!
//! All randomness descends from the single `seed` key, fanned out to the
//! stages by a fixed derivation (`stage_seed(seed, "synth" | "encoder" |
//! "layout" | "perturb")`), so re-running any one command reproduces its
//! outputs exactly.

use std::path::Path;

use crate::clustering::ClusterConfig;
use crate::embedding::WindowSpec;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::layout::LayoutConfig;
use crate::math::stage_seed;
use crate::mmgt::MmgtConfig;
use crate::perturb::{PerturbKind, PerturbSpec};
use crate::pipeline::PipelineConfig;
use crate::synth::{default_families, SynthesisConfig, SyntheticMotionSpec};

/// Read a config file into ordered (key, value) pairs: `key = value` lines,
/// `#` comments and blank lines ignored. Duplicate keys are rejected here so
/// a file cannot silently contradict itself.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                ln + 1
            )));
        };
        let key = k.trim().to_string();
        if pairs.iter().any(|(existing, _)| *existing == key) {
            return Err(Error::Config(format!(
                "{}:{}: duplicate config key `{key}`",
                path.display(),
                ln + 1
            )));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Synthetic,
    H36m,
    Amass,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Synthetic => "synthetic",
            Preset::H36m => "h36m",
            Preset::Amass => "amass",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Preset::Synthetic),
            "h36m" => Ok(Preset::H36m),
            "amass" => Ok(Preset::Amass),
            other => Err(Error::Config(format!(
                "preset must be synthetic, h36m or amass, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Pure,
    Branching,
}

/// Every tunable of a run, flat. Defaults come from the preset; see
/// [`RunConfig::preset_defaults`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    // window geometry
    /// Observed past frames per sample, `B`.
    pub b: usize,
    /// Predicted future frames per sample, `T`.
    pub t: usize,
    /// Trailing past frames entering the mode-space window, `N′_p`.
    pub past_tail: usize,
    /// Window mining stride; 0 = auto (`max(1, T/4)`).
    pub stride: usize,
    // encoder
    pub hidden: Vec<usize>,
    /// Motion-code width; fixed at 64 by the metric definition.
    pub latent: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    // layout
    pub layout_dim: usize,
    pub layout_k: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub layout_epochs: usize,
    pub negative_samples: usize,
    pub transform_epochs: usize,
    // clustering
    pub min_cluster_size: usize,
    pub min_samples: usize,
    // MMGT mining
    pub mmgt_window: usize,
    pub mmgt_threshold: f64,
    pub include_self: bool,
    pub mmgt_root_center: bool,
    // calibration
    pub margin: f64,
    pub calibration_cap: usize,
    // run
    pub seed: u64,
    /// Worker threads; 0 = all available cores.
    pub threads: usize,
    // synthetic generation
    /// How many of the stock motion families to generate (1–5).
    pub families: usize,
    pub tracks_per_family: usize,
    pub track_length: usize,
    pub frame_rate: f64,
    pub regime: Regime,
    pub idle_frames: usize,
    pub action_frames: usize,
    // perturbation sweeps
    pub sigma_grid: Vec<f64>,
    pub scale_grid: Vec<f64>,
    pub bucket_edges: Vec<f64>,
    pub per_bucket: usize,
    pub percent_grid: Vec<f64>,
    pub add_counts: Vec<usize>,
    pub add_sigma: f64,
    /// Query samples mined from the corpus for perturbation sweeps.
    pub perturb_samples: usize,
    // hyperparameter ranking sweep
    pub sweep_dims: Vec<usize>,
    pub sweep_mcs: Vec<usize>,
    pub sweep_ms: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset_defaults(Preset::Synthetic)
    }
}

impl RunConfig {
    /// The defaults each preset starts from. `synthetic` is desk-scale;
    /// `h36m` and `amass` follow the published conventions (25-frame past,
    /// 100-frame horizon at 50 Hz; 0.5 m vs 0.4 m match threshold; cluster
    /// floor 15 vs 50).
    pub fn preset_defaults(preset: Preset) -> Self {
        let base = RunConfig {
            preset,
            b: 12,
            t: 10,
            past_tail: 5,
            stride: 0,
            hidden: vec![128, 64],
            latent: 64,
            epochs: 40,
            learning_rate: 1e-3,
            batch_size: 32,
            layout_dim: 2,
            layout_k: 15,
            min_dist: 0.1,
            spread: 1.0,
            layout_epochs: 300,
            negative_samples: 5,
            transform_epochs: 30,
            min_cluster_size: 15,
            min_samples: 1,
            mmgt_window: 1,
            mmgt_threshold: 0.5,
            include_self: true,
            mmgt_root_center: true,
            margin: 0.1,
            calibration_cap: 256,
            seed: 7,
            threads: 0,
            families: 5,
            tracks_per_family: 4,
            track_length: 120,
            frame_rate: 25.0,
            regime: Regime::Pure,
            idle_frames: 20,
            action_frames: 30,
            sigma_grid: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.5],
            scale_grid: vec![1.0, 1.25, 1.5, 2.0],
            bucket_edges: vec![0.0, 0.5, 0.7, 0.85, 1.0],
            per_bucket: 16,
            percent_grid: vec![0.0, 5.0, 10.0, 20.0, 40.0],
            add_counts: vec![0, 2, 5, 10, 20],
            add_sigma: 0.3,
            perturb_samples: 12,
            sweep_dims: vec![2, 3, 5],
            sweep_mcs: vec![10, 15, 30],
            sweep_ms: vec![1, 5],
        };
        match preset {
            Preset::Synthetic => base,
            Preset::H36m => RunConfig {
                b: 25,
                t: 100,
                frame_rate: 50.0,
                hidden: vec![512, 128],
                epochs: 60,
                ..base
            },
            Preset::Amass => RunConfig {
                b: 25,
                t: 100,
                frame_rate: 50.0,
                hidden: vec![512, 128],
                epochs: 60,
                min_cluster_size: 50,
                mmgt_threshold: 0.4,
                ..base
            },
        }
    }

    /// Parse a config file: `key = value` lines, `#` comments, blank lines
    /// ignored. Duplicate and unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_pairs(&parse_config_file(path)?)
    }

    /// Build a config from (key, value) pairs: the preset (if any) first,
    /// then every other key in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (k, _) in pairs {
            if !seen.insert(k.as_str()) {
                return Err(Error::Config(format!("duplicate config key `{k}`")));
            }
        }
        let preset = match pairs.iter().find(|(k, _)| k == "preset") {
            Some((_, v)) => Preset::parse(v)?,
            None => Preset::Synthetic,
        };
        let mut cfg = Self::preset_defaults(preset);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.apply(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one field from its key name. The value grammar is scalar
    /// (`42`, `0.5`, `true`) or a comma list (`2,3,5`).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',').map(|p| scalar(key, p.trim())).collect()
        }
        match key {
            "preset" => self.preset = Preset::parse(value)?,
            "b" => self.b = scalar(key, value)?,
            "t" => self.t = scalar(key, value)?,
            "past_tail" => self.past_tail = scalar(key, value)?,
            "stride" => self.stride = scalar(key, value)?,
            "hidden" => self.hidden = list(key, value)?,
            "latent" => self.latent = scalar(key, value)?,
            "epochs" => self.epochs = scalar(key, value)?,
            "learning_rate" => self.learning_rate = scalar(key, value)?,
            "batch_size" => self.batch_size = scalar(key, value)?,
            "layout_dim" => self.layout_dim = scalar(key, value)?,
            "layout_k" => self.layout_k = scalar(key, value)?,
            "min_dist" => self.min_dist = scalar(key, value)?,
            "spread" => self.spread = scalar(key, value)?,
            "layout_epochs" => self.layout_epochs = scalar(key, value)?,
            "negative_samples" => self.negative_samples = scalar(key, value)?,
            "transform_epochs" => self.transform_epochs = scalar(key, value)?,
            "min_cluster_size" => self.min_cluster_size = scalar(key, value)?,
            "min_samples" => self.min_samples = scalar(key, value)?,
            "mmgt_window" => self.mmgt_window = scalar(key, value)?,
            "mmgt_threshold" => self.mmgt_threshold = scalar(key, value)?,
            "include_self" => self.include_self = scalar(key, value)?,
            "mmgt_root_center" => self.mmgt_root_center = scalar(key, value)?,
            "margin" => self.margin = scalar(key, value)?,
            "calibration_cap" => self.calibration_cap = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "threads" => self.threads = scalar(key, value)?,
            "families" => self.families = scalar(key, value)?,
            "tracks_per_family" => self.tracks_per_family = scalar(key, value)?,
            "track_length" => self.track_length = scalar(key, value)?,
            "frame_rate" => self.frame_rate = scalar(key, value)?,
            "regime" => {
                self.regime = match value {
                    "pure" => Regime::Pure,
                    "branching" => Regime::Branching,
                    other => {
                        return Err(Error::Config(format!(
                            "regime must be pure or branching, got `{other}`"
                        )))
                    }
                }
            }
            "idle_frames" => self.idle_frames = scalar(key, value)?,
            "action_frames" => self.action_frames = scalar(key, value)?,
            "sigma_grid" => self.sigma_grid = list(key, value)?,
            "scale_grid" => self.scale_grid = list(key, value)?,
            "bucket_edges" => self.bucket_edges = list(key, value)?,
            "per_bucket" => self.per_bucket = scalar(key, value)?,
            "percent_grid" => self.percent_grid = list(key, value)?,
            "add_counts" => self.add_counts = list(key, value)?,
            "add_sigma" => self.add_sigma = scalar(key, value)?,
            "perturb_samples" => self.perturb_samples = scalar(key, value)?,
            "sweep_dims" => self.sweep_dims = list(key, value)?,
            "sweep_mcs" => self.sweep_mcs = list(key, value)?,
            "sweep_ms" => self.sweep_ms = list(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent != 64 {
            return Err(Error::Config(format!(
                "latent must be 64 (the motion-code width is fixed by the metric definition), got {}",
                self.latent
            )));
        }
        if self.past_tail == 0 || self.b < self.past_tail {
            return Err(Error::Config(format!(
                "b ({}) must be at least past_tail ({}) and past_tail must be ≥ 1",
                self.b, self.past_tail
            )));
        }
        if !(1..=5).contains(&self.families) {
            return Err(Error::Config(format!(
                "families must be between 1 and 5, got {}",
                self.families
            )));
        }
        if self.regime == Regime::Branching && self.action_frames == 0 {
            return Err(Error::Config("branching regime needs action_frames ≥ 1".into()));
        }
        if self.perturb_samples == 0 {
            return Err(Error::Config("perturb_samples must be ≥ 1".into()));
        }
        if self.sweep_dims.is_empty() || self.sweep_mcs.is_empty() || self.sweep_ms.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        // the assembled pipeline config re-checks every stage invariant
        self.pipeline_config().validate()
    }

    /// Effective mining stride (`stride`, or `max(1, T/4)` when auto).
    pub fn effective_stride(&self) -> usize {
        if self.stride == 0 {
            (self.t / 4).max(1)
        } else {
            self.stride
        }
    }

    /// Assemble the full pipeline configuration. Stage seeds fan out from
    /// `seed` exactly as the presets do, so a config that only changes
    /// grids or paths keeps the same pipeline fingerprint.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            window: WindowSpec {
                past_tail_frames: self.past_tail,
                future_frames: self.t,
                stride: self.effective_stride(),
            },
            encoder: EncoderConfig {
                hidden: self.hidden.clone(),
                latent: self.latent,
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                batch_size: self.batch_size,
                seed: stage_seed(self.seed, "encoder"),
            },
            layout: LayoutConfig {
                k: self.layout_k,
                min_dist: self.min_dist,
                spread: self.spread,
                d: self.layout_dim,
                epochs: self.layout_epochs,
                negative_samples: self.negative_samples,
                transform_epochs: self.transform_epochs,
                seed: stage_seed(self.seed, "layout"),
            },
            cluster: ClusterConfig {
                min_cluster_size: self.min_cluster_size,
                min_samples: self.min_samples,
            },
            mmgt: MmgtConfig {
                past_window_frames: self.mmgt_window,
                similarity_threshold: self.mmgt_threshold,
                include_self: self.include_self,
                root_center: self.mmgt_root_center,
            },
            margin: self.margin,
            calibration_cap: self.calibration_cap,
        }
    }

    /// Synthesis inputs for `gen`: the first `families` stock families plus
    /// the corpus-level parameters for the chosen regime.
    pub fn synthesis(&self) -> (Vec<SyntheticMotionSpec>, SynthesisConfig) {
        let mut specs = default_families();
        specs.truncate(self.families);
        let seed = stage_seed(self.seed, "synth");
        let cfg = match self.regime {
            Regime::Pure => SynthesisConfig::pure(
                self.tracks_per_family,
                self.track_length,
                self.frame_rate,
                seed,
            ),
            Regime::Branching => SynthesisConfig::branching(
                self.tracks_per_family,
                self.track_length,
                self.frame_rate,
                self.idle_frames,
                self.action_frames,
                seed,
            ),
        };
        (specs, cfg)
    }

    /// Perturbation spec for one experiment kind, using this config's grids.
    pub fn perturb_spec(&self, kind: PerturbKind) -> PerturbSpec {
        let seed = stage_seed(self.seed, "perturb");
        PerturbSpec {
            kind,
            sigma_grid: self.sigma_grid.clone(),
            scale_grid: self.scale_grid.clone(),
            bucket_edges: self.bucket_edges.clone(),
            per_bucket: self.per_bucket,
            seed,
        }
    }
}
