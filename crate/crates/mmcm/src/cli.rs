//! The `mmcm` command-line tool: corpus generation, pipeline fitting,
//! evaluation, perturbation sweeps, and the hyperparameter ranking sweep.
//!
//! Every subcommand reads its tunables from the shared key-value
//! configuration ([`crate::config::RunConfig`]): `--config <path>` loads a
//! file, and each config key is also exposed as a kebab-cased `--key value`
//! flag that overrides the file (`min_cluster_size` ⇔ `--min-cluster-size`). Exit codes: 0 success, 1 usage or configuration
//! error, 2 data or format error, 3 degenerate pipeline.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::clustering::{fit_modes, sweep_stability, ClusterConfig};
use crate::config::{parse_config_file, RunConfig};
use crate::embedding::fit_embedder;
use crate::error::{Error, Result};
use crate::io::{load_corpus, load_predictions, save_corpus};
use crate::math::stage_seed;
use crate::metrics::score_dataset;
use crate::mmgt::MmgtIndex;
use crate::motion::MotionCorpus;
use crate::perturb::{
    mmgt_prediction_samples, run_hyperparameter_sweep, run_noise_sweep, run_noisy_addition,
    run_rare_mode_removal, PerturbKind, SweepResult,
};
use crate::pipeline::{calibrate_tau, FittedPipeline};
use crate::report::{write_eval_outputs, write_ranking_outputs, write_sweep_outputs};

macro_rules! config_flags {
    ($($name:ident),+ $(,)?) => {
        /// Shared configuration flags: a config file plus per-key overrides.
        #[derive(Debug, Clone, Default, Args)]
        pub struct ConfigArgs {
            /// Key-value config file (`key = value` lines, `#` comments).
            #[arg(long, value_name = "PATH")]
            pub config: Option<PathBuf>,
            $(
                #[arg(long, value_name = "VALUE",
                      help = concat!("Override the `", stringify!($name), "` config key"))]
                pub $name: Option<String>,
            )+
        }

        impl ConfigArgs {
            fn flag_pairs(&self) -> Vec<(String, String)> {
                let mut pairs = Vec::new();
                $(
                    if let Some(v) = &self.$name {
                        pairs.push((stringify!($name).to_string(), v.clone()));
                    }
                )+
                pairs
            }
        }
    };
}

config_flags![
    preset, b, t, past_tail, stride, hidden, latent, epochs, learning_rate, batch_size,
    layout_dim, layout_k, min_dist, spread, layout_epochs, negative_samples, transform_epochs,
    min_cluster_size, min_samples, mmgt_window, mmgt_threshold, include_self, mmgt_root_center,
    margin, calibration_cap, seed, threads, families, tracks_per_family, track_length,
    frame_rate, regime, idle_frames, action_frames, sigma_grid, scale_grid, bucket_edges,
    per_bucket, percent_grid, add_counts, add_sigma, perturb_samples, sweep_dims, sweep_mcs,
    sweep_ms,
];

impl ConfigArgs {
    /// Resolve the effective configuration: preset defaults, then the config
    /// file, then the command-line flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut merged = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => Vec::new(),
        };
        for (k, v) in self.flag_pairs() {
            merged.retain(|(existing, _)| *existing != k);
            merged.push((k, v));
        }
        RunConfig::from_pairs(&merged)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mmcm",
    version,
    about = "Multimodality metric for human motion prediction",
    long_about = "Fits a motion-mode pipeline (windowing, encoder, 2-D layout, density \
                  clustering, abnormality threshold) on a motion corpus, then scores \
                  prediction sets with mode-coverage metrics alongside the classical \
                  diversity and displacement metrics."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic motion corpus and print its family statistics.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output corpus file.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
    },
    /// Fit the pipeline on a corpus and write the versioned artifact.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Input corpus file.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Output pipeline artifact.
        #[arg(long, value_name = "PATH")]
        pipeline: PathBuf,
    },
    /// Score a predictions file against a fitted pipeline and a corpus.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fitted pipeline artifact.
        #[arg(long, value_name = "PATH")]
        pipeline: PathBuf,
        /// Corpus the multimodal ground truths are mined from.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Predictions file (one set of futures per sample).
        #[arg(long, value_name = "PATH")]
        predictions: PathBuf,
        /// Output directory for report.json / report.csv / layout.svg /
        /// occupancy.csv / timings.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Evaluate even when the artifact's config fingerprint differs
        /// from the current configuration.
        #[arg(long)]
        allow_fingerprint_mismatch: bool,
    },
    /// Run a robustness experiment and write its sweep CSV + SVG.
    Perturb {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fitted pipeline artifact.
        #[arg(long, value_name = "PATH")]
        pipeline: PathBuf,
        /// Corpus the evaluation samples are mined from.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Output directory for sweep_<kind>.csv / sweep_<kind>.svg.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Which experiment to run.
        #[arg(long, value_enum, default_value = "noise")]
        experiment: Experiment,
    },
    /// Refit across a hyperparameter grid and rank prediction methods.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Corpus used for fitting and MMGT mining.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Output directory for sweep_ranking.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Two or more predictions files, one per method; methods are named
        /// by file stem.
        #[arg(value_name = "PREDICTIONS", num_args = 0..)]
        predictions: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    /// Per-joint Gaussian noise of increasing σ.
    Noise,
    /// Bone-length scaling by increasing factors.
    Bone,
    /// Mismatched past/future splices binned by discontinuity.
    Mismatch,
    /// Rare-mode removal at increasing population thresholds.
    Rare,
    /// Noisy prediction additions of increasing count.
    Add,
    /// All of the above.
    All,
}

/// Entry point for the binary: parse, run, map errors to exit codes.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and exit 0; real usage
            // errors go to stderr and exit 1
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Install the configured rayon pool size. Safe to call repeatedly; only
/// the first global initialization wins, matching "one process, one pool".
fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

pub fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Gen { cfg, corpus } => {
            let cfg = cfg.resolve()?;
            init_threads(cfg.threads);
            cmd_gen(&cfg, &corpus)
        }
        Command::Fit { cfg, corpus, pipeline } => {
            let cfg = cfg.resolve()?;
            init_threads(cfg.threads);
            cmd_fit(&cfg, &corpus, &pipeline)
        }
        Command::Eval { cfg, pipeline, corpus, predictions, out, allow_fingerprint_mismatch } => {
            let cfg = cfg.resolve()?;
            init_threads(cfg.threads);
            cmd_eval(&cfg, &pipeline, &corpus, &predictions, &out, allow_fingerprint_mismatch)
        }
        Command::Perturb { cfg, pipeline, corpus, out, experiment } => {
            let cfg = cfg.resolve()?;
            init_threads(cfg.threads);
            cmd_perturb(&cfg, &pipeline, &corpus, &out, experiment)
        }
        Command::Sweep { cfg, corpus, out, predictions } => {
            let cfg = cfg.resolve()?;
            init_threads(cfg.threads);
            cmd_sweep(&cfg, &corpus, &out, &predictions)
        }
    }
}

fn cmd_gen(cfg: &RunConfig, corpus_path: &Path) -> Result<()> {
    let (specs, synth) = cfg.synthesis();
    let corpus = crate::synth::generate_synthetic(&specs, &synth)?;
    save_corpus(&corpus, corpus_path)?;
    println!(
        "generated {} tracks / {} families / {} frames at {} Hz ({} keypoints)",
        corpus.tracks.len(),
        specs.len(),
        corpus.tracks.iter().map(|t| t.frames.len()).sum::<usize>(),
        corpus.frame_rate,
        corpus.skeleton.keypoint_count()
    );
    for (fi, spec) in specs.iter().enumerate() {
        let prefix = format!("{}/", spec.family.name());
        let n: usize = corpus.tracks.iter().filter(|t| t.source_id.starts_with(&prefix)).count();
        println!("  family {fi} {}: {} tracks", spec.family.name(), n);
    }
    println!("wrote {}", corpus_path.display());
    Ok(())
}

fn cmd_fit(cfg: &RunConfig, corpus_path: &Path, pipeline_path: &Path) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let pc = cfg.pipeline_config();
    pc.validate()?;
    let (embedder, refs) = fit_embedder(&corpus, &pc.window, &pc.encoder, &pc.layout)?;
    println!("embedded {} windows into {} dims", refs.len(), embedder.layout_dim());
    let modes = match fit_modes(&embedder, &corpus, &pc.cluster) {
        Ok(modes) => modes,
        Err(e @ Error::DegenerateClustering(_)) => {
            print_stability_hint(&embedder, &corpus, &pc.cluster, cfg.layout_dim);
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let tau = calibrate_tau(&embedder, &modes, &corpus, &pc.mmgt, pc.margin, pc.calibration_cap)?;
    let pipeline = FittedPipeline {
        fingerprint: pc.fingerprint(),
        config: pc,
        embedder,
        modes,
        tau,
        skeleton: (*corpus.skeleton).clone(),
        frame_rate: corpus.frame_rate,
    };
    println!(
        "modes: {}  noise rate: {:.3}  mean persistence: {:.3}  tau: {:.4}",
        pipeline.modes.mode_count(),
        pipeline.modes.noise_rate(),
        pipeline.modes.mean_persistence(),
        pipeline.tau
    );
    pipeline.save(pipeline_path)?;
    println!("wrote {} (fingerprint {})", pipeline_path.display(), &pipeline.fingerprint[..12]);
    Ok(())
}

/// On degenerate clustering, run a small stability sweep around the failed
/// configuration and print the best alternatives (best-effort: a failing
/// sweep is silently skipped, the fit error is what matters).
fn print_stability_hint(
    embedder: &crate::embedding::Embedder,
    corpus: &MotionCorpus,
    failed: &ClusterConfig,
    layout_dim: usize,
) {
    let mut mcs: Vec<usize> = [
        failed.min_cluster_size / 4,
        failed.min_cluster_size / 2,
        failed.min_cluster_size,
    ]
    .into_iter()
    .filter(|&m| m >= 2)
    .collect();
    mcs.dedup();
    if mcs.is_empty() {
        mcs.push(2);
    }
    let grid: Vec<ClusterConfig> = mcs
        .into_iter()
        .map(|m| ClusterConfig { min_cluster_size: m, min_samples: failed.min_samples })
        .collect();
    if let Ok(rows) = sweep_stability(embedder, corpus, &[layout_dim], &grid) {
        eprintln!("hint: no clusters at min_cluster_size {}; stability sweep:", failed.min_cluster_size);
        for r in rows.iter().take(5) {
            eprintln!(
                "  dim {} min_cluster_size {:>3} min_samples {:>2} -> {} modes, noise {:.3}, score {:.4}",
                r.layout_dim, r.min_cluster_size, r.min_samples, r.mode_count, r.noise_rate, r.score
            );
        }
    }
}

fn cmd_eval(
    cfg: &RunConfig,
    pipeline_path: &Path,
    corpus_path: &Path,
    predictions_path: &Path,
    out: &Path,
    allow_fingerprint_mismatch: bool,
) -> Result<()> {
    let pipeline = FittedPipeline::load(pipeline_path)?;
    let current = cfg.pipeline_config().fingerprint();
    if current != pipeline.fingerprint {
        if !allow_fingerprint_mismatch {
            return Err(Error::FingerprintMismatch {
                artifact: pipeline.fingerprint.clone(),
                current,
            });
        }
        eprintln!("warning: evaluating with a fingerprint-mismatched config (override flag set)");
    }
    let corpus = load_corpus(corpus_path)?;
    let sets = load_predictions(predictions_path)?;
    let t = pipeline.config.window.future_frames;
    let index = MmgtIndex::new(&corpus, &pipeline.config.mmgt, t)?;
    let samples: Vec<_> = sets
        .into_iter()
        .map(|s| Ok((index.query(&s.target)?, s)))
        .map(|r: Result<_>| r.map(|(mmgt, s)| (s, mmgt)))
        .collect::<Result<_>>()?;
    let report = score_dataset(&pipeline, &samples)?;
    let d = &report.dataset;
    println!(
        "samples: {}  MMCM: {:.4}  C: {:.4}  V: {:.4}",
        d.sample_count, d.mmcm, d.c, d.v
    );
    println!(
        "APD: {}  ADE: {:.4}  FDE: {:.4}  MMADE: {:.4}  MMFDE: {:.4}",
        d.apd.map_or("absent".to_string(), |v| format!("{v:.4}")),
        d.ade,
        d.fde,
        d.mmade,
        d.mmfde
    );
    let predictions: usize = report.samples.iter().map(|s| s.i).sum();
    println!(
        "scored {predictions} predictions in {:.3} s ({:.4} s per prediction)",
        report.timings.total_s,
        report.timings.total_s / predictions.max(1) as f64
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for path in write_eval_outputs(out, &report, &pipeline)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_experiment(
    cfg: &RunConfig,
    pipeline: &FittedPipeline,
    corpus: &MotionCorpus,
    samples: &[(crate::motion::PredictionSet, crate::mmgt::MmgtSet)],
    experiment: Experiment,
) -> Result<Vec<SweepResult>> {
    let kinds: Vec<Experiment> = match experiment {
        Experiment::All => vec![
            Experiment::Noise,
            Experiment::Bone,
            Experiment::Mismatch,
            Experiment::Rare,
            Experiment::Add,
        ],
        one => vec![one],
    };
    let mut sweeps = Vec::new();
    for kind in kinds {
        let sweep = match kind {
            Experiment::Noise => {
                run_noise_sweep(pipeline, corpus, samples, &cfg.perturb_spec(PerturbKind::JointNoise))?
            }
            Experiment::Bone => {
                run_noise_sweep(pipeline, corpus, samples, &cfg.perturb_spec(PerturbKind::BoneScale))?
            }
            Experiment::Mismatch => {
                run_noise_sweep(pipeline, corpus, samples, &cfg.perturb_spec(PerturbKind::Mismatch))?
            }
            Experiment::Rare => run_rare_mode_removal(pipeline, samples, &cfg.percent_grid)?,
            Experiment::Add => run_noisy_addition(
                pipeline,
                samples,
                &cfg.add_counts,
                cfg.add_sigma,
                stage_seed(cfg.seed, "perturb"),
            )?,
            Experiment::All => unreachable!("expanded above"),
        };
        sweeps.push(sweep);
    }
    Ok(sweeps)
}

fn cmd_perturb(
    cfg: &RunConfig,
    pipeline_path: &Path,
    corpus_path: &Path,
    out: &Path,
    experiment: Experiment,
) -> Result<()> {
    let pipeline = FittedPipeline::load(pipeline_path)?;
    let corpus = load_corpus(corpus_path)?;
    let samples = mmgt_prediction_samples(&pipeline, &corpus, cfg.b, cfg.perturb_samples)?;
    println!("mined {} evaluation samples", samples.len());
    for sweep in run_experiment(cfg, &pipeline, &corpus, &samples, experiment)? {
        for level in &sweep.levels {
            println!(
                "{} {:>12}  MMCM {:.4}  APD {}{}",
                sweep.kind,
                level.label,
                level.mmcm,
                level.apd.map_or("absent".to_string(), |v| format!("{v:.4}")),
                if level.flagged { format!("  [flagged: {}]", level.note) } else { String::new() }
            );
        }
        for path in write_sweep_outputs(out, &sweep)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    corpus_path: &Path,
    out: &Path,
    prediction_files: &[PathBuf],
) -> Result<()> {
    if prediction_files.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "the ranking sweep compares methods: give at least 2 predictions files, got {}",
            prediction_files.len()
        )));
    }
    let corpus = load_corpus(corpus_path)?;
    let mut methods = Vec::new();
    for path in prediction_files {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        methods.push((name, load_predictions(path)?));
    }
    let grid: Vec<ClusterConfig> = cfg
        .sweep_mcs
        .iter()
        .flat_map(|&m| {
            cfg.sweep_ms.iter().map(move |&s| ClusterConfig { min_cluster_size: m, min_samples: s })
        })
        .collect();
    let table = run_hyperparameter_sweep(&corpus, &methods, &cfg.sweep_dims, &grid, &cfg.pipeline_config())?;
    let flagged = table.rows.iter().filter(|r| r.flagged).count();
    println!(
        "{} grid points ({} degenerate), {} distinct ranking(s) among the rest",
        table.rows.len(),
        flagged,
        table.distinct_rankings().len()
    );
    for ranking in table.distinct_rankings() {
        println!("  ranking: {}", ranking.join(" > "));
    }
    for path in write_ranking_outputs(out, &table)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
