//! Stress the metric with controlled corruption: joint noise, bone-length
//! scaling, and past/future mismatch, each swept over a grid of severities.
//!
//! A useful multimodality metric must fall as predictions degrade. This
//! example fits a pipeline on the synthetic corpus (cached under `target/`
//! so reruns skip the fit), evaluates every corruption level, and prints
//! one table per sweep.
//!
//! Run with: `cargo run --release --example noise_robustness`

use mmcm::config::RunConfig;
use mmcm::math::stage_seed;
use mmcm::perturb::{
    mmgt_prediction_samples, run_noise_sweep, run_noisy_addition, run_rare_mode_removal,
    PerturbKind, SweepResult,
};
use mmcm::pipeline::{fit_pipeline, FittedPipeline};
use mmcm::synth::generate_synthetic;
use mmcm::Result;

fn print_sweep(sweep: &SweepResult) {
    println!("\n=== {} ===", sweep.kind);
    println!(
        "{:>10} {:>7} {:>7} {:>7} {:>8} {:>8} {:>8} {:>7}  {}",
        "level", "mmcm", "C", "V", "apd", "mmade", "mmfde", "samples", "note"
    );
    for l in &sweep.levels {
        let apd = l.apd.map_or("-".into(), |a| format!("{a:.3}"));
        println!(
            "{:>10.3} {:>7.3} {:>7.3} {:>7.3} {:>8} {:>8.3} {:>8.3} {:>7}  {}",
            l.level, l.mmcm, l.c, l.v, apd, l.mmade, l.mmfde, l.sample_count,
            if l.flagged { l.note.as_str() } else { "" }
        );
    }
}

fn main() -> Result<()> {
    let cfg = RunConfig::default();
    let (specs, synth) = cfg.synthesis();
    let corpus = generate_synthetic(&specs, &synth)?;

    // fit once, cache the artifact next to the build outputs
    let cache = std::path::Path::new("target/noise_robustness_pipeline.bin");
    let pipeline = match FittedPipeline::load(cache) {
        Ok(p) if p.fingerprint == cfg.pipeline_config().fingerprint() => {
            println!("loaded cached pipeline {}", &p.fingerprint[..12]);
            p
        }
        _ => {
            println!("fitting pipeline on {} corpus frames ...", corpus.total_frames());
            let p = fit_pipeline(&corpus, &cfg.pipeline_config())?;
            p.save(cache)?;
            p
        }
    };
    println!(
        "pipeline: {} modes, noise rate {:.3}, tau {:.4}",
        pipeline.modes.mode_count(),
        pipeline.modes.noise_rate(),
        pipeline.tau
    );

    let samples = mmgt_prediction_samples(&pipeline, &corpus, cfg.b, cfg.perturb_samples)?;
    println!("mined {} evaluation samples (past length {})", samples.len(), cfg.b);

    for kind in [PerturbKind::JointNoise, PerturbKind::BoneScale, PerturbKind::Mismatch] {
        let sweep = run_noise_sweep(&pipeline, &corpus, &samples, &cfg.perturb_spec(kind))?;
        print_sweep(&sweep);
    }

    let sweep = run_rare_mode_removal(&pipeline, &samples, &cfg.percent_grid)?;
    print_sweep(&sweep);

    let seed = stage_seed(cfg.seed, "perturb");
    let sweep = run_noisy_addition(&pipeline, &samples, &cfg.add_counts, cfg.add_sigma, seed)?;
    print_sweep(&sweep);

    Ok(())
}
