//! Score prediction sets against mined multimodal ground truth and read the
//! numbers the metric produces: coverage C, validity V, their harmonic mean
//! (the headline score), plus APD / ADE / FDE / MMADE / MMFDE context.
//!
//! Three toy "predictors" are scored on the same samples:
//!   - `mmgt-echo`    returns every mined future (perfect coverage),
//!   - `single-mode`  returns one future per sample, cloned I times,
//!   - `jittered`     adds Gaussian joint noise to every echoed future.
//!
//! Run with: `cargo run --release --example evaluate_predictions`

use mmcm::config::RunConfig;
use mmcm::metrics::score_dataset;
use mmcm::mmgt::MmgtSet;
use mmcm::motion::PredictionSet;
use mmcm::perturb::{inject_joint_noise, mmgt_prediction_samples};
use mmcm::pipeline::fit_pipeline;
use mmcm::report::write_eval_outputs;
use mmcm::synth::generate_synthetic;
use mmcm::Result;

fn report_line(name: &str, samples: &[(PredictionSet, MmgtSet)]) -> String {
    let n: usize = samples.iter().map(|(p, _)| p.futures.len()).sum();
    format!("{name}: {} samples, {} predictions total", samples.len(), n)
}

fn main() -> Result<()> {
    let cfg = RunConfig::default();
    let (families, synth) = cfg.synthesis();
    let corpus = generate_synthetic(&families, &synth)?;
    println!("fitting pipeline ...");
    let pipeline = fit_pipeline(&corpus, &cfg.pipeline_config())?;

    // mine evaluation samples: (observed past + true future, MMGT set)
    let base = mmgt_prediction_samples(&pipeline, &corpus, cfg.b, 12)?;

    // predictor 1: echo the mined ground truth (the ceiling: MMCM = 1)
    let echo: Vec<(PredictionSet, MmgtSet)> = base.clone();

    // predictor 2: collapse to a single future, repeated
    let single: Vec<(PredictionSet, MmgtSet)> = base
        .iter()
        .map(|(p, g)| {
            let one = p.futures[0].clone();
            let futures = vec![one; p.futures.len()];
            Ok((PredictionSet::new(p.target.clone(), futures)?, g.clone()))
        })
        .collect::<Result<_>>()?;

    // predictor 3: echo + per-future joint noise
    let jitter: Vec<(PredictionSet, MmgtSet)> = base
        .iter()
        .enumerate()
        .map(|(i, (p, g))| {
            let futures = p
                .futures
                .iter()
                .enumerate()
                .map(|(j, f)| inject_joint_noise(f, 0.08, 1000 + (i * 97 + j) as u64))
                .collect::<Result<Vec<_>>>()?;
            Ok((PredictionSet::new(p.target.clone(), futures)?, g.clone()))
        })
        .collect::<Result<_>>()?;

    println!("{}", report_line("mmgt-echo  ", &echo));
    println!("{}", report_line("single-mode", &single));
    println!("{}", report_line("jittered   ", &jitter));

    println!(
        "\n{:<12} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "predictor", "mmcm", "C", "V", "apd", "ade", "fde", "mmade", "mmfde"
    );
    let mut reports = Vec::new();
    for (name, samples) in [("mmgt-echo", &echo), ("single-mode", &single), ("jittered", &jitter)] {
        let report = score_dataset(&pipeline, samples)?;
        let d = &report.dataset;
        let apd = d.apd.map_or("-".into(), |a| format!("{a:.3}"));
        println!(
            "{:<12} {:>7.3} {:>7.3} {:>7.3} {:>7} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            name, d.mmcm, d.c, d.v, apd, d.ade, d.fde, d.mmade, d.mmfde
        );
        reports.push((name, report));
    }

    // expected ordering: echo covers everything; collapsing loses coverage;
    // jitter keeps futures distinct but pushes some into wrong/abnormal modes
    let mmcm_of = |n: &str| reports.iter().find(|(m, _)| *m == n).unwrap().1.dataset.mmcm;
    assert!((mmcm_of("mmgt-echo") - 1.0).abs() < 1e-12, "echoing the ground truth must score 1.0");
    assert!(mmcm_of("single-mode") < mmcm_of("mmgt-echo"), "mode collapse must cost coverage");

    // per-sample detail for the collapsed predictor: C tracks 1/|modes|
    println!("\nsingle-mode per-sample detail (first 6):");
    println!("{:>4} {:>7} {:>7} {:>7} {:>7}", "id", "mmcm", "C", "V", "K");
    let single_report = &reports.iter().find(|(n, _)| *n == "single-mode").unwrap().1;
    for (s, (_, g)) in single_report.samples.iter().zip(&single).take(6) {
        println!("{:>4} {:>7.3} {:>7.3} {:>7.3} {:>7}", s.id, s.mmcm, s.c, s.v, g.k());
    }
    for w in single_report.warnings.iter().take(3) {
        println!("warning: {w}");
    }

    // full output bundle: report.json, report.csv, occupancy.csv, layout.svg
    let dir = std::path::Path::new("target/evaluate_predictions");
    let written = write_eval_outputs(dir, &reports[2].1, &pipeline)?;
    println!("\njittered-predictor bundle:");
    for p in &written {
        println!("  {}", p.display());
    }
    Ok(())
}
