//! Fit the full mode pipeline — window encoder, 2-D layout, density
//! clustering, abnormality threshold — and inspect what it learned: the mode
//! table, a layout scatter plot (SVG), and the saved artifact round trip.
//!
//! Run with: `cargo run --release --example fit_mode_atlas`

use mmcm::config::RunConfig;
use mmcm::pipeline::{fit_pipeline, FittedPipeline};
use mmcm::plot::layout_scatter;
use mmcm::synth::generate_synthetic;
use mmcm::Result;

fn main() -> Result<()> {
    let cfg = RunConfig::default();
    let (families, synth) = cfg.synthesis();
    let corpus = generate_synthetic(&families, &synth)?;
    let pc = cfg.pipeline_config();
    println!(
        "fitting on {} frames: window = {} past-tail + {} future frames, \
         latent {}, layout {}-D, clusters >= {} points",
        corpus.total_frames(),
        pc.window.past_tail_frames,
        pc.window.future_frames,
        pc.encoder.latent,
        pc.layout.d,
        pc.cluster.min_cluster_size,
    );

    let started = std::time::Instant::now();
    let pipeline = fit_pipeline(&corpus, &pc)?;
    println!("fitted in {:.1}s, fingerprint {}", started.elapsed().as_secs_f64(), &pipeline.fingerprint[..12]);

    // the mode table: every window of the corpus lands in a mode (or noise)
    let modes = &pipeline.modes;
    let total = modes.labels.len();
    println!(
        "\n{} windows -> {} modes, noise rate {:.3}, tau = {:.4}",
        total,
        modes.mode_count(),
        modes.noise_rate(),
        pipeline.tau
    );
    println!("{:>5} {:>8} {:>10} {:>12}", "mode", "windows", "share", "persistence");
    for m in &modes.modes {
        println!(
            "{:>5} {:>8} {:>9.1}% {:>12.3}",
            m.id,
            m.members.len(),
            100.0 * m.members.len() as f64 / total as f64,
            m.persistence
        );
    }

    // visual: the 2-D layout colored by mode, centroids marked
    let dir = std::path::Path::new("target/fit_mode_atlas");
    std::fs::create_dir_all(dir).expect("create output dir");
    let centroids: Vec<Vec<f64>> = modes.modes.iter().map(|m| m.centroid.clone()).collect();
    let centroid_matrix = mmcm::math::Matrix::from_rows(&centroids);
    let svg = layout_scatter(
        pipeline.embedder.layout.training_layout(),
        &modes.labels,
        Some(&centroid_matrix),
        "motion-window modes",
    );
    let svg_path = dir.join("layout.svg");
    std::fs::write(&svg_path, svg).expect("write svg");
    println!("\nlayout scatter -> {}", svg_path.display());

    // artifact round trip: save, load, verify the fingerprint gate
    let artifact = dir.join("pipeline.bin");
    pipeline.save(&artifact)?;
    let loaded = FittedPipeline::load(&artifact)?;
    assert_eq!(loaded.fingerprint, pipeline.fingerprint);
    assert_eq!(loaded.tau, pipeline.tau);
    assert_eq!(loaded.modes, pipeline.modes);
    println!("artifact {} reloads exactly (fingerprint {})", artifact.display(), &loaded.fingerprint[..12]);

    // the assignment path the metric uses: encode, place, label
    let track = &corpus.tracks[0];
    let (past, future) = (track.frames[..cfg.b].to_vec(), track.frames[cfg.b..cfg.b + cfg.t].to_vec());
    let a = pipeline.assign_mode(&past, &future)?;
    println!(
        "\nsample assignment: window from {} -> mode {:?}, {:.4} from nearest centroid",
        track.source_id, a.label, a.nearest_centroid_distance
    );
    Ok(())
}
