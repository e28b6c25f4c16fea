//! Mine multimodal ground truth (MMGT): for a query's observed past, find
//! every corpus continuation whose trailing pose window sits within a
//! similarity threshold — the set of futures the data itself says are
//! plausible next.
//!
//! Shows single-query mining, the self-member convention, batch mining with
//! the K histogram, and how the threshold controls set growth.
//!
//! Run with: `cargo run --release --example mine_ground_truth`

use mmcm::config::RunConfig;
use mmcm::mmgt::{build_all_mmgt, build_mmgt, MmgtConfig, MemberSource};
use mmcm::motion::MotionSequence;
use mmcm::synth::generate_synthetic;
use mmcm::Result;

fn main() -> Result<()> {
    let cfg = RunConfig::default();
    let (families, synth) = cfg.synthesis();
    let corpus = generate_synthetic(&families, &synth)?;
    let mm = cfg.pipeline_config().mmgt;
    println!(
        "corpus: {} tracks, {} frames; window {} frame(s), threshold {} m",
        corpus.tracks.len(),
        corpus.total_frames(),
        mm.past_window_frames,
        mm.similarity_threshold
    );

    // one query taken from the corpus itself: past = frames [t-B, t),
    // ground-truth future = frames [t, t+T)
    let (track, split) = (3usize, 60usize);
    let frames = &corpus.tracks[track].frames;
    let mut query = MotionSequence::new(
        corpus.skeleton.clone(),
        corpus.frame_rate,
        format!("{}@{}", corpus.tracks[track].source_id, split),
        frames[split - cfg.b..split].to_vec(),
        frames[split..split + cfg.t].to_vec(),
    )?;
    // declaring the corpus origin lets mining treat the query's own
    // continuation as a corpus hit instead of injecting a self member
    query.origin = Some((track, split - 1));

    let set = build_mmgt(&query, &corpus, &mm)?;
    println!(
        "\nquery {} -> K = {} members (threshold {} m)",
        query.source_id,
        set.k(),
        set.threshold
    );
    println!("{:>3}  {:<18} {:>10}", "#", "source", "distance");
    for (i, m) in set.members.iter().take(10).enumerate() {
        let src = match &m.source {
            MemberSource::Corpus { track, position } => {
                format!("{}@{}", corpus.tracks[*track].source_id, position)
            }
            MemberSource::Query => "query (self)".into(),
        };
        println!("{:>3}  {:<18} {:>10.4}", i, src, m.distance);
    }
    if set.k() > 10 {
        println!("     ... {} more", set.k() - 10);
    }
    let injected = set
        .members
        .iter()
        .filter(|m| matches!(m.source, MemberSource::Query))
        .count();
    let own_hit = set.members.iter().any(|m| {
        matches!(m.source, MemberSource::Corpus { track: t, position } if t == track && position == split - 1)
    });
    println!(
        "own continuation mined as a corpus member: {own_hit}; injected self members: {injected} \
         (injection only happens when the query's origin is unknown)"
    );

    // batch mining across a grid of query splits
    let mut queries = Vec::new();
    for track in (0..corpus.tracks.len()).step_by(3) {
        for split in [40, 80, 108] {
            let frames = &corpus.tracks[track].frames;
            if split + cfg.t > frames.len() {
                continue;
            }
            let mut q = MotionSequence::new(
                corpus.skeleton.clone(),
                corpus.frame_rate,
                format!("{}@{}", corpus.tracks[track].source_id, split),
                frames[split - cfg.b..split].to_vec(),
                frames[split..split + cfg.t].to_vec(),
            )?;
            q.origin = Some((track, split - 1));
            queries.push(q);
        }
    }
    let (_, summary) = build_all_mmgt(&queries, &corpus, &mm)?;
    println!(
        "\nbatch of {} queries: K in [{}, {}], mean {:.1}, {} empty",
        queries.len(),
        summary.k_min,
        summary.k_max,
        summary.k_mean,
        summary.empty_queries
    );
    println!("K histogram:");
    for (k, n) in &summary.k_histogram {
        println!("  K={:<4} {}", k, "#".repeat(*n));
    }

    // the threshold is the dial: tighter = fewer, looser = more (supersets)
    println!("\nthreshold ladder for query {}:", query.source_id);
    let mut last_k = 0;
    for thr in [0.05, 0.1, 0.25, 0.5, 0.9] {
        let cfg_t = MmgtConfig { similarity_threshold: thr, ..mm.clone() };
        let k = build_mmgt(&query, &corpus, &cfg_t)?.k();
        assert!(k >= last_k, "a looser threshold can only add members");
        println!("  {:>5.2} m -> K = {}", thr, k);
        last_k = k;
    }
    Ok(())
}
