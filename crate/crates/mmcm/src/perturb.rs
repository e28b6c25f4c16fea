//! Robustness experiments: synthetic abnormal motions, rare-mode removal,
//! noisy prediction additions, and the hyperparameter ranking sweep.
//!
//! Three perturbation families corrupt predicted futures while leaving the
//! conditioning pasts clean: per-joint Gaussian noise, bone scaling
//! (invalid limb lengths), and mismatched past/future splices binned by the
//! discontinuity they introduce. Sweeps run each level through the full
//! scoring path so the headline comparison — diversity metrics reward
//! corruption while the mode-coverage metric punishes it — can be
//! reproduced end to end on synthetic corpora.
//!
//! Every perturbation is deterministic per seed and copies its input;
//! ground-truth data is never mutated in place.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_layout, ClusterConfig};
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::math::{self, stage_rng, stage_seed};
use crate::metrics::{score_dataset, MetricReport};
use crate::mmgt::{MmgtIndex, MmgtSet};
use crate::motion::{bone_lengths, flatten, root_center, MotionCorpus, MotionSequence, Pose, PredictionSet, Skeleton};
use crate::pipeline::{calibrate_tau, FittedPipeline, ModeLabel, PipelineConfig};

// ---------------------------------------------------------------------------
// perturbation primitives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbKind {
    JointNoise,
    BoneScale,
    Mismatch,
}

/// Grids and seed for one perturbation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    /// Noise levels in meters (JointNoise).
    pub sigma_grid: Vec<f64>,
    /// Bone length multipliers (BoneScale).
    pub scale_grid: Vec<f64>,
    /// Discontinuity bucket edges in meters (Mismatch); `n+1` edges define
    /// `n` buckets.
    pub bucket_edges: Vec<f64>,
    /// Pairs per discontinuity bucket (Mismatch).
    pub per_bucket: usize,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn joint_noise(seed: u64) -> Self {
        PerturbSpec {
            kind: PerturbKind::JointNoise,
            sigma_grid: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.5],
            scale_grid: Vec::new(),
            bucket_edges: Vec::new(),
            per_bucket: 0,
            seed,
        }
    }

    pub fn bone_scale(seed: u64) -> Self {
        PerturbSpec {
            kind: PerturbKind::BoneScale,
            sigma_grid: Vec::new(),
            scale_grid: vec![1.0, 1.25, 1.5, 2.0],
            bucket_edges: Vec::new(),
            per_bucket: 0,
            seed,
        }
    }

    pub fn mismatch(seed: u64) -> Self {
        PerturbSpec {
            kind: PerturbKind::Mismatch,
            sigma_grid: Vec::new(),
            scale_grid: Vec::new(),
            // one bucket below the mining radius (grafts there are other
            // plausible continuations), then three slicing the band just
            // above it where splices progressively break context; capped
            // before the far tail, where grafts at a distant phase of a
            // periodic motion carry large pose discontinuity yet still land
            // in valid modes
            bucket_edges: vec![0.0, 0.5, 0.7, 0.85, 1.0],
            per_bucket: 16,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strictly_increasing =
            |g: &[f64]| g.windows(2).all(|w| w[0] < w[1]) && g.iter().all(|v| v.is_finite());
        match self.kind {
            PerturbKind::JointNoise => {
                if self.sigma_grid.is_empty() || !strictly_increasing(&self.sigma_grid) {
                    return Err(Error::Config("sigma grid must be non-empty and strictly increasing".into()));
                }
                if self.sigma_grid[0] < 0.0 {
                    return Err(Error::Config("sigma must be ≥ 0".into()));
                }
            }
            PerturbKind::BoneScale => {
                if self.scale_grid.is_empty() || !strictly_increasing(&self.scale_grid) {
                    return Err(Error::Config("scale grid must be non-empty and strictly increasing".into()));
                }
                if self.scale_grid[0] <= 0.0 {
                    return Err(Error::Config("scale factors must be > 0".into()));
                }
            }
            PerturbKind::Mismatch => {
                if self.bucket_edges.len() < 2 || !strictly_increasing(&self.bucket_edges) {
                    return Err(Error::Config("bucket edges must be ≥ 2 and strictly increasing".into()));
                }
                if self.per_bucket == 0 {
                    return Err(Error::Config("per_bucket must be ≥ 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Add an independent N(0, σ²) offset to every coordinate of every non-root
/// keypoint, every frame. The root keypoint is re-centered afterward — it
/// keeps its original position, so the perturbation is pure articulation
/// noise rather than a smear of global placement (which the root-relative
/// metrics would ignore anyway). Deterministic per seed; σ = 0 returns an
/// identical copy.
pub fn inject_joint_noise(future: &[Pose], sigma: f64, seed: u64) -> Result<Vec<Pose>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be ≥ 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(future.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut rng = stage_rng(seed, "perturb/joint-noise");
    let mut out = future.to_vec();
    for pose in out.iter_mut() {
        for (k, coord) in pose.coords_mut().iter_mut().enumerate() {
            if k == 0 {
                continue; // the root stays put
            }
            for v in coord.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

/// Multiply selected bone lengths by `factor` in every frame, translating
/// each bone's child subtree along the bone direction so every other bone
/// keeps its length. `factor = 1` is the identity.
pub fn scale_bone(
    future: &[Pose],
    skeleton: &Skeleton,
    bone_indices: &[usize],
    factor: f64,
) -> Result<Vec<Pose>> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidArgument(format!("scale factor must be > 0, got {factor}")));
    }
    for &b in bone_indices {
        if b >= skeleton.bones().len() {
            return Err(Error::InvalidArgument(format!(
                "bone index {b} out of range ({} bones)",
                skeleton.bones().len()
            )));
        }
    }
    if factor == 1.0 {
        return Ok(future.to_vec());
    }
    let mut out = future.to_vec();
    for pose in out.iter_mut() {
        if pose.keypoint_count() != skeleton.keypoint_count() {
            return Err(Error::ShapeMismatch("pose keypoints disagree with skeleton".into()));
        }
        for &b in bone_indices {
            let (parent, child) = skeleton.bones()[b];
            let coords = pose.coords_mut();
            let p = coords[parent];
            let c = coords[child];
            let delta = [
                (factor - 1.0) * (c[0] - p[0]),
                (factor - 1.0) * (c[1] - p[1]),
                (factor - 1.0) * (c[2] - p[2]),
            ];
            for k in skeleton.subtree(child) {
                for a in 0..3 {
                    coords[k][a] += delta[a];
                }
            }
        }
    }
    Ok(out)
}

/// The bone-length abnormality filter: true when any bone's length in any
/// future frame deviates from its mean past length by at least
/// `rel_threshold` (0.5 = the conventional 50%).
pub fn length_abnormal(
    past: &[Pose],
    future: &[Pose],
    skeleton: &Skeleton,
    rel_threshold: f64,
) -> Result<bool> {
    if past.is_empty() || future.is_empty() {
        return Err(Error::EmptyInput("length filter needs past and future frames".into()));
    }
    let n_bones = skeleton.bones().len();
    let mut reference = vec![0.0; n_bones];
    for pose in past {
        for (r, l) in reference.iter_mut().zip(bone_lengths(pose, skeleton)?) {
            *r += l;
        }
    }
    for r in reference.iter_mut() {
        *r /= past.len() as f64;
    }
    for pose in future {
        for (b, l) in bone_lengths(pose, skeleton)?.into_iter().enumerate() {
            if reference[b] > 0.0 && (l - reference[b]).abs() / reference[b] >= rel_threshold {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// mismatched past/future pairs
// ---------------------------------------------------------------------------

/// A spliced sequence: a past from one place, a future from another, and
/// the discontinuity this splice introduces — the root-relative ℓ₂ distance
/// between the past's last frame and the frame that truly precedes the
/// future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchedPair {
    /// (track, first frame) of the past slice.
    pub past_ref: (usize, usize),
    /// (track, first frame) of the future slice.
    pub future_ref: (usize, usize),
    pub past: Vec<Pose>,
    pub future: Vec<Pose>,
    pub discontinuity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchBucket {
    /// Discontinuity range `[lo, hi)` in meters.
    pub lo: f64,
    pub hi: f64,
    pub requested: usize,
    pub pairs: Vec<MismatchedPair>,
}

impl MismatchBucket {
    /// True when sampling could not fill the bucket.
    pub fn short(&self) -> bool {
        self.pairs.len() < self.requested
    }
}

fn pose_l2(a: &Pose, b: &Pose) -> Result<f64> {
    let fa = flatten(&[root_center(a)])?;
    let fb = flatten(&[root_center(b)])?;
    if fa.len() != fb.len() {
        return Err(Error::ShapeMismatch("keypoint counts differ".into()));
    }
    Ok(math::l2_dist(&fa, &fb))
}

/// Splice corpus futures onto a fixed set of anchor pasts and bin the
/// splices by measured discontinuity. The same `per_bucket` pasts are
/// reused across every bucket — each paired with a graft whose
/// discontinuity falls in that bucket — so level-to-level metric
/// differences isolate the splice severity instead of re-rolling the
/// conditioning context (a fresh past per bucket would change the valid
/// mode sets along with the severity and drown the trend in sampling
/// noise). Even-indexed anchors take their own true continuation whenever
/// its zero discontinuity fits the bucket, so the lowest bucket carries
/// genuine continuations. Deterministic per seed; a bucket the corpus
/// cannot fill for some anchor is returned short rather than failing the
/// run.
pub fn make_mismatched(
    corpus: &MotionCorpus,
    past_len: usize,
    future_len: usize,
    bucket_edges: &[f64],
    per_bucket: usize,
    seed: u64,
) -> Result<Vec<MismatchBucket>> {
    if bucket_edges.len() < 2 || bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("bucket edges must be ≥ 2 and strictly increasing".into()));
    }
    if past_len == 0 || future_len == 0 || per_bucket == 0 {
        return Err(Error::InvalidArgument("past_len, future_len and per_bucket must be ≥ 1".into()));
    }
    // tracks long enough to host a past followed by a true continuation
    let past_ok: Vec<usize> = (0..corpus.tracks.len())
        .filter(|&t| corpus.tracks[t].frames.len() >= past_len + future_len)
        .collect();
    if past_ok.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no track is long enough for pasts of {past_len} + futures of {future_len} frames"
        )));
    }

    let mut rng = stage_rng(seed, "perturb/mismatch");
    let anchors: Vec<(usize, usize)> = (0..per_bucket)
        .map(|_| {
            let pt = past_ok[rng.gen_range(0..past_ok.len())];
            let p_start =
                rng.gen_range(0..=corpus.tracks[pt].frames.len() - past_len - future_len);
            (pt, p_start)
        })
        .collect();

    // every graft position in the corpus, with its discontinuity to each
    // anchor's last past frame
    let mut candidates: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(anchors.len());
    for &(pt, p_start) in &anchors {
        let last = &corpus.tracks[pt].frames[p_start + past_len - 1];
        let mut list = Vec::new();
        for (ft, track) in corpus.tracks.iter().enumerate() {
            if track.frames.len() < future_len + 1 {
                continue;
            }
            for f_start in 1..=track.frames.len() - future_len {
                let disc = pose_l2(last, &track.frames[f_start - 1])?;
                list.push((ft, f_start, disc));
            }
        }
        candidates.push(list);
    }

    let n_buckets = bucket_edges.len() - 1;
    let mut buckets: Vec<MismatchBucket> = (0..n_buckets)
        .map(|b| MismatchBucket {
            lo: bucket_edges[b],
            hi: bucket_edges[b + 1],
            requested: per_bucket,
            pairs: Vec::new(),
        })
        .collect();
    for (b, bucket) in buckets.iter_mut().enumerate() {
        let (lo, hi) = (bucket_edges[b], bucket_edges[b + 1]);
        for (pi, (&(pt, p_start), cands)) in anchors.iter().zip(&candidates).enumerate() {
            let in_bucket: Vec<&(usize, usize, f64)> =
                cands.iter().filter(|(_, _, d)| *d >= lo && *d < hi).collect();
            if in_bucket.is_empty() {
                continue; // this anchor has no graft at this severity
            }
            let continuation = (pi % 2 == 0)
                .then(|| {
                    in_bucket
                        .iter()
                        .find(|(ft, fs, _)| *ft == pt && *fs == p_start + past_len)
                        .copied()
                })
                .flatten();
            let &(ft, f_start, disc) =
                continuation.unwrap_or_else(|| in_bucket[rng.gen_range(0..in_bucket.len())]);
            bucket.pairs.push(MismatchedPair {
                past_ref: (pt, p_start),
                future_ref: (ft, f_start),
                past: corpus.tracks[pt].frames[p_start..p_start + past_len].to_vec(),
                future: corpus.tracks[ft].frames[f_start..f_start + future_len].to_vec(),
                discontinuity: disc,
            });
        }
    }
    Ok(buckets)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

/// Scores for one sweep level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    /// The swept quantity (σ, scale factor, bucket midpoint, percent, count).
    pub level: f64,
    pub label: String,
    pub mmcm: f64,
    pub c: f64,
    pub v: f64,
    pub apd: Option<f64>,
    pub mmade: f64,
    pub mmfde: f64,
    pub sample_count: usize,
    /// True when the level lost samples (degenerate scoring, emptied
    /// prediction sets, short buckets); `note` says why.
    pub flagged: bool,
    pub note: String,
}

/// A full sweep: one level per grid entry, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: String,
    pub levels: Vec<SweepLevel>,
}

impl SweepResult {
    /// Long-format CSV: `level,metric,value` per defined metric.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,metric,value\n");
        for l in &self.levels {
            let mut push = |metric: &str, value: f64| {
                s.push_str(&format!("{},{metric},{value}\n", l.level));
            };
            push("mmcm", l.mmcm);
            push("c", l.c);
            push("v", l.v);
            if let Some(apd) = l.apd {
                push("apd", apd);
            }
            push("mmade", l.mmade);
            push("mmfde", l.mmfde);
        }
        s
    }

    /// Values of one metric across levels, in level order (absent values
    /// skipped), for trend checks.
    pub fn metric_series(&self, metric: &str) -> Vec<f64> {
        self.levels
            .iter()
            .filter_map(|l| match metric {
                "mmcm" => Some(l.mmcm),
                "c" => Some(l.c),
                "v" => Some(l.v),
                "apd" => l.apd,
                "mmade" => Some(l.mmade),
                "mmfde" => Some(l.mmfde),
                _ => None,
            })
            .collect()
    }
}

fn level_from_report(level: f64, label: String, report: &MetricReport) -> SweepLevel {
    let d = &report.dataset;
    let flagged = !report.warnings.is_empty();
    SweepLevel {
        level,
        label,
        mmcm: d.mmcm,
        c: d.c,
        v: d.v,
        apd: d.apd,
        mmade: d.mmade,
        mmfde: d.mmfde,
        sample_count: d.sample_count,
        flagged,
        note: report.warnings.join("; "),
    }
}

/// Mine evaluation samples straight from a corpus: up to `count` evenly
/// spaced (past, future) queries — pasts of `b` frames, futures of the
/// pipeline's horizon — each paired with its mined MMGT set, and with the
/// MMGT futures standing in as the predictions. This is the shared starting
/// point of the robustness sweeps, which then corrupt or subset those
/// futures. Fully deterministic (no randomness in the spacing).
pub fn mmgt_prediction_samples(
    pipeline: &FittedPipeline,
    corpus: &MotionCorpus,
    b: usize,
    count: usize,
) -> Result<Vec<(PredictionSet, MmgtSet)>> {
    if b == 0 || count == 0 {
        return Err(Error::InvalidArgument("b and count must be ≥ 1".into()));
    }
    let t = pipeline.config.window.future_frames;
    pipeline.check_compatible(&corpus.skeleton, t)?;
    let index = MmgtIndex::new(corpus, &pipeline.config.mmgt, t)?;
    let mut positions = Vec::new();
    for (ti, track) in corpus.tracks.iter().enumerate() {
        if track.frames.len() < b + t {
            continue;
        }
        for split in b..=track.frames.len() - t {
            positions.push((ti, split));
        }
    }
    if positions.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no track is long enough for {b}-frame pasts and {t}-frame futures"
        )));
    }
    let picks: Vec<(usize, usize)> = if positions.len() <= count {
        positions
    } else {
        (0..count).map(|i| positions[i * positions.len() / count]).collect()
    };
    let mut samples = Vec::with_capacity(picks.len());
    for (ti, split) in picks {
        let frames = &corpus.tracks[ti].frames;
        let mut query = MotionSequence::new(
            corpus.skeleton.clone(),
            corpus.frame_rate,
            format!("sample/{ti}/{split}"),
            frames[split - b..split].to_vec(),
            frames[split..split + t].to_vec(),
        )?;
        query.origin = Some((ti, split - 1));
        let mmgt = index.query(&query)?;
        let futures: Vec<Vec<Pose>> = mmgt.members.iter().map(|m| m.future.clone()).collect();
        samples.push((PredictionSet::new(query, futures)?, mmgt));
    }
    Ok(samples)
}

/// Replace each sample's predictions with its MMGT futures, perturbed.
fn perturbed_samples(
    samples: &[(PredictionSet, MmgtSet)],
    mut perturb: impl FnMut(usize, usize, &[Pose]) -> Result<Vec<Pose>>,
) -> Result<Vec<(PredictionSet, MmgtSet)>> {
    samples
        .iter()
        .enumerate()
        .map(|(si, (set, mmgt))| {
            let futures: Vec<Vec<Pose>> = mmgt
                .members
                .iter()
                .enumerate()
                .map(|(fi, m)| perturb(si, fi, &m.future))
                .collect::<Result<_>>()?;
            let replaced = PredictionSet::new(set.target.clone(), futures)?;
            Ok((replaced, mmgt.clone()))
        })
        .collect()
}

/// Run one perturbation experiment: per level, corrupt the MMGT futures,
/// use them as predictions, and score. The corpus is needed only by the
/// mismatch kind (to splice pasts and futures and mine fresh MMGT sets).
pub fn run_noise_sweep(
    pipeline: &FittedPipeline,
    corpus: &MotionCorpus,
    samples: &[(PredictionSet, MmgtSet)],
    spec: &PerturbSpec,
) -> Result<SweepResult> {
    spec.validate()?;
    match spec.kind {
        PerturbKind::JointNoise => {
            let mut levels = Vec::new();
            for (li, &sigma) in spec.sigma_grid.iter().enumerate() {
                let perturbed = perturbed_samples(samples, |si, fi, f| {
                    inject_joint_noise(f, sigma, stage_seed(spec.seed, &format!("noise/{li}/{si}/{fi}")))
                })?;
                let report = score_dataset(pipeline, &perturbed)?;
                levels.push(level_from_report(sigma, format!("sigma={sigma}"), &report));
            }
            Ok(SweepResult { kind: "joint_noise".into(), levels })
        }
        PerturbKind::BoneScale => {
            let bones = pipeline.skeleton.bones().len();
            let mut levels = Vec::new();
            for (li, &factor) in spec.scale_grid.iter().enumerate() {
                let perturbed = perturbed_samples(samples, |si, fi, f| {
                    let mut rng =
                        stage_rng(spec.seed, &format!("bone/{li}/{si}/{fi}"));
                    let bone = rng.gen_range(0..bones);
                    scale_bone(f, &pipeline.skeleton, &[bone], factor)
                })?;
                let report = score_dataset(pipeline, &perturbed)?;
                levels.push(level_from_report(factor, format!("factor={factor}"), &report));
            }
            Ok(SweepResult { kind: "bone_scale".into(), levels })
        }
        PerturbKind::Mismatch => {
            let b = samples
                .first()
                .map(|(s, _)| s.target.past.len())
                .ok_or_else(|| Error::EmptyInput("mismatch sweep needs at least one sample".into()))?;
            let t = pipeline.config.window.future_frames;
            let buckets = make_mismatched(corpus, b, t, &spec.bucket_edges, spec.per_bucket, spec.seed)?;
            let index = MmgtIndex::new(corpus, &pipeline.config.mmgt, t)?;
            let mut levels = Vec::new();
            for bucket in &buckets {
                let mut level_samples = Vec::new();
                for (pi, pair) in bucket.pairs.iter().enumerate() {
                    let (pt, p_start) = pair.past_ref;
                    let gt_start = p_start + b;
                    let mut query = MotionSequence::new(
                        corpus.skeleton.clone(),
                        corpus.frame_rate,
                        format!("mismatch-{}-{pi}", bucket.lo),
                        pair.past.clone(),
                        corpus.tracks[pt].frames[gt_start..gt_start + t].to_vec(),
                    )?;
                    query.origin = Some((pt, gt_start - 1));
                    let mmgt = index.query(&query)?;
                    let set = PredictionSet::new(query, vec![pair.future.clone()])?;
                    level_samples.push((set, mmgt));
                }
                let mid = 0.5 * (bucket.lo + bucket.hi);
                let label = format!("disc=[{},{})", bucket.lo, bucket.hi);
                if level_samples.is_empty() {
                    levels.push(SweepLevel {
                        level: mid,
                        label,
                        mmcm: 0.0,
                        c: 0.0,
                        v: 0.0,
                        apd: None,
                        mmade: 0.0,
                        mmfde: 0.0,
                        sample_count: 0,
                        flagged: true,
                        note: format!("bucket unfillable: 0 of {} pairs", bucket.requested),
                    });
                    continue;
                }
                let report = score_dataset(pipeline, &level_samples)?;
                let mut level = level_from_report(mid, label, &report);
                if bucket.short() {
                    level.flagged = true;
                    let note = format!("bucket short: {} of {} pairs", bucket.pairs.len(), bucket.requested);
                    level.note = if level.note.is_empty() { note } else { format!("{}; {note}", level.note) };
                }
                levels.push(level);
            }
            Ok(SweepResult { kind: "mismatch".into(), levels })
        }
    }
}

/// Which predictions to drop at threshold `v_percent`: those assigned to
/// modes holding ≤ v% of all predictions (dataset-wide count). Abnormal
/// predictions belong to no mode and are never dropped by this rule.
pub fn removal_mask(labels: &[Vec<ModeLabel>], v_percent: f64) -> Vec<Vec<bool>> {
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    let mut total = 0usize;
    for sample in labels {
        for l in sample {
            total += 1;
            if let Some(m) = l.id() {
                *counts.entry(m).or_insert(0) += 1;
            }
        }
    }
    labels
        .iter()
        .map(|sample| {
            sample
                .iter()
                .map(|l| match l.id() {
                    Some(m) => {
                        let share = 100.0 * counts[&m] as f64 / total as f64;
                        share <= v_percent
                    }
                    None => false,
                })
                .collect()
        })
        .collect()
}

/// Sweep rare-mode removal: predictions start as all MMGT futures; at each
/// threshold v, predictions living in modes with ≤ v% of all predictions
/// are removed and the rest rescored. A sample that loses every prediction
/// drops out of that level (the level is flagged).
pub fn run_rare_mode_removal(
    pipeline: &FittedPipeline,
    samples: &[(PredictionSet, MmgtSet)],
    percent_grid: &[f64],
) -> Result<SweepResult> {
    if percent_grid.is_empty() || percent_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("percent grid must be non-empty and strictly increasing".into()));
    }
    // base predictions = the MMGT futures; assign each once
    let base = perturbed_samples(samples, |_, _, f| Ok(f.to_vec()))?;
    let labels: Vec<Vec<ModeLabel>> = base
        .iter()
        .map(|(set, _)| {
            set.futures
                .iter()
                .map(|f| Ok(pipeline.assign_mode(&set.target.past, f)?.label))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut levels = Vec::new();
    for &v in percent_grid {
        let mask = removal_mask(&labels, v);
        let mut kept_samples = Vec::new();
        let mut emptied = 0usize;
        for ((set, mmgt), drop) in base.iter().zip(&mask) {
            let futures: Vec<Vec<Pose>> = set
                .futures
                .iter()
                .zip(drop)
                .filter(|(_, &d)| !d)
                .map(|(f, _)| f.clone())
                .collect();
            if futures.is_empty() {
                emptied += 1;
                continue;
            }
            kept_samples.push((PredictionSet::new(set.target.clone(), futures)?, mmgt.clone()));
        }
        let label = format!("v={v}%");
        if kept_samples.is_empty() {
            levels.push(SweepLevel {
                level: v,
                label,
                mmcm: 0.0,
                c: 0.0,
                v: 0.0,
                apd: None,
                mmade: 0.0,
                mmfde: 0.0,
                sample_count: 0,
                flagged: true,
                note: format!("all {} samples lost every prediction", base.len()),
            });
            continue;
        }
        let report = score_dataset(pipeline, &kept_samples)?;
        let mut level = level_from_report(v, label, &report);
        if emptied > 0 {
            level.flagged = true;
            let note = format!("{emptied} samples lost every prediction and were dropped");
            level.note = if level.note.is_empty() { note } else { format!("{}; {note}", level.note) };
        }
        levels.push(level);
    }
    Ok(SweepResult { kind: "rare_mode_removal".into(), levels })
}

/// Sweep noisy additions: predictions start as all MMGT futures; each level
/// appends the first `count` entries of a pregenerated pool of σ-noised
/// futures, so consecutive levels are strict supersets and the min-based
/// error metrics can only improve or stay equal.
pub fn run_noisy_addition(
    pipeline: &FittedPipeline,
    samples: &[(PredictionSet, MmgtSet)],
    counts: &[usize],
    sigma: f64,
    seed: u64,
) -> Result<SweepResult> {
    if counts.is_empty() || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("count grid must be non-empty and strictly increasing".into()));
    }
    let max_count = *counts.last().unwrap();
    let base = perturbed_samples(samples, |_, _, f| Ok(f.to_vec()))?;
    // nested pools: noisy copies of the members, cycling through them
    let pools: Vec<Vec<Vec<Pose>>> = base
        .iter()
        .enumerate()
        .map(|(si, (set, _))| {
            (0..max_count)
                .map(|i| {
                    let donor = &set.futures[i % set.futures.len()];
                    inject_joint_noise(donor, sigma, stage_seed(seed, &format!("noisy-add/{si}/{i}")))
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut levels = Vec::new();
    for &count in counts {
        let level_samples: Vec<(PredictionSet, MmgtSet)> = base
            .iter()
            .zip(&pools)
            .map(|((set, mmgt), pool)| {
                let mut futures = set.futures.clone();
                futures.extend(pool[..count].iter().cloned());
                Ok((PredictionSet::new(set.target.clone(), futures)?, mmgt.clone()))
            })
            .collect::<Result<_>>()?;
        let report = score_dataset(pipeline, &level_samples)?;
        levels.push(level_from_report(count as f64, format!("added={count}"), &report));
    }
    Ok(SweepResult { kind: "noisy_addition".into(), levels })
}

/// Normalized degradation of a metric series over sweep levels: 0 at the
/// level-0 value, 1 at the worst value reached, monotone in between for
/// monotone series. `higher_is_better` picks which direction is "worse".
/// A flat series degrades nowhere (all zeros).
pub fn normalized_degradation(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let base = values[0];
    let worst = if higher_is_better {
        values.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let range = (worst - base).abs();
    if range == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - base).abs() / range).collect()
}

// ---------------------------------------------------------------------------
// hyperparameter ranking sweep
// ---------------------------------------------------------------------------

/// One grid point of the ranking sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub layout_dim: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Degenerate clustering at this grid point; excluded from ranking
    /// comparisons.
    pub flagged: bool,
    /// (method name, dataset MMCM), in input method order.
    pub scores: Vec<(String, f64)>,
    /// Method names sorted best-first (ties alphabetical).
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub rows: Vec<RankRow>,
}

impl RankingTable {
    /// CSV: one row per (grid point, method) with score and rank.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layout_dim,min_cluster_size,min_samples,flagged,method,mmcm,rank\n");
        for r in &self.rows {
            for (name, score) in &r.scores {
                let rank = r.ranking.iter().position(|n| n == name).map(|p| p + 1).unwrap_or(0);
                s.push_str(&format!(
                    "{},{},{},{},{name},{score},{rank}\n",
                    r.layout_dim, r.min_cluster_size, r.min_samples, r.flagged
                ));
            }
        }
        s
    }

    /// The distinct rankings among non-degenerate rows (one entry means the
    /// ranking is stable across the whole grid).
    pub fn distinct_rankings(&self) -> Vec<Vec<String>> {
        let mut seen: Vec<Vec<String>> = Vec::new();
        for r in self.rows.iter().filter(|r| !r.flagged) {
            if !seen.contains(&r.ranking) {
                seen.push(r.ranking.clone());
            }
        }
        seen
    }
}

/// Surrogate "methods" with controllable coverage: method `top-j` predicts
/// only the futures of each sample's `j` most-populated MMGT modes (by the
/// reference pipeline's assignment), so larger `j` covers more modes by
/// construction. A method never returns zero predictions: samples with
/// fewer modes contribute their best-populated mode's futures.
pub fn surrogate_methods(
    pipeline: &FittedPipeline,
    samples: &[(PredictionSet, MmgtSet)],
    top_js: &[usize],
) -> Result<Vec<(String, Vec<PredictionSet>)>> {
    if top_js.is_empty() || top_js.iter().any(|&j| j == 0) {
        return Err(Error::InvalidArgument("top-j list must be non-empty with j ≥ 1".into()));
    }
    // per sample: mode of each MMGT future under the reference pipeline
    let mut per_sample: Vec<Vec<(usize, ModeLabel)>> = Vec::with_capacity(samples.len());
    for (set, mmgt) in samples {
        let labels: Vec<(usize, ModeLabel)> = mmgt
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| Ok((i, pipeline.assign_mode(&set.target.past, &m.future)?.label)))
            .collect::<Result<_>>()?;
        per_sample.push(labels);
    }
    let mut methods = Vec::with_capacity(top_js.len());
    for &j in top_js {
        let mut sets = Vec::with_capacity(samples.len());
        for ((set, mmgt), labels) in samples.iter().zip(&per_sample) {
            // population per mode within this sample
            let mut counts = std::collections::BTreeMap::<usize, usize>::new();
            for (_, l) in labels {
                if let Some(m) = l.id() {
                    *counts.entry(m).or_insert(0) += 1;
                }
            }
            // top-j modes: by population descending, ties toward lower id
            let mut order: Vec<(usize, usize)> = counts.into_iter().collect();
            order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let keep: std::collections::BTreeSet<usize> =
                order.iter().take(j).map(|&(m, _)| m).collect();
            let mut futures: Vec<Vec<Pose>> = labels
                .iter()
                .filter(|(_, l)| l.id().is_some_and(|m| keep.contains(&m)))
                .map(|&(i, _)| mmgt.members[i].future.clone())
                .collect();
            if futures.is_empty() {
                // every member abnormal: fall back to the full member list
                futures = mmgt.members.iter().map(|m| m.future.clone()).collect();
            }
            sets.push(PredictionSet::new(set.target.clone(), futures)?);
        }
        methods.push((format!("top-{j}"), sets));
    }
    Ok(methods)
}

/// Refit (layout, clustering, τ) at every grid point and rank the methods
/// by dataset MMCM. The encoder is fitted once; layouts are cached per
/// dimension. MMGT sets are mined once per method sample and reused across
/// the grid.
pub fn run_hyperparameter_sweep(
    corpus: &MotionCorpus,
    methods: &[(String, Vec<PredictionSet>)],
    dims: &[usize],
    cluster_grid: &[ClusterConfig],
    base: &PipelineConfig,
) -> Result<RankingTable> {
    if methods.len() < 2 {
        return Err(Error::InvalidArgument("ranking needs at least two methods".into()));
    }
    if dims.is_empty() || cluster_grid.is_empty() {
        return Err(Error::InvalidArgument("ranking sweep needs a non-empty grid".into()));
    }
    base.validate()?;
    let (embedder0, _) = crate::embedding::fit_embedder(corpus, &base.window, &base.encoder, &base.layout)?;
    let (windows, _) = crate::embedding::mine_windows_with_refs(corpus, &base.window)?;
    let codes = embedder0.encoder.encode_batch(&windows)?;

    // MMGT sets per method sample, shared across all grid points
    let t = base.window.future_frames;
    let index = MmgtIndex::new(corpus, &base.mmgt, t)?;
    let mut method_samples: Vec<Vec<(PredictionSet, MmgtSet)>> = Vec::with_capacity(methods.len());
    for (_, sets) in methods {
        let paired: Vec<(PredictionSet, MmgtSet)> = sets
            .iter()
            .map(|s| Ok((s.clone(), index.query(&s.target)?)))
            .collect::<Result<_>>()?;
        method_samples.push(paired);
    }

    let mut rows = Vec::new();
    for &dim in dims {
        let layout = if dim == embedder0.layout.dim() {
            embedder0.layout.clone()
        } else {
            let cfg = crate::layout::LayoutConfig { d: dim, ..base.layout.clone() };
            crate::layout::fit_layout(&codes, &cfg)?
        };
        let embedder = Embedder {
            window: base.window,
            encoder: embedder0.encoder.clone(),
            layout,
        };
        for cc in cluster_grid {
            let table = cluster_layout(embedder.layout.training_layout(), cc)?;
            let mut row = RankRow {
                layout_dim: dim,
                min_cluster_size: cc.min_cluster_size,
                min_samples: cc.min_samples,
                flagged: table.is_degenerate(),
                scores: Vec::new(),
                ranking: Vec::new(),
            };
            if !table.is_degenerate() {
                let tau = calibrate_tau(&embedder, &table, corpus, &base.mmgt, base.margin, base.calibration_cap)?;
                let config = PipelineConfig {
                    layout: crate::layout::LayoutConfig { d: dim, ..base.layout.clone() },
                    cluster: *cc,
                    ..base.clone()
                };
                let pipeline = FittedPipeline {
                    fingerprint: config.fingerprint(),
                    config,
                    embedder: embedder.clone(),
                    modes: table,
                    tau,
                    skeleton: (*corpus.skeleton).clone(),
                    frame_rate: corpus.frame_rate,
                };
                for ((name, _), paired) in methods.iter().zip(&method_samples) {
                    let report = score_dataset(&pipeline, paired)?;
                    row.scores.push((name.clone(), report.dataset.mmcm));
                }
                let mut ranking: Vec<(String, f64)> = row.scores.clone();
                ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                row.ranking = ranking.into_iter().map(|(n, _)| n).collect();
            }
            rows.push(row);
        }
    }
    Ok(RankingTable { rows })
}
