//! Stage-2 evaluation: coverage C, validity V, their harmonic mean, the
//! displacement baselines, and dataset aggregation.
//!
//! A sample is one conditioning past with `I` predicted futures and `K`
//! multimodal ground truths. Both sides pass through the same assignment
//! path: the valid-mode set is the set of mode ids the MMGTs land in
//! (abnormal MMGTs contribute nothing), `C` is the fraction of valid modes
//! covered by at least one prediction, and `V` is the fraction of
//! predictions landing inside a valid mode. `MMCM = 2CV/(C+V)` (0 when both
//! are 0). Dataset-level numbers are arithmetic means of the per-sample
//! values — the mean of the harmonic means, not the harmonic mean of the
//! means; the report carries the latter too, clearly labeled, because the
//! two genuinely differ.
//!
//! All displacement baselines (APD, ADE, FDE, MMADE, MMFDE) are measured on
//! root-relative poses, the convention used module-wide.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::mmgt::MmgtSet;
use crate::motion::{flatten, root_center, Pose, PredictionSet};
use crate::pipeline::{FittedPipeline, ModeAssignment, ModeLabel};

/// Coverage rate: `|uniq(M ∩ M̂)| / |uniq(M)|`, where `M` are the MMGT
/// labels and `M̂` the prediction labels, abnormal entries never counting.
/// Returns `(C, degenerate)` — degenerate when no MMGT landed in any mode,
/// which forces `C = 0`.
pub fn coverage_rate(mmgt_labels: &[ModeLabel], pred_labels: &[ModeLabel]) -> (f64, bool) {
    let valid: BTreeSet<usize> = mmgt_labels.iter().filter_map(ModeLabel::id).collect();
    if valid.is_empty() {
        return (0.0, true);
    }
    let predicted: BTreeSet<usize> = pred_labels.iter().filter_map(ModeLabel::id).collect();
    let covered = valid.intersection(&predicted).count();
    (covered as f64 / valid.len() as f64, false)
}

/// Validity rate: the fraction of the `I` predictions whose label is one of
/// the valid modes. Abnormal predictions never count.
pub fn validity_rate(mmgt_labels: &[ModeLabel], pred_labels: &[ModeLabel]) -> Result<f64> {
    if pred_labels.is_empty() {
        return Err(Error::EmptyInput("validity rate of zero predictions".into()));
    }
    let valid: BTreeSet<usize> = mmgt_labels.iter().filter_map(ModeLabel::id).collect();
    let inside = pred_labels
        .iter()
        .filter(|l| l.id().is_some_and(|m| valid.contains(&m)))
        .count();
    Ok(inside as f64 / pred_labels.len() as f64)
}

/// Harmonic mean of coverage and validity; 0 when both are 0.
pub fn mmcm(c: f64, v: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&v));
    if c + v == 0.0 {
        0.0
    } else {
        2.0 * c * v / (c + v)
    }
}

fn flat_root_relative(frames: &[Pose]) -> Result<Vec<f64>> {
    let centered: Vec<Pose> = frames.iter().map(root_center).collect();
    flatten(&centered)
}

/// Per-frame root-relative displacement trace between two futures:
/// element `t` is the ℓ₂ norm of the whole-pose difference at frame `t`.
fn frame_displacements(a: &[Pose], b: &[Pose]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "future lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    a.iter()
        .zip(b)
        .map(|(pa, pb)| {
            let fa = flat_root_relative(std::slice::from_ref(pa))?;
            let fb = flat_root_relative(std::slice::from_ref(pb))?;
            if fa.len() != fb.len() {
                return Err(Error::ShapeMismatch("keypoint counts differ".into()));
            }
            Ok(math::l2_dist(&fa, &fb))
        })
        .collect()
}

/// Average pairwise distance across the predicted futures: the mean over
/// all unordered pairs of the ℓ₂ distance between flattened root-relative
/// futures. Undefined (absent) below two predictions.
pub fn apd(futures: &[Vec<Pose>]) -> Result<Option<f64>> {
    if futures.len() < 2 {
        return Ok(None);
    }
    let flat: Vec<Vec<f64>> = futures
        .iter()
        .map(|f| flat_root_relative(f))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..flat.len() {
        for j in (i + 1)..flat.len() {
            if flat[i].len() != flat[j].len() {
                return Err(Error::ShapeMismatch("prediction widths differ".into()));
            }
            total += math::l2_dist(&flat[i], &flat[j]);
            pairs += 1;
        }
    }
    Ok(Some(total / pairs as f64))
}

/// Displacement errors against the single ground-truth future, keeping only
/// the best prediction: ADE is the minimum over predictions of the mean
/// per-frame pose distance, FDE the minimum of the final-frame distance.
pub fn ade_fde(futures: &[Vec<Pose>], gt_future: &[Pose]) -> Result<(f64, f64)> {
    if futures.is_empty() {
        return Err(Error::EmptyInput("ADE/FDE of zero predictions".into()));
    }
    if gt_future.is_empty() {
        return Err(Error::EmptyInput("ADE/FDE against an empty ground truth".into()));
    }
    let mut best_ade = f64::INFINITY;
    let mut best_fde = f64::INFINITY;
    for f in futures {
        let disp = frame_displacements(f, gt_future)?;
        best_ade = best_ade.min(math::mean(&disp));
        best_fde = best_fde.min(*disp.last().unwrap());
    }
    Ok((best_ade, best_fde))
}

/// Multimodal displacement errors: for each MMGT future take the closest
/// prediction (per metric), then average over the `K` MMGTs. Monotone
/// non-increasing as predictions are added.
pub fn mmade_mmfde(futures: &[Vec<Pose>], mmgt: &MmgtSet) -> Result<(f64, f64)> {
    if mmgt.members.is_empty() {
        return Err(Error::EmptyInput(format!(
            "MMADE/MMFDE with an empty MMGT set for query {}",
            mmgt.query.source_id
        )));
    }
    let mut ade_sum = 0.0;
    let mut fde_sum = 0.0;
    for member in &mmgt.members {
        let (a, f) = ade_fde(futures, &member.future)?;
        ade_sum += a;
        fde_sum += f;
    }
    let k = mmgt.members.len() as f64;
    Ok((ade_sum / k, fde_sum / k))
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub c: f64,
    pub v: f64,
    pub mmcm: f64,
    /// Mode ids the MMGTs landed in (the valid-mode set), ascending.
    pub valid_modes: Vec<usize>,
    pub prediction_assignments: Vec<ModeAssignment>,
    pub mmgt_assignments: Vec<ModeAssignment>,
    /// Prediction count `I` and MMGT count `K`.
    pub i: usize,
    pub k: usize,
    /// True when every MMGT was abnormal: C = V = MMCM = 0 by convention.
    pub degenerate: bool,
    /// Absent below two predictions.
    pub apd: Option<f64>,
    pub ade: f64,
    pub fde: f64,
    pub mmade: f64,
    pub mmfde: f64,
}

/// Evaluate one prediction set against its MMGT set.
pub fn score_sample(
    pipeline: &FittedPipeline,
    sample: &PredictionSet,
    mmgt: &MmgtSet,
) -> Result<SampleScore> {
    if mmgt.query.past != sample.target.past {
        return Err(Error::InvalidArgument(format!(
            "MMGT set (query {}) was mined for a different past than sample {}",
            mmgt.query.source_id, sample.target.source_id
        )));
    }
    pipeline.check_compatible(&sample.target.skeleton, sample.target.future.len())?;

    let past = &sample.target.past;
    let prediction_assignments: Vec<ModeAssignment> = sample
        .futures
        .iter()
        .map(|f| pipeline.assign_mode(past, f))
        .collect::<Result<_>>()?;
    let mmgt_assignments: Vec<ModeAssignment> = mmgt
        .members
        .iter()
        .map(|m| pipeline.assign_mode(past, &m.future))
        .collect::<Result<_>>()?;

    let pred_labels: Vec<ModeLabel> = prediction_assignments.iter().map(|a| a.label).collect();
    let mmgt_labels: Vec<ModeLabel> = mmgt_assignments.iter().map(|a| a.label).collect();
    let (c, degenerate) = coverage_rate(&mmgt_labels, &pred_labels);
    let v = if degenerate { 0.0 } else { validity_rate(&mmgt_labels, &pred_labels)? };
    let m = if degenerate { 0.0 } else { mmcm(c, v) };
    let valid_modes: Vec<usize> = mmgt_labels
        .iter()
        .filter_map(ModeLabel::id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let apd = apd(&sample.futures)?;
    let (ade, fde) = ade_fde(&sample.futures, &sample.target.future)?;
    let (mmade, mmfde) = mmade_mmfde(&sample.futures, mmgt)?;

    Ok(SampleScore {
        id: sample.target.source_id.clone(),
        c,
        v,
        mmcm: m,
        valid_modes,
        prediction_assignments,
        mmgt_assignments,
        i: sample.futures.len(),
        k: mmgt.members.len(),
        degenerate,
        apd,
        ade,
        fde,
        mmade,
        mmfde,
    })
}

/// Dataset-level means. `mmcm` is the arithmetic mean of the per-sample
/// harmonic means; `harmonic_of_mean_c_v` applies the harmonic formula to
/// the averaged C and V instead — reported for comparison because the two
/// aggregations disagree in general.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub mmcm: f64,
    pub c: f64,
    pub v: f64,
    pub harmonic_of_mean_c_v: f64,
    /// Mean over the samples where APD is defined; absent if none.
    pub apd: Option<f64>,
    pub ade: f64,
    pub fde: f64,
    pub mmade: f64,
    pub mmfde: f64,
    pub sample_count: usize,
    pub degenerate_count: usize,
}

/// Wall-clock accounting, kept out of the deterministic report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub per_sample_s: Vec<f64>,
    pub total_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
}

/// Full evaluation result: per-sample scores, dataset summary, warnings,
/// and timings. [`MetricReport::to_json`] deliberately omits the timings so
/// repeated runs of the same inputs produce byte-identical documents; the
/// timings export separately via [`Timings::to_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: Vec<SampleScore>,
    pub dataset: DatasetSummary,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub timings: Timings,
}

fn mean_of(scores: &[SampleScore], f: impl Fn(&SampleScore) -> f64) -> f64 {
    math::mean(&scores.iter().map(f).collect::<Vec<_>>())
}

/// Aggregate per-sample scores into the dataset summary (pure; separated
/// from the scoring loop so the aggregation rules are testable alone).
pub fn aggregate(scores: &[SampleScore]) -> DatasetSummary {
    let c = mean_of(scores, |s| s.c);
    let v = mean_of(scores, |s| s.v);
    let apds: Vec<f64> = scores.iter().filter_map(|s| s.apd).collect();
    DatasetSummary {
        mmcm: mean_of(scores, |s| s.mmcm),
        c,
        v,
        harmonic_of_mean_c_v: mmcm(c, v),
        apd: if apds.is_empty() { None } else { Some(math::mean(&apds)) },
        ade: mean_of(scores, |s| s.ade),
        fde: mean_of(scores, |s| s.fde),
        mmade: mean_of(scores, |s| s.mmade),
        mmfde: mean_of(scores, |s| s.mmfde),
        sample_count: scores.len(),
        degenerate_count: scores.iter().filter(|s| s.degenerate).count(),
    }
}

/// Score every sample (in parallel — each sample is pure given the frozen
/// pipeline) and assemble the report.
pub fn score_dataset(
    pipeline: &FittedPipeline,
    samples: &[(PredictionSet, MmgtSet)],
) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("scoring an empty sample list".into()));
    }
    let start = Instant::now();
    let scored: Vec<(SampleScore, f64)> = samples
        .par_iter()
        .map(|(set, mmgt)| {
            let t0 = Instant::now();
            let score = score_sample(pipeline, set, mmgt)?;
            Ok((score, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let total_s = start.elapsed().as_secs_f64();
    let (scores, per_sample_s): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let mut warnings = Vec::new();
    for s in &scores {
        if s.degenerate {
            warnings.push(format!(
                "sample {}: every MMGT was abnormal; C = V = MMCM = 0",
                s.id
            ));
        }
        if s.apd.is_none() {
            warnings.push(format!("sample {}: APD undefined with I = {}", s.id, s.i));
        }
    }
    let timings = Timings {
        mean_s: math::mean(&per_sample_s),
        max_s: per_sample_s.iter().cloned().fold(0.0, f64::max),
        per_sample_s,
        total_s,
    };
    Ok(MetricReport { dataset: aggregate(&scores), samples: scores, warnings, timings })
}

impl MetricReport {
    /// Deterministic JSON document (timings excluded).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-row CSV summary in the conventional column order.
    pub fn to_csv(&self) -> String {
        let d = &self.dataset;
        let apd = d.apd.map_or(String::from(""), |v| v.to_string());
        format!(
            "mmcm,c,v,apd,ade,fde,mmade,mmfde\n{},{},{},{apd},{},{},{},{}\n",
            d.mmcm, d.c, d.v, d.ade, d.fde, d.mmade, d.mmfde
        )
    }
}

impl Timings {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timings serialize")
    }
}
