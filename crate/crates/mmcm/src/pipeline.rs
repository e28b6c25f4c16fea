//! The fitted evaluation pipeline: embedder + modes + the abnormality
//! threshold τ, with a versioned on-disk artifact.
//!
//! Fitting runs the whole Stage-1 chain on a corpus — window mining,
//! autoencoder, neighbor-graph layout, density clustering — then calibrates
//! τ as `(1 + margin) ×` the largest nearest-centroid distance observed when
//! the assignment procedure is applied to the corpus's own (normal) windows.
//! The calibration set contains every mined aligned window **and** the
//! composite windows (query tail ++ matched-future) for a deterministic,
//! capped subset of query positions, so both kinds of window seen at
//! evaluation time are represented. Because calibration measures distances
//! with the very same assignment path used later, re-assigning a training
//! window can never be flagged abnormal: its distance is one of the maxima τ
//! was lifted above, and the τ comparison is strict.
//!
//! The saved artifact is bit-exact: every f64 round-trips through its IEEE
//! bits, and a fingerprint over the full hyperparameter set is verified on
//! load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{fit_modes, ClusterConfig, ModeTable};
use crate::embedding::{fit_embedder, mine_windows_with_refs, window_vector, Embedder, WindowSpec};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::layout::LayoutConfig;
use crate::math::{self, Matrix};
use crate::mmgt::{MmgtConfig, MmgtIndex};
use crate::motion::{MotionCorpus, MotionSequence, Pose, Skeleton};

/// Where a query embedding landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    Mode(usize),
    /// Farther than τ from every mode centroid.
    Abnormal,
}

impl ModeLabel {
    pub fn is_abnormal(&self) -> bool {
        matches!(self, ModeLabel::Abnormal)
    }

    /// Dense id for normal labels, `None` for abnormal.
    pub fn id(&self) -> Option<usize> {
        match self {
            ModeLabel::Mode(m) => Some(*m),
            ModeLabel::Abnormal => None,
        }
    }
}

/// One query's assignment: the label, the distance that produced it, and
/// the layout-space point for plotting/audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAssignment {
    pub label: ModeLabel,
    pub nearest_centroid_distance: f64,
    pub point: Vec<f64>,
}

/// Every hyperparameter of the five fitting stages. The fingerprint hashes
/// exactly this struct, so two pipelines agree on configuration iff their
/// fingerprints match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    pub encoder: EncoderConfig,
    pub layout: LayoutConfig,
    pub cluster: ClusterConfig,
    pub mmgt: MmgtConfig,
    /// τ headroom above the observed calibration maximum.
    pub margin: f64,
    /// Upper bound on query positions expanded into composite calibration
    /// windows (aligned windows are always all included).
    pub calibration_cap: usize,
}

impl PipelineConfig {
    /// Preset for the 17-keypoint convention: 5-frame tail, 0.5 m match
    /// threshold, clusters of ≥ 15. `future_frames` is the prediction
    /// horizon `T`; `master_seed` fans out to per-stage seeds.
    pub fn h36m(future_frames: usize, master_seed: u64) -> Self {
        PipelineConfig {
            window: WindowSpec::new(5, future_frames),
            encoder: EncoderConfig { seed: math::stage_seed(master_seed, "encoder"), ..EncoderConfig::default() },
            layout: LayoutConfig { seed: math::stage_seed(master_seed, "layout"), ..LayoutConfig::default() },
            cluster: ClusterConfig::h36m(),
            mmgt: MmgtConfig::h36m(),
            margin: 0.1,
            calibration_cap: 256,
        }
    }

    /// Preset for the 21-keypoint convention: 0.4 m threshold, clusters of
    /// ≥ 50.
    pub fn amass(future_frames: usize, master_seed: u64) -> Self {
        PipelineConfig {
            cluster: ClusterConfig::amass(),
            mmgt: MmgtConfig::amass(),
            ..PipelineConfig::h36m(future_frames, master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.encoder.validate()?;
        self.layout.validate()?;
        self.cluster.validate()?;
        self.mmgt.validate()?;
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::Config(format!("margin must be ≥ 0, got {}", self.margin)));
        }
        if self.calibration_cap == 0 {
            return Err(Error::Config("calibration_cap must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical serialization of this configuration.
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(PIPE_MAGIC);
        h.update(PIPE_VERSION.to_le_bytes());
        h.update(doc.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A calibrated pipeline, ready to assign modes and score predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub config: PipelineConfig,
    pub embedder: Embedder,
    pub modes: ModeTable,
    /// Abnormality threshold in layout space; strictly positive.
    pub tau: f64,
    /// `config.fingerprint()`, fixed at fit time and re-verified on load.
    pub fingerprint: String,
    pub skeleton: Skeleton,
    pub frame_rate: f64,
}

const PIPE_MAGIC: &[u8; 8] = b"MMCMPIP\0";
const PIPE_VERSION: u16 = 1;

/// Fit the full Stage-1 chain on a corpus and calibrate τ.
pub fn fit_pipeline(corpus: &MotionCorpus, config: &PipelineConfig) -> Result<FittedPipeline> {
    config.validate()?;
    let (embedder, _refs) = fit_embedder(corpus, &config.window, &config.encoder, &config.layout)?;
    let modes = fit_modes(&embedder, corpus, &config.cluster)?;
    let tau = calibrate_tau(&embedder, &modes, corpus, &config.mmgt, config.margin, config.calibration_cap)?;
    Ok(FittedPipeline {
        fingerprint: config.fingerprint(),
        config: config.clone(),
        embedder,
        modes,
        tau,
        skeleton: (*corpus.skeleton).clone(),
        frame_rate: corpus.frame_rate,
    })
}

/// Nearest centroid by layout-space ℓ₂; ties resolve to the lower mode id.
pub(crate) fn nearest_centroid(point: &[f64], modes: &ModeTable) -> (usize, f64) {
    debug_assert!(!modes.modes.is_empty());
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for m in &modes.modes {
        let d = math::l2_dist(point, &m.centroid);
        if d < best_d {
            best_d = d;
            best = m.id;
        }
    }
    (best, best_d)
}

/// Label a layout point: abnormal iff strictly farther than τ from every
/// centroid, so a point at exactly τ stays normal.
pub(crate) fn assignment_from_point(point: Vec<f64>, modes: &ModeTable, tau: f64) -> ModeAssignment {
    let (id, dist) = nearest_centroid(&point, modes);
    let label = if dist > tau { ModeLabel::Abnormal } else { ModeLabel::Mode(id) };
    ModeAssignment { label, nearest_centroid_distance: dist, point }
}

/// τ = (1 + margin) × the maximum nearest-centroid distance over the
/// calibration windows: all aligned training windows, plus composite
/// (query-tail ++ matched-future) windows for up to `cap` evenly spaced
/// query positions.
pub fn calibrate_tau(
    embedder: &Embedder,
    modes: &ModeTable,
    corpus: &MotionCorpus,
    mmgt_cfg: &MmgtConfig,
    margin: f64,
    cap: usize,
) -> Result<f64> {
    if modes.modes.is_empty() {
        return Err(Error::DegenerateClustering("calibration needs at least one mode".into()));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be ≥ 0, got {margin}")));
    }
    let (windows, refs) = mine_windows_with_refs(corpus, &embedder.window)?;
    let mut max_dist: f64 = 0.0;
    let mut consume = |points: &Matrix| {
        for r in 0..points.rows {
            let (_, d) = nearest_centroid(points.row(r), modes);
            max_dist = max_dist.max(d);
        }
    };
    consume(&embedder.embed_window_batch(&windows)?);

    // composite windows for a deterministic, evenly spaced query subset
    let n_p = embedder.window.past_tail_frames;
    let t = embedder.window.future_frames;
    let picks: Vec<usize> = if refs.len() <= cap {
        (0..refs.len()).collect()
    } else {
        (0..cap).map(|i| i * refs.len() / cap).collect()
    };
    let index = MmgtIndex::new(corpus, mmgt_cfg, t)?;
    let mut composites: Vec<Vec<f64>> = Vec::new();
    for &w in &picks {
        let r = refs[w];
        let track = &corpus.tracks[r.track];
        let split = r.start + n_p;
        let mut query = MotionSequence::new(
            corpus.skeleton.clone(),
            corpus.frame_rate,
            format!("calib-{w}"),
            track.frames[..split].to_vec(),
            track.frames[split..split + t].to_vec(),
        )?;
        query.origin = Some((r.track, split - 1));
        let set = index.query(&query)?;
        let tail = query.past_tail(n_p)?;
        for m in &set.members {
            let mut frames: Vec<Pose> = Vec::with_capacity(n_p + t);
            frames.extend_from_slice(tail);
            frames.extend_from_slice(&m.future);
            composites.push(window_vector(&frames)?);
        }
    }
    if !composites.is_empty() {
        consume(&embedder.embed_window_batch(&Matrix::from_rows(&composites))?);
    }

    let tau = (1.0 + margin) * max_dist;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::DegenerateClustering(format!(
            "calibrated τ = {tau}; the layout has collapsed onto the centroids"
        )));
    }
    Ok(tau)
}

impl FittedPipeline {
    /// Assign a (past, future) query to a mode or to ABNORMAL.
    pub fn assign_mode(&self, past: &[Pose], future: &[Pose]) -> Result<ModeAssignment> {
        let point = self.embedder.embed(past, future)?;
        Ok(assignment_from_point(point, &self.modes, self.tau))
    }

    /// Check stored skeleton/horizon compatibility of an incoming sequence.
    pub fn check_compatible(&self, skeleton: &Skeleton, future_frames: usize) -> Result<()> {
        if *skeleton != self.skeleton {
            return Err(Error::ShapeMismatch(
                "prediction skeleton differs from the pipeline's training skeleton".into(),
            ));
        }
        if future_frames != self.config.window.future_frames {
            return Err(Error::ShapeMismatch(format!(
                "prediction horizon {future_frames} frames, pipeline expects {}",
                self.config.window.future_frames
            )));
        }
        Ok(())
    }

    /// Serialize to a versioned binary artifact (magic, version, payload).
    /// Every float survives bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(PIPE_MAGIC);
        bytes.extend_from_slice(&PIPE_VERSION.to_le_bytes());
        let payload = bincode::serialize(self)
            .map_err(|e| Error::InvalidArgument(format!("pipeline serialization failed: {e}")))?;
        bytes.extend_from_slice(&payload);
        crate::io::write_atomic(path, &bytes)
    }

    /// Load and verify a saved artifact: magic, version, and that the
    /// stored fingerprint still matches the stored configuration.
    pub fn load(path: &Path) -> Result<FittedPipeline> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let malformed = |offset: u64, detail: String| Error::Malformed {
            path: path.to_path_buf(),
            offset,
            detail,
        };
        if bytes.len() < 10 {
            return Err(malformed(0, format!("{} bytes is too short for a pipeline artifact", bytes.len())));
        }
        if &bytes[..8] != PIPE_MAGIC {
            return Err(malformed(0, "bad magic; not a pipeline artifact".into()));
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != PIPE_VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.to_path_buf(),
                found: version,
                supported: PIPE_VERSION,
            });
        }
        let pipeline: FittedPipeline = bincode::deserialize(&bytes[10..])
            .map_err(|e| malformed(10, format!("payload does not decode: {e}")))?;
        let expect = pipeline.config.fingerprint();
        if pipeline.fingerprint != expect {
            return Err(Error::FingerprintMismatch {
                artifact: pipeline.fingerprint.clone(),
                current: expect,
            });
        }
        Ok(pipeline)
    }
}
