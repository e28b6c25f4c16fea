//! Domain types and elementary geometry for skeletal motion.
//!
//! Poses are sets of 3-D keypoint coordinates in meters. All distances in
//! this crate operate on *root-relative* poses: global translation is
//! removed by subtracting the root keypoint (index 0 by convention) before
//! any metric or embedding sees the data. Vectorization order is fixed as
//! frame → keypoint → axis so serialized artifacts are portable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the root keypoint (the hip). Every skeleton in this crate is
/// rooted at keypoint 0; loaders reject bone lists that root elsewhere.
pub const ROOT: usize = 0;

/// A kinematic tree over keypoints. Bones are (parent, child) pairs; there
/// are exactly `keypoint_count − 1` of them and they form one connected tree
/// rooted at keypoint 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    keypoint_count: usize,
    bones: Vec<(usize, usize)>,
    names: Option<Vec<String>>,
    children: Vec<Vec<usize>>,
}

impl Skeleton {
    pub fn new(
        keypoint_count: usize,
        bones: Vec<(usize, usize)>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        if keypoint_count == 0 {
            return Err(Error::InvalidSkeleton("keypoint_count must be positive".into()));
        }
        if bones.len() != keypoint_count - 1 {
            return Err(Error::InvalidSkeleton(format!(
                "expected {} bones for {} keypoints, got {}",
                keypoint_count - 1,
                keypoint_count,
                bones.len()
            )));
        }
        if let Some(n) = &names {
            if n.len() != keypoint_count {
                return Err(Error::InvalidSkeleton(format!(
                    "{} names for {} keypoints",
                    n.len(),
                    keypoint_count
                )));
            }
        }
        let mut parent_of = vec![usize::MAX; keypoint_count];
        let mut children = vec![Vec::new(); keypoint_count];
        for &(p, c) in &bones {
            if p >= keypoint_count || c >= keypoint_count {
                return Err(Error::InvalidSkeleton(format!(
                    "bone ({p},{c}) out of range for {keypoint_count} keypoints"
                )));
            }
            if c == ROOT {
                return Err(Error::InvalidSkeleton("root keypoint 0 cannot be a child".into()));
            }
            if parent_of[c] != usize::MAX {
                return Err(Error::InvalidSkeleton(format!("keypoint {c} has two parents")));
            }
            parent_of[c] = p;
            children[p].push(c);
        }
        // Connectivity: every non-root keypoint must reach the root.
        for mut k in 1..keypoint_count {
            let mut hops = 0;
            while k != ROOT {
                k = parent_of[k];
                if k == usize::MAX {
                    return Err(Error::InvalidSkeleton("bone list is not connected".into()));
                }
                hops += 1;
                if hops > keypoint_count {
                    return Err(Error::InvalidSkeleton("bone list contains a cycle".into()));
                }
            }
        }
        Ok(Skeleton { keypoint_count, bones, names, children })
    }

    /// 17-keypoint layout: hip-rooted tree with legs, spine/head chain and
    /// two arms (the common mocap reduction for motion prediction work).
    pub fn h36m17() -> Arc<Skeleton> {
        let names = [
            "hip", "r_hip", "r_knee", "r_foot", "l_hip", "l_knee", "l_foot", "spine", "thorax",
            "neck", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist",
        ];
        let bones = vec![
            (0, 1),
            (1, 2),
            (2, 3),
            (0, 4),
            (4, 5),
            (5, 6),
            (0, 7),
            (7, 8),
            (8, 9),
            (9, 10),
            (8, 11),
            (11, 12),
            (12, 13),
            (8, 14),
            (14, 15),
            (15, 16),
        ];
        Arc::new(
            Skeleton::new(17, bones, Some(names.iter().map(|s| s.to_string()).collect()))
                .expect("preset skeleton is valid"),
        )
    }

    /// 21-keypoint layout: pelvis-rooted tree in SMPL joint order (first 21
    /// joints), the usual reduction for AMASS-style corpora.
    pub fn amass21() -> Arc<Skeleton> {
        let names = [
            "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2", "l_ankle",
            "r_ankle", "spine3", "l_foot", "r_foot", "neck", "l_collar", "r_collar", "head",
            "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist",
        ];
        let bones = vec![
            (0, 1),
            (0, 2),
            (0, 3),
            (1, 4),
            (2, 5),
            (3, 6),
            (4, 7),
            (5, 8),
            (6, 9),
            (7, 10),
            (8, 11),
            (9, 12),
            (9, 13),
            (9, 14),
            (12, 15),
            (13, 16),
            (14, 17),
            (16, 18),
            (17, 19),
            (18, 20),
        ];
        Arc::new(
            Skeleton::new(21, bones, Some(names.iter().map(|s| s.to_string()).collect()))
                .expect("preset skeleton is valid"),
        )
    }

    pub fn keypoint_count(&self) -> usize {
        self.keypoint_count
    }

    pub fn bones(&self) -> &[(usize, usize)] {
        &self.bones
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// All keypoints in the subtree rooted at `keypoint` (inclusive),
    /// discovered depth-first in bone-list order.
    pub fn subtree(&self, keypoint: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![keypoint];
        while let Some(k) = stack.pop() {
            out.push(k);
            for &c in self.children[k].iter().rev() {
                stack.push(c);
            }
        }
        out
    }
}

/// One body configuration: `keypoint_count` coordinates in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    coords: Vec<[f64; 3]>,
}

impl Pose {
    pub fn new(coords: Vec<[f64; 3]>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput("pose with zero keypoints".into()));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose coordinates".into()));
        }
        Ok(Pose { coords })
    }

    pub fn zero(keypoint_count: usize) -> Self {
        Pose { coords: vec![[0.0; 3]; keypoint_count] }
    }

    pub fn keypoint_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.coords
    }
}

/// Remove global translation: subtract the root keypoint from every
/// keypoint, leaving the root exactly at the origin. Idempotent; preserves
/// all intra-pose distances.
pub fn root_center(pose: &Pose) -> Pose {
    let r = pose.coords[ROOT];
    let coords = pose
        .coords
        .iter()
        .map(|c| [c[0] - r[0], c[1] - r[1], c[2] - r[2]])
        .collect();
    Pose { coords }
}

pub fn root_center_seq(frames: &[Pose]) -> Vec<Pose> {
    frames.iter().map(root_center).collect()
}

/// Euclidean distance between two poses (flattened coordinate difference).
/// Callers that need translation invariance center the inputs first; the
/// `*_centered` variant does it inline without allocating.
pub fn pose_distance(a: &Pose, b: &Pose) -> Result<f64> {
    if a.keypoint_count() != b.keypoint_count() {
        return Err(Error::ShapeMismatch(format!(
            "pose_distance: {} vs {} keypoints",
            a.keypoint_count(),
            b.keypoint_count()
        )));
    }
    let mut acc = 0.0;
    for (ca, cb) in a.coords.iter().zip(&b.coords) {
        for ax in 0..3 {
            let d = ca[ax] - cb[ax];
            acc += d * d;
        }
    }
    Ok(acc.sqrt())
}

/// `pose_distance` on root-centered copies of both poses.
pub fn pose_distance_centered(a: &Pose, b: &Pose) -> Result<f64> {
    if a.keypoint_count() != b.keypoint_count() {
        return Err(Error::ShapeMismatch(format!(
            "pose_distance: {} vs {} keypoints",
            a.keypoint_count(),
            b.keypoint_count()
        )));
    }
    let ra = a.coords[ROOT];
    let rb = b.coords[ROOT];
    let mut acc = 0.0;
    for (ca, cb) in a.coords.iter().zip(&b.coords) {
        for ax in 0..3 {
            let d = (ca[ax] - ra[ax]) - (cb[ax] - rb[ax]);
            acc += d * d;
        }
    }
    Ok(acc.sqrt())
}

/// Canonical vectorization: frame-major, then keypoint, then axis.
pub fn flatten(frames: &[Pose]) -> Result<Vec<f64>> {
    let Some(first) = frames.first() else {
        return Err(Error::EmptyInput("flatten of zero frames".into()));
    };
    let k = first.keypoint_count();
    let mut out = Vec::with_capacity(frames.len() * k * 3);
    for f in frames {
        if f.keypoint_count() != k {
            return Err(Error::ShapeMismatch(format!(
                "flatten: frame with {} keypoints in a {}-keypoint sequence",
                f.keypoint_count(),
                k
            )));
        }
        for c in &f.coords {
            out.extend_from_slice(c);
        }
    }
    Ok(out)
}

/// Inverse of [`flatten`] given the keypoint count.
pub fn unflatten(vec: &[f64], keypoint_count: usize) -> Result<Vec<Pose>> {
    let stride = keypoint_count * 3;
    if keypoint_count == 0 || vec.is_empty() || vec.len() % stride != 0 {
        return Err(Error::ShapeMismatch(format!(
            "unflatten: {} values do not divide into {}-keypoint frames",
            vec.len(),
            keypoint_count
        )));
    }
    Ok(vec
        .chunks_exact(stride)
        .map(|frame| Pose {
            coords: frame.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
        .collect())
}

/// Per-bone Euclidean lengths in bone-list order.
pub fn bone_lengths(pose: &Pose, skel: &Skeleton) -> Result<Vec<f64>> {
    if pose.keypoint_count() != skel.keypoint_count() {
        return Err(Error::ShapeMismatch(format!(
            "bone_lengths: pose has {} keypoints, skeleton {}",
            pose.keypoint_count(),
            skel.keypoint_count()
        )));
    }
    Ok(skel
        .bones()
        .iter()
        .map(|&(p, c)| {
            let a = pose.coords[p];
            let b = pose.coords[c];
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .collect())
}

/// A long continuous pose track, the unit of storage in a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub source_id: String,
    pub frames: Vec<Pose>,
}

/// Backing store for mode fitting and MMGT mining.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCorpus {
    pub skeleton: Arc<Skeleton>,
    pub frame_rate: f64,
    pub tracks: Vec<Track>,
}

impl MotionCorpus {
    pub fn new(skeleton: Arc<Skeleton>, frame_rate: f64, tracks: Vec<Track>) -> Result<Self> {
        if tracks.is_empty() {
            return Err(Error::EmptyInput("corpus with no tracks".into()));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("frame_rate {frame_rate}")));
        }
        for t in &tracks {
            if t.frames.is_empty() {
                return Err(Error::EmptyInput(format!("track {} has no frames", t.source_id)));
            }
            for f in &t.frames {
                if f.keypoint_count() != skeleton.keypoint_count() {
                    return Err(Error::ShapeMismatch(format!(
                        "track {}: frame with {} keypoints, skeleton has {}",
                        t.source_id,
                        f.keypoint_count(),
                        skeleton.keypoint_count()
                    )));
                }
            }
        }
        Ok(MotionCorpus { skeleton, frame_rate, tracks })
    }

    pub fn total_frames(&self) -> usize {
        self.tracks.iter().map(|t| t.frames.len()).sum()
    }
}

/// A conditioning past plus its observed (ground-truth) future. `origin`
/// records the corpus position a mined sequence came from — (track index,
/// index of the last past frame) — so MMGT mining can recognize the query's
/// own future.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub skeleton: Arc<Skeleton>,
    pub frame_rate: f64,
    pub source_id: String,
    pub past: Vec<Pose>,
    pub future: Vec<Pose>,
    pub origin: Option<(usize, usize)>,
}

impl MotionSequence {
    pub fn new(
        skeleton: Arc<Skeleton>,
        frame_rate: f64,
        source_id: String,
        past: Vec<Pose>,
        future: Vec<Pose>,
    ) -> Result<Self> {
        if past.is_empty() || future.is_empty() {
            return Err(Error::EmptyInput(format!(
                "sequence {source_id}: past and future must both be non-empty"
            )));
        }
        for f in past.iter().chain(&future) {
            if f.keypoint_count() != skeleton.keypoint_count() {
                return Err(Error::ShapeMismatch(format!(
                    "sequence {source_id}: frame keypoints disagree with skeleton"
                )));
            }
        }
        Ok(MotionSequence { skeleton, frame_rate, source_id, past, future, origin: None })
    }

    /// Last `n` past frames (the tail that conditions mode-space windows).
    pub fn past_tail(&self, n: usize) -> Result<&[Pose]> {
        if n == 0 || n > self.past.len() {
            return Err(Error::InvalidArgument(format!(
                "past tail of {n} frames from a {}-frame past",
                self.past.len()
            )));
        }
        Ok(&self.past[self.past.len() - n..])
    }
}

/// `I` candidate futures for one conditioning past. `target` carries the
/// past and the ground-truth future the candidates are judged against.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub target: MotionSequence,
    pub futures: Vec<Vec<Pose>>,
}

impl PredictionSet {
    pub fn new(target: MotionSequence, futures: Vec<Vec<Pose>>) -> Result<Self> {
        if futures.is_empty() {
            return Err(Error::EmptyInput(format!(
                "prediction set {} with I = 0 futures",
                target.source_id
            )));
        }
        let t = target.future.len();
        let k = target.skeleton.keypoint_count();
        for (i, f) in futures.iter().enumerate() {
            if f.len() != t {
                return Err(Error::ShapeMismatch(format!(
                    "prediction {} of set {}: {} frames, expected {}",
                    i,
                    target.source_id,
                    f.len(),
                    t
                )));
            }
            if f.iter().any(|p| p.keypoint_count() != k) {
                return Err(Error::ShapeMismatch(format!(
                    "prediction {} of set {}: keypoint count differs from skeleton",
                    i, target.source_id
                )));
            }
        }
        Ok(PredictionSet { target, futures })
    }

    pub fn len(&self) -> usize {
        self.futures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.futures.is_empty()
    }
}
