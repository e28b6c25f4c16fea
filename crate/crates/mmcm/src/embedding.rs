//! Window mining and the frozen two-stage embedder.
//!
//! Stage 1 trains on corpus windows of `N′_p + T` consecutive frames — the
//! same composition evaluation uses in Stage 2 (a sequence's last `N′_p`
//! past frames concatenated with a `T`-frame future) — so centroid
//! distances in mode space are commensurable with evaluation distances.
//! Every pose is root-centered before flattening; window vectors are
//! frame-major (frame → keypoint → axis).
//!
//! [`Embedder`] freezes a trained [`EncoderModel`] and [`LayoutModel`]
//! behind one `embed` call: flatten → encode → transform. It is immutable
//! and safely shared across threads.

use serde::{Deserialize, Serialize};

use crate::encoder::{train_encoder, EncoderConfig, EncoderModel};
use crate::error::{Error, Result};
use crate::layout::{fit_layout, LayoutConfig, LayoutModel};
use crate::math::Matrix;
use crate::motion::{flatten, root_center, MotionCorpus, Pose};

/// Geometry of the windows everything embeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Number of trailing past frames in a window, `N′_p`.
    pub past_tail_frames: usize,
    /// Number of future frames in a window, `T`.
    pub future_frames: usize,
    /// Mining stride over track frames.
    pub stride: usize,
}

impl WindowSpec {
    /// Stride defaults to `T/4` (at least 1).
    pub fn new(past_tail_frames: usize, future_frames: usize) -> Self {
        WindowSpec { past_tail_frames, future_frames, stride: (future_frames / 4).max(1) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.past_tail_frames == 0 {
            return Err(Error::Config("past_tail_frames must be ≥ 1".into()));
        }
        if self.future_frames == 0 {
            return Err(Error::Config("future_frames must be ≥ 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Frames per window.
    pub fn window_frames(&self) -> usize {
        self.past_tail_frames + self.future_frames
    }

    /// Flattened window width for a `k`-keypoint skeleton.
    pub fn window_dim(&self, keypoints: usize) -> usize {
        self.window_frames() * keypoints * 3
    }
}

/// Where a mined window sits in its corpus: `start` is the index of the
/// window's first frame; the last past-tail frame is at
/// `start + past_tail_frames − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRef {
    pub track: usize,
    pub start: usize,
}

/// Root-center and flatten one window of frames.
pub fn window_vector(frames: &[Pose]) -> Result<Vec<f64>> {
    let centered: Vec<Pose> = frames.iter().map(root_center).collect();
    flatten(&centered)
}

/// Mine flattened training windows from every track long enough to hold
/// one, stepping by the configured stride. Tracks shorter than a window are
/// skipped; a corpus yielding no windows at all is an error.
pub fn mine_windows(corpus: &MotionCorpus, spec: &WindowSpec) -> Result<Matrix> {
    Ok(mine_windows_with_refs(corpus, spec)?.0)
}

/// [`mine_windows`] plus the corpus position of every row.
pub fn mine_windows_with_refs(
    corpus: &MotionCorpus,
    spec: &WindowSpec,
) -> Result<(Matrix, Vec<WindowRef>)> {
    spec.validate()?;
    let w = spec.window_frames();
    let dim = spec.window_dim(corpus.skeleton.keypoint_count());
    let mut rows: Vec<f64> = Vec::new();
    let mut refs = Vec::new();
    for (ti, track) in corpus.tracks.iter().enumerate() {
        let n = track.frames.len();
        if n < w {
            continue;
        }
        let mut s = 0;
        while s + w <= n {
            rows.extend(window_vector(&track.frames[s..s + w])?);
            refs.push(WindowRef { track: ti, start: s });
            s += spec.stride;
        }
    }
    if refs.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no track is long enough to hold a {w}-frame window"
        )));
    }
    let m = Matrix { rows: refs.len(), cols: dim, data: rows };
    Ok((m, refs))
}

/// The frozen two-stage embedder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub window: WindowSpec,
    pub encoder: EncoderModel,
    pub layout: LayoutModel,
}

impl Embedder {
    /// Embed a (past, future) pair: the window is the past's last `N′_p`
    /// frames concatenated with the `T`-frame future.
    pub fn embed(&self, past: &[Pose], future: &[Pose]) -> Result<Vec<f64>> {
        let np = self.window.past_tail_frames;
        if past.len() < np {
            return Err(Error::InvalidArgument(format!(
                "past has {} frames, the embedder needs at least {np}",
                past.len()
            )));
        }
        if future.len() != self.window.future_frames {
            return Err(Error::ShapeMismatch(format!(
                "future has {} frames, the embedder expects {}",
                future.len(),
                self.window.future_frames
            )));
        }
        let mut frames = Vec::with_capacity(self.window.window_frames());
        frames.extend_from_slice(&past[past.len() - np..]);
        frames.extend_from_slice(future);
        self.embed_window(&window_vector(&frames)?)
    }

    /// Embed a pre-flattened (already root-centered) window vector.
    pub fn embed_window(&self, window: &[f64]) -> Result<Vec<f64>> {
        let code = self.encoder.encode(window)?;
        self.layout.transform(&code)
    }

    /// Embed many window rows at once (parallel over rows, same results as
    /// the per-item path).
    pub fn embed_window_batch(&self, windows: &Matrix) -> Result<Matrix> {
        let codes = self.encoder.encode_batch(windows)?;
        self.layout.transform_batch(&codes)
    }

    /// Layout dimensionality `d`.
    pub fn layout_dim(&self) -> usize {
        self.layout.dim()
    }
}

/// Mine windows, train the encoder, fit the layout. Returns the frozen
/// embedder plus the corpus position of every training row; the training
/// layout rows (`embedder.layout.training_layout()`) are the Stage-1
/// embeddings later modules cluster — by construction, not re-transformed.
pub fn fit_embedder(
    corpus: &MotionCorpus,
    window: &WindowSpec,
    encoder_cfg: &EncoderConfig,
    layout_cfg: &LayoutConfig,
) -> Result<(Embedder, Vec<WindowRef>)> {
    let (windows, refs) = mine_windows_with_refs(corpus, window)?;
    let encoder = train_encoder(&windows, encoder_cfg)?;
    let codes = encoder.encode_batch(&windows)?;
    let layout = fit_layout(&codes, layout_cfg)?;
    Ok((Embedder { window: *window, encoder, layout }, refs))
}
