//! Corpus and prediction-set serialization.
//!
//! One container family, two encodings:
//!
//! * a **binary container** (magic `MMCMBIN\0`), the canonical format. All
//!   multi-byte integers are little-endian; coordinates are a flat
//!   little-endian `f32` payload in vectorization order (frame → keypoint →
//!   axis). Exact field order:
//!
//!   ```text
//!   magic      8 × u8   "MMCMBIN\0"
//!   kind       u8       1 = corpus, 2 = prediction sets
//!   version    u16      currently 1
//!   skeleton   u8       1 = h36m17 preset, 2 = amass21 preset, 0 = explicit
//!     (explicit) u32 keypoint_count, then (keypoint_count − 1) × (u32 parent, u32 child)
//!   frame_rate f64      Hz
//!   kind 1 (corpus):
//!     track_count u32
//!     per track:  u16 id_len + UTF-8 source_id, u64 frame_offset, u64 frame_count
//!     payload:    Σ frame_count × keypoint_count × 3 × f32
//!   kind 2 (prediction sets):
//!     past_len u32 (B), future_len u32 (T), sample_count u32
//!     per sample: u16 id_len + UTF-8 source_id, u32 future_count (I ≥ 1)
//!     payload:    per sample, (B + T + I·T) frames — past, ground-truth
//!                 future, then the I predicted futures
//!   ```
//!
//! * a **JSON-lines text variant** for small hand-written fixtures, sniffed
//!   by a leading `{`: a header object on line 1, then one frame per line.
//!
//! Explicit skeletons must be rooted at keypoint 0 (the loader rejects bone
//! lists that root elsewhere). Coordinates are quantized to `f32` on load in
//! both encodings, so everything downstream behaves identically whether a
//! corpus came from memory or from disk, and save → load → save is
//! byte-identical. Writes go through a temp file in the target directory
//! plus an atomic rename.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionCorpus, MotionSequence, Pose, PredictionSet, Skeleton, Track};

const MAGIC: &[u8; 8] = b"MMCMBIN\0";
const VERSION: u16 = 1;
const KIND_CORPUS: u8 = 1;
const KIND_PREDICTIONS: u8 = 2;

// ---------------------------------------------------------------------------
// writing
// ---------------------------------------------------------------------------

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(path, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn push_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let b = s.as_bytes();
    if b.len() > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!("source_id longer than 64 KiB: {s:.32}…")));
    }
    buf.extend_from_slice(&(b.len() as u16).to_le_bytes());
    buf.extend_from_slice(b);
    Ok(())
}

fn push_skeleton(buf: &mut Vec<u8>, skel: &Skeleton) {
    if *skel == *Skeleton::h36m17() {
        buf.push(1);
    } else if *skel == *Skeleton::amass21() {
        buf.push(2);
    } else {
        buf.push(0);
        buf.extend_from_slice(&(skel.keypoint_count() as u32).to_le_bytes());
        for &(p, c) in skel.bones() {
            buf.extend_from_slice(&(p as u32).to_le_bytes());
            buf.extend_from_slice(&(c as u32).to_le_bytes());
        }
    }
}

fn push_frames(buf: &mut Vec<u8>, frames: &[Pose]) {
    for f in frames {
        for c in f.coords() {
            for &v in c {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
}

pub fn save_corpus(corpus: &MotionCorpus, path: &Path) -> Result<()> {
    for t in &corpus.tracks {
        if t.frames.is_empty() {
            return Err(Error::EmptyInput(format!("track {} has no frames", t.source_id)));
        }
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(KIND_CORPUS);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    push_skeleton(&mut buf, &corpus.skeleton);
    buf.extend_from_slice(&corpus.frame_rate.to_le_bytes());
    buf.extend_from_slice(&(corpus.tracks.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for t in &corpus.tracks {
        push_str(&mut buf, &t.source_id)?;
        buf.extend_from_slice(&offset.to_le_bytes());
        buf.extend_from_slice(&(t.frames.len() as u64).to_le_bytes());
        offset += t.frames.len() as u64;
    }
    for t in &corpus.tracks {
        push_frames(&mut buf, &t.frames);
    }
    write_atomic(path, &buf)
}

pub fn save_predictions(sets: &[PredictionSet], path: &Path) -> Result<()> {
    let Some(first) = sets.first() else {
        return Err(Error::EmptyInput("no prediction sets to save".into()));
    };
    let b = first.target.past.len();
    let t = first.target.future.len();
    let skel = &first.target.skeleton;
    for s in sets {
        if s.target.past.len() != b || s.target.future.len() != t {
            return Err(Error::ShapeMismatch(format!(
                "prediction set {}: past/future lengths differ from the first set",
                s.target.source_id
            )));
        }
        if s.target.skeleton != *skel {
            return Err(Error::ShapeMismatch(format!(
                "prediction set {}: skeleton differs from the first set",
                s.target.source_id
            )));
        }
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(KIND_PREDICTIONS);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    push_skeleton(&mut buf, skel);
    buf.extend_from_slice(&first.target.frame_rate.to_le_bytes());
    buf.extend_from_slice(&(b as u32).to_le_bytes());
    buf.extend_from_slice(&(t as u32).to_le_bytes());
    buf.extend_from_slice(&(sets.len() as u32).to_le_bytes());
    for s in sets {
        push_str(&mut buf, &s.target.source_id)?;
        buf.extend_from_slice(&(s.futures.len() as u32).to_le_bytes());
    }
    for s in sets {
        push_frames(&mut buf, &s.target.past);
        push_frames(&mut buf, &s.target.future);
        for f in &s.futures {
            push_frames(&mut buf, f);
        }
    }
    write_atomic(path, &buf)
}

// ---------------------------------------------------------------------------
// reading
// ---------------------------------------------------------------------------

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn malformed(&self, detail: impl Into<String>) -> Error {
        Error::Malformed { path: self.path.into(), offset: self.pos as u64, detail: detail.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.malformed(format!(
                "truncated while reading {what}: expected {n} bytes, {} left",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(LittleEndian::read_u16(self.take(2, what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8, what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(LittleEndian::read_f64(self.take(8, what)?))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let at = self.pos;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Malformed {
            path: self.path.into(),
            offset: at as u64,
            detail: format!("{what}: invalid UTF-8"),
        })
    }

    /// Header: magic + expected kind + version. Returns the version.
    fn header(&mut self, expect_kind: u8) -> Result<()> {
        let magic = self.take(8, "magic")?;
        if magic != MAGIC {
            self.pos = 0;
            return Err(self.malformed("bad magic (not an MMCMBIN container)"));
        }
        let kind = self.u8("kind")?;
        let version = self.u16("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                path: self.path.into(),
                found: version,
                supported: VERSION,
            });
        }
        if kind != expect_kind {
            self.pos -= 3;
            return Err(self.malformed(format!(
                "container kind {kind} where kind {expect_kind} was expected"
            )));
        }
        Ok(())
    }

    fn skeleton(&mut self) -> Result<Arc<Skeleton>> {
        let at = self.pos;
        let tag = self.u8("skeleton tag")?;
        match tag {
            1 => Ok(Skeleton::h36m17()),
            2 => Ok(Skeleton::amass21()),
            0 => {
                let k = self.u32("keypoint_count")? as usize;
                if k == 0 || k > 1024 {
                    return Err(Error::Malformed {
                        path: self.path.into(),
                        offset: at as u64,
                        detail: format!("skeleton block: keypoint_count {k} out of range"),
                    });
                }
                let mut bones = Vec::with_capacity(k - 1);
                for _ in 0..k.saturating_sub(1) {
                    let p = self.u32("bone parent")? as usize;
                    let c = self.u32("bone child")? as usize;
                    bones.push((p, c));
                }
                Skeleton::new(k, bones, None).map(Arc::new).map_err(|e| Error::Malformed {
                    path: self.path.into(),
                    offset: at as u64,
                    detail: format!("skeleton block: {e}"),
                })
            }
            other => Err(Error::Malformed {
                path: self.path.into(),
                offset: at as u64,
                detail: format!("skeleton block: unknown preset tag {other}"),
            }),
        }
    }

    /// Read `frames` poses of `k` keypoints from the f32 payload.
    fn frames(&mut self, frames: usize, k: usize, what: &str) -> Result<Vec<Pose>> {
        let floats = frames * k * 3;
        let at = self.pos;
        let bytes = self.take(floats * 4, what).map_err(|_| Error::Malformed {
            path: self.path.into(),
            offset: at as u64,
            detail: format!(
                "payload truncated while reading {what}: expected {floats} f32 values ({} bytes), {} bytes left",
                floats * 4,
                self.buf.len() - at
            ),
        })?;
        let mut out = Vec::with_capacity(frames);
        let mut coords = Vec::with_capacity(k);
        for f in 0..frames {
            coords.clear();
            for kp in 0..k {
                let base = (f * k + kp) * 12;
                coords.push([
                    LittleEndian::read_f32(&bytes[base..]) as f64,
                    LittleEndian::read_f32(&bytes[base + 4..]) as f64,
                    LittleEndian::read_f32(&bytes[base + 8..]) as f64,
                ]);
            }
            let pose = Pose::new(coords.clone()).map_err(|e| Error::Malformed {
                path: self.path.into(),
                offset: (at + f * k * 12) as u64,
                detail: format!("{what}: {e}"),
            })?;
            out.push(pose);
        }
        Ok(out)
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Malformed {
                path: self.path.into(),
                offset: self.pos as u64,
                detail: format!("{} trailing bytes after payload", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

pub fn load_corpus(path: &Path) -> Result<MotionCorpus> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.first() == Some(&b'{') {
        return load_corpus_jsonl(&buf, path);
    }
    let mut r = Reader { buf: &buf, pos: 0, path };
    r.header(KIND_CORPUS)?;
    let skeleton = r.skeleton()?;
    let k = skeleton.keypoint_count();
    let frame_rate = r.f64("frame_rate")?;
    let track_count = r.u32("track_count")? as usize;
    let mut table = Vec::with_capacity(track_count);
    let mut expect_offset = 0u64;
    for i in 0..track_count {
        let id = r.string("track source_id")?;
        let at = r.pos;
        let offset = r.u64("frame_offset")?;
        let count = r.u64("frame_count")?;
        if offset != expect_offset {
            return Err(Error::Malformed {
                path: path.into(),
                offset: at as u64,
                detail: format!(
                    "track {i}: frame_offset {offset} is not cumulative (expected {expect_offset})"
                ),
            });
        }
        if count == 0 {
            return Err(Error::Malformed {
                path: path.into(),
                offset: at as u64,
                detail: format!("track {i} ({id}): zero frames"),
            });
        }
        expect_offset += count;
        table.push((id, count as usize));
    }
    let mut tracks = Vec::with_capacity(track_count);
    for (id, count) in table {
        let frames = r.frames(count, k, &format!("track {id}"))?;
        tracks.push(Track { source_id: id, frames });
    }
    r.expect_end()?;
    MotionCorpus::new(skeleton, frame_rate, tracks)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionSet>> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.first() == Some(&b'{') {
        return load_predictions_jsonl(&buf, path);
    }
    let mut r = Reader { buf: &buf, pos: 0, path };
    r.header(KIND_PREDICTIONS)?;
    let skeleton = r.skeleton()?;
    let k = skeleton.keypoint_count();
    let frame_rate = r.f64("frame_rate")?;
    let b = r.u32("past_len")? as usize;
    let t = r.u32("future_len")? as usize;
    if b == 0 || t == 0 {
        return Err(r.malformed(format!("past_len {b} / future_len {t} must be positive")));
    }
    let sample_count = r.u32("sample_count")? as usize;
    let mut table = Vec::with_capacity(sample_count);
    for i in 0..sample_count {
        let id = r.string("sample source_id")?;
        let at = r.pos;
        let futures = r.u32("future_count")? as usize;
        if futures == 0 {
            return Err(Error::Malformed {
                path: path.into(),
                offset: at as u64,
                detail: format!("sample {i} ({id}): I = 0 futures"),
            });
        }
        table.push((id, futures));
    }
    let mut sets = Vec::with_capacity(sample_count);
    for (id, n_futures) in table {
        let past = r.frames(b, k, &format!("sample {id} past"))?;
        let gt = r.frames(t, k, &format!("sample {id} ground truth"))?;
        let mut futures = Vec::with_capacity(n_futures);
        for i in 0..n_futures {
            futures.push(r.frames(t, k, &format!("sample {id} prediction {i}"))?);
        }
        let target = MotionSequence::new(skeleton.clone(), frame_rate, id, past, gt)?;
        sets.push(PredictionSet::new(target, futures)?);
    }
    r.expect_end()?;
    Ok(sets)
}

// ---------------------------------------------------------------------------
// JSON-lines fixture variant
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonSkeleton {
    Preset(String),
    Explicit { keypoints: usize, bones: Vec<(usize, usize)> },
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    kind: String,
    version: u16,
    skeleton: JsonSkeleton,
    frame_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    past_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    future_len: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct JsonlCorpusLine {
    track: String,
    pose: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct JsonlPredictionLine {
    sample: String,
    segment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    pose: Vec<[f64; 3]>,
}

fn jsonl_error(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.into(),
        offset: line as u64,
        detail: format!("line {line}: {}", detail.into()),
    }
}

fn parse_jsonl_skeleton(s: &JsonSkeleton, path: &Path) -> Result<Arc<Skeleton>> {
    match s {
        JsonSkeleton::Preset(name) => match name.as_str() {
            "h36m17" => Ok(Skeleton::h36m17()),
            "amass21" => Ok(Skeleton::amass21()),
            other => Err(jsonl_error(path, 1, format!("unknown skeleton preset {other:?}"))),
        },
        JsonSkeleton::Explicit { keypoints, bones } => {
            Skeleton::new(*keypoints, bones.clone(), None)
                .map(Arc::new)
                .map_err(|e| jsonl_error(path, 1, format!("skeleton block: {e}")))
        }
    }
}

fn quantized_pose(coords: &[[f64; 3]], k: usize, path: &Path, line: usize) -> Result<Pose> {
    if coords.len() != k {
        return Err(jsonl_error(path, line, format!("pose has {} keypoints, expected {k}", coords.len())));
    }
    let q: Vec<[f64; 3]> = coords
        .iter()
        .map(|c| [c[0] as f32 as f64, c[1] as f32 as f64, c[2] as f32 as f64])
        .collect();
    Pose::new(q).map_err(|e| jsonl_error(path, line, e.to_string()))
}

fn jsonl_lines(buf: &[u8], path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::str::from_utf8(buf)
        .map_err(|_| jsonl_error(path, 1, "file is not valid UTF-8"))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn load_corpus_jsonl(buf: &[u8], path: &Path) -> Result<MotionCorpus> {
    let lines = jsonl_lines(buf, path)?;
    let Some((_, header_line)) = lines.first() else {
        return Err(jsonl_error(path, 1, "empty file"));
    };
    let header: JsonlHeader = serde_json::from_str(header_line)
        .map_err(|e| jsonl_error(path, 1, format!("bad header: {e}")))?;
    if header.kind != "corpus" {
        return Err(jsonl_error(path, 1, format!("kind {:?}, expected \"corpus\"", header.kind)));
    }
    if header.version != VERSION {
        return Err(Error::UnsupportedVersion { path: path.into(), found: header.version, supported: VERSION });
    }
    let skeleton = parse_jsonl_skeleton(&header.skeleton, path)?;
    let k = skeleton.keypoint_count();
    let mut tracks: Vec<Track> = Vec::new();
    for (line_no, line) in &lines[1..] {
        let row: JsonlCorpusLine = serde_json::from_str(line)
            .map_err(|e| jsonl_error(path, *line_no, e.to_string()))?;
        let pose = quantized_pose(&row.pose, k, path, *line_no)?;
        match tracks.last_mut() {
            Some(t) if t.source_id == row.track => t.frames.push(pose),
            _ => {
                if tracks.iter().any(|t| t.source_id == row.track) {
                    return Err(jsonl_error(
                        path,
                        *line_no,
                        format!("track {:?} is not contiguous", row.track),
                    ));
                }
                tracks.push(Track { source_id: row.track, frames: vec![pose] });
            }
        }
    }
    if tracks.is_empty() {
        return Err(jsonl_error(path, 1, "no frames after header"));
    }
    MotionCorpus::new(skeleton, header.frame_rate, tracks)
}

fn load_predictions_jsonl(buf: &[u8], path: &Path) -> Result<Vec<PredictionSet>> {
    let lines = jsonl_lines(buf, path)?;
    let Some((_, header_line)) = lines.first() else {
        return Err(jsonl_error(path, 1, "empty file"));
    };
    let header: JsonlHeader = serde_json::from_str(header_line)
        .map_err(|e| jsonl_error(path, 1, format!("bad header: {e}")))?;
    if header.kind != "predictions" {
        return Err(jsonl_error(path, 1, format!("kind {:?}, expected \"predictions\"", header.kind)));
    }
    if header.version != VERSION {
        return Err(Error::UnsupportedVersion { path: path.into(), found: header.version, supported: VERSION });
    }
    let (Some(b), Some(t)) = (header.past_len, header.future_len) else {
        return Err(jsonl_error(path, 1, "predictions header needs past_len and future_len"));
    };
    let skeleton = parse_jsonl_skeleton(&header.skeleton, path)?;
    let k = skeleton.keypoint_count();

    struct Partial {
        id: String,
        past: Vec<Pose>,
        gt: Vec<Pose>,
        futures: Vec<Vec<Pose>>,
        first_line: usize,
    }
    let mut samples: Vec<Partial> = Vec::new();
    for (line_no, line) in &lines[1..] {
        let row: JsonlPredictionLine = serde_json::from_str(line)
            .map_err(|e| jsonl_error(path, *line_no, e.to_string()))?;
        let pose = quantized_pose(&row.pose, k, path, *line_no)?;
        let sample = match samples.last_mut() {
            Some(s) if s.id == row.sample => s,
            _ => {
                if samples.iter().any(|s| s.id == row.sample) {
                    return Err(jsonl_error(path, *line_no, format!("sample {:?} is not contiguous", row.sample)));
                }
                samples.push(Partial {
                    id: row.sample.clone(),
                    past: Vec::new(),
                    gt: Vec::new(),
                    futures: Vec::new(),
                    first_line: *line_no,
                });
                samples.last_mut().unwrap()
            }
        };
        match row.segment.as_str() {
            "past" => sample.past.push(pose),
            "gt" => sample.gt.push(pose),
            "prediction" => {
                let idx = row.index.ok_or_else(|| {
                    jsonl_error(path, *line_no, "prediction line without index")
                })?;
                if idx == sample.futures.len() {
                    sample.futures.push(vec![pose]);
                } else if idx + 1 == sample.futures.len() {
                    sample.futures[idx].push(pose);
                } else {
                    return Err(jsonl_error(
                        path,
                        *line_no,
                        format!("prediction index {idx} out of order"),
                    ));
                }
            }
            other => return Err(jsonl_error(path, *line_no, format!("unknown segment {other:?}"))),
        }
    }
    if samples.is_empty() {
        return Err(jsonl_error(path, 1, "no samples after header"));
    }
    let mut sets = Vec::with_capacity(samples.len());
    for s in samples {
        if s.past.len() != b {
            return Err(jsonl_error(path, s.first_line, format!("sample {}: {} past frames, header says {b}", s.id, s.past.len())));
        }
        if s.gt.len() != t {
            return Err(jsonl_error(path, s.first_line, format!("sample {}: {} ground-truth frames, header says {t}", s.id, s.gt.len())));
        }
        if s.futures.is_empty() {
            return Err(jsonl_error(path, s.first_line, format!("sample {}: I = 0 futures", s.id)));
        }
        for (i, f) in s.futures.iter().enumerate() {
            if f.len() != t {
                return Err(jsonl_error(path, s.first_line, format!("sample {}: prediction {i} has {} frames, header says {t}", s.id, f.len())));
            }
        }
        let target = MotionSequence::new(skeleton.clone(), header.frame_rate, s.id, s.past, s.gt)?;
        sets.push(PredictionSet::new(target, s.futures)?);
    }
    Ok(sets)
}

fn jsonl_skeleton_of(skel: &Skeleton) -> JsonSkeleton {
    if *skel == *Skeleton::h36m17() {
        JsonSkeleton::Preset("h36m17".into())
    } else if *skel == *Skeleton::amass21() {
        JsonSkeleton::Preset("amass21".into())
    } else {
        JsonSkeleton::Explicit { keypoints: skel.keypoint_count(), bones: skel.bones().to_vec() }
    }
}

pub fn save_corpus_jsonl(corpus: &MotionCorpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header = JsonlHeader {
        kind: "corpus".into(),
        version: VERSION,
        skeleton: jsonl_skeleton_of(&corpus.skeleton),
        frame_rate: corpus.frame_rate,
        past_len: None,
        future_len: None,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for t in &corpus.tracks {
        for f in &t.frames {
            let line = JsonlCorpusLine { track: t.source_id.clone(), pose: f.coords().to_vec() };
            out.push_str(&serde_json::to_string(&line).expect("line serializes"));
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn save_predictions_jsonl(sets: &[PredictionSet], path: &Path) -> Result<()> {
    let Some(first) = sets.first() else {
        return Err(Error::EmptyInput("no prediction sets to save".into()));
    };
    let mut out = String::new();
    let header = JsonlHeader {
        kind: "predictions".into(),
        version: VERSION,
        skeleton: jsonl_skeleton_of(&first.target.skeleton),
        frame_rate: first.target.frame_rate,
        past_len: Some(first.target.past.len()),
        future_len: Some(first.target.future.len()),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    let mut push = |sample: &str, segment: &str, index: Option<usize>, pose: &Pose| {
        let line = JsonlPredictionLine {
            sample: sample.into(),
            segment: segment.into(),
            index,
            pose: pose.coords().to_vec(),
        };
        out.push_str(&serde_json::to_string(&line).expect("line serializes"));
        out.push('\n');
    };
    for s in sets {
        for f in &s.target.past {
            push(&s.target.source_id, "past", None, f);
        }
        for f in &s.target.future {
            push(&s.target.source_id, "gt", None, f);
        }
        for (i, fut) in s.futures.iter().enumerate() {
            for f in fut {
                push(&s.target.source_id, "prediction", Some(i), f);
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_families, generate_synthetic, SynthesisConfig};

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    fn small_corpus(seed: u64) -> MotionCorpus {
        generate_synthetic(&default_families(), &SynthesisConfig::pure(2, 40, 25.0, seed)).unwrap()
    }

    #[test]
    fn corpus_roundtrip_is_bit_identical() {
        let dir = tmpdir();
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        let corpus = small_corpus(1);
        save_corpus(&corpus, &p1).unwrap();
        let loaded = load_corpus(&p1).unwrap();
        // Synthetic coordinates are f32-quantized at generation, so the
        // loaded corpus matches in memory too, not just on disk.
        assert_eq!(loaded, corpus);
        save_corpus(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn explicit_skeleton_roundtrips() {
        let skel = Arc::new(Skeleton::new(3, vec![(0, 1), (1, 2)], None).unwrap());
        let frames: Vec<Pose> = (0..8)
            .map(|i| {
                Pose::new(vec![
                    [0.0, 0.0, 0.0],
                    [0.0, 0.5, 0.25 * i as f64],
                    [0.0, 1.0, 0.5],
                ])
                .unwrap()
            })
            .collect();
        let corpus = MotionCorpus::new(
            skel,
            30.0,
            vec![Track { source_id: "only".into(), frames }],
        )
        .unwrap();
        let dir = tmpdir();
        let p = dir.path().join("explicit.bin");
        save_corpus(&corpus, &p).unwrap();
        let loaded = load_corpus(&p).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn truncated_payload_reports_expected_vs_actual() {
        let dir = tmpdir();
        let p = dir.path().join("c.bin");
        save_corpus(&small_corpus(2), &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 4); // exactly one float short
        let p2 = dir.path().join("truncated.bin");
        std::fs::write(&p2, &bytes).unwrap();
        match load_corpus(&p2) {
            Err(Error::Malformed { detail, .. }) => {
                assert!(detail.contains("truncated"), "{detail}");
                assert!(detail.contains("expected"), "{detail}");
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn unknown_version_is_a_distinct_error() {
        let dir = tmpdir();
        let p = dir.path().join("c.bin");
        save_corpus(&small_corpus(3), &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[9] = 0xFF; // version lives right after magic + kind
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_corpus(&p), Err(Error::UnsupportedVersion { found: 0xFF, .. })));
    }

    #[test]
    fn bad_magic_and_trailing_garbage_are_malformed() {
        let dir = tmpdir();
        let p = dir.path().join("garbage.bin");
        std::fs::write(&p, b"NOTMMCM_rest").unwrap();
        assert!(matches!(load_corpus(&p), Err(Error::Malformed { offset: 0, .. })));

        let p2 = dir.path().join("trailing.bin");
        save_corpus(&small_corpus(4), &p2).unwrap();
        let mut bytes = std::fs::read(&p2).unwrap();
        bytes.extend_from_slice(&[1, 2, 3]);
        std::fs::write(&p2, &bytes).unwrap();
        match load_corpus(&p2) {
            Err(Error::Malformed { detail, .. }) => assert!(detail.contains("trailing"), "{detail}"),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn bad_skeleton_block_is_reported_with_offset() {
        let skel = Arc::new(Skeleton::new(3, vec![(0, 1), (1, 2)], None).unwrap());
        let corpus = MotionCorpus::new(
            skel,
            30.0,
            vec![Track { source_id: "t".into(), frames: vec![Pose::zero(3); 4] }],
        )
        .unwrap();
        let dir = tmpdir();
        let p = dir.path().join("skel.bin");
        save_corpus(&corpus, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        // Explicit skeleton block starts at byte 11: tag(1) + count(4) + bones.
        // Point the first bone's child out of range.
        let bone_child_at = 11 + 1 + 4 + 4;
        bytes[bone_child_at..bone_child_at + 4].copy_from_slice(&99u32.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        match load_corpus(&p) {
            Err(Error::Malformed { detail, offset, .. }) => {
                assert!(detail.contains("skeleton block"), "{detail}");
                assert_eq!(offset, 11);
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn empty_track_is_rejected_on_save() {
        let corpus = MotionCorpus {
            skeleton: Skeleton::h36m17(),
            frame_rate: 25.0,
            tracks: vec![Track { source_id: "empty".into(), frames: vec![] }],
        };
        let dir = tmpdir();
        assert!(matches!(
            save_corpus(&corpus, &dir.path().join("x.bin")),
            Err(Error::EmptyInput(_))
        ));
    }

    fn small_predictions(seed: u64) -> Vec<PredictionSet> {
        let corpus = small_corpus(seed);
        let skel = corpus.skeleton.clone();
        (0..3)
            .map(|i| {
                let track = &corpus.tracks[i];
                let past = track.frames[0..6].to_vec();
                let gt = track.frames[6..14].to_vec();
                let futures = vec![
                    track.frames[6..14].to_vec(),
                    track.frames[10..18].to_vec(),
                ];
                let target = MotionSequence::new(
                    skel.clone(),
                    corpus.frame_rate,
                    format!("sample-{i}"),
                    past,
                    gt,
                )
                .unwrap();
                PredictionSet::new(target, futures).unwrap()
            })
            .collect()
    }

    #[test]
    fn predictions_roundtrip_binary_and_jsonl() {
        let sets = small_predictions(7);
        let dir = tmpdir();
        let p = dir.path().join("preds.bin");
        save_predictions(&sets, &p).unwrap();
        let loaded = load_predictions(&p).unwrap();
        assert_eq!(loaded.len(), sets.len());
        for (a, b) in loaded.iter().zip(&sets) {
            assert_eq!(a.target.past, b.target.past);
            assert_eq!(a.target.future, b.target.future);
            assert_eq!(a.futures, b.futures);
        }
        // save → load → save is byte-identical
        let p2 = dir.path().join("preds2.bin");
        save_predictions(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

        let pj = dir.path().join("preds.jsonl");
        save_predictions_jsonl(&sets, &pj).unwrap();
        let loaded_j = load_predictions(&pj).unwrap();
        assert_eq!(loaded_j.len(), sets.len());
        for (a, b) in loaded_j.iter().zip(&sets) {
            assert_eq!(a.futures, b.futures);
        }
    }

    #[test]
    fn zero_future_count_is_rejected() {
        let sets = small_predictions(8);
        let dir = tmpdir();
        let p = dir.path().join("preds.bin");
        save_predictions(&sets, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        // Sample table starts after magic(8)+kind(1)+version(2)+preset(1)+
        // frame_rate(8)+B(4)+T(4)+count(4) = 32; first entry: id(2+8) then u32 I.
        let i_at = 32 + 2 + "sample-0".len();
        bytes[i_at..i_at + 4].copy_from_slice(&0u32.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        match load_predictions(&p) {
            Err(Error::Malformed { detail, .. }) => assert!(detail.contains("I = 0"), "{detail}"),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn corpus_jsonl_fixture_loads() {
        let dir = tmpdir();
        let p = dir.path().join("fixture.jsonl");
        let text = concat!(
            "{\"kind\":\"corpus\",\"version\":1,\"skeleton\":{\"keypoints\":2,\"bones\":[[0,1]]},\"frame_rate\":10.0}\n",
            "{\"track\":\"a\",\"pose\":[[0,0,0],[0,1,0]]}\n",
            "{\"track\":\"a\",\"pose\":[[0,0,0],[0,1,0.5]]}\n",
            "{\"track\":\"b\",\"pose\":[[0,0,0],[0,0.9,0]]}\n",
        );
        std::fs::write(&p, text).unwrap();
        let corpus = load_corpus(&p).unwrap();
        assert_eq!(corpus.tracks.len(), 2);
        assert_eq!(corpus.tracks[0].frames.len(), 2);
        assert_eq!(corpus.tracks[0].frames[1].coords()[1], [0.0, 1.0, 0.5]);

        // round-trip through the JSONL writer
        let p2 = dir.path().join("fixture2.jsonl");
        save_corpus_jsonl(&corpus, &p2).unwrap();
        assert_eq!(load_corpus(&p2).unwrap(), corpus);

        // future length mismatch in a predictions fixture is rejected
        let bad = concat!(
            "{\"kind\":\"predictions\",\"version\":1,\"skeleton\":{\"keypoints\":1,\"bones\":[]},\"frame_rate\":10.0,\"past_len\":1,\"future_len\":2}\n",
            "{\"sample\":\"s\",\"segment\":\"past\",\"pose\":[[0,0,0]]}\n",
            "{\"sample\":\"s\",\"segment\":\"gt\",\"pose\":[[0,0,0]]}\n",
            "{\"sample\":\"s\",\"segment\":\"gt\",\"pose\":[[0,0,0]]}\n",
            "{\"sample\":\"s\",\"segment\":\"prediction\",\"index\":0,\"pose\":[[0,0,0]]}\n",
        );
        let pb = dir.path().join("bad.jsonl");
        std::fs::write(&pb, bad).unwrap();
        match load_predictions(&pb) {
            Err(Error::Malformed { detail, .. }) => assert!(detail.contains("prediction 0 has 1 frames"), "{detail}"),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }
}
