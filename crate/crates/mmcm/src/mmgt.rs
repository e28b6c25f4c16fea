//! Multimodal ground-truth (MMGT) mining.
//!
//! The key observation behind the metric: if two corpus motions share a very
//! similar short past, both of their futures are plausible continuations of
//! either past. For a query sequence we therefore scan every track for frame
//! positions whose trailing `past_window_frames` poses lie within an ℓ²
//! threshold of the query's trailing window; each match contributes its next
//! `T` frames as one multimodal ground-truth future.
//!
//! Position convention: a member's `position` is the index of the **last
//! matched past frame** in its track, so the member future is
//! `frames[position + 1 .. position + 1 + T]` and the matched window is
//! `frames[position + 1 − W ..= position]`.
//!
//! [`build_mmgt`] is the reference implementation, a plain exhaustive scan.
//! [`build_all_mmgt`] mines a whole test set through [`MmgtIndex`], a
//! pivot-pruned index over trailing-window vectors (sorted by distance to a
//! reference window, band-searched, triangle-inequality pruned, exact
//! verification last), and returns exactly what the reference scan returns —
//! the unit tests hold the two paths bitwise equal.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionCorpus, MotionSequence, Pose, Track};

/// Mining parameters. `root_center` selects the root-relative pose
/// convention for window distances (the default everywhere in this crate);
/// disable it to compare windows in absolute coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmgtConfig {
    /// Trailing window length in frames (W ≥ 1).
    pub past_window_frames: usize,
    /// ℓ² threshold in meters over the flattened window. A threshold of 0
    /// keeps exact duplicates only.
    pub similarity_threshold: f64,
    /// Always include the query's own future as a member (at distance 0).
    pub include_self: bool,
    /// Root-center every pose before measuring window distance.
    pub root_center: bool,
}

impl MmgtConfig {
    /// Defaults tuned for the 17-keypoint preset: 1-frame window, 0.5 m.
    pub fn h36m() -> Self {
        MmgtConfig { past_window_frames: 1, similarity_threshold: 0.5, include_self: true, root_center: true }
    }

    /// Defaults tuned for the 21-keypoint preset: 1-frame window, 0.4 m.
    pub fn amass() -> Self {
        MmgtConfig { similarity_threshold: 0.4, ..Self::h36m() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.past_window_frames == 0 {
            return Err(Error::InvalidArgument("past_window_frames must be ≥ 1".into()));
        }
        if !self.similarity_threshold.is_finite() || self.similarity_threshold < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "similarity_threshold must be finite and ≥ 0, got {}",
                self.similarity_threshold
            )));
        }
        Ok(())
    }
}

/// Where a member future came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberSource {
    /// Mined from `corpus.tracks[track]`, last matched past frame at `position`.
    Corpus { track: usize, position: usize },
    /// The query's own future, injected by `include_self` when the query's
    /// corpus origin was not scanned (e.g. a query from another dataset).
    Query,
}

/// One multimodal ground-truth future.
#[derive(Debug, Clone, PartialEq)]
pub struct MmgtMember {
    pub source: MemberSource,
    /// Measured window distance to the query (0 for the self member).
    pub distance: f64,
    /// The `T` future frames.
    pub future: Vec<Pose>,
}

/// All mined futures for one query, ordered by (track, position) with an
/// injected self member last.
#[derive(Debug, Clone, PartialEq)]
pub struct MmgtSet {
    pub query: MotionSequence,
    pub members: Vec<MmgtMember>,
    /// The threshold the set was mined with (for re-verification).
    pub threshold: f64,
    /// Set when mining produced no members (possible only with
    /// `include_self = false`); callers should surface this.
    pub flagged_empty: bool,
}

impl MmgtSet {
    /// Number of members, `K`.
    pub fn k(&self) -> usize {
        self.members.len()
    }
}

/// Flatten `frames[end − w .. end]` into a window vector, root-centering
/// each pose when asked. `end` is exclusive.
fn extract_window(frames: &[Pose], end: usize, w: usize, center: bool, out: &mut Vec<f64>) {
    out.clear();
    for f in &frames[end - w..end] {
        if center {
            let root = f.coords()[crate::motion::ROOT];
            for c in f.coords() {
                out.push(c[0] - root[0]);
                out.push(c[1] - root[1]);
                out.push(c[2] - root[2]);
            }
        } else {
            for c in f.coords() {
                out.extend_from_slice(c);
            }
        }
    }
}

fn window_distance(a: &[f64], b: &[f64]) -> f64 {
    crate::math::sq_dist(a, b).sqrt()
}

/// The query's trailing window vector.
fn query_window(query: &MotionSequence, cfg: &MmgtConfig) -> Result<Vec<f64>> {
    let w = cfg.past_window_frames;
    if w > query.past.len() {
        return Err(Error::InvalidArgument(format!(
            "past window of {w} frames exceeds the query's {}-frame past",
            query.past.len()
        )));
    }
    let mut v = Vec::with_capacity(w * query.skeleton.keypoint_count() * 3);
    extract_window(&query.past, query.past.len(), w, cfg.root_center, &mut v);
    Ok(v)
}

fn check_query_against_corpus(query: &MotionSequence, corpus: &MotionCorpus) -> Result<()> {
    if query.skeleton.keypoint_count() != corpus.skeleton.keypoint_count() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} keypoints, corpus has {}",
            query.skeleton.keypoint_count(),
            corpus.skeleton.keypoint_count()
        )));
    }
    Ok(())
}

/// Append the query's own future when `include_self` asks for it and the
/// scan did not already produce the query's corpus origin.
fn finish_members(query: &MotionSequence, cfg: &MmgtConfig, mut members: Vec<MmgtMember>) -> MmgtSet {
    if cfg.include_self {
        let origin_present = match query.origin {
            Some((t, p)) => members
                .iter()
                .any(|m| m.source == MemberSource::Corpus { track: t, position: p }),
            None => false,
        };
        if !origin_present {
            members.push(MmgtMember {
                source: MemberSource::Query,
                distance: 0.0,
                future: query.future.clone(),
            });
        }
    }
    let flagged_empty = members.is_empty();
    MmgtSet { query: query.clone(), members, threshold: cfg.similarity_threshold, flagged_empty }
}

/// Reference implementation: exhaustive scan over every eligible position of
/// every track. Also the oracle the indexed path is tested against.
pub fn build_mmgt(query: &MotionSequence, corpus: &MotionCorpus, cfg: &MmgtConfig) -> Result<MmgtSet> {
    cfg.validate()?;
    check_query_against_corpus(query, corpus)?;
    let w = cfg.past_window_frames;
    let t = query.future.len();
    let qv = query_window(query, cfg)?;

    let mut members = Vec::new();
    let mut wv = Vec::with_capacity(qv.len());
    for (ti, track) in corpus.tracks.iter().enumerate() {
        let n = track.frames.len();
        if n < w + t {
            continue;
        }
        // position = last matched past frame; window end (exclusive) = position + 1
        for position in (w - 1)..(n - t) {
            extract_window(&track.frames, position + 1, w, cfg.root_center, &mut wv);
            let d = window_distance(&qv, &wv);
            if d <= cfg.similarity_threshold {
                members.push(MmgtMember {
                    source: MemberSource::Corpus { track: ti, position },
                    distance: d,
                    future: track.frames[position + 1..position + 1 + t].to_vec(),
                });
            }
        }
    }
    Ok(finish_members(query, cfg, members))
}

// ---------------------------------------------------------------------------
// pivot-pruned index
// ---------------------------------------------------------------------------

const MAX_PIVOTS: usize = 4;
/// Pruning margin guarding against the last-ulp float slack in the triangle
/// inequality; candidates inside the margin still pass exact verification.
const PRUNE_EPS: f64 = 1e-9;

struct IndexEntry {
    track: u32,
    position: u32,
    /// Distances to each pivot window; `[0]` is the sort key.
    pivot_dists: [f64; MAX_PIVOTS],
}

/// Accelerated mining over trailing-window vectors: entries are sorted by
/// distance to a reference window, a query reads only the band
/// `|d₀(entry) − d₀(query)| ≤ threshold`, surviving entries are pruned with
/// further pivots via the triangle inequality, and the exact window distance
/// is computed last.
pub struct MmgtIndex<'c> {
    corpus: &'c MotionCorpus,
    cfg: MmgtConfig,
    future_frames: usize,
    entries: Vec<IndexEntry>,
    pivots: Vec<Vec<f64>>,
    dim: usize,
}

impl<'c> MmgtIndex<'c> {
    pub fn new(corpus: &'c MotionCorpus, cfg: &MmgtConfig, future_frames: usize) -> Result<Self> {
        cfg.validate()?;
        if future_frames == 0 {
            return Err(Error::InvalidArgument("future_frames must be ≥ 1".into()));
        }
        let w = cfg.past_window_frames;
        let t = future_frames;
        let dim = w * corpus.skeleton.keypoint_count() * 3;

        let mut positions: Vec<(u32, u32)> = Vec::new();
        for (ti, track) in corpus.tracks.iter().enumerate() {
            let n = track.frames.len();
            if n < w + t {
                continue;
            }
            for position in (w - 1)..(n - t) {
                positions.push((ti as u32, position as u32));
            }
        }

        let extract = |track: u32, position: u32, out: &mut Vec<f64>| {
            extract_window(
                &corpus.tracks[track as usize].frames,
                position as usize + 1,
                w,
                cfg.root_center,
                out,
            );
        };

        // Maximin pivot selection: first eligible window, then repeatedly the
        // window farthest (by min distance) from the pivots chosen so far.
        let mut pivots: Vec<Vec<f64>> = Vec::new();
        let mut pivot_dists: Vec<Vec<f64>> = Vec::new(); // per pivot, per entry
        let mut wv = Vec::with_capacity(dim);
        if !positions.is_empty() {
            let mut first = Vec::with_capacity(dim);
            extract(positions[0].0, positions[0].1, &mut first);
            pivots.push(first);
            while pivots.len() < MAX_PIVOTS.min(positions.len()) {
                let p = pivots.last().unwrap();
                let dists: Vec<f64> = positions
                    .iter()
                    .map(|&(t0, p0)| {
                        let mut v = Vec::with_capacity(dim);
                        extract(t0, p0, &mut v);
                        window_distance(p, &v)
                    })
                    .collect();
                pivot_dists.push(dists);
                if pivots.len() == MAX_PIVOTS {
                    break;
                }
                // farthest by min distance to all pivots so far
                let far = (0..positions.len())
                    .max_by(|&a, &b| {
                        let da = pivot_dists.iter().map(|d| d[a]).fold(f64::INFINITY, f64::min);
                        let db = pivot_dists.iter().map(|d| d[b]).fold(f64::INFINITY, f64::min);
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .unwrap();
                extract(positions[far].0, positions[far].1, &mut wv);
                if pivots.iter().any(|p| p == &wv) {
                    break; // corpus has fewer distinct windows than pivots
                }
                pivots.push(wv.clone());
            }
            // distances to any pivot added after the last loop iteration
            while pivot_dists.len() < pivots.len() {
                let p = &pivots[pivot_dists.len()];
                let dists: Vec<f64> = positions
                    .iter()
                    .map(|&(t0, p0)| {
                        let mut v = Vec::with_capacity(dim);
                        extract(t0, p0, &mut v);
                        window_distance(p, &v)
                    })
                    .collect();
                pivot_dists.push(dists);
            }
        }

        let mut entries: Vec<IndexEntry> = positions
            .iter()
            .enumerate()
            .map(|(i, &(track, position))| {
                let mut pd = [0.0; MAX_PIVOTS];
                for (pi, d) in pivot_dists.iter().enumerate() {
                    pd[pi] = d[i];
                }
                IndexEntry { track, position, pivot_dists: pd }
            })
            .collect();
        entries.sort_by(|a, b| {
            a.pivot_dists[0]
                .partial_cmp(&b.pivot_dists[0])
                .unwrap()
                .then(a.track.cmp(&b.track))
                .then(a.position.cmp(&b.position))
        });

        Ok(MmgtIndex { corpus, cfg: cfg.clone(), future_frames, entries, pivots, dim })
    }

    /// Eligible window count (index size).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mine one query. Equal, member for member and bit for bit, to
    /// [`build_mmgt`] on the same inputs.
    pub fn query(&self, query: &MotionSequence) -> Result<MmgtSet> {
        check_query_against_corpus(query, self.corpus)?;
        if query.future.len() != self.future_frames {
            return Err(Error::ShapeMismatch(format!(
                "query future has {} frames, index was built for {}",
                query.future.len(),
                self.future_frames
            )));
        }
        let cfg = &self.cfg;
        let thr = cfg.similarity_threshold;
        let qv = query_window(query, cfg)?;
        let q_pivot: Vec<f64> = self.pivots.iter().map(|p| window_distance(p, &qv)).collect();

        let mut members = Vec::new();
        if !self.entries.is_empty() {
            let lo_key = q_pivot[0] - thr - PRUNE_EPS;
            let hi_key = q_pivot[0] + thr + PRUNE_EPS;
            let lo = self.entries.partition_point(|e| e.pivot_dists[0] < lo_key);
            let hi = self.entries.partition_point(|e| e.pivot_dists[0] <= hi_key);
            let mut wv = Vec::with_capacity(self.dim);
            for e in &self.entries[lo..hi] {
                let pruned = (1..self.pivots.len())
                    .any(|pi| (e.pivot_dists[pi] - q_pivot[pi]).abs() > thr + PRUNE_EPS);
                if pruned {
                    continue;
                }
                let track = &self.corpus.tracks[e.track as usize];
                extract_window(&track.frames, e.position as usize + 1, cfg.past_window_frames, cfg.root_center, &mut wv);
                let d = window_distance(&qv, &wv);
                if d <= thr {
                    members.push(MmgtMember {
                        source: MemberSource::Corpus { track: e.track as usize, position: e.position as usize },
                        distance: d,
                        future: track.frames
                            [e.position as usize + 1..e.position as usize + 1 + self.future_frames]
                            .to_vec(),
                    });
                }
            }
        }
        // Band order is by pivot distance; restore the reference scan's
        // (track, position) order so both paths agree exactly.
        members.sort_by(|a, b| {
            let ka = match a.source { MemberSource::Corpus { track, position } => (track, position), MemberSource::Query => (usize::MAX, 0) };
            let kb = match b.source { MemberSource::Corpus { track, position } => (track, position), MemberSource::Query => (usize::MAX, 0) };
            ka.cmp(&kb)
        });
        Ok(finish_members(query, cfg, members))
    }
}

/// Member-count distribution over a mined test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmgtSummary {
    /// K → number of queries with that many members.
    pub k_histogram: BTreeMap<usize, usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub k_mean: f64,
    /// Queries whose sets came back empty (flagged).
    pub empty_queries: usize,
}

impl MmgtSummary {
    pub fn of(sets: &[MmgtSet]) -> Self {
        let mut k_histogram = BTreeMap::new();
        let mut empty_queries = 0;
        for s in sets {
            *k_histogram.entry(s.k()).or_insert(0usize) += 1;
            if s.flagged_empty {
                empty_queries += 1;
            }
        }
        let k_min = sets.iter().map(MmgtSet::k).min().unwrap_or(0);
        let k_max = sets.iter().map(MmgtSet::k).max().unwrap_or(0);
        let k_mean = if sets.is_empty() {
            0.0
        } else {
            sets.iter().map(|s| s.k() as f64).sum::<f64>() / sets.len() as f64
        };
        MmgtSummary { k_histogram, k_min, k_max, k_mean, empty_queries }
    }
}

/// Mine a whole test set through one shared [`MmgtIndex`]; queries run in
/// parallel (the corpus is read-only). Per-query errors come back tagged
/// with the query index.
pub fn build_all_mmgt(
    test_set: &[MotionSequence],
    corpus: &MotionCorpus,
    cfg: &MmgtConfig,
) -> Result<(Vec<MmgtSet>, MmgtSummary)> {
    cfg.validate()?;
    if test_set.is_empty() {
        return Ok((Vec::new(), MmgtSummary::of(&[])));
    }
    let t = test_set[0].future.len();
    for (i, q) in test_set.iter().enumerate() {
        if q.future.len() != t {
            return Err(Error::ShapeMismatch(format!(
                "query {i}: future has {} frames, query 0 has {t}",
                q.future.len()
            )));
        }
    }
    let index = MmgtIndex::new(corpus, cfg, t)?;
    let with_query_index = |i: usize, e: Error| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("query {i}: {m}")),
        Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("query {i}: {m}")),
        Error::EmptyInput(m) => Error::EmptyInput(format!("query {i}: {m}")),
        other => other,
    };
    let sets: Vec<MmgtSet> = test_set
        .par_iter()
        .enumerate()
        .map(|(i, q)| index.query(q).map_err(|e| with_query_index(i, e)))
        .collect::<Result<_>>()?;
    let summary = MmgtSummary::of(&sets);
    Ok((sets, summary))
}

// ---------------------------------------------------------------------------
// serialization: container of member futures + JSON sidecar
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SidecarMember {
    /// Corpus track index, or −1 for an injected query-self member.
    track: i64,
    position: i64,
    distance: f64,
}

#[derive(Serialize, Deserialize)]
struct SidecarQuery {
    query: String,
    members: Vec<SidecarMember>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    threshold: f64,
    queries: Vec<SidecarQuery>,
}

/// Write the member futures as a motion container (tracks named
/// `q{query}/m{member}`) plus a JSON sidecar of (query, member, distance)
/// triples. Injected self members appear with `track = -1`.
pub fn save_mmgt(sets: &[MmgtSet], container: &Path, sidecar: &Path) -> Result<()> {
    let Some(first) = sets.first() else {
        return Err(Error::EmptyInput("no MMGT sets to save".into()));
    };
    let mut tracks = Vec::new();
    let mut queries = Vec::new();
    for (qi, s) in sets.iter().enumerate() {
        let mut members = Vec::new();
        for (mi, m) in s.members.iter().enumerate() {
            tracks.push(Track {
                source_id: format!("q{qi:04}/m{mi:03}"),
                frames: m.future.clone(),
            });
            let (track, position) = match m.source {
                MemberSource::Corpus { track, position } => (track as i64, position as i64),
                MemberSource::Query => (-1, -1),
            };
            members.push(SidecarMember { track, position, distance: m.distance });
        }
        queries.push(SidecarQuery { query: s.query.source_id.clone(), members });
    }
    if tracks.is_empty() {
        return Err(Error::EmptyInput("every MMGT set is empty; nothing to save".into()));
    }
    let corpus = MotionCorpus::new(first.query.skeleton.clone(), first.query.frame_rate, tracks)?;
    crate::io::save_corpus(&corpus, container)?;
    let doc = Sidecar { threshold: first.threshold, queries };
    let json = serde_json::to_vec_pretty(&doc).expect("sidecar serializes");
    crate::io::write_atomic(sidecar, &json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::stage_rng;
    use crate::motion::{root_center, Skeleton};
    use crate::synth::{default_families, generate_synthetic, SynthesisConfig};
    use proptest::prelude::*;
    use rand::Rng;
    use std::sync::Arc;

    /// Cut a query out of a corpus track: past = frames[..b], future =
    /// frames[b..b+t], origin = (track, b − 1).
    fn cut_query(corpus: &MotionCorpus, track: usize, b: usize, t: usize) -> MotionSequence {
        let frames = &corpus.tracks[track].frames;
        let mut q = MotionSequence::new(
            corpus.skeleton.clone(),
            corpus.frame_rate,
            format!("cut-{track}"),
            frames[..b].to_vec(),
            frames[b..b + t].to_vec(),
        )
        .unwrap();
        q.origin = Some((track, b - 1));
        q
    }

    fn random_walk_corpus(tracks: usize, frames: usize, step: f64, seed: u64) -> MotionCorpus {
        let skel = Arc::new(Skeleton::new(2, vec![(0, 1)], None).unwrap());
        let mut rng = stage_rng(seed, "mmgt-test-walk");
        let tracks = (0..tracks)
            .map(|i| {
                let mut pos = [0.0f64, 1.0, 0.0];
                let frames = (0..frames)
                    .map(|_| {
                        for v in pos.iter_mut() {
                            // keep test corpora on the f32 lattice, like real data
                            *v = (*v + rng.gen_range(-step..step)) as f32 as f64;
                        }
                        Pose::new(vec![[0.0, 0.0, 0.0], pos]).unwrap()
                    })
                    .collect();
                Track { source_id: format!("walk-{i}"), frames }
            })
            .collect();
        MotionCorpus::new(skel, 10.0, tracks).unwrap()
    }

    /// Literal double-loop oracle, written independently of the library scan.
    fn oracle_members(
        query: &MotionSequence,
        corpus: &MotionCorpus,
        w: usize,
        t: usize,
        thr: f64,
    ) -> Vec<(usize, usize, f64)> {
        let center = |p: &Pose| root_center(p);
        let qwin: Vec<Pose> = query.past[query.past.len() - w..].iter().map(center).collect();
        let mut out = Vec::new();
        for (ti, track) in corpus.tracks.iter().enumerate() {
            let n = track.frames.len();
            for last in 0..n {
                let first = (last + 1).checked_sub(w);
                let Some(first) = first else { continue };
                if last + t >= n {
                    continue;
                }
                let mut acc = 0.0;
                for (qi, f) in (first..=last).enumerate() {
                    let c = center(&track.frames[f]);
                    for (a, b) in c.coords().iter().zip(qwin[qi].coords()) {
                        for ax in 0..3 {
                            acc += (a[ax] - b[ax]).powi(2);
                        }
                    }
                }
                let d = acc.sqrt();
                if d <= thr {
                    out.push((ti, last, d));
                }
            }
        }
        out
    }

    #[test]
    fn self_match_is_present_at_distance_zero() {
        let corpus = generate_synthetic(
            &default_families(),
            &SynthesisConfig::pure(2, 40, 25.0, 21),
        )
        .unwrap();
        let q = cut_query(&corpus, 3, 10, 16);
        let cfg = MmgtConfig::h36m();
        let set = build_mmgt(&q, &corpus, &cfg).unwrap();
        let self_member = set
            .members
            .iter()
            .find(|m| m.source == MemberSource::Corpus { track: 3, position: 9 })
            .expect("self match present");
        assert_eq!(self_member.distance, 0.0);
        assert_eq!(self_member.future, q.future);
        assert!(set.k() >= 1);
        assert!(!set.flagged_empty);
    }

    #[test]
    fn query_from_outside_the_corpus_gets_an_injected_self_member() {
        let corpus = random_walk_corpus(2, 30, 0.05, 3);
        let other = random_walk_corpus(1, 30, 0.05, 99);
        let mut q = cut_query(&other, 0, 5, 4);
        q.origin = None; // not from `corpus`
        let cfg = MmgtConfig { similarity_threshold: 1e-6, ..MmgtConfig::h36m() };
        let set = build_mmgt(&q, &corpus, &cfg).unwrap();
        assert_eq!(set.k(), 1);
        assert_eq!(set.members[0].source, MemberSource::Query);
        assert_eq!(set.members[0].distance, 0.0);
        assert_eq!(set.members[0].future, q.future);
    }

    #[test]
    fn threshold_zero_without_self_or_duplicates_is_flagged_empty() {
        // Random-walk tracks: no two windows coincide exactly.
        let corpus = random_walk_corpus(3, 40, 0.05, 7);
        let mut q = cut_query(&corpus, 0, 8, 6);
        // Perturb the query window so even its own origin no longer matches.
        let last = q.past.len() - 1;
        let mut coords = q.past[last].coords().to_vec();
        coords[1][0] += 0.25;
        q.past[last] = Pose::new(coords).unwrap();
        q.origin = None;
        let cfg = MmgtConfig {
            similarity_threshold: 0.0,
            include_self: false,
            ..MmgtConfig::h36m()
        };
        let set = build_mmgt(&q, &corpus, &cfg).unwrap();
        assert!(set.members.is_empty());
        assert!(set.flagged_empty);
    }

    #[test]
    fn toy_corpus_matches_independent_double_loop_oracle() {
        let corpus = random_walk_corpus(3, 50, 0.12, 11);
        for (w, t, thr) in [(1usize, 6usize, 0.5f64), (3, 4, 0.8), (2, 10, 0.3)] {
            let q = cut_query(&corpus, 1, 20, t);
            let cfg = MmgtConfig {
                past_window_frames: w,
                similarity_threshold: thr,
                include_self: false,
                root_center: true,
            };
            let set = build_mmgt(&q, &corpus, &cfg).unwrap();
            let oracle = oracle_members(&q, &corpus, w, t, thr);
            assert_eq!(set.k(), oracle.len(), "w={w} t={t} thr={thr}");
            for (m, (ti, pos, d)) in set.members.iter().zip(&oracle) {
                assert_eq!(m.source, MemberSource::Corpus { track: *ti, position: *pos });
                assert!((m.distance - d).abs() < 1e-9);
                assert_eq!(m.future, corpus.tracks[*ti].frames[pos + 1..pos + 1 + t]);
            }
        }
    }

    #[test]
    fn indexed_batch_equals_reference_scan_bit_for_bit() {
        // ~9000 eligible windows, inside the documented oracle range.
        let corpus = random_walk_corpus(6, 1500, 0.08, 13);
        for thr in [0.2, 0.6, 1.5] {
            let cfg = MmgtConfig { similarity_threshold: thr, ..MmgtConfig::h36m() };
            let queries: Vec<MotionSequence> = (0..8)
                .map(|i| cut_query(&corpus, i % 6, 40 + 13 * i, 8))
                .collect();
            let (sets, summary) = build_all_mmgt(&queries, &corpus, &cfg).unwrap();
            for (q, set) in queries.iter().zip(&sets) {
                let reference = build_mmgt(q, &corpus, &cfg).unwrap();
                assert_eq!(set.k(), reference.k(), "thr={thr}");
                for (a, b) in set.members.iter().zip(&reference.members) {
                    assert_eq!(a.source, b.source);
                    assert_eq!(a.distance.to_bits(), b.distance.to_bits());
                    assert_eq!(a.future, b.future);
                }
            }
            // every member's recomputed distance honors the threshold
            for set in &sets {
                for m in &set.members {
                    assert!(m.distance <= thr);
                }
            }
            let total: usize = summary.k_histogram.iter().map(|(k, n)| k * n).sum();
            assert_eq!(total, sets.iter().map(MmgtSet::k).sum::<usize>());
        }
    }

    #[test]
    fn wide_windows_and_multi_frame_pasts_agree_with_the_index() {
        let corpus = random_walk_corpus(4, 200, 0.1, 17);
        let cfg = MmgtConfig { past_window_frames: 4, similarity_threshold: 0.9, ..MmgtConfig::h36m() };
        let queries: Vec<MotionSequence> = (0..5).map(|i| cut_query(&corpus, i % 4, 30 + 11 * i, 6)).collect();
        let (sets, _) = build_all_mmgt(&queries, &corpus, &cfg).unwrap();
        for (q, set) in queries.iter().zip(&sets) {
            let reference = build_mmgt(q, &corpus, &cfg).unwrap();
            assert_eq!(set.members, reference.members);
        }
    }

    #[test]
    fn empty_test_set_yields_empty_output() {
        let corpus = random_walk_corpus(1, 20, 0.05, 1);
        let (sets, summary) = build_all_mmgt(&[], &corpus, &MmgtConfig::h36m()).unwrap();
        assert!(sets.is_empty());
        assert_eq!(summary.k_max, 0);
        assert_eq!(summary.empty_queries, 0);
    }

    #[test]
    fn tiny_threshold_yields_self_only_sets() {
        let corpus = random_walk_corpus(3, 60, 0.1, 19);
        let queries: Vec<MotionSequence> = (0..3).map(|i| cut_query(&corpus, i, 15, 8)).collect();
        let cfg = MmgtConfig { similarity_threshold: 1e-9, ..MmgtConfig::h36m() };
        let (sets, summary) = build_all_mmgt(&queries, &corpus, &cfg).unwrap();
        for set in &sets {
            assert_eq!(set.k(), 1, "only the self match survives a tiny threshold");
            assert_eq!(set.members[0].distance, 0.0);
        }
        assert_eq!(summary.k_histogram.get(&1), Some(&3));
    }

    #[test]
    fn window_longer_than_past_is_rejected() {
        let corpus = random_walk_corpus(1, 30, 0.05, 23);
        let q = cut_query(&corpus, 0, 4, 4);
        let cfg = MmgtConfig { past_window_frames: 5, ..MmgtConfig::h36m() };
        assert!(matches!(build_mmgt(&q, &corpus, &cfg), Err(Error::InvalidArgument(_))));
        let err = build_all_mmgt(std::slice::from_ref(&q), &corpus, &cfg).unwrap_err();
        assert!(err.to_string().contains("query 0"), "{err}");
    }

    #[test]
    fn sidecar_and_container_roundtrip() {
        let corpus = random_walk_corpus(3, 60, 0.1, 29);
        let queries: Vec<MotionSequence> = (0..2).map(|i| cut_query(&corpus, i, 20, 6)).collect();
        let (sets, _) = build_all_mmgt(&queries, &corpus, &MmgtConfig { similarity_threshold: 1.0, ..MmgtConfig::h36m() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cpath = dir.path().join("mmgt.bin");
        let spath = dir.path().join("mmgt.json");
        save_mmgt(&sets, &cpath, &spath).unwrap();
        let container = crate::io::load_corpus(&cpath).unwrap();
        let expected: usize = sets.iter().map(MmgtSet::k).sum();
        assert_eq!(container.tracks.len(), expected);
        let sidecar: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&spath).unwrap()).unwrap();
        assert_eq!(sidecar["queries"].as_array().unwrap().len(), 2);
        // member futures survive the container byte-exactly (f32 lattice)
        assert_eq!(container.tracks[0].frames, sets[0].members[0].future);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Enlarging the threshold never shrinks any MMGT set.
        #[test]
        fn threshold_monotonicity(seed in 0u64..500, w in 1usize..4, grow in 0.05f64..1.0) {
            let corpus = random_walk_corpus(2, 40, 0.15, seed);
            let q = cut_query(&corpus, 0, 12, 5);
            let base = MmgtConfig { past_window_frames: w, similarity_threshold: 0.4, include_self: false, root_center: true };
            let bigger = MmgtConfig { similarity_threshold: base.similarity_threshold + grow, ..base.clone() };
            let small = build_mmgt(&q, &corpus, &base).unwrap();
            let large = build_mmgt(&q, &corpus, &bigger).unwrap();
            prop_assert!(small.k() <= large.k());
            for m in &small.members {
                prop_assert!(large.members.iter().any(|n| n.source == m.source));
            }
        }
    }
}
