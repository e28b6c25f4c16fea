//! Density-based mode extraction over the layout space.
//!
//! Hierarchical density clustering in the classic mutual-reachability
//! formulation: per-point core distances (distance to the
//! `min_samples`-th nearest other point), a minimum spanning tree of the
//! complete mutual-reachability graph (`d_mreach(a,b) = max(core_a, core_b,
//! d(a,b))`, Prim in O(N²)), a single-linkage hierarchy from the sorted MST
//! edges, condensation by `min_cluster_size`, and excess-of-mass cluster
//! selection over the condensed tree (the root is never selected). Each
//! selected cluster is a **mode**; unselected points are noise.
//!
//! Zero-weight MST edges (exact duplicate points) are contracted into
//! multi-point units **before** the hierarchy is built, so λ = 1/weight
//! stays finite everywhere. A unit that bottoms out a live cluster leaves
//! it at the λ of the last split above it.
//!
//! Mode ids are dense, ordered by each mode's smallest member index.
//! Centroids are arithmetic means of member layout rows: Stage-2 assigns
//! query embeddings to the nearest centroid in this same space, so the two
//! stages measure distances with the same ruler.

use serde::{Deserialize, Serialize};

use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::math::{self, Matrix};
use crate::motion::MotionCorpus;

/// Label value for points that belong to no mode.
pub const NOISE: i64 = -1;

/// Clustering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Smallest point count that can survive condensation as a cluster.
    pub min_cluster_size: usize,
    /// Neighbor rank defining the core distance (1 = nearest neighbor).
    pub min_samples: usize,
}

impl ClusterConfig {
    /// Defaults tuned for the 17-keypoint preset.
    pub fn h36m() -> Self {
        ClusterConfig { min_cluster_size: 15, min_samples: 1 }
    }

    /// Defaults tuned for the 21-keypoint preset.
    pub fn amass() -> Self {
        ClusterConfig { min_cluster_size: 50, min_samples: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Config("min_cluster_size must be ≥ 2".into()));
        }
        if self.min_samples < 1 {
            return Err(Error::Config("min_samples must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One mode: dense id, member point indices, layout-space centroid, and a
/// normalized persistence in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub id: usize,
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    /// Excess-of-mass stability normalized by the cluster's maximal possible
    /// mass, `S(C) / (|C| · (λ_max − λ_birth))` — dimensionless, so values
    /// are comparable across layout dimensionalities.
    pub persistence: f64,
    /// Condensed-tree cluster id backing this mode (for audit).
    pub condensed_id: usize,
}

/// Condensed-tree rows, in the conventional (parent, child, λ, size) form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChildRef {
    Point(usize),
    Cluster(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedRow {
    pub parent: usize,
    pub child: ChildRef,
    pub lambda: f64,
    pub size: usize,
}

/// Clustering result over one layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    /// Per-point mode id, or [`NOISE`].
    pub labels: Vec<i64>,
    pub modes: Vec<Mode>,
    /// Full condensed tree for audit; cluster 0 is the root.
    pub condensed: Vec<CondensedRow>,
    pub layout_dim: usize,
}

impl ModeTable {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn noise_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == NOISE).count() as f64 / self.labels.len() as f64
    }

    /// True when everything condensed away and no mode exists; evaluation
    /// cannot proceed on a degenerate table.
    pub fn is_degenerate(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mean_persistence(&self) -> f64 {
        if self.modes.is_empty() {
            return 0.0;
        }
        self.modes.iter().map(|m| m.persistence).sum::<f64>() / self.modes.len() as f64
    }

    /// Mode centroids as rows.
    pub fn centroids(&self) -> Matrix {
        let mut m = Matrix::zeros(self.modes.len(), self.layout_dim);
        for (i, mode) in self.modes.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&mode.centroid);
        }
        m
    }

    /// CSV export: `point,mode,x0,x1,…` one row per layout point.
    pub fn to_csv(&self, layout: &Matrix) -> String {
        let mut s = String::from("point,mode");
        for d in 0..self.layout_dim {
            s.push_str(&format!(",x{d}"));
        }
        s.push('\n');
        for i in 0..self.labels.len() {
            s.push_str(&format!("{i},{}", self.labels[i]));
            for v in layout.row(i) {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Distance to the `min_samples`-th nearest **other** point.
pub fn core_distances(points: &Matrix, min_samples: usize) -> Result<Vec<f64>> {
    let n = points.rows;
    if n <= min_samples {
        return Err(Error::InvalidArgument(format!(
            "core distances need more than min_samples = {min_samples} points, got {n}"
        )));
    }
    use rayon::prelude::*;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| math::l2_dist(points.row(i), points.row(j)))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dists[min_samples - 1]
        })
        .collect())
}

/// One MST edge of the mutual-reachability graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Prim's algorithm over the complete mutual-reachability graph, O(N²).
/// Ties resolve toward the smallest vertex index, so the tree is unique and
/// deterministic.
pub fn mutual_reachability_mst(points: &Matrix, cores: &[f64]) -> Result<Vec<MstEdge>> {
    let n = points.rows;
    if cores.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} core distances for {n} points",
            cores.len()
        )));
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    let mreach = |a: usize, b: usize| -> f64 {
        math::l2_dist(points.row(a), points.row(b)).max(cores[a]).max(cores[b])
    };
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = mreach(0, v);
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_w = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && best[v] < pick_w {
                pick = v;
                pick_w = best[v];
            }
        }
        in_tree[pick] = true;
        edges.push(MstEdge { i: parent[pick], j: pick, weight: pick_w });
        for v in 0..n {
            if !in_tree[v] {
                let w = mreach(pick, v);
                if w < best[v] {
                    best[v] = w;
                    parent[v] = pick;
                }
            }
        }
    }
    Ok(edges)
}

// ---------------------------------------------------------------------------
// hierarchy, condensation, extraction
// ---------------------------------------------------------------------------

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> (usize, usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
        (ra, rb)
    }
}

/// Dendrogram node: leaves are duplicate-merged units, internal nodes carry
/// the merge weight.
enum DendroNode {
    Leaf { points: Vec<usize> },
    Merge { left: usize, right: usize, weight: f64, size: usize },
}

impl DendroNode {
    fn size(&self) -> usize {
        match self {
            DendroNode::Leaf { points } => points.len(),
            DendroNode::Merge { size, .. } => *size,
        }
    }
}

/// Contract zero-weight MST edges into units, then single-linkage the rest.
/// Returns (nodes, root index). With all points identical there is a single
/// leaf and no merges.
fn build_dendrogram(n_points: usize, mst: &[MstEdge]) -> (Vec<DendroNode>, usize) {
    // unit assignment via zero-weight contraction
    let mut uf = UnionFind::new(n_points);
    for e in mst {
        if e.weight == 0.0 {
            uf.union(e.i, e.j);
        }
    }
    let mut unit_of = vec![usize::MAX; n_points];
    let mut units: Vec<Vec<usize>> = Vec::new();
    for p in 0..n_points {
        let r = uf.find(p);
        if unit_of[r] == usize::MAX {
            unit_of[r] = units.len();
            units.push(Vec::new());
        }
        unit_of[p] = unit_of[r];
        units[unit_of[p]].push(p);
    }

    let mut nodes: Vec<DendroNode> =
        units.into_iter().map(|points| DendroNode::Leaf { points }).collect();
    let unit_count = nodes.len();

    // sort positive edges ascending; ties by endpoint indices for determinism
    let mut edges: Vec<&MstEdge> = mst.iter().filter(|e| e.weight > 0.0).collect();
    edges.sort_by(|a, b| {
        a.weight
            .partial_cmp(&b.weight)
            .unwrap()
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });

    // union-find over units, tracking each component's current node id
    let mut uf = UnionFind::new(unit_count);
    let mut node_of_root: Vec<usize> = (0..unit_count).collect();
    let mut root = 0usize;
    for e in edges {
        let (ua, ub) = (unit_of[e.i], unit_of[e.j]);
        let (ra, rb) = (uf.find(ua), uf.find(ub));
        debug_assert_ne!(ra, rb, "MST edge within one component");
        let left = node_of_root[ra];
        let right = node_of_root[rb];
        let size = nodes[left].size() + nodes[right].size();
        nodes.push(DendroNode::Merge { left, right, weight: e.weight, size });
        let (_, new_root) = uf.union(ra, rb);
        node_of_root[new_root] = nodes.len() - 1;
        root = nodes.len() - 1;
    }
    (nodes, root)
}

fn collect_points(nodes: &[DendroNode], from: usize, out: &mut Vec<usize>) {
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        match &nodes[n] {
            DendroNode::Leaf { points } => out.extend_from_slice(points),
            DendroNode::Merge { left, right, .. } => {
                stack.push(*left);
                stack.push(*right);
            }
        }
    }
}

/// Condense the dendrogram and extract modes by excess of mass.
///
/// `points` supplies member coordinates for centroids. The returned table is
/// degenerate (no modes) when everything condenses away; callers that need
/// modes must check [`ModeTable::is_degenerate`].
pub fn condense_and_extract(
    points: &Matrix,
    mst: &[MstEdge],
    cfg: &ClusterConfig,
) -> Result<ModeTable> {
    cfg.validate()?;
    let n = points.rows;
    if n == 0 {
        return Err(Error::EmptyInput("clustering zero points".into()));
    }
    let m = cfg.min_cluster_size;
    let (nodes, root) = build_dendrogram(n, mst);

    // --- condensation -----------------------------------------------------
    let mut rows: Vec<CondensedRow> = Vec::new();
    let mut cluster_parent: Vec<usize> = vec![0]; // cluster 0 = condensed root
    let mut cluster_birth: Vec<f64> = vec![0.0];
    // stack of (dendrogram node, condensed cluster, λ at which we entered)
    let mut stack: Vec<(usize, usize, f64)> = vec![(root, 0, 0.0)];
    while let Some((node, cluster, entry_lambda)) = stack.pop() {
        match &nodes[node] {
            DendroNode::Leaf { points: pts } => {
                // a unit that bottoms out a live cluster leaves at the λ of
                // the last split above it
                for &p in pts {
                    rows.push(CondensedRow { parent: cluster, child: ChildRef::Point(p), lambda: entry_lambda, size: 1 });
                }
            }
            DendroNode::Merge { left, right, weight, .. } => {
                let lambda = 1.0 / weight;
                let (ls, rs) = (nodes[*left].size(), nodes[*right].size());
                if ls >= m && rs >= m {
                    for &(child, csize) in &[(*left, ls), (*right, rs)] {
                        let cid = cluster_parent.len();
                        cluster_parent.push(cluster);
                        cluster_birth.push(lambda);
                        rows.push(CondensedRow { parent: cluster, child: ChildRef::Cluster(cid), lambda, size: csize });
                        stack.push((child, cid, lambda));
                    }
                } else if ls >= m || rs >= m {
                    let (keep, drop) = if ls >= m { (*left, *right) } else { (*right, *left) };
                    let mut dropped = Vec::new();
                    collect_points(&nodes, drop, &mut dropped);
                    dropped.sort_unstable();
                    for p in dropped {
                        rows.push(CondensedRow { parent: cluster, child: ChildRef::Point(p), lambda, size: 1 });
                    }
                    stack.push((keep, cluster, lambda));
                } else {
                    let mut dropped = Vec::new();
                    collect_points(&nodes, node, &mut dropped);
                    dropped.sort_unstable();
                    for p in dropped {
                        rows.push(CondensedRow { parent: cluster, child: ChildRef::Point(p), lambda, size: 1 });
                    }
                }
            }
        }
    }

    let n_clusters = cluster_parent.len();

    // --- stability ---------------------------------------------------------
    // S(C) = Σ over C's own rows of (λ_row − λ_birth(C)) · size
    let mut stability = vec![0.0; n_clusters];
    let mut lambda_max = vec![0.0f64; n_clusters];
    let mut row_mass = vec![0usize; n_clusters];
    for r in &rows {
        stability[r.parent] += (r.lambda - cluster_birth[r.parent]) * r.size as f64;
        lambda_max[r.parent] = lambda_max[r.parent].max(r.lambda);
        row_mass[r.parent] += r.size;
    }

    // --- excess-of-mass selection (root excluded) --------------------------
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for c in 1..n_clusters {
        children[cluster_parent[c]].push(c);
    }
    // process deepest-first: cluster ids increase downward (stack order), so
    // reverse id order is a valid bottom-up order
    let mut selected = vec![false; n_clusters];
    let mut subtree_stability = vec![0.0; n_clusters];
    for c in (1..n_clusters).rev() {
        let child_sum: f64 = children[c].iter().map(|&d| subtree_stability[d]).sum();
        if children[c].is_empty() || stability[c] >= child_sum {
            selected[c] = true;
            subtree_stability[c] = stability[c];
            // deselect every descendant
            let mut stack: Vec<usize> = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend_from_slice(&children[d]);
            }
        } else {
            subtree_stability[c] = child_sum;
        }
    }

    // --- labels -------------------------------------------------------------
    // each point's path to the root crosses at most one selected cluster
    let mut labels_by_cluster: Vec<i64> = vec![NOISE; n_clusters];
    let mut ordered: Vec<usize> = (1..n_clusters).filter(|&c| selected[c]).collect();
    // modes get dense ids ordered by smallest member; find smallest member
    // per selected cluster first
    let mut point_cluster = vec![0usize; n];
    for r in &rows {
        if let ChildRef::Point(p) = r.child {
            point_cluster[p] = r.parent;
        }
    }
    let selected_ancestor = |mut c: usize| -> Option<usize> {
        loop {
            if selected[c] {
                return Some(c);
            }
            if c == 0 {
                return None;
            }
            c = cluster_parent[c];
        }
    };
    let mut smallest_member = vec![usize::MAX; n_clusters];
    for p in 0..n {
        if let Some(c) = selected_ancestor(point_cluster[p]) {
            smallest_member[c] = smallest_member[c].min(p);
        }
    }
    ordered.retain(|&c| smallest_member[c] != usize::MAX);
    ordered.sort_by_key(|&c| smallest_member[c]);
    for (id, &c) in ordered.iter().enumerate() {
        labels_by_cluster[c] = id as i64;
    }
    let mut labels = vec![NOISE; n];
    for p in 0..n {
        if let Some(c) = selected_ancestor(point_cluster[p]) {
            labels[p] = labels_by_cluster[c];
        }
    }

    // --- modes ---------------------------------------------------------------
    let d = points.cols;
    let mut modes = Vec::with_capacity(ordered.len());
    for (id, &c) in ordered.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&p| labels[p] == id as i64).collect();
        let mut centroid = vec![0.0; d];
        for &p in &members {
            for (acc, v) in centroid.iter_mut().zip(points.row(p)) {
                *acc += v;
            }
        }
        for v in centroid.iter_mut() {
            *v /= members.len() as f64;
        }
        let denom = row_mass[c] as f64 * (lambda_max[c] - cluster_birth[c]);
        let persistence = if denom > 0.0 { (stability[c] / denom).min(1.0) } else { 0.0 };
        modes.push(Mode { id, members, centroid, persistence, condensed_id: c });
    }

    Ok(ModeTable { labels, modes, condensed: rows, layout_dim: d })
}

/// Full pipeline over a point matrix: cores → MST → condense → extract.
pub fn cluster_layout(points: &Matrix, cfg: &ClusterConfig) -> Result<ModeTable> {
    let cores = core_distances(points, cfg.min_samples)?;
    let mst = mutual_reachability_mst(points, &cores)?;
    condense_and_extract(points, &mst, cfg)
}

/// Cluster the embedder's stored training layout into modes. The corpus is
/// the one the embedder was fitted on; its mined window count must match
/// the layout rows. A clustering where everything is noise cannot support
/// evaluation and is an error here.
pub fn fit_modes(
    embedder: &Embedder,
    corpus: &MotionCorpus,
    cfg: &ClusterConfig,
) -> Result<ModeTable> {
    let (windows, _) = crate::embedding::mine_windows_with_refs(corpus, &embedder.window)?;
    let layout = embedder.layout.training_layout();
    if windows.rows != layout.rows {
        return Err(Error::InvalidArgument(format!(
            "corpus mines {} windows but the embedder stores {} layout rows — not the fitting corpus",
            windows.rows, layout.rows
        )));
    }
    let table = cluster_layout(layout, cfg)?;
    if table.is_degenerate() {
        return Err(Error::DegenerateClustering(format!(
            "all {} training windows were labeled noise under min_cluster_size {}, min_samples {}",
            layout.rows, cfg.min_cluster_size, cfg.min_samples
        )));
    }
    Ok(table)
}

/// One row of the hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub layout_dim: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub mode_count: usize,
    pub mean_persistence: f64,
    pub noise_rate: f64,
    /// `mean_persistence × (1 − noise_rate)`; the ranking score.
    pub score: f64,
}

/// Sweep layout dimensionalities × clustering configurations, ranked by
/// score (descending), ties toward fewer modes. The embedder's codes are
/// reused; each distinct dimension refits only the layout stage.
pub fn sweep_stability(
    embedder: &Embedder,
    corpus: &MotionCorpus,
    dims: &[usize],
    grid: &[ClusterConfig],
) -> Result<Vec<StabilityReport>> {
    if dims.is_empty() || grid.is_empty() {
        return Err(Error::InvalidArgument("stability sweep needs a non-empty grid".into()));
    }
    let (windows, _) = crate::embedding::mine_windows_with_refs(corpus, &embedder.window)?;
    let codes = embedder.encoder.encode_batch(&windows)?;
    let mut reports = Vec::with_capacity(dims.len() * grid.len());
    for &dim in dims {
        let layout = if dim == embedder.layout.dim() && codes.rows == embedder.layout.len() {
            embedder.layout.clone()
        } else {
            let cfg = crate::layout::LayoutConfig { d: dim, ..embedder.layout.config.clone() };
            crate::layout::fit_layout(&codes, &cfg)?
        };
        for cc in grid {
            let table = cluster_layout(layout.training_layout(), cc)?;
            let mean_persistence = table.mean_persistence();
            let noise_rate = table.noise_rate();
            reports.push(StabilityReport {
                layout_dim: dim,
                min_cluster_size: cc.min_cluster_size,
                min_samples: cc.min_samples,
                mode_count: table.mode_count(),
                mean_persistence,
                noise_rate,
                score: mean_persistence * (1.0 - noise_rate),
            });
        }
    }
    reports.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.mode_count.cmp(&b.mode_count))
            .then(a.layout_dim.cmp(&b.layout_dim))
            .then(a.min_cluster_size.cmp(&b.min_cluster_size))
            .then(a.min_samples.cmp(&b.min_samples))
    });
    Ok(reports)
}
