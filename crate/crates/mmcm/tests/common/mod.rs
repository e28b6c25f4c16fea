//! Shared test support: independent reference implementations (naive
//! density clustering, Kruskal MST, trustworthiness), planted-blob and
//! synthetic-corpus fixtures, and a lazily fitted shared pipeline.
//!
//! Everything here is deliberately written from first principles, without
//! reusing the library's algorithmic internals, so the integration suites
//! compare two independent derivations of the same math.

#![allow(dead_code)]

use std::sync::OnceLock;

use mmcm::config::RunConfig;
use mmcm::math::{stage_rng, Matrix};
use mmcm::mmgt::MmgtSet;
use mmcm::motion::{MotionCorpus, PredictionSet};
use mmcm::pipeline::{fit_pipeline, FittedPipeline};
use mmcm::synth::{default_families, generate_synthetic, SynthesisConfig};
use rand::Rng;

// ---------------------------------------------------------------------------
// planted blobs
// ---------------------------------------------------------------------------

/// Gaussian blobs with centers `separation` apart on a line, σ = 1 per
/// coordinate. With `separation ≥ 30` the blobs are ≥ 10× their 3σ radius
/// apart, far beyond any density-clustering ambiguity.
pub fn planted_blobs(
    counts: &[usize],
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Matrix, Vec<i64>) {
    let n: usize = counts.iter().sum();
    let mut rng = stage_rng(seed, "test/blobs");
    let mut m = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (b, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let r = m.row_mut(row);
            r[0] = b as f64 * separation;
            for v in r.iter_mut() {
                // Box–Muller keeps this independent of rand_distr
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                *v += (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
            labels.push(b as i64);
            row += 1;
        }
    }
    (m, labels)
}

// ---------------------------------------------------------------------------
// distances, core distances, Kruskal
// ---------------------------------------------------------------------------

fn dist(points: &Matrix, i: usize, j: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(points.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Core distance of every point: distance to its `min_samples`-th nearest
/// *other* point.
pub fn core_distances_ref(points: &Matrix, min_samples: usize) -> Vec<f64> {
    let n = points.rows;
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(points, i, j)).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[min_samples - 1]
        })
        .collect()
}

fn mreach_matrix(points: &Matrix, min_samples: usize) -> Vec<Vec<f64>> {
    let n = points.rows;
    let core = core_distances_ref(points, min_samples);
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(points, i, j).max(core[i]).max(core[j]);
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

/// Total weight of a minimum spanning tree over the mutual-reachability
/// graph, by Kruskal with union-find.
pub fn kruskal_mst_weight(points: &Matrix, min_samples: usize) -> f64 {
    let n = points.rows;
    let mreach = mreach_matrix(points, min_samples);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((mreach[i][j], i, j));
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut total = 0.0;
    let mut joined = 0;
    for (w, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            total += w;
            joined += 1;
            if joined == n - 1 {
                break;
            }
        }
    }
    total
}

// ---------------------------------------------------------------------------
// naive full-dendrogram density clustering reference
// ---------------------------------------------------------------------------

enum Node {
    Leaf(usize),
    Merge { left: Box<Node>, right: Box<Node>, dist: f64 },
}

impl Node {
    fn leaves(&self, out: &mut Vec<usize>) {
        match self {
            Node::Leaf(p) => out.push(*p),
            Node::Merge { left, right, .. } => {
                left.leaves(out);
                right.leaves(out);
            }
        }
    }

    fn size(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Merge { left, right, .. } => left.size() + right.size(),
        }
    }
}

/// Naive agglomerative single linkage over mutual reachability: repeatedly
/// merge the two active clusters with the smallest cross-pair distance.
/// O(N³) and proud of it — it is an oracle, not a competitor.
fn single_linkage(points: &Matrix, min_samples: usize) -> Node {
    let n = points.rows;
    assert!(n >= 2);
    let mreach = mreach_matrix(points, min_samples);
    let mut active: Vec<(Node, Vec<usize>)> =
        (0..n).map(|i| (Node::Leaf(i), vec![i])).collect();
    while active.len() > 1 {
        let (mut bi, mut bj, mut bd) = (0, 1, f64::INFINITY);
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                for &p in &active[i].1 {
                    for &q in &active[j].1 {
                        if mreach[p][q] < bd {
                            bd = mreach[p][q];
                            bi = i;
                            bj = j;
                        }
                    }
                }
            }
        }
        let (right, mut rm) = active.swap_remove(bj);
        let (left, lm) = active.swap_remove(if bi == active.len() { bj } else { bi });
        rm.extend(lm);
        active.push((Node::Merge { left: Box::new(left), right: Box::new(right), dist: bd }, rm));
    }
    active.pop().unwrap().0
}

struct CondensedRef {
    /// (parent cluster, child cluster, λ, size) for cluster births.
    cluster_rows: Vec<(usize, usize, f64, usize)>,
    /// (parent cluster, point, λ) for point exits.
    point_rows: Vec<(usize, usize, f64)>,
    /// Parent cluster of each cluster (root = 0 has none).
    parent: Vec<Option<usize>>,
}

/// Classic top-down condensation: children smaller than `m` fall out of the
/// current cluster at the current merge's λ; children at least `m` either
/// continue the cluster (if alone) or spawn two new clusters (if both).
fn condense_ref(root: Node, m: usize) -> CondensedRef {
    let mut c = CondensedRef { cluster_rows: Vec::new(), point_rows: Vec::new(), parent: vec![None] };
    let mut stack: Vec<(Node, usize)> = vec![(root, 0)];
    while let Some((node, cluster)) = stack.pop() {
        match node {
            Node::Leaf(_) => unreachable!("clusters hold ≥ m ≥ 2 points, a bare leaf cannot carry one"),
            Node::Merge { left, right, dist } => {
                let lambda = 1.0 / dist;
                let (ls, rs) = (left.size(), right.size());
                if ls >= m && rs >= m {
                    for size in [ls, rs] {
                        let id = c.parent.len();
                        c.parent.push(Some(cluster));
                        c.cluster_rows.push((cluster, id, lambda, size));
                    }
                    // ids were assigned left then right just above
                    let right_id = c.parent.len() - 1;
                    let left_id = right_id - 1;
                    stack.push((*left, left_id));
                    stack.push((*right, right_id));
                } else if ls >= m {
                    let mut pts = Vec::new();
                    right.leaves(&mut pts);
                    for p in pts {
                        c.point_rows.push((cluster, p, lambda));
                    }
                    stack.push((*left, cluster));
                } else if rs >= m {
                    let mut pts = Vec::new();
                    left.leaves(&mut pts);
                    for p in pts {
                        c.point_rows.push((cluster, p, lambda));
                    }
                    stack.push((*right, cluster));
                } else {
                    let mut pts = Vec::new();
                    left.leaves(&mut pts);
                    right.leaves(&mut pts);
                    for p in pts {
                        c.point_rows.push((cluster, p, lambda));
                    }
                }
            }
        }
    }
    c
}

/// Labels by the naive reference: single linkage → condensation →
/// excess-of-mass selection → nearest selected ancestor. Cluster labels are
/// densified in order of each cluster's smallest member point, noise = −1,
/// matching the library's labeling convention so results compare exactly.
pub fn naive_hdbscan(points: &Matrix, min_cluster_size: usize, min_samples: usize) -> Vec<i64> {
    let n = points.rows;
    let tree = single_linkage(points, min_samples);
    let c = condense_ref(tree, min_cluster_size);
    let n_clusters = c.parent.len();

    // birth λ of every cluster (root births at 0)
    let mut birth = vec![0.0; n_clusters];
    for &(_, child, lambda, _) in &c.cluster_rows {
        birth[child] = lambda;
    }
    // stability = Σ over own rows of (λ − λ_birth) × size
    let mut stability = vec![0.0; n_clusters];
    for &(parent, _, lambda, size) in &c.cluster_rows {
        stability[parent] += (lambda - birth[parent]) * size as f64;
    }
    for &(parent, _, lambda) in &c.point_rows {
        stability[parent] += lambda - birth[parent];
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (id, p) in c.parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(id);
        }
    }

    // excess-of-mass, bottom-up (ids grow downward, so reverse id order is
    // children-before-parents); the root is never selected
    let mut selected = vec![false; n_clusters];
    let mut subtree_score = stability.clone();
    for id in (1..n_clusters).rev() {
        let child_sum: f64 = children[id].iter().map(|&ch| subtree_score[ch]).sum();
        if children[id].is_empty() || stability[id] >= child_sum {
            selected[id] = true;
            // deselect every descendant
            let mut dstack = children[id].clone();
            while let Some(d) = dstack.pop() {
                selected[d] = false;
                dstack.extend(children[d].iter().copied());
            }
            subtree_score[id] = stability[id];
        } else {
            subtree_score[id] = child_sum;
        }
    }

    // a point belongs to the selected ancestor of the cluster it fell from
    let mut labels = vec![-2i64; n]; // -2 = unassigned sentinel
    let mut cluster_of_point = vec![usize::MAX; n];
    for &(parent, p, _) in &c.point_rows {
        cluster_of_point[p] = parent;
    }
    for p in 0..n {
        let mut at = cluster_of_point[p];
        assert_ne!(at, usize::MAX, "every point exits the hierarchy exactly once");
        labels[p] = loop {
            if selected[at] {
                break at as i64;
            }
            match c.parent[at] {
                Some(up) => at = up,
                None => break -1,
            }
        };
    }

    // densify positive labels by smallest member
    let mut first_member = std::collections::BTreeMap::<i64, usize>::new();
    for (p, &l) in labels.iter().enumerate() {
        if l >= 0 {
            first_member.entry(l).or_insert(p);
        }
    }
    let mut order: Vec<(usize, i64)> = first_member.into_iter().map(|(l, p)| (p, l)).collect();
    order.sort();
    let remap: std::collections::BTreeMap<i64, i64> =
        order.iter().enumerate().map(|(new, &(_, old))| (old, new as i64)).collect();
    labels.iter().map(|l| if *l >= 0 { remap[l] } else { -1 }).collect()
}

// ---------------------------------------------------------------------------
// trustworthiness
// ---------------------------------------------------------------------------

fn rank_table(points: &Matrix) -> Vec<Vec<usize>> {
    // rank_table[i][j] = rank of j among i's neighbors (1 = nearest, i excluded)
    let n = points.rows;
    (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| dist(points, i, a).partial_cmp(&dist(points, i, b)).unwrap());
            let mut rank = vec![0usize; n];
            for (r, &j) in idx.iter().enumerate() {
                rank[j] = r + 1;
            }
            rank
        })
        .collect()
}

/// Neighborhood-preservation score of a projection: 1 is perfect, values
/// fall as low-space neighborhoods recruit points that were far in high
/// space.
pub fn trustworthiness(high: &Matrix, low: &Matrix, k: usize) -> f64 {
    let n = high.rows;
    assert_eq!(n, low.rows);
    assert!(2 * n > 3 * k + 1, "k too large for n");
    let high_rank = rank_table(high);
    let mut penalty = 0.0;
    for i in 0..n {
        let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        idx.sort_by(|&a, &b| dist(low, i, a).partial_cmp(&dist(low, i, b)).unwrap());
        for &j in idx.iter().take(k) {
            let r = high_rank[i][j];
            if r > k {
                penalty += (r - k) as f64;
            }
        }
    }
    1.0 - 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0)) * penalty
}

// ---------------------------------------------------------------------------
// shared synthetic fixture
// ---------------------------------------------------------------------------

/// The desk-scale synthetic corpus used across the integration suites:
/// 5 families × 4 tracks × 120 frames at 25 Hz.
pub fn desk_corpus() -> MotionCorpus {
    let cfg = RunConfig::default();
    let (specs, synth) = cfg.synthesis();
    generate_synthetic(&specs, &synth).expect("synthetic corpus")
}

/// A smaller corpus for quick flows (2 tracks per family).
pub fn small_corpus(seed: u64) -> MotionCorpus {
    generate_synthetic(&default_families(), &SynthesisConfig::pure(2, 90, 25.0, seed))
        .expect("synthetic corpus")
}

pub struct Fixture {
    pub corpus: MotionCorpus,
    pub config: RunConfig,
    pub pipeline: FittedPipeline,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

/// Corpus + pipeline fitted once per test binary with the default
/// configuration, shared by every criterion that scores against it.
pub fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let config = RunConfig::default();
        let corpus = desk_corpus();
        let pipeline = fit_pipeline(&corpus, &config.pipeline_config()).expect("fit fixture pipeline");
        Fixture { corpus, config, pipeline }
    })
}

/// Evaluation samples mined from the fixture corpus with the MMGT futures
/// standing in as predictions.
pub fn fixture_samples(count: usize) -> Vec<(PredictionSet, MmgtSet)> {
    let f = fixture();
    mmcm::perturb::mmgt_prediction_samples(&f.pipeline, &f.corpus, f.config.b, count)
        .expect("mine fixture samples")
}
