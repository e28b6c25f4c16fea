//! Small numeric utilities shared across the crate: a flat row-major matrix,
//! the three dense products backpropagation needs, seeded RNG fan-out, and a
//! few statistics helpers.
//!
//! Everything here is deterministic. The parallel kernels split work by
//! output row, and each output value is accumulated in a fixed order, so
//! results are bit-identical regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|r| r.len() == cols));
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Minimum row count before the dense kernels bother with thread fan-out.
/// Single-row calls (one window at a time) stay strictly single-threaded,
/// which keeps per-prediction cost measurements honest.
const PAR_ROWS: usize = 8;

/// `out[n×o] = a[n×i] · w[o×i]ᵀ` — batch forward pass against row-major
/// weights. Each output element is a dot product of two contiguous slices.
pub fn matmul_nt(a: &[f64], n: usize, d_in: usize, w: &[f64], d_out: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * d_in);
    debug_assert_eq!(w.len(), d_out * d_in);
    debug_assert_eq!(out.len(), n * d_out);
    let body = |(s, out_row): (usize, &mut [f64])| {
        let a_row = &a[s * d_in..(s + 1) * d_in];
        for (o, out_v) in out_row.iter_mut().enumerate() {
            *out_v = dot(a_row, &w[o * d_in..(o + 1) * d_in]);
        }
    };
    if n >= PAR_ROWS {
        out.par_chunks_mut(d_out).enumerate().for_each(body);
    } else {
        out.chunks_mut(d_out).enumerate().for_each(body);
    }
}

/// `out[n×i] = delta[n×o] · w[o×i]` — pushes deltas back through a layer.
pub fn matmul_nn(delta: &[f64], n: usize, d_out: usize, w: &[f64], d_in: usize, out: &mut [f64]) {
    debug_assert_eq!(delta.len(), n * d_out);
    debug_assert_eq!(w.len(), d_out * d_in);
    debug_assert_eq!(out.len(), n * d_in);
    let body = |(s, out_row): (usize, &mut [f64])| {
        out_row.fill(0.0);
        for o in 0..d_out {
            axpy(delta[s * d_out + o], &w[o * d_in..(o + 1) * d_in], out_row);
        }
    };
    if n >= PAR_ROWS {
        out.par_chunks_mut(d_in).enumerate().for_each(body);
    } else {
        out.chunks_mut(d_in).enumerate().for_each(body);
    }
}

/// `out[o×i] = delta[n×o]ᵀ · a[n×i]` — weight gradient accumulated over the
/// batch, one output row per weight row.
pub fn matmul_tn(delta: &[f64], n: usize, d_out: usize, a: &[f64], d_in: usize, out: &mut [f64]) {
    debug_assert_eq!(delta.len(), n * d_out);
    debug_assert_eq!(a.len(), n * d_in);
    debug_assert_eq!(out.len(), d_out * d_in);
    let body = |(o, out_row): (usize, &mut [f64])| {
        out_row.fill(0.0);
        for s in 0..n {
            axpy(delta[s * d_out + o], &a[s * d_in..(s + 1) * d_in], out_row);
        }
    };
    if d_out >= PAR_ROWS && n >= PAR_ROWS {
        out.par_chunks_mut(d_in).enumerate().for_each(body);
    } else {
        out.chunks_mut(d_in).enumerate().for_each(body);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Derive a per-stage seed from the master seed. Every randomized stage gets
/// its own stream, so changing e.g. the perturbation seed cannot shift the
/// encoder's batches.
pub fn stage_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn stage_rng(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stage_seed(master, label))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n − 1 denominator); 0 for fewer than 2 values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Median of a sample (mean of the central pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Indices of the `k` smallest values of `dists`, ascending, ties broken by
/// index. `exclude` (if any) is skipped — used for leave-self-out queries.
pub fn k_smallest(dists: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> =
        (0..dists.len()).filter(|&i| Some(i) != exclude).collect();
    idx.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Spearman rank correlation between two equal-length series, with average
/// ranks for ties. Used for trend assertions over sweep levels.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "series must pair up");
    assert!(xs.len() >= 2, "rank correlation needs at least two points");
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0; // a constant series carries no trend information
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Adjusted Rand index between two labelings of the same points (1 for
/// identical partitions up to renaming, ≈0 for independent ones). Useful for
/// validating clustered modes against external annotations.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    use std::collections::BTreeMap;
    let mut cont = BTreeMap::<(i64, i64), u64>::new();
    let mut rows = BTreeMap::<i64, u64>::new();
    let mut cols = BTreeMap::<i64, u64>::new();
    for i in 0..n {
        *cont.entry((a[i], b[i])).or_insert(0) += 1;
        *rows.entry(a[i]).or_insert(0) += 1;
        *cols.entry(b[i]).or_insert(0) += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cont: f64 = cont.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0; // both partitions trivial (all-one-cluster or all-singletons)
    }
    (sum_cont - expected) / (max_index - expected)
}
