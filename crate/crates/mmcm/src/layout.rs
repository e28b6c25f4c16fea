//! Stage-1b: neighbor-embedding layout of encoder codes.
//!
//! A from-scratch reimplementation of the classic fuzzy-neighborhood layout:
//!
//! 1. exact k-nearest-neighbor graph over the 64-dimensional codes;
//! 2. per point, a connectivity radius ρᵢ (smallest **positive** neighbor
//!    distance; with all-zero neighbors σᵢ = 1) and a bandwidth σᵢ solved by
//!    bisection so that Σⱼ exp(−max(0, dᵢⱼ−ρᵢ)/σᵢ) = log₂(k);
//! 3. symmetrized edge weights w = wᵢⱼ + wⱼᵢ − wᵢⱼ·wⱼᵢ ∈ [0, 1];
//! 4. output-space curve 1/(1 + a·x^{2b}) least-squares-fitted to the
//!    min_dist-offset exponential;
//! 5. stochastic layout optimization: each edge attracts its endpoints with
//!    frequency proportional to its weight, five negative samples repulse
//!    per update, per-component moves clip at ±4, and the step size decays
//!    linearly to zero.
//!
//! Out-of-sample codes are placed deterministically (no RNG): initialize at
//! the membership-weighted mean of the k nearest training layouts, then run
//! a fixed number of attractive-only refinement epochs against the frozen
//! training positions, each neighbor's pull scaled by its membership weight.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};

/// Layout hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// Neighborhood size for the fuzzy graph.
    pub k: usize,
    /// Minimum separation encoded in the output curve.
    pub min_dist: f64,
    /// Scale of the output curve.
    pub spread: f64,
    /// Output dimensionality.
    pub d: usize,
    /// Optimization epochs.
    pub epochs: usize,
    /// Negative samples per attractive update.
    pub negative_samples: usize,
    /// Attractive-only refinement epochs for out-of-sample transforms.
    pub transform_epochs: usize,
    pub seed: u64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            k: 15,
            min_dist: 0.1,
            spread: 1.0,
            d: 2,
            epochs: 300,
            negative_samples: 5,
            transform_epochs: 30,
            seed: 0,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("layout k must be ≥ 2".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("layout dimension must be ≥ 1".into()));
        }
        if !(self.min_dist.is_finite() && self.min_dist >= 0.0) {
            return Err(Error::Config(format!("min_dist {} must be ≥ 0", self.min_dist)));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(Error::Config(format!("spread {} must be > 0", self.spread)));
        }
        Ok(())
    }
}

/// A fitted layout: the training codes, their embedded positions, and the
/// fitted output curve. Frozen after fit; transforms never mutate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutModel {
    pub(crate) codes: Matrix,
    pub(crate) layout: Matrix,
    pub config: LayoutConfig,
    /// Output-curve parameters, both > 0.
    pub a: f64,
    pub b: f64,
}

/// Solve Σⱼ exp(−max(0, dⱼ−ρ)/σ) = target for σ by bisection.
///
/// The sum is monotonically increasing in σ, from the count of neighbors at
/// or inside ρ up to the neighbor count, so bisection is exact to the float
/// tolerance. With k equidistant neighbors at distance d the closed form is
/// σ = (d−ρ)/ln(k/target).
pub fn solve_sigma(dists: &[f64], rho: f64, target: f64) -> f64 {
    let sum = |sigma: f64| -> f64 {
        dists.iter().map(|&d| (-((d - rho).max(0.0)) / sigma).exp()).sum()
    };
    let mut hi = 1.0;
    let mut grow = 0;
    while sum(hi) < target && grow < 64 {
        hi *= 2.0;
        grow += 1;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares fit of 1/(1 + a·x^{2b}) to the min_dist-offset exponential
/// (1 for x ≤ min_dist, exp(−(x−min_dist)/spread) beyond), sampled at 300
/// points on [0, 3·spread]. Plain Levenberg–Marquardt on the two parameters.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let m = 300;
    let xs: Vec<f64> = (0..m).map(|i| 3.0 * spread * i as f64 / (m - 1) as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x <= min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();

    let phi = |x: f64, a: f64, b: f64| 1.0 / (1.0 + a * x.powf(2.0 * b));
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let mut sse = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (phi(x, a, b) - y).powi(2))
        .sum::<f64>();
    for _ in 0..200 {
        // J^T J and J^T r for the 2-parameter residual vector
        let (mut jaa, mut jab, mut jbb, mut ja_r, mut jb_r) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let (da, db) = if x > 0.0 {
                let t = x.powf(2.0 * b);
                let denom = (1.0 + a * t).powi(2);
                (-t / denom, -a * t * 2.0 * x.ln() / denom)
            } else {
                (0.0, 0.0)
            };
            let r = phi(x, a, b) - y;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ja_r += da * r;
            jb_r += db * r;
        }
        // solve (J^T J + λ diag) Δ = −J^T r
        let m00 = jaa * (1.0 + lambda);
        let m11 = jbb * (1.0 + lambda);
        let det = m00 * m11 - jab * jab;
        if det.abs() < 1e-30 {
            break;
        }
        let step_a = (-ja_r * m11 + jb_r * jab) / det;
        let step_b = (-jb_r * m00 + ja_r * jab) / det;
        let (na, nb) = ((a + step_a).max(1e-6), (b + step_b).max(1e-6));
        let new_sse = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (phi(x, na, nb) - y).powi(2))
            .sum::<f64>();
        if new_sse < sse {
            a = na;
            b = nb;
            sse = new_sse;
            lambda = (lambda * 0.5).max(1e-12);
        } else {
            lambda *= 2.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// Per-point neighborhood: indices, distances, ρ, σ.
struct Neighborhood {
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

/// Directed fuzzy weights for one point under the ρ/σ rules.
fn fuzzy_weights(dists: &[f64], k: usize) -> (Vec<f64>, f64, f64) {
    let positive = dists.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    if positive.is_infinite() {
        // all neighbors at distance zero: σ = 1 by convention, every w = 1
        return (vec![1.0; dists.len()], 0.0, 1.0);
    }
    let rho = positive;
    let sigma = solve_sigma(dists, rho, (k as f64).log2());
    let w = dists.iter().map(|&d| (-((d - rho).max(0.0)) / sigma).exp()).collect();
    (w, rho, sigma)
}

/// Exact k-NN over rows of `codes`, per-row results computed in parallel.
fn knn(codes: &Matrix, k: usize) -> Vec<(Vec<usize>, Vec<f64>)> {
    (0..codes.rows)
        .into_par_iter()
        .map(|i| {
            let mut dists = vec![0.0; codes.rows];
            for j in 0..codes.rows {
                dists[j] = math::l2_dist(codes.row(i), codes.row(j));
            }
            let idx = math::k_smallest(&dists, k, Some(i));
            let nd = idx.iter().map(|&j| dists[j]).collect();
            (idx, nd)
        })
        .collect()
}

fn clip4(x: f64) -> f64 {
    x.clamp(-4.0, 4.0)
}

/// Fit the layout. Deterministic for a fixed seed (single-threaded
/// optimization loop, counter-based RNG).
pub fn fit_layout(codes: &Matrix, cfg: &LayoutConfig) -> Result<LayoutModel> {
    cfg.validate()?;
    let n = codes.rows;
    if n < cfg.k + 1 {
        return Err(Error::InvalidArgument(format!(
            "layout needs at least k + 1 = {} points, got {n}",
            cfg.k + 1
        )));
    }
    if !codes.is_finite() {
        return Err(Error::NonFinite("layout input codes contain non-finite values".into()));
    }

    // 1–2: directed fuzzy graph
    let hoods: Vec<Neighborhood> = knn(codes, cfg.k)
        .into_par_iter()
        .map(|(neighbors, dists)| {
            let (weights, _rho, _sigma) = fuzzy_weights(&dists, cfg.k);
            Neighborhood { neighbors, weights }
        })
        .collect();

    // 3: symmetrize into an undirected edge list, deterministic order
    let mut directed = std::collections::BTreeMap::<(usize, usize), (f64, f64)>::new();
    for (i, h) in hoods.iter().enumerate() {
        for (&j, &w) in h.neighbors.iter().zip(&h.weights) {
            let key = (i.min(j), i.max(j));
            let entry = directed.entry(key).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = w;
            } else {
                entry.1 = w;
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = directed
        .into_iter()
        .map(|((i, j), (wij, wji))| (i, j, wij + wji - wij * wji))
        .filter(|&(_, _, w)| w > 0.0)
        .collect();
    debug_assert!(edges.iter().all(|&(i, j, w)| i != j && (0.0..=1.0).contains(&w)));

    // 4: output curve
    let (a, b) = fit_ab(cfg.min_dist, cfg.spread);

    // 5: optimize from a seeded random start
    let mut rng = math::stage_rng(cfg.seed, "layout/init");
    let mut layout = Matrix::zeros(n, cfg.d);
    for v in layout.data.iter_mut() {
        *v = rng.gen_range(-10.0..10.0);
    }

    let w_max = edges.iter().map(|e| e.2).fold(f64::MIN, f64::max);
    let epochs_per_sample: Vec<f64> = edges.iter().map(|e| w_max / e.2).collect();
    let mut next_due: Vec<f64> = vec![0.0; edges.len()];
    let mut neg_rng = math::stage_rng(cfg.seed, "layout/negatives");

    for epoch in 0..cfg.epochs {
        let alpha = 1.0 - epoch as f64 / cfg.epochs as f64;
        for (e, &(i, j, _w)) in edges.iter().enumerate() {
            if next_due[e] > epoch as f64 {
                continue;
            }
            next_due[e] += epochs_per_sample[e];
            // attraction moves both endpoints
            let dist_sq = math::sq_dist(layout.row(i), layout.row(j));
            if dist_sq > 0.0 {
                let coeff = (-2.0 * a * b * dist_sq.powf(b - 1.0)) / (a * dist_sq.powf(b) + 1.0);
                for dim in 0..cfg.d {
                    let g = clip4(coeff * (layout.data[i * cfg.d + dim] - layout.data[j * cfg.d + dim])) * alpha;
                    layout.data[i * cfg.d + dim] += g;
                    layout.data[j * cfg.d + dim] -= g;
                }
            }
            // negative samples repulse endpoint i only
            for _ in 0..cfg.negative_samples {
                let other = neg_rng.gen_range(0..n);
                if other == i || other == j {
                    continue;
                }
                let dist_sq = math::sq_dist(layout.row(i), layout.row(other));
                if dist_sq == 0.0 {
                    continue;
                }
                let coeff = 2.0 * b / ((0.001 + dist_sq) * (a * dist_sq.powf(b) + 1.0));
                for dim in 0..cfg.d {
                    let g = clip4(coeff * (layout.data[i * cfg.d + dim] - layout.data[other * cfg.d + dim])) * alpha;
                    layout.data[i * cfg.d + dim] += g;
                }
            }
        }
    }

    if !layout.is_finite() {
        return Err(Error::NonFinite("layout optimization produced non-finite positions".into()));
    }
    Ok(LayoutModel { codes: codes.clone(), layout, config: cfg.clone(), a, b })
}

impl LayoutModel {
    pub fn len(&self) -> usize {
        self.layout.rows
    }

    pub fn is_empty(&self) -> bool {
        self.layout.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.layout.cols
    }

    /// Stored training positions (row i embeds training code i).
    pub fn training_layout(&self) -> &Matrix {
        &self.layout
    }

    /// Neighborhood of an out-of-sample code against the training codes.
    /// Transform ρ is the smallest neighbor distance **including zero**, so
    /// an exact duplicate of a training code gets weight 1 on that code.
    fn transform_neighborhood(&self, code: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
        if code.len() != self.codes.cols {
            return Err(Error::ShapeMismatch(format!(
                "transform code width {} ≠ training width {}",
                code.len(),
                self.codes.cols
            )));
        }
        let n = self.codes.rows;
        let mut dists = vec![0.0; n];
        for j in 0..n {
            dists[j] = math::l2_dist(code, self.codes.row(j));
        }
        let idx = math::k_smallest(&dists, self.config.k.min(n), None);
        let nd: Vec<f64> = idx.iter().map(|&j| dists[j]).collect();
        let rho = nd.iter().copied().fold(f64::INFINITY, f64::min);
        let sigma = if nd.iter().all(|&d| d == rho) && rho == 0.0 {
            1.0
        } else {
            solve_sigma(&nd, rho, (self.config.k as f64).log2())
        };
        let weights = nd.iter().map(|&d| (-((d - rho).max(0.0)) / sigma).exp()).collect();
        Ok((idx, weights))
    }

    fn transform_with_epochs(&self, code: &[f64], epochs: usize) -> Result<Vec<f64>> {
        let (idx, weights) = self.transform_neighborhood(code)?;
        let d = self.dim();
        // membership-weighted initialization
        let wsum: f64 = weights.iter().sum();
        let mut y = vec![0.0; d];
        for (&j, &w) in idx.iter().zip(&weights) {
            for dim in 0..d {
                y[dim] += w * self.layout.data[j * d + dim];
            }
        }
        for v in y.iter_mut() {
            *v /= wsum;
        }
        // attractive-only refinement against the frozen training layout,
        // each neighbor's pull scaled by its membership weight — RNG-free
        let w_max = weights.iter().copied().fold(f64::MIN, f64::max);
        for epoch in 0..epochs {
            let alpha = 1.0 - epoch as f64 / epochs as f64;
            for (&j, &w) in idx.iter().zip(&weights) {
                let target = self.layout.row(j);
                let dist_sq = math::sq_dist(&y, target);
                if dist_sq == 0.0 {
                    continue;
                }
                let coeff =
                    (-2.0 * self.a * self.b * dist_sq.powf(self.b - 1.0)) / (self.a * dist_sq.powf(self.b) + 1.0);
                for dim in 0..d {
                    y[dim] += clip4(coeff * (y[dim] - target[dim])) * alpha * (w / w_max);
                }
            }
        }
        Ok(y)
    }

    /// Deterministically place an out-of-sample code in the layout.
    pub fn transform(&self, code: &[f64]) -> Result<Vec<f64>> {
        self.transform_with_epochs(code, self.config.transform_epochs)
    }

    /// Transform a batch; identical to per-item transforms element-wise.
    pub fn transform_batch(&self, codes: &Matrix) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = (0..codes.rows)
            .into_par_iter()
            .map(|i| self.transform(codes.row(i)))
            .collect::<Result<_>>()?;
        let mut out = Matrix::zeros(codes.rows, self.dim());
        for (i, r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(r);
        }
        Ok(out)
    }

    /// Largest coordinate range over layout dimensions — the "global scale"
    /// used for self-transform tolerance checks.
    pub fn global_scale(&self) -> f64 {
        let d = self.dim();
        let mut scale = 0.0f64;
        for dim in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for r in 0..self.layout.rows {
                let v = self.layout.data[r * d + dim];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            scale = scale.max(hi - lo);
        }
        scale
    }
}
