//! Acceptance gate: ten end-to-end criteria, each printing one
//! `ACCEPTANCE n (...): PASS/FAIL` line with its wall time.
//!
//! Run `cargo test --test acceptance -- --nocapture` to see every line
//! (the default harness shows printed output only for failing tests).
//! Criteria are serialized through a mutex so the time budgets measure
//! near-exclusive execution, not contention between parallel tests.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::AssertUnwindSafe;
use std::sync::Mutex;
use std::time::Instant;

use common::*;
use mmcm::clustering::{cluster_layout, core_distances, mutual_reachability_mst, ClusterConfig};
use mmcm::encoder::{Activation, Mlp};
use mmcm::layout::{fit_ab, fit_layout, LayoutConfig};
use mmcm::math::{adjusted_rand_index, spearman_rho, stage_rng, stage_seed, Matrix};
use mmcm::metrics::{
    aggregate, coverage_rate, mmcm, score_dataset, score_sample, validity_rate, SampleScore,
};
use mmcm::mmgt::{build_mmgt, MemberSource, MmgtConfig, MmgtIndex};
use mmcm::motion::{MotionCorpus, MotionSequence, Pose, PredictionSet};
use mmcm::perturb::{
    run_hyperparameter_sweep, run_noise_sweep, run_noisy_addition, run_rare_mode_removal,
    surrogate_methods, PerturbKind,
};
use mmcm::pipeline::{fit_pipeline, FittedPipeline, ModeLabel};
use rand::Rng;

static GATE: Mutex<()> = Mutex::new(());

/// Run one criterion body under a wall-time budget, print its verdict line,
/// and propagate any failure to the harness.
fn criterion(n: usize, name: &str, budget_s: f64, body: impl FnOnce()) {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let result = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed().as_secs_f64();
    let verdict = if result.is_ok() && elapsed < budget_s { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n} ({name}): {verdict} [{elapsed:.2}s of {budget_s:.0}s budget]");
    if let Err(e) = result {
        std::panic::resume_unwind(e);
    }
    assert!(
        elapsed < budget_s,
        "criterion {n} exceeded its time budget: {elapsed:.2}s ≥ {budget_s}s"
    );
}

// ---------------------------------------------------------------------------
// 1. metric formulas against a brute-force oracle
// ---------------------------------------------------------------------------

fn modes(ids: &[i64]) -> Vec<ModeLabel> {
    ids.iter()
        .map(|&i| if i < 0 { ModeLabel::Abnormal } else { ModeLabel::Mode(i as usize) })
        .collect()
}

fn plain_score(c: f64, v: f64, m: f64) -> SampleScore {
    SampleScore {
        id: String::new(),
        c,
        v,
        mmcm: m,
        valid_modes: Vec::new(),
        prediction_assignments: Vec::new(),
        mmgt_assignments: Vec::new(),
        i: 1,
        k: 1,
        degenerate: false,
        apd: None,
        ade: 0.0,
        fde: 0.0,
        mmade: 0.0,
        mmfde: 0.0,
    }
}

#[test]
fn criterion_01_metric_formula_oracle() {
    criterion(1, "coverage/validity/harmonic formulas match a brute-force oracle", 1.0, || {
        // hand-checked cases
        let gt = modes(&[1, 2, 3, 3]);
        let (c, degenerate) = coverage_rate(&gt, &modes(&[2, 3, 9]));
        assert!(!degenerate);
        assert!((c - 2.0 / 3.0).abs() < 1e-15, "C = {c}, expected 2/3");
        let v = validity_rate(&gt, &modes(&[2, 3, 3, 9, -1])).unwrap();
        assert!((v - 3.0 / 5.0).abs() < 1e-15, "V = {v}, expected 3/5");
        assert_eq!(mmcm(0.0, 0.0), 0.0);

        // randomized instances against an independently coded oracle
        let mut rng = stage_rng(23, "acceptance/metric-oracle");
        let mut saw_degenerate = false;
        for _ in 0..1000 {
            let gt_len = rng.gen_range(1..=12);
            let pred_len = rng.gen_range(1..=10);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> i64 {
                if rng.gen_bool(0.2) {
                    -1
                } else {
                    rng.gen_range(0..8)
                }
            };
            let gt_ids: Vec<i64> = (0..gt_len).map(|_| draw(&mut rng)).collect();
            let pred_ids: Vec<i64> = (0..pred_len).map(|_| draw(&mut rng)).collect();
            let gt = modes(&gt_ids);
            let pred = modes(&pred_ids);

            // oracle: sets built longhand from the raw id lists
            let valid: BTreeSet<i64> = gt_ids.iter().copied().filter(|&i| i >= 0).collect();
            let predicted: BTreeSet<i64> = pred_ids.iter().copied().filter(|&i| i >= 0).collect();
            let c_oracle = if valid.is_empty() {
                0.0
            } else {
                valid.intersection(&predicted).count() as f64 / valid.len() as f64
            };
            let v_oracle = pred_ids.iter().filter(|&&i| i >= 0 && valid.contains(&i)).count()
                as f64
                / pred_len as f64;

            let (c, degenerate) = coverage_rate(&gt, &pred);
            assert_eq!(degenerate, valid.is_empty());
            saw_degenerate |= degenerate;
            let v = validity_rate(&gt, &pred).unwrap();
            assert!((c - c_oracle).abs() < 1e-12, "C {c} vs oracle {c_oracle}");
            assert!((v - v_oracle).abs() < 1e-12, "V {v} vs oracle {v_oracle}");

            let h = mmcm(c, v);
            let h_oracle = if c + v == 0.0 { 0.0 } else { 2.0 * c * v / (c + v) };
            assert!((h - h_oracle).abs() < 1e-12, "MMCM {h} vs oracle {h_oracle}");
            // harmonic ≤ geometric ≤ arithmetic
            assert!(h <= (c * v).sqrt() + 1e-12);
            assert!(h <= 0.5 * (c + v) + 1e-12);
            assert!((0.0..=1.0).contains(&h));
        }
        assert!(saw_degenerate, "randomization never exercised the all-abnormal case");

        // dataset aggregation is the arithmetic mean of per-sample values
        let scores: Vec<SampleScore> = (0..50)
            .map(|i| {
                let c = (i as f64) / 49.0;
                let v = ((i * 7) % 50) as f64 / 49.0;
                plain_score(c, v, mmcm(c, v))
            })
            .collect();
        let summary = aggregate(&scores);
        let mean = scores.iter().map(|s| s.mmcm).sum::<f64>() / scores.len() as f64;
        assert!((summary.mmcm - mean).abs() < 1e-12);
    });
}

// ---------------------------------------------------------------------------
// 2. clustering against the naive full-dendrogram reference
// ---------------------------------------------------------------------------

/// True when two labelings are identical up to a bijective renaming of the
/// non-noise labels (noise must match exactly).
fn equivalent_labelings(a: &[i64], b: &[i64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: BTreeMap<i64, i64> = BTreeMap::new();
    let mut bwd: BTreeMap<i64, i64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if x < 0 || y < 0 {
            if x != y {
                return false;
            }
            continue;
        }
        if *fwd.entry(x).or_insert(y) != y || *bwd.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

#[test]
fn criterion_02_clustering_matches_naive_reference() {
    criterion(2, "mode extraction matches the naive dendrogram reference", 30.0, || {
        let mut rng = stage_rng(41, "acceptance/blobs");
        for dataset in 0..50 {
            let n_blobs = rng.gen_range(2..=5);
            let mcs = 10;
            let counts: Vec<usize> = (0..n_blobs).map(|_| rng.gen_range(mcs..=40)).collect();
            let n: usize = counts.iter().sum();
            assert!(n <= 200);
            let dim = rng.gen_range(2..=3);
            let min_samples = rng.gen_range(1..=3);
            let (points, planted) = planted_blobs(&counts, dim, 40.0, 9000 + dataset);

            let cfg = ClusterConfig { min_cluster_size: mcs, min_samples };
            let table = cluster_layout(&points, &cfg).unwrap();

            // the planted structure is recovered perfectly
            let ari = adjusted_rand_index(&table.labels, &planted);
            assert!(
                ari > 1.0 - 1e-12,
                "dataset {dataset}: ARI {ari} against the planted blobs"
            );

            // and the labels agree with the independent reference
            let reference = naive_hdbscan(&points, mcs, min_samples);
            assert!(
                equivalent_labelings(&table.labels, &reference),
                "dataset {dataset}: labels diverge from the naive reference\nlib: {:?}\nref: {:?}",
                table.labels,
                reference
            );
        }

        // MST total weight against Kruskal, up to N = 500
        for (seed, counts, ms) in [
            (71u64, vec![100usize, 100, 100, 100, 100], 1usize),
            (72, vec![120, 90, 150, 80], 3),
            (73, vec![250, 250], 5),
        ] {
            let (points, _) = planted_blobs(&counts, 3, 40.0, seed);
            let cores = core_distances(&points, ms).unwrap();
            let mst = mutual_reachability_mst(&points, &cores).unwrap();
            let total: f64 = mst.iter().map(|e| e.weight).sum();
            let oracle = kruskal_mst_weight(&points, ms);
            assert!(
                (total - oracle).abs() < 1e-9,
                "MST weight {total} vs Kruskal {oracle}"
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 3. encoder gradients, layout quality, curve fit, self-transform
// ---------------------------------------------------------------------------

/// Independent least-squares fit of the layout membership curve by nested
/// grid refinement over (a, b), minimizing the same 300-sample objective.
fn fit_ab_oracle(min_dist: f64, spread: f64) -> (f64, f64) {
    let m = 300;
    let xs: Vec<f64> = (0..m).map(|i| 3.0 * spread * i as f64 / (m - 1) as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x <= min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let p = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (p - y) * (p - y)
            })
            .sum()
    };
    let (mut a_lo, mut a_hi) = (0.05_f64, 20.0_f64);
    let (mut b_lo, mut b_hi) = (0.05_f64, 5.0_f64);
    let (mut best_a, mut best_b) = (1.0, 1.0);
    for _ in 0..8 {
        let steps = 48;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            let a = a_lo + (a_hi - a_lo) * i as f64 / steps as f64;
            for j in 0..=steps {
                let b = b_lo + (b_hi - b_lo) * j as f64 / steps as f64;
                let e = sse(a, b);
                if e < best {
                    best = e;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        let (da, db) = ((a_hi - a_lo) / steps as f64, (b_hi - b_lo) / steps as f64);
        a_lo = (best_a - 2.0 * da).max(1e-3);
        a_hi = best_a + 2.0 * da;
        b_lo = (best_b - 2.0 * db).max(1e-3);
        b_hi = best_b + 2.0 * db;
    }
    (best_a, best_b)
}

#[test]
fn criterion_03_encoder_gradients_and_layout() {
    criterion(3, "analytic gradients, layout trustworthiness, curve fit, self-transform", 120.0, || {
        // (a) analytic gradients against central finite differences
        let mut rng = stage_rng(5, "acceptance/fd");
        for trial in 0..6 {
            let hidden = rng.gen_range(3..=6);
            let code = rng.gen_range(2..=4);
            let input = rng.gen_range(3..=5);
            let sizes = vec![input, hidden, code, hidden, input];
            let activation = if trial % 3 == 0 { Activation::Identity } else { Activation::Tanh };
            let mut mlp = Mlp::init(sizes, 2, activation, 400 + trial).unwrap();
            let rows = rng.gen_range(2..=5);
            let mut x = Matrix::zeros(rows, input);
            for r in 0..rows {
                for v in x.row_mut(r) {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            let n_params = mlp.params().len();
            let mut analytic = vec![0.0; n_params];
            mlp.loss_and_grad(&x, &mut analytic).unwrap();
            let mut scratch = vec![0.0; n_params];
            let h = 1e-5;
            for p in 0..n_params {
                mlp.params_mut()[p] += h;
                let up = mlp.loss_and_grad(&x, &mut scratch).unwrap();
                mlp.params_mut()[p] -= 2.0 * h;
                let down = mlp.loss_and_grad(&x, &mut scratch).unwrap();
                mlp.params_mut()[p] += h;
                let fd = (up - down) / (2.0 * h);
                let denom = analytic[p].abs().max(fd.abs()).max(1e-6);
                let rel = (analytic[p] - fd).abs() / denom;
                assert!(
                    rel <= 1e-4,
                    "trial {trial} param {p}: analytic {} vs finite difference {fd} (rel {rel:.2e})",
                    analytic[p]
                );
            }
        }

        // (b) planted blobs stay trustworthy through the layout
        let (codes, _) = planted_blobs(&[60, 60, 60], 8, 40.0, 77);
        let cfg = LayoutConfig { seed: stage_seed(77, "layout"), ..LayoutConfig::default() };
        let model = fit_layout(&codes, &cfg).unwrap();
        let t = trustworthiness(&codes, model.training_layout(), 15);
        assert!(t >= 0.90, "trustworthiness(k=15) = {t:.4}, needs ≥ 0.90");

        // (c) membership curve calibration against the grid-search oracle
        let (a, b) = fit_ab(0.1, 1.0);
        let (a_ref, b_ref) = fit_ab_oracle(0.1, 1.0);
        assert!(
            (a - a_ref).abs() / a_ref <= 0.05,
            "a = {a:.5} vs least-squares oracle {a_ref:.5}"
        );
        assert!(
            (b - b_ref).abs() / b_ref <= 0.05,
            "b = {b:.5} vs least-squares oracle {b_ref:.5}"
        );

        // (d) re-transforming the training codes lands on the stored layout
        let embedded = model.transform_batch(&codes).unwrap();
        let stored = model.training_layout();
        let tolerance = 0.10 * model.global_scale();
        for i in 0..codes.rows {
            let d: f64 = embedded
                .row(i)
                .iter()
                .zip(stored.row(i))
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            assert!(
                d <= tolerance,
                "self-transform of code {i} drifted {d:.4}, more than 10% of scale {:.4}",
                model.global_scale()
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 4. corruption sweeps degrade the metric monotonically
// ---------------------------------------------------------------------------

/// Spearman ρ between sweep levels and one metric, using only levels where
/// the metric is defined and something was scored.
fn sweep_rho(sweep: &mmcm::perturb::SweepResult, metric: &str) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in &sweep.levels {
        if l.sample_count == 0 {
            continue;
        }
        let value = match metric {
            "mmcm" => Some(l.mmcm),
            "apd" => l.apd,
            "mmade" => Some(l.mmade),
            "mmfde" => Some(l.mmfde),
            _ => unreachable!(),
        };
        if let Some(v) = value {
            xs.push(l.level);
            ys.push(v);
        }
    }
    assert!(xs.len() >= 3, "too few populated levels for a trend ({})", xs.len());
    spearman_rho(&xs, &ys)
}

#[test]
fn criterion_04_corruption_trends() {
    criterion(4, "noise, bone-scale, and mismatch sweeps show the documented trends", 300.0, || {
        let f = fixture();
        let samples = fixture_samples(12);

        // joint noise: MMCM falls, APD rises with σ
        let spec = f.config.perturb_spec(PerturbKind::JointNoise);
        let sweep = run_noise_sweep(&f.pipeline, &f.corpus, &samples, &spec).unwrap();
        assert_eq!(sweep.levels.len(), spec.sigma_grid.len());
        let rho = sweep_rho(&sweep, "mmcm");
        assert!(rho <= -0.9, "joint noise: MMCM Spearman ρ = {rho:.3}, needs ≤ −0.9");
        let rho_apd = sweep_rho(&sweep, "apd");
        assert!(rho_apd >= 0.9, "joint noise: APD Spearman ρ = {rho_apd:.3}, needs ≥ +0.9");

        // bone scaling: same directions over the factor grid
        let spec = f.config.perturb_spec(PerturbKind::BoneScale);
        let sweep = run_noise_sweep(&f.pipeline, &f.corpus, &samples, &spec).unwrap();
        let rho = sweep_rho(&sweep, "mmcm");
        assert!(rho <= -0.9, "bone scale: MMCM Spearman ρ = {rho:.3}, needs ≤ −0.9");
        let rho_apd = sweep_rho(&sweep, "apd");
        assert!(rho_apd >= 0.9, "bone scale: APD Spearman ρ = {rho_apd:.3}, needs ≥ +0.9");

        // past/future mismatch: MMCM falls with the discontinuity bucket.
        // APD is undefined here (each pair contributes one prediction).
        let spec = f.config.perturb_spec(PerturbKind::Mismatch);
        let sweep = run_noise_sweep(&f.pipeline, &f.corpus, &samples, &spec).unwrap();
        let rho = sweep_rho(&sweep, "mmcm");
        assert!(rho <= -0.9, "mismatch: MMCM Spearman ρ = {rho:.3}, needs ≤ −0.9");
    });
}

// ---------------------------------------------------------------------------
// 5. rare-mode removal punishes MMCM at least as hard as MMADE
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_rare_mode_removal() {
    criterion(5, "rare-mode removal degrades MMCM at least as much as MMADE", 300.0, || {
        let f = fixture();
        let samples = fixture_samples(12);
        let sweep = run_rare_mode_removal(&f.pipeline, &samples, &f.config.percent_grid).unwrap();

        let base = &sweep.levels[0];
        assert_eq!(base.level, 0.0);
        assert!(base.sample_count > 0 && !base.flagged, "v = 0 must score every sample");
        assert!(base.mmcm > 0.0, "baseline MMCM must be positive to measure degradation");

        let mut compared = 0;
        for l in sweep.levels.iter().skip(1) {
            if l.sample_count == 0 {
                continue; // nothing survived at this level; no metrics to compare
            }
            // every metric is best at v = 0
            assert!(l.mmcm <= base.mmcm + 1e-12, "MMCM improved under removal at {}", l.label);
            assert!(l.mmade >= base.mmade - 1e-12, "MMADE improved under removal at {}", l.label);
            assert!(l.mmfde >= base.mmfde - 1e-12, "MMFDE improved under removal at {}", l.label);
            // and MMCM reacts at least as strongly as MMADE
            let rel_mmcm = (base.mmcm - l.mmcm) / base.mmcm;
            let rel_mmade = if base.mmade > 0.0 { (l.mmade - base.mmade) / base.mmade } else { 0.0 };
            assert!(
                rel_mmcm >= rel_mmade - 1e-12,
                "{}: relative MMCM degradation {rel_mmcm:.4} < relative MMADE degradation {rel_mmade:.4}",
                l.label
            );
            compared += 1;
        }
        assert!(compared >= 2, "removal sweep left too few scored levels ({compared})");
    });
}

// ---------------------------------------------------------------------------
// 6. noisy additions fool the error metrics but not MMCM
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_noisy_additions() {
    criterion(6, "noisy additions never worsen MMADE/MMFDE but sink MMCM", 300.0, || {
        let f = fixture();
        let samples = fixture_samples(12);
        let seed = stage_seed(f.config.seed, "perturb");
        let sweep =
            run_noisy_addition(&f.pipeline, &samples, &f.config.add_counts, f.config.add_sigma, seed)
                .unwrap();
        assert_eq!(sweep.levels.len(), f.config.add_counts.len());

        // supersets of predictions: min-distance metrics are exactly monotone
        for w in sweep.levels.windows(2) {
            assert!(
                w[1].mmade <= w[0].mmade,
                "MMADE rose from {} to {} when predictions were added",
                w[0].mmade,
                w[1].mmade
            );
            assert!(
                w[1].mmfde <= w[0].mmfde,
                "MMFDE rose from {} to {} when predictions were added",
                w[0].mmfde,
                w[1].mmfde
            );
        }
        let first = sweep.levels.first().unwrap();
        let last = sweep.levels.last().unwrap();
        assert!(
            last.mmcm < first.mmcm,
            "MMCM should strictly drop under {} noisy additions: {} vs {}",
            last.level,
            last.mmcm,
            first.mmcm
        );
    });
}

// ---------------------------------------------------------------------------
// 7. scoring latency
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_scoring_latency() {
    criterion(7, "score_sample stays under 0.1 s per prediction at I = 50", 120.0, || {
        let f = fixture();
        let (set, mmgt) = fixture_samples(1).into_iter().next().unwrap();
        let futures: Vec<Vec<Pose>> =
            (0..50).map(|i| set.futures[i % set.futures.len()].clone()).collect();
        let sample = PredictionSet::new(set.target.clone(), futures).unwrap();

        // a one-thread pool makes the measurement genuinely single-threaded
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let start = Instant::now();
            let score = pool.install(|| score_sample(&f.pipeline, &sample, &mmgt)).unwrap();
            assert_eq!(score.i, 50);
            best = best.min(start.elapsed().as_secs_f64());
        }
        let per_prediction = best / 50.0;
        assert!(
            per_prediction <= 0.1,
            "{per_prediction:.4} s per prediction exceeds the 0.1 s bound"
        );
    });
}

// ---------------------------------------------------------------------------
// 8. MMCM ranks methods consistently across the hyperparameter grid
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_ranking_stability() {
    criterion(8, "method ranking is preserved across the hyperparameter grid", 900.0, || {
        let f = fixture();
        let samples = fixture_samples(12);
        let methods = surrogate_methods(&f.pipeline, &samples, &[1, 3]).unwrap();
        assert_eq!(methods.len(), 2);

        let dims = [2usize, 3, 5];
        let grid: Vec<ClusterConfig> = [10usize, 15, 30]
            .iter()
            .flat_map(|&mcs| {
                [1usize, 5].iter().map(move |&ms| ClusterConfig {
                    min_cluster_size: mcs,
                    min_samples: ms,
                })
            })
            .collect();
        let table =
            run_hyperparameter_sweep(&f.corpus, &methods, &dims, &grid, &f.config.pipeline_config())
                .unwrap();
        assert_eq!(table.rows.len(), dims.len() * grid.len());

        let scored: Vec<_> = table.rows.iter().filter(|r| !r.flagged).collect();
        assert!(
            scored.len() >= table.rows.len() / 2,
            "too many degenerate grid points: {} of {}",
            table.rows.len() - scored.len(),
            table.rows.len()
        );
        let rankings = table.distinct_rankings();
        assert_eq!(
            rankings.len(),
            1,
            "the method ranking flipped somewhere on the grid: {rankings:?}"
        );
        // the broader generator must not rank below the narrow one
        assert_eq!(rankings[0][0], "top-3", "expected the 3-mode generator to win: {rankings:?}");
    });
}

// ---------------------------------------------------------------------------
// 9. persistence and determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_persistence_and_determinism() {
    criterion(9, "save → load → eval is byte-identical and refits reproduce", 600.0, || {
        let f = fixture();
        let samples = fixture_samples(8);
        let report_a = score_dataset(&f.pipeline, &samples).unwrap();
        let json_a = report_a.to_json();
        let csv_a = report_a.to_csv();

        // round-trip through the artifact
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.bin");
        f.pipeline.save(&path).unwrap();
        let loaded = FittedPipeline::load(&path).unwrap();
        assert_eq!(loaded.fingerprint, f.pipeline.fingerprint);
        let report_b = score_dataset(&loaded, &samples).unwrap();
        assert_eq!(json_a.as_bytes(), report_b.to_json().as_bytes(), "report JSON changed across save/load");
        assert_eq!(csv_a.as_bytes(), report_b.to_csv().as_bytes(), "report CSV changed across save/load");

        // saving the same pipeline twice writes identical bytes
        let path2 = dir.path().join("pipeline2.bin");
        f.pipeline.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());

        // a fresh fit under the same seed reproduces everything
        let refit = fit_pipeline(&f.corpus, &f.config.pipeline_config()).unwrap();
        assert_eq!(refit.fingerprint, f.pipeline.fingerprint);
        assert_eq!(refit.tau, f.pipeline.tau);
        let report_c = score_dataset(&refit, &samples).unwrap();
        assert_eq!(json_a.as_bytes(), report_c.to_json().as_bytes(), "report JSON changed across refit");
    });
}

// ---------------------------------------------------------------------------
// 10. MMGT mining against an exhaustive scan
// ---------------------------------------------------------------------------

/// Independent exhaustive miner: for every track and every position whose
/// trailing window and future both fit, root-center the window frames,
/// compare to the query's trailing window, and keep matches at or under the
/// threshold. Returns (track, position, distance).
fn oracle_scan(
    query: &MotionSequence,
    corpus: &MotionCorpus,
    cfg: &MmgtConfig,
) -> Vec<(usize, usize, f64)> {
    let w = cfg.past_window_frames;
    let t = query.future.len();
    let window_vec = |frames: &[Pose], end_exclusive: usize| -> Vec<f64> {
        let mut v = Vec::new();
        for f in &frames[end_exclusive - w..end_exclusive] {
            let c = f.coords();
            let r = if cfg.root_center { c[0] } else { [0.0; 3] };
            for kp in c {
                v.push(kp[0] - r[0]);
                v.push(kp[1] - r[1]);
                v.push(kp[2] - r[2]);
            }
        }
        v
    };
    let q = window_vec(&query.past, query.past.len());
    let mut out = Vec::new();
    for (ti, track) in corpus.tracks.iter().enumerate() {
        let n = track.frames.len();
        if n < w + t {
            continue;
        }
        for position in (w - 1)..(n - t) {
            let wv = window_vec(&track.frames, position + 1);
            let d: f64 = q.iter().zip(&wv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d <= cfg.similarity_threshold {
                out.push((ti, position, d));
            }
        }
    }
    out
}

fn corpus_query(corpus: &MotionCorpus, track: usize, split: usize, t: usize) -> MotionSequence {
    let frames = &corpus.tracks[track].frames;
    let mut q = MotionSequence::new(
        corpus.skeleton.clone(),
        corpus.frame_rate,
        format!("query/{track}/{split}"),
        frames[..split].to_vec(),
        frames[split..split + t].to_vec(),
    )
    .unwrap();
    q.origin = Some((track, split - 1));
    q
}

#[test]
fn criterion_10_mmgt_exhaustive_scan() {
    criterion(10, "MMGT mining equals the exhaustive scan and grows with the threshold", 120.0, || {
        let corpus = desk_corpus();
        assert!(corpus.total_frames() <= 10_000);
        let t = 10;

        let mut queries = Vec::new();
        for track in [0usize, 3, 7, 12, 19] {
            for split in [20usize, 55, 90] {
                queries.push(corpus_query(&corpus, track, split, t));
            }
        }
        // a query from outside the corpus: clone one and erase its origin
        let mut foreign = corpus_query(&corpus, 5, 40, t);
        foreign.origin = None;
        foreign.source_id = "foreign".into();

        for cfg in [MmgtConfig::h36m(), MmgtConfig::amass()] {
            let index = MmgtIndex::new(&corpus, &cfg, t).unwrap();
            for q in &queries {
                let expected = oracle_scan(q, &corpus, &cfg);
                for set in [build_mmgt(q, &corpus, &cfg).unwrap(), index.query(q).unwrap()] {
                    assert_eq!(set.members.len(), expected.len(), "member count for {}", q.source_id);
                    for (m, (ti, pos, d)) in set.members.iter().zip(&expected) {
                        assert_eq!(m.source, MemberSource::Corpus { track: *ti, position: *pos });
                        assert!((m.distance - d).abs() <= 1e-12);
                        assert_eq!(m.future, corpus.tracks[*ti].frames[pos + 1..pos + 1 + t]);
                    }
                    assert!(!set.flagged_empty);
                }
            }

            // the foreign query gains exactly one trailing self member
            let expected = oracle_scan(&foreign, &corpus, &cfg);
            let set = build_mmgt(&foreign, &corpus, &cfg).unwrap();
            assert_eq!(set.members.len(), expected.len() + 1);
            let tail = set.members.last().unwrap();
            assert_eq!(tail.source, MemberSource::Query);
            assert_eq!(tail.distance, 0.0);
            assert_eq!(tail.future, foreign.future);

            // without self-injection the library equals the oracle exactly
            let no_self = MmgtConfig { include_self: false, ..cfg.clone() };
            let set = build_mmgt(&foreign, &corpus, &no_self).unwrap();
            assert_eq!(set.members.len(), expected.len());
        }

        // enlarging the threshold never loses a member
        let ladder = [0.05, 0.1, 0.25, 0.4, 0.5, 0.9];
        for q in queries.iter().take(6) {
            let mut previous: Option<BTreeSet<(usize, usize)>> = None;
            for &threshold in &ladder {
                let cfg = MmgtConfig { similarity_threshold: threshold, ..MmgtConfig::h36m() };
                let set = build_mmgt(q, &corpus, &cfg).unwrap();
                let keys: BTreeSet<(usize, usize)> = set
                    .members
                    .iter()
                    .filter_map(|m| match m.source {
                        MemberSource::Corpus { track, position } => Some((track, position)),
                        MemberSource::Query => None,
                    })
                    .collect();
                if let Some(prev) = &previous {
                    assert!(
                        prev.is_subset(&keys),
                        "threshold {threshold} lost members present at a smaller threshold for {}",
                        q.source_id
                    );
                }
                previous = Some(keys);
            }
        }
    });
}
