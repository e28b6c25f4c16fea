//! Report emission: the file set a scoring or sweep run leaves in its
//! output directory.
//!
//! An evaluation writes `report.json` (full per-sample detail), `report.csv`
//! (the one-row dataset summary in the documented column order),
//! `layout.svg` (the mode-colored layout scatter), `occupancy.csv`
//! (per-sample mode occupancy of predictions and mined futures), and
//! `timings.json` (wall-clock accounting — kept out of `report.json` so the
//! deterministic documents are byte-identical across re-runs). Sweeps write
//! `sweep_<kind>.csv` in long format plus a dual-axis `sweep_<kind>.svg`;
//! the ranking sweep writes `sweep_ranking.csv`. All writes are atomic.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::write_atomic;
use crate::metrics::MetricReport;
use crate::perturb::{RankingTable, SweepResult};
use crate::pipeline::FittedPipeline;
use crate::plot;

fn emit(dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, content.as_bytes())?;
    written.push(path);
    Ok(())
}

/// Per-sample mode occupancy: how many predictions and how many mined
/// futures landed in each mode (or were abnormal), one CSV row per
/// (sample, mode) pair that is occupied by either side.
pub fn occupancy_csv(report: &MetricReport) -> String {
    let mut s = String::from("sample,mode,predictions,mmgts\n");
    for sample in &report.samples {
        let mut rows = std::collections::BTreeMap::<Option<usize>, (usize, usize)>::new();
        for a in &sample.prediction_assignments {
            rows.entry(a.label.id()).or_insert((0, 0)).0 += 1;
        }
        for a in &sample.mmgt_assignments {
            rows.entry(a.label.id()).or_insert((0, 0)).1 += 1;
        }
        // modes in ascending order, the abnormal bucket last
        let (normal, abnormal): (Vec<_>, Vec<_>) = rows.into_iter().partition(|(m, _)| m.is_some());
        for (mode, (p, g)) in normal.into_iter().chain(abnormal) {
            let label = mode.map_or("abnormal".to_string(), |m| m.to_string());
            s.push_str(&format!("{},{label},{p},{g}\n", sample.id));
        }
    }
    s
}

/// Write the full evaluation file set; returns the paths written.
pub fn write_eval_outputs(
    dir: &Path,
    report: &MetricReport,
    pipeline: &FittedPipeline,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    emit(dir, "report.json", &report.to_json(), &mut written)?;
    emit(dir, "report.csv", &report.to_csv(), &mut written)?;
    let scatter = plot::layout_scatter(
        pipeline.embedder.layout.training_layout(),
        &pipeline.modes.labels,
        Some(&pipeline.modes.centroids()),
        &format!(
            "motion layout: {} modes, noise rate {:.3}",
            pipeline.modes.mode_count(),
            pipeline.modes.noise_rate()
        ),
    );
    emit(dir, "layout.svg", &scatter, &mut written)?;
    emit(dir, "occupancy.csv", &occupancy_csv(report), &mut written)?;
    emit(dir, "timings.json", &report.timings.to_json(), &mut written)?;
    Ok(written)
}

/// Write one sweep's CSV + SVG pair; returns the paths written.
pub fn write_sweep_outputs(dir: &Path, sweep: &SweepResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    emit(dir, &format!("sweep_{}.csv", sweep.kind), &sweep.to_csv(), &mut written)?;
    let title = format!("{} sweep", sweep.kind.replace('_', " "));
    emit(dir, &format!("sweep_{}.svg", sweep.kind), &plot::sweep_lines(sweep, &title), &mut written)?;
    Ok(written)
}

/// Write the hyperparameter ranking table; returns the paths written.
pub fn write_ranking_outputs(dir: &Path, table: &RankingTable) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    emit(dir, "sweep_ranking.csv", &table.to_csv(), &mut written)?;
    Ok(written)
}
