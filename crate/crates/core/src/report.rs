//! Plot-ready CSV writers.
//!
//! Every writer emits only deterministic quantities. Wall-clock timings live
//! in their own table ([`write_timing`]) so the main reports of two identical
//! runs compare equal byte for byte.

use std::io::Write;

use crate::dynamics::StateHistory;
use crate::error::Result;
use crate::eval::{EvalReport, GridSearchResult, PairedReport, SweepPoint};
use crate::model::RelevanceReport;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| crate::Error::Csv(e.into()))
}

/// One row per `(φ, T)` point.
pub fn write_sweep<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "phi",
        "iterations",
        "mean_kappa",
        "std_kappa",
        "mean_accuracy",
        "mean_effective_iterations",
        "fixed_point_fraction",
    ])?;
    for p in points {
        w.write_record([
            p.phi.to_string(),
            p.max_iterations.to_string(),
            p.mean_kappa.to_string(),
            p.std_kappa.to_string(),
            p.mean_accuracy.to_string(),
            p.mean_effective_iterations.to_string(),
            p.fixed_point_fraction.to_string(),
        ])?;
    }
    flush(w)
}

/// Per-fold rows followed by a `mean` and a `std` row.
pub fn write_folds<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "fold", "n_test", "kappa", "accuracy", "iterations", "attractor", "phi", "transfer",
    ])?;
    for f in &report.folds {
        w.write_record([
            f.fold.to_string(),
            f.n_test.to_string(),
            f.kappa.to_string(),
            f.accuracy.to_string(),
            f.iterations.to_string(),
            f.attractor.label().to_string(),
            f.phi.to_string(),
            f.transfer.to_string(),
        ])?;
    }
    let (mk, sk) = report.kappa_stats();
    let (ma, sa) = report.accuracy_stats();
    let n: usize = report.folds.iter().map(|f| f.n_test).sum();
    for (name, k, a) in [("mean", mk, ma), ("std", sk, sa)] {
        w.write_record([
            name.to_string(),
            n.to_string(),
            k.to_string(),
            a.to_string(),
            String::new(),
            String::new(),
            report.phi.to_string(),
            report.transfer.to_string(),
        ])?;
    }
    flush(w)
}

/// One row per grid cell; `selected` marks the cell chosen by plain CV.
pub fn write_grid<W: Write>(out: W, result: &GridSearchResult) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "phi",
        "transfer",
        "mean_kappa",
        "std_kappa",
        "mean_accuracy",
        "fixed_point_fraction",
        "selected",
    ])?;
    for (cell, report) in &result.cells {
        let (mk, sk) = report.kappa_stats();
        let (ma, _) = report.accuracy_stats();
        w.write_record([
            cell.phi.to_string(),
            cell.transfer.to_string(),
            mk.to_string(),
            sk.to_string(),
            ma.to_string(),
            report.fixed_point_fraction().to_string(),
            (*cell == result.best).to_string(),
        ])?;
    }
    flush(w)
}

/// Paired head comparison: one row per `(φ, fold)` plus a `mean` row per φ.
pub fn write_paired<W: Write>(out: W, reports: &[PairedReport]) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "phi",
        "fold",
        "kappa_recurrence",
        "kappa_laststate",
        "accuracy_recurrence",
        "accuracy_laststate",
        "iterations",
        "attractor",
    ])?;
    for pair in reports {
        let phi = pair.recurrence_aware.phi.to_string();
        for (a, b) in pair.recurrence_aware.folds.iter().zip(&pair.last_state.folds) {
            w.write_record([
                phi.clone(),
                a.fold.to_string(),
                a.kappa.to_string(),
                b.kappa.to_string(),
                a.accuracy.to_string(),
                b.accuracy.to_string(),
                a.iterations.to_string(),
                a.attractor.label().to_string(),
            ])?;
        }
        w.write_record([
            phi,
            "mean".to_string(),
            pair.recurrence_aware.mean_kappa().to_string(),
            pair.last_state.mean_kappa().to_string(),
            pair.recurrence_aware.accuracy_stats().0.to_string(),
            pair.last_state.accuracy_stats().0.to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    flush(w)
}

/// Fit and predict wall time per fold, kept apart from the deterministic
/// reports.
pub fn write_timing<W: Write>(out: W, reports: &[&EvalReport]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["phi", "transfer", "head", "fold", "fit_seconds"])?;
    for report in reports {
        for f in &report.folds {
            w.write_record([
                f.phi.to_string(),
                f.transfer.to_string(),
                report.head.as_str().to_string(),
                f.fold.to_string(),
                f.fit_seconds.to_string(),
            ])?;
        }
    }
    flush(w)
}

/// One row per input: its position, the predicted class and the raw score
/// of every class.
pub fn write_predictions<W: Write>(
    out: W,
    classes: &[String],
    predicted: &[usize],
    scores: &faer::Mat<f64>,
) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["row".to_string(), "predicted".into()];
    header.extend(classes.iter().map(|c| format!("score_{c}")));
    w.write_record(&header)?;
    for (i, &c) in predicted.iter().enumerate() {
        let mut row = vec![i.to_string(), classes[c].clone()];
        row.extend((0..scores.ncols()).map(|j| scores[(i, j)].to_string()));
        w.write_record(&row)?;
    }
    flush(w)
}

/// Features ranked by relevance, highest first.
pub fn write_relevance<W: Write>(out: W, report: &RelevanceReport) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["rank", "index", "feature", "score", "inner", "outer"])?;
    for (rank, e) in report.entries.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            e.index.to_string(),
            e.name.clone(),
            e.score.to_string(),
            e.inner.to_string(),
            e.outer.to_string(),
        ])?;
    }
    flush(w)
}

/// State trace: per iteration the max-abs change and the batch-mean
/// activation of every neuron. The attractor label appears on the final row
/// only, where the run stopped.
pub fn write_trace<W: Write>(out: W, history: &StateHistory, feature_names: &[String]) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["iteration".to_string(), "delta".into(), "attractor".into()];
    header.extend(feature_names.iter().map(|n| format!("mean_{n}")));
    w.write_record(&header)?;
    let deltas = history.deltas();
    let last = history.iterations();
    for (t, state) in history.states.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.push(if t == 0 { String::new() } else { deltas[t - 1].to_string() });
        row.push(if t == last { history.attractor.label().to_string() } else { String::new() });
        let k = state.nrows().max(1) as f64;
        for j in 0..state.ncols() {
            let mean = (0..state.nrows()).map(|i| state[(i, j)]).sum::<f64>() / k;
            row.push(mean.to_string());
        }
        w.write_record(&row)?;
    }
    flush(w)
}
