use std::path::{Path, PathBuf};
use std::time::Instant;

use ltcn::dataset::{self, load_csv, load_feature_csv};
use ltcn::dynamics;
use ltcn::eval::{self, EvalReport};
use ltcn::transfer::DEFAULT_EPSILON;
use ltcn::{model, report, synthetic};
use ltcn::{DecisionHead, LtcnModel, ReasoningConfig, TransferFunction, TransferKind};

use crate::args::*;
use crate::manifest::{sibling, RunManifest};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => train(cli, a),
        Command::Predict(a) => predict(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::Explain(a) => explain(cli, a),
        Command::Dynamics(a) => trace(cli, a),
        Command::Generate(a) => generate(cli, a),
    }
}

fn config(r: &ReasoningArgs, transfer: TransferKind) -> Result<ReasoningConfig> {
    let cfg = ReasoningConfig {
        phi: r.phi,
        max_iterations: r.iters as usize,
        tolerance: r.tol,
        cycle_window: r.cycle_window as usize,
        transfer: TransferFunction::new(transfer, DEFAULT_EPSILON)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Renders into memory first so a failed run never leaves a truncated file.
fn write_output(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> ltcn::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

fn finish(cli: &Cli, seed: Option<u64>, inputs: &[&Path], outputs: Vec<PathBuf>) -> Result<()> {
    let primary = outputs[0].clone();
    let manifest = RunManifest::new(cli, seed, inputs.iter().map(|p| p.to_path_buf()).collect(), outputs);
    let path = manifest.write_beside(&primary)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn write_timing(out: &Path, reports: &[&EvalReport]) -> Result<PathBuf> {
    let path = sibling(out, "timing.csv");
    write_output(&path, |buf| report::write_timing(buf, reports))?;
    Ok(path)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let raw = load_csv(&a.data, &a.csv.options())?;
    let cfg = config(&a.reasoning, a.transfer.into())?;
    log::info!("fitting {} rows x {} features", raw.n_rows(), raw.n_features());
    let start = Instant::now();
    let fitted = model::fit_raw(&raw, &cfg, a.head.into())?;
    let seconds = start.elapsed().as_secs_f64();

    write_output(&a.out, |buf| {
        buf.extend_from_slice(fitted.to_json()?.as_bytes());
        Ok(())
    })?;
    finish(cli, None, &[&a.data], vec![a.out.clone()])?;

    let train_pred = fitted.predict_class(&fitted.scale(raw.features())?)?;
    let train_kappa = eval::cohen_kappa(raw.labels(), &train_pred)?;
    println!(
        "trained rows={} features={} classes={} fit_seconds={seconds:.4} attractor={} iterations={} train_kappa={train_kappa:.4}",
        raw.n_rows(),
        raw.n_features(),
        fitted.n_classes(),
        fitted.attractor.label(),
        fitted.iterations(),
    );
    Ok(())
}

fn predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let fitted = LtcnModel::load(&a.model)?;
    let table = load_feature_csv(&a.data, &a.csv.options(), fitted.n_features())?;
    let scores = fitted.predict_scores(&fitted.scale(&table.features)?)?;
    let predicted = model::argmax_rows(&scores);
    write_output(&a.out, |buf| report::write_predictions(buf, &fitted.classes, &predicted, &scores))?;
    finish(cli, None, &[&a.model, &a.data], vec![a.out.clone()])?;

    let mut summary = format!("predicted rows={}", predicted.len());
    if let Some(labels) = table.labels.as_ref().filter(|l| !l.is_empty()) {
        let names: Vec<&String> = predicted.iter().map(|&c| &fitted.classes[c]).collect();
        let truth: Vec<&String> = labels.iter().collect();
        summary += &format!(
            " accuracy={:.4} kappa={:.4}",
            eval::accuracy(&truth, &names)?,
            eval::cohen_kappa(&truth, &names)?
        );
    }
    println!("{summary}");
    Ok(())
}

fn transfer_grid(t: Option<TransferArg>) -> Vec<TransferKind> {
    t.map_or_else(|| TransferKind::ALL.to_vec(), |t| vec![t.into()])
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let raw = load_csv(&a.data, &a.csv.options())?;
    let head: DecisionHead = a.head.into();
    let (folds, seed) = (a.cv.folds as usize, a.cv.seed);
    let mut outputs = vec![a.out.clone()];

    match &a.phi_grid {
        Some(grid) => {
            let phis = eval::parse_grid(grid)?;
            let tfs = transfer_grid(a.transfer);
            let base = config(&a.reasoning, tfs[0])?;
            let result = eval::grid_search(&raw, &phis, &tfs, &base, head, folds, seed)?;
            write_output(&a.out, |buf| report::write_grid(buf, &result))?;
            let nested = sibling(&a.out, "nested.csv");
            write_output(&nested, |buf| report::write_folds(buf, &result.nested))?;
            outputs.push(nested);
            let mut all: Vec<&EvalReport> = result.cells.iter().map(|(_, r)| r).collect();
            all.push(&result.nested);
            outputs.push(write_timing(&a.out, &all)?);
            let (mk, sk) = result.nested.kappa_stats();
            println!(
                "selected phi={} transfer={} cv_kappa={:.4} nested_kappa={mk:.4} nested_std={sk:.4}",
                result.best.phi,
                result.best.transfer,
                result.cell_report(result.best).map_or(f64::NAN, EvalReport::mean_kappa),
            );
        }
        None => {
            let cfg = config(&a.reasoning, a.transfer.unwrap_or(TransferArg::Sigmoid).into())?;
            let r = eval::cross_validate(&raw, &cfg, head, folds, seed)?;
            write_output(&a.out, |buf| report::write_folds(buf, &r))?;
            outputs.push(write_timing(&a.out, &[&r])?);
            let (mk, sk) = r.kappa_stats();
            let (ma, _) = r.accuracy_stats();
            println!(
                "evaluated folds={folds} kappa={mk:.4} kappa_std={sk:.4} accuracy={ma:.4} fixed_point_fraction={:.2}",
                r.fixed_point_fraction()
            );
        }
    }
    finish(cli, Some(seed), &[&a.data], outputs)
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let raw = load_csv(&a.data, &a.csv.options())?;
    let phis = eval::parse_grid(&a.phi_grid)?;
    let base = config(&a.reasoning, a.transfer.into())?;
    let points = eval::sweep_phi_iterations(&raw, &phis, &base, a.head.into(), a.cv.folds as usize, a.cv.seed)?;
    write_output(&a.out, |buf| report::write_sweep(buf, &points))?;
    finish(cli, Some(a.cv.seed), &[&a.data], vec![a.out.clone()])?;
    let best = points
        .iter()
        .max_by(|x, y| x.mean_kappa.total_cmp(&y.mean_kappa).then(y.phi.total_cmp(&x.phi)))
        .expect("grid is non-empty");
    println!(
        "swept points={} best_phi={} best_iterations={} best_kappa={:.4}",
        points.len(),
        best.phi,
        best.max_iterations,
        best.mean_kappa
    );
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    let raw = load_csv(&a.data, &a.csv.options())?;
    let base = config(&a.reasoning, a.transfer.into())?;
    let phis = match &a.phi_grid {
        Some(g) => eval::parse_grid(g)?,
        None => vec![a.reasoning.phi],
    };
    let pairs = eval::compare_over_phi(&raw, &phis, &base, a.cv.folds as usize, a.cv.seed)?;
    write_output(&a.out, |buf| report::write_paired(buf, &pairs))?;
    let all: Vec<&EvalReport> = pairs.iter().flat_map(|p| [&p.recurrence_aware, &p.last_state]).collect();
    let timing = write_timing(&a.out, &all)?;
    finish(cli, Some(a.cv.seed), &[&a.data], vec![a.out.clone(), timing])?;
    for p in &pairs {
        println!(
            "phi={} recurrence_kappa={:.4} laststate_kappa={:.4}",
            p.recurrence_aware.phi,
            p.recurrence_aware.mean_kappa(),
            p.last_state.mean_kappa()
        );
    }
    Ok(())
}

fn explain(cli: &Cli, a: &ExplainArgs) -> Result<()> {
    let fitted = LtcnModel::load(&a.model)?;
    let relevance = fitted.relevance()?;
    write_output(&a.out, |buf| report::write_relevance(buf, &relevance))?;
    finish(cli, None, &[&a.model], vec![a.out.clone()])?;
    let top: Vec<String> = relevance
        .entries
        .iter()
        .take(5)
        .map(|e| format!("{}={:.4}", e.name, e.score))
        .collect();
    println!("explained features={} top {}", relevance.entries.len(), top.join(" "));
    Ok(())
}

fn trace(cli: &Cli, a: &DynamicsArgs) -> Result<()> {
    let fitted = LtcnModel::load(&a.model)?;
    let table = load_feature_csv(&a.data, &a.csv.options(), fitted.n_features())?;
    if table.features.nrows() == 0 {
        return Err(CliError::new("empty_input", format!("{} has no rows to trace", a.data.display())));
    }
    let x = fitted.scale(&table.features)?;
    let cfg = ReasoningConfig {
        phi: a.phi.unwrap_or(fitted.config.phi),
        max_iterations: a.iters.map_or(fitted.config.max_iterations, |t| t as usize),
        ..fitted.config
    };
    cfg.validate()?;
    let history = dynamics::run(&x, &fitted.inner.w, &fitted.inner.b, &cfg)?;
    write_output(&a.out, |buf| report::write_trace(buf, &history, &fitted.feature_names))?;
    finish(cli, None, &[&a.model, &a.data], vec![a.out.clone()])?;
    println!(
        "traced rows={} iterations={} attractor={}",
        x.nrows(),
        history.iterations(),
        history.attractor.label()
    );
    Ok(())
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    if a.rows < 4 {
        return Err(CliError::new("invalid_parameter", "invalid parameter rows: must be at least 4"));
    }
    let needs = |what: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(CliError::new("invalid_parameter", format!("invalid parameter {what}")))
        }
    };
    let table = match a.kind {
        SyntheticKind::Blobs => synthetic::blobs(a.rows, a.seed),
        SyntheticKind::Xor => synthetic::xor(a.rows, a.seed),
        SyntheticKind::Collapsing => synthetic::collapsing(a.rows, a.seed),
        SyntheticKind::Linear => {
            needs("classes: must be at least 2", a.classes >= 2)?;
            needs("features: must be at least 1, and at least 2 for more than two classes", a.features >= 2 || (a.features == 1 && a.classes == 2))?;
            synthetic::linear(a.rows, a.features, a.classes, a.seed)
        }
        SyntheticKind::Wide => {
            needs("features: must be at least 1", a.features >= 1)?;
            synthetic::wide(a.rows, a.features, a.seed)
        }
    };
    write_output(&a.out, |buf| dataset::write_csv(buf, &table, &ltcn::CsvOptions::default()))?;
    finish(cli, Some(a.seed), &[], vec![a.out.clone()])?;
    println!("generated rows={} features={}", table.n_rows(), table.n_features());
    Ok(())
}
