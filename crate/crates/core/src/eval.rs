//! Agreement metrics, cross-validation, nested grid search and the
//! decision-head comparison.
//!
//! Every fold fits its own scaler and class encoding on the training split
//! only. Folds and grid cells are independent; results are always assembled
//! in fold/cell order so the output does not depend on scheduling.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::dataset::{class_order, label_indices, make_folds, Dataset, FoldPlan, MinMaxScaler, RawTable};
use crate::dynamics::{self, Attractor, ReasoningConfig};
use crate::error::{Error, Result};
use crate::learning;
use crate::model::{self, argmax_rows, DecisionHead, LtcnModel};
use crate::transfer::{TransferFunction, TransferKind};

/// Counts with rows = true class and columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_indices(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Self {
        let mut counts = vec![vec![0u64; n_classes]; n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            counts[t][p] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_counts(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn predicted_counts(&self) -> Vec<u64> {
        let n = self.counts.len();
        (0..n).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn kappa(&self) -> f64 {
        let n = self.total();
        let agree: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        let chance: u128 = self
            .true_counts()
            .iter()
            .zip(self.predicted_counts())
            .map(|(&a, b)| u128::from(a) * u128::from(b))
            .sum();
        kappa_from_counts(n, agree, chance)
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let agree: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        agree as f64 / n as f64
    }
}

/// `κ = (n·agree − chance) / (n² − chance)` where `chance = Σ_c true_c·pred_c`.
/// Both sides are exact integers, so the only rounding is the final division.
/// When chance agreement is total (`p_e = 1`) the ratio is 0/0; it is defined
/// as 1 for perfect agreement and 0 otherwise.
fn kappa_from_counts(n: u64, agree: u64, chance: u128) -> f64 {
    let n = u128::from(n);
    let n2 = n * n;
    if chance == n2 {
        return if u128::from(agree) == n { 1.0 } else { 0.0 };
    }
    let num = (n * u128::from(agree)) as f64 - chance as f64;
    num / (n2 - chance) as f64
}

fn check_lengths<T>(y_true: &[T], y_pred: &[T]) -> Result<()> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::LabelLength {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    Ok(())
}

pub fn cohen_kappa<T: Eq + Hash>(y_true: &[T], y_pred: &[T]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let mut true_counts: HashMap<&T, u64> = HashMap::new();
    let mut pred_counts: HashMap<&T, u64> = HashMap::new();
    let mut agree = 0u64;
    for (t, p) in y_true.iter().zip(y_pred) {
        *true_counts.entry(t).or_default() += 1;
        *pred_counts.entry(p).or_default() += 1;
        agree += u64::from(t == p);
    }
    let chance: u128 = true_counts
        .iter()
        .map(|(label, &a)| u128::from(a) * u128::from(pred_counts.get(label).copied().unwrap_or(0)))
        .sum();
    Ok(kappa_from_counts(y_true.len() as u64, agree, chance))
}

pub fn accuracy<T: Eq>(y_true: &[T], y_pred: &[T]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub kappa: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Wall time around fitting only.
    pub fit_seconds: f64,
    /// Iterations `s` performed at fit time.
    pub iterations: usize,
    pub attractor: Attractor,
    /// Configuration used for this fold (differs per fold under nested CV).
    pub phi: f64,
    pub transfer: TransferKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub head: DecisionHead,
    pub phi: f64,
    pub transfer: TransferKind,
    pub max_iterations: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn mean_kappa(&self) -> f64 {
        self.kappa_stats().0
    }

    pub fn kappa_stats(&self) -> (f64, f64) {
        mean_std(self.folds.iter().map(|f| f.kappa))
    }

    pub fn accuracy_stats(&self) -> (f64, f64) {
        mean_std(self.folds.iter().map(|f| f.accuracy))
    }

    pub fn mean_fit_seconds(&self) -> f64 {
        mean_std(self.folds.iter().map(|f| f.fit_seconds)).0
    }

    /// Fraction of folds whose training trajectory reached a fixed point.
    pub fn fixed_point_fraction(&self) -> f64 {
        if self.folds.is_empty() {
            return 0.0;
        }
        let hits = self.folds.iter().filter(|f| f.attractor.is_fixed_point()).count();
        hits as f64 / self.folds.len() as f64
    }

    /// Mean detection iteration over the folds that reached a fixed point.
    pub fn mean_fixed_point_iteration(&self) -> Option<f64> {
        let ts: Vec<f64> = self
            .folds
            .iter()
            .filter(|f| f.attractor.is_fixed_point())
            .filter_map(|f| f.attractor.detected_at().map(|t| t as f64))
            .collect();
        (!ts.is_empty()).then(|| ts.iter().sum::<f64>() / ts.len() as f64)
    }
}

/// Scaler and class order come from `train` only; test labels unseen at
/// training time are an error.
pub fn split_datasets(
    raw: &RawTable,
    train_idx: &[usize],
    test_idx: &[usize],
    tf: &TransferFunction,
) -> Result<(Dataset, Dataset)> {
    let train_raw = raw.select(train_idx);
    let test_raw = raw.select(test_idx);
    let scaler = MinMaxScaler::fit(train_raw.features());
    let classes = class_order(train_raw.labels());
    let train = Dataset::with_encoding(&train_raw, scaler.clone(), classes.clone(), tf)?;
    let test = Dataset::with_encoding(&test_raw, scaler, classes, tf)?;
    Ok((train, test))
}

fn score_fold(model: &LtcnModel, test: &Dataset) -> Result<(f64, f64, ConfusionMatrix)> {
    let pred = model.predict_indices(&test.x)?;
    let confusion = ConfusionMatrix::from_indices(&test.targets, &pred, model.n_classes());
    Ok((confusion.kappa(), confusion.accuracy(), confusion))
}

fn evaluate_fold(
    raw: &RawTable,
    plan: &FoldPlan,
    fold: usize,
    config: &ReasoningConfig,
    head: DecisionHead,
) -> Result<FoldResult> {
    let (train, test) = split_datasets(
        raw,
        &plan.train_indices(fold),
        &plan.test_indices(fold),
        &config.transfer,
    )?;
    let (model, fit_seconds) = timed(|| model::fit(&train, config, head));
    let model = model?;
    let (kappa, accuracy, confusion) = score_fold(&model, &test)?;
    Ok(FoldResult {
        fold,
        n_test: test.n_rows(),
        kappa,
        accuracy,
        confusion,
        fit_seconds,
        iterations: model.iterations(),
        attractor: model.attractor,
        phi: config.phi,
        transfer: config.transfer.kind(),
    })
}

/// Maps `f` over `0..n` in parallel when the `parallel` feature is on,
/// keeping index order.
fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn cross_validate_with_plan(
    raw: &RawTable,
    plan: &FoldPlan,
    config: &ReasoningConfig,
    head: DecisionHead,
    dataset: &str,
) -> Result<EvalReport> {
    config.validate()?;
    let folds = map_indexed(plan.k, |f| evaluate_fold(raw, plan, f, config, head))?;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        head,
        phi: config.phi,
        transfer: config.transfer.kind(),
        max_iterations: config.max_iterations,
        seed: plan.seed,
        folds,
    })
}

pub fn cross_validate(
    raw: &RawTable,
    config: &ReasoningConfig,
    head: DecisionHead,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    let plan = make_folds(raw.labels(), k, seed)?;
    cross_validate_with_plan(raw, &plan, config, head, "data")
}

/// One `(φ, transfer)` point of a hyper-parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub phi: f64,
    pub transfer: TransferKind,
}

impl GridCell {
    fn config(&self, base: &ReasoningConfig) -> Result<ReasoningConfig> {
        let transfer = TransferFunction::new(self.transfer, base.transfer.epsilon())?;
        let cfg = ReasoningConfig {
            phi: self.phi,
            transfer,
            ..*base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn transfer_rank(kind: TransferKind) -> usize {
    match kind {
        TransferKind::Sigmoid => 0,
        TransferKind::Tanh => 1,
    }
}

/// Highest mean κ wins; ties go to the smaller φ, then sigmoid before tanh.
fn select_best(cells: &[GridCell], kappas: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..cells.len() {
        let (a, b) = (kappas[i], kappas[best]);
        let better = a > b
            || (a == b
                && (cells[i].phi < cells[best].phi
                    || (cells[i].phi == cells[best].phi
                        && transfer_rank(cells[i].transfer) < transfer_rank(cells[best].transfer))));
        if better {
            best = i;
        }
    }
    best
}

pub fn grid_cells(phi_grid: &[f64], tf_grid: &[TransferKind]) -> Vec<GridCell> {
    tf_grid
        .iter()
        .flat_map(|&transfer| phi_grid.iter().map(move |&phi| GridCell { phi, transfer }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Cell with the best plain-CV κ on the full table.
    pub best: GridCell,
    /// Plain k-fold CV of every cell on the full table, in grid order.
    pub cells: Vec<(GridCell, EvalReport)>,
    /// Nested CV: each outer fold picks its cell by inner CV on its own
    /// training split, then reports κ on its test split.
    pub nested: EvalReport,
}

impl GridSearchResult {
    pub fn cell_report(&self, cell: GridCell) -> Option<&EvalReport> {
        self.cells.iter().find(|(c, _)| *c == cell).map(|(_, r)| r)
    }
}

/// Seed used for the inner folds of outer fold `fold`.
fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1))
}

#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    raw: &RawTable,
    phi_grid: &[f64],
    tf_grid: &[TransferKind],
    base: &ReasoningConfig,
    head: DecisionHead,
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if phi_grid.is_empty() {
        return Err(Error::EmptyGrid("phi"));
    }
    if tf_grid.is_empty() {
        return Err(Error::EmptyGrid("transfer"));
    }
    let cells = grid_cells(phi_grid, tf_grid);
    let configs = cells
        .iter()
        .map(|c| c.config(base))
        .collect::<Result<Vec<_>>>()?;
    let plan = make_folds(raw.labels(), k, seed)?;

    let reports = map_indexed(cells.len(), |c| {
        cross_validate_with_plan(raw, &plan, &configs[c], head, "data")
    })?;
    let kappas: Vec<f64> = reports.iter().map(EvalReport::mean_kappa).collect();
    let best = cells[select_best(&cells, &kappas)];

    let nested_folds = map_indexed(k, |fold| {
        let train_idx = plan.train_indices(fold);
        let test_idx = plan.test_indices(fold);
        let chosen = if cells.len() == 1 {
            0
        } else {
            let inner_raw = raw.select(&train_idx);
            let inner_k = k.min(inner_raw.n_rows());
            let inner_plan = make_folds(inner_raw.labels(), inner_k, inner_seed(seed, fold))?;
            let inner_kappas = configs
                .iter()
                .map(|cfg| {
                    cross_validate_with_plan(&inner_raw, &inner_plan, cfg, head, "inner")
                        .map(|r| r.mean_kappa())
                })
                .collect::<Result<Vec<f64>>>()?;
            select_best(&cells, &inner_kappas)
        };
        let mut result = evaluate_fold(raw, &plan, fold, &configs[chosen], head)?;
        result.fold = fold;
        // Keep the split identical to the plain CV by construction.
        debug_assert_eq!(result.n_test, test_idx.len());
        Ok(result)
    })?;

    Ok(GridSearchResult {
        best,
        cells: cells.into_iter().zip(reports).collect(),
        nested: EvalReport {
            dataset: "data".into(),
            head,
            phi: best.phi,
            transfer: best.transfer,
            max_iterations: base.max_iterations,
            seed,
            folds: nested_folds,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub recurrence_aware: EvalReport,
    pub last_state: EvalReport,
}

/// Runs `f` and reports its wall time. Browsers without a monotonic clock in
/// std report zero.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let started = std::time::Instant::now();
    let out = f();
    (out, started.elapsed().as_secs_f64())
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

/// Both decision heads on identical folds.
pub fn compare_decision_heads(
    raw: &RawTable,
    config: &ReasoningConfig,
    k: usize,
    seed: u64,
) -> Result<PairedReport> {
    let plan = make_folds(raw.labels(), k, seed)?;
    Ok(PairedReport {
        recurrence_aware: cross_validate_with_plan(raw, &plan, config, DecisionHead::RecurrenceAware, "data")?,
        last_state: cross_validate_with_plan(raw, &plan, config, DecisionHead::LastStateOnly, "data")?,
    })
}

/// The head comparison repeated for every φ in `phis`.
pub fn compare_over_phi(
    raw: &RawTable,
    phis: &[f64],
    base: &ReasoningConfig,
    k: usize,
    seed: u64,
) -> Result<Vec<PairedReport>> {
    if phis.is_empty() {
        return Err(Error::EmptyGrid("phi"));
    }
    phis.iter()
        .map(|&phi| {
            let cfg = ReasoningConfig { phi, ..*base };
            compare_decision_heads(raw, &cfg, k, seed)
        })
        .collect()
}

/// κ for one `(φ, iteration budget)` cell of the sweep surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub phi: f64,
    pub max_iterations: usize,
    pub mean_kappa: f64,
    pub std_kappa: f64,
    pub mean_accuracy: f64,
    /// Mean iterations actually used across folds.
    pub mean_effective_iterations: f64,
    pub fixed_point_fraction: f64,
}

/// κ over a `φ × T` surface, for `T = 1..=max_iterations`.
///
/// Inner weights and the trajectory do not depend on `T`, so each fold runs
/// the recurrence once with the full budget and truncates it for every
/// smaller budget. The result is identical to refitting per `T`.
pub fn sweep_phi_iterations(
    raw: &RawTable,
    phis: &[f64],
    base: &ReasoningConfig,
    head: DecisionHead,
    k: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if phis.is_empty() {
        return Err(Error::EmptyGrid("phi"));
    }
    base.validate()?;
    let plan = make_folds(raw.labels(), k, seed)?;
    let t_max = base.max_iterations;
    let tf = base.transfer;

    let splits = map_indexed(k, |fold| {
        split_datasets(raw, &plan.train_indices(fold), &plan.test_indices(fold), &tf)
    })?;
    let inners = map_indexed(k, |fold| learning::fit_inner(&splits[fold].0.x, &tf))?;

    let mut points = Vec::new();
    for &phi in phis {
        let cfg = ReasoningConfig { phi, ..*base };
        cfg.validate()?;
        // per fold: (kappa, accuracy, s, attractor) for each T in 1..=t_max
        let per_fold = map_indexed(k, |fold| {
            let (train, test) = &splits[fold];
            let inner = &inners[fold];
            let history = dynamics::run(&train.x, &inner.w, &inner.b, &cfg)?;
            let test_states = dynamics::run_exact(&test.x, &inner.w, &inner.b, phi, &tf, history.iterations())?;
            (1..=t_max)
                .map(|t| {
                    let s = t.min(history.iterations());
                    let attractor = if s == history.iterations() {
                        history.attractor
                    } else {
                        dynamics::classify_attractor(&history.states[..=s], cfg.tolerance, cfg.cycle_window)
                    };
                    let (h_train, h_test) = match head {
                        DecisionHead::RecurrenceAware => (
                            dynamics::concat_states(&history.states[..=s]),
                            dynamics::concat_states(&test_states[..=s]),
                        ),
                        DecisionHead::LastStateOnly => (history.states[s].clone(), test_states[s].clone()),
                    };
                    let outer = learning::fit_outer(&h_train, &train.y, &tf, s)?;
                    let mut scores = &h_test * &outer.r;
                    for j in 0..scores.ncols() {
                        let q = outer.q[j];
                        scores.col_mut(j).iter_mut().for_each(|v| *v += q);
                    }
                    let pred = argmax_rows(&scores);
                    let confusion = ConfusionMatrix::from_indices(&test.targets, &pred, train.n_classes());
                    Ok((confusion.kappa(), confusion.accuracy(), s, attractor))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for t in 1..=t_max {
            let rows: Vec<_> = per_fold.iter().map(|f| f[t - 1]).collect();
            let (mk, sk) = mean_std(rows.iter().map(|r| r.0));
            let (ma, _) = mean_std(rows.iter().map(|r| r.1));
            let (ms, _) = mean_std(rows.iter().map(|r| r.2 as f64));
            let fp = rows.iter().filter(|r| r.3.is_fixed_point()).count() as f64 / rows.len() as f64;
            points.push(SweepPoint {
                phi,
                max_iterations: t,
                mean_kappa: mk,
                std_kappa: sk,
                mean_accuracy: ma,
                mean_effective_iterations: ms,
                fixed_point_fraction: fp,
            });
        }
    }
    Ok(points)
}

/// Parses `start:end:step` into an inclusive grid. The end point is kept
/// when it falls on the grid within rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::param("phi-grid", format!("cannot parse {s:?}")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [start, end, step] => {
            let (start, end, step) = (parse(start)?, parse(end)?, parse(step)?);
            if step.is_nan() || step <= 0.0 || end < start {
                return Err(Error::param("phi-grid", "expected start <= end and step > 0"));
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| {
                    let v = start + step * i as f64;
                    // Snap accumulated rounding so 0.1-steps print as 0.3, not 0.30000000000000004.
                    (v * 1e9).round() / 1e9
                })
                .collect())
        }
        _ => Err(Error::param("phi-grid", format!("expected start:end:step, got {text:?}"))),
    }
}

/// Class indices for labels, failing on labels unseen at training time.
pub fn encode_labels(labels: &[String], classes: &[String]) -> Result<Vec<usize>> {
    label_indices(labels, classes)
}
