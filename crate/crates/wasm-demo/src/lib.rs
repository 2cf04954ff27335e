//! Browser bindings for the LTCN classifier.
//!
//! Each export takes CSV text plus a few knobs and returns a JSON string, so
//! the page needs nothing beyond `JSON.parse`. The plain functions in `api`
//! carry the logic and are what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod api {
    use ltcn::dynamics;
    use ltcn::eval::{self, cohen_kappa};
    use ltcn::{synthetic, CsvOptions, DecisionHead, RawTable, ReasoningConfig, TransferFunction};
    use serde::Serialize;

    pub type ApiResult = Result<String, String>;

    fn table(csv: &str) -> Result<RawTable, String> {
        ltcn::dataset::read_csv(csv.as_bytes(), &CsvOptions::default()).map_err(|e| e.to_string())
    }

    fn transfer(name: &str) -> Result<TransferFunction, String> {
        match name {
            "sigmoid" => Ok(TransferFunction::sigmoid()),
            "tanh" => Ok(TransferFunction::tanh()),
            other => Err(format!("unknown transfer function {other:?}")),
        }
    }

    fn config(phi: f64, iters: usize, tol: f64, tf: &str) -> Result<ReasoningConfig, String> {
        let cfg = ReasoningConfig::new(phi, iters, transfer(tf)?)
            .map_err(|e| e.to_string())?
            .with_tolerance(tol);
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn json<T: Serialize>(v: &T) -> ApiResult {
        serde_json::to_string(v).map_err(|e| e.to_string())
    }

    /// One of the built-in synthetic tables as CSV text.
    pub fn generate(kind: &str, rows: usize, seed: u64) -> ApiResult {
        if !(8..=5000).contains(&rows) {
            return Err(format!("rows must be in 8..=5000, got {rows}"));
        }
        let raw = match kind {
            "blobs" => synthetic::blobs(rows, seed),
            "xor" => synthetic::xor(rows, seed),
            "linear" => synthetic::linear(rows, 2, 3, seed),
            "collapsing" => synthetic::collapsing(rows, seed),
            other => return Err(format!("unknown dataset {other:?}")),
        };
        let mut out = Vec::new();
        ltcn::dataset::write_csv(&mut out, &raw, &CsvOptions::default()).map_err(|e| e.to_string())?;
        String::from_utf8(out).map_err(|e| e.to_string())
    }

    #[derive(Serialize)]
    struct Trace {
        features: Vec<String>,
        attractor: &'static str,
        detected_at: Option<usize>,
        iterations: usize,
        deltas: Vec<f64>,
        /// Mean activation per iteration, one value per feature.
        mean_activation: Vec<Vec<f64>>,
        train_kappa: f64,
    }

    /// Fits on the table and traces the training batch through the recurrence.
    pub fn trace(csv: &str, phi: f64, iters: usize, tol: f64, tf: &str) -> ApiResult {
        let raw = table(csv)?;
        let cfg = config(phi, iters, tol, tf)?;
        let model = ltcn::model::fit_raw(&raw, &cfg, DecisionHead::RecurrenceAware).map_err(|e| e.to_string())?;
        let x = model.scale(raw.features()).map_err(|e| e.to_string())?;
        let history = dynamics::run(&x, &model.inner.w, &model.inner.b, &model.config).map_err(|e| e.to_string())?;
        let n = x.nrows().max(1) as f64;
        let mean_activation = history
            .states
            .iter()
            .map(|a| (0..a.ncols()).map(|j| a.col(j).iter().sum::<f64>() / n).collect())
            .collect();
        let predicted = model.predict_class(&x).map_err(|e| e.to_string())?;
        let train_kappa = cohen_kappa(raw.labels(), &predicted).map_err(|e| e.to_string())?;
        json(&Trace {
            features: raw.feature_names().to_vec(),
            attractor: history.attractor.label(),
            detected_at: history.attractor.detected_at(),
            iterations: history.iterations(),
            deltas: history.deltas(),
            mean_activation,
            train_kappa,
        })
    }

    /// Cross-validated κ over the `φ × T` surface.
    pub fn sweep(csv: &str, phi_grid: &str, iters: usize, folds: usize, seed: u64, tf: &str) -> ApiResult {
        let raw = table(csv)?;
        let phis = eval::parse_grid(phi_grid).map_err(|e| e.to_string())?;
        let cfg = config(phis[0], iters, ltcn::dynamics::DEFAULT_TOLERANCE, tf)?;
        let points = eval::sweep_phi_iterations(&raw, &phis, &cfg, DecisionHead::RecurrenceAware, folds, seed)
            .map_err(|e| e.to_string())?;
        json(&points)
    }

    #[derive(Serialize)]
    struct HeadSummary {
        kappa: Vec<f64>,
        mean_kappa: f64,
        mean_accuracy: f64,
    }

    #[derive(Serialize)]
    struct Comparison {
        recurrence_aware: HeadSummary,
        last_state: HeadSummary,
        iterations: Vec<usize>,
        attractors: Vec<&'static str>,
    }

    fn summary(report: &ltcn::EvalReport) -> HeadSummary {
        HeadSummary {
            kappa: report.folds.iter().map(|f| f.kappa).collect(),
            mean_kappa: report.kappa_stats().0,
            mean_accuracy: report.accuracy_stats().0,
        }
    }

    /// Both decision heads on identical folds.
    pub fn compare(csv: &str, phi: f64, iters: usize, tol: f64, folds: usize, seed: u64, tf: &str) -> ApiResult {
        let raw = table(csv)?;
        let cfg = config(phi, iters, tol, tf)?;
        let paired = eval::compare_decision_heads(&raw, &cfg, folds, seed).map_err(|e| e.to_string())?;
        let folds = &paired.recurrence_aware.folds;
        json(&Comparison {
            recurrence_aware: summary(&paired.recurrence_aware),
            last_state: summary(&paired.last_state),
            iterations: folds.iter().map(|f| f.iterations).collect(),
            attractors: folds.iter().map(|f| f.attractor.label()).collect(),
        })
    }
}

fn js(r: api::ApiResult) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn generate(kind: &str, rows: usize, seed: u32) -> Result<String, JsValue> {
    js(api::generate(kind, rows, seed.into()))
}

#[wasm_bindgen]
pub fn trace(csv: &str, phi: f64, iters: usize, tol: f64, transfer: &str) -> Result<String, JsValue> {
    js(api::trace(csv, phi, iters, tol, transfer))
}

#[wasm_bindgen]
pub fn sweep(csv: &str, phi_grid: &str, iters: usize, folds: usize, seed: u32, transfer: &str) -> Result<String, JsValue> {
    js(api::sweep(csv, phi_grid, iters, folds, seed.into(), transfer))
}

#[wasm_bindgen]
pub fn compare(
    csv: &str,
    phi: f64,
    iters: usize,
    tol: f64,
    folds: usize,
    seed: u32,
    transfer: &str,
) -> Result<String, JsValue> {
    js(api::compare(csv, phi, iters, tol, folds, seed.into(), transfer))
}
