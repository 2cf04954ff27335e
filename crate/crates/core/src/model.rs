//! The assembled classifier: fitting, prediction, feature relevance and the
//! on-disk model document.

use std::fs;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MinMaxScaler, RawTable};
use crate::dynamics::{self, Attractor, ReasoningConfig};
use crate::error::{Error, Result};
use crate::learning::{self, InnerWeights, OuterWeights};
use crate::transfer::TransferFunction;

pub const FORMAT_NAME: &str = "ltcn-model";
pub const FORMAT_VERSION: u32 = 1;

/// Which states feed the decision neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionHead {
    /// Every temporal state `A(0)…A(s)`.
    RecurrenceAware,
    /// Only the final state, as in classic FCM classifiers.
    LastStateOnly,
}

impl DecisionHead {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionHead::RecurrenceAware => "recurrence",
            DecisionHead::LastStateOnly => "laststate",
        }
    }
}

impl std::fmt::Display for DecisionHead {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DecisionHead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recurrence" | "recurrence_aware" => Ok(DecisionHead::RecurrenceAware),
            "laststate" | "last_state" | "last_state_only" => Ok(DecisionHead::LastStateOnly),
            other => Err(Error::param(
                "head",
                format!("expected recurrence or laststate, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtcnModel {
    pub inner: InnerWeights,
    pub outer: OuterWeights,
    pub config: ReasoningConfig,
    pub head: DecisionHead,
    pub classes: Vec<String>,
    pub scaler: MinMaxScaler,
    pub feature_names: Vec<String>,
    /// How the training batch's trajectory ended.
    pub attractor: Attractor,
}

/// Two-step fit: unsupervised inner weights, a recurrent pass over the
/// training batch, then the supervised outer regression.
pub fn fit(train: &Dataset, config: &ReasoningConfig, head: DecisionHead) -> Result<LtcnModel> {
    config.validate()?;
    let tf = &config.transfer;
    let inner = learning::fit_inner(&train.x, tf)?;
    let history = dynamics::run(&train.x, &inner.w, &inner.b, config)?;
    let s = history.iterations();
    let h = match head {
        DecisionHead::RecurrenceAware => dynamics::concat_history(&history),
        DecisionHead::LastStateOnly => history.last().clone(),
    };
    let outer = learning::fit_outer(&h, &train.y, tf, s)?;
    log::debug!(
        "fitted {} rows, {} features, s={}, {}",
        train.n_rows(),
        train.n_features(),
        s,
        history.attractor.label()
    );
    Ok(LtcnModel {
        inner,
        outer,
        config: *config,
        head,
        classes: train.classes.clone(),
        scaler: train.scaler.clone(),
        feature_names: train.feature_names.clone(),
        attractor: history.attractor,
    })
}

/// Scales, encodes and fits an unscaled table in one go.
pub fn fit_raw(raw: &RawTable, config: &ReasoningConfig, head: DecisionHead) -> Result<LtcnModel> {
    let data = Dataset::from_raw(raw, &config.transfer)?;
    fit(&data, config, head)
}

impl LtcnModel {
    pub fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn iterations(&self) -> usize {
        self.outer.iterations
    }

    pub fn transfer(&self) -> &TransferFunction {
        &self.config.transfer
    }

    /// Design matrix for already-scaled inputs, built exactly as at fit time.
    pub fn design_matrix(&self, x: &Mat<f64>) -> Result<Mat<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::shape("feature count", self.n_features(), x.ncols()));
        }
        let states = dynamics::run_exact(
            x,
            &self.inner.w,
            &self.inner.b,
            self.config.phi,
            &self.config.transfer,
            self.outer.iterations,
        )?;
        Ok(match self.head {
            DecisionHead::RecurrenceAware => dynamics::concat_states(&states),
            DecisionHead::LastStateOnly => states.last().expect("x itself").clone(),
        })
    }

    /// Raw decision scores `H·R + Q` for already-scaled inputs. `f` is not
    /// applied; it is monotone and would not change the argmax.
    pub fn predict_scores(&self, x: &Mat<f64>) -> Result<Mat<f64>> {
        let h = self.design_matrix(x)?;
        if h.ncols() != self.outer.r.nrows() {
            return Err(Error::shape("design width", self.outer.r.nrows(), h.ncols()));
        }
        let mut scores = &h * &self.outer.r;
        for j in 0..scores.ncols() {
            let q = self.outer.q[j];
            scores.col_mut(j).iter_mut().for_each(|v| *v += q);
        }
        Ok(scores)
    }

    /// Scores passed through the transfer function.
    pub fn predict_activations(&self, x: &Mat<f64>) -> Result<Mat<f64>> {
        let scores = self.predict_scores(x)?;
        let tf = self.config.transfer;
        Ok(Mat::from_fn(scores.nrows(), scores.ncols(), |i, j| tf.forward(scores[(i, j)])))
    }

    pub fn predict_indices(&self, x: &Mat<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_scores(x)?))
    }

    pub fn predict_class(&self, x: &Mat<f64>) -> Result<Vec<String>> {
        Ok(self
            .predict_indices(x)?
            .into_iter()
            .map(|c| self.classes[c].clone())
            .collect())
    }

    /// Applies the stored scaler before predicting.
    pub fn scale(&self, raw: &Mat<f64>) -> Result<Mat<f64>> {
        self.scaler.transform(raw)
    }

    /// Per-feature relevance: summed absolute outgoing inner weights plus
    /// summed absolute outer weights over all temporal copies of the feature.
    pub fn relevance(&self) -> Result<RelevanceReport> {
        if self.head != DecisionHead::RecurrenceAware {
            return Err(Error::UnsupportedHead);
        }
        let m = self.n_features();
        let mut entries: Vec<FeatureRelevance> = (0..m)
            .map(|i| {
                let inner: f64 = (0..m).map(|j| self.inner.w[(i, j)].abs()).sum();
                let mut outer = 0.0;
                for t in 0..=self.outer.iterations {
                    let block = self.outer.block(t, m);
                    for j in 0..block.ncols() {
                        outer += block[(i, j)].abs();
                    }
                }
                FeatureRelevance {
                    index: i,
                    name: self.feature_names[i].clone(),
                    score: inner + outer,
                    inner,
                    outer,
                }
            })
            .collect();
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        Ok(RelevanceReport { entries })
    }
}

/// Column of the row maximum; ties resolve to the lowest index.
pub fn argmax_rows(scores: &Mat<f64>) -> Vec<usize> {
    (0..scores.nrows())
        .map(|i| {
            let mut best = 0;
            for j in 1..scores.ncols() {
                if scores[(i, j)] > scores[(i, best)] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRelevance {
    pub index: usize,
    pub name: String,
    pub score: f64,
    pub inner: f64,
    pub outer: f64,
}

/// Features sorted by descending relevance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub entries: Vec<FeatureRelevance>,
}

impl RelevanceReport {
    /// Scores in original feature order.
    pub fn scores_by_index(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        for e in &self.entries {
            out[e.index] = e.score;
        }
        out
    }
}

/// Nested-array (row-major) encoding for dense matrices.
pub(crate) mod matrix_serde {
    use faer::Mat;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    pub fn serialize<S: Serializer>(m: &Mat<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(D::Error::custom(format!(
                "matrix row {bad} has {} entries, expected {width}",
                rows[bad].len()
            )));
        }
        Ok(Mat::from_fn(rows.len(), width, |i, j| rows[i][j]))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    transfer: crate::transfer::TransferKind,
    epsilon: f64,
    phi: f64,
    tolerance: f64,
    cycle_window: usize,
    max_iterations: usize,
    iterations: usize,
    head: DecisionHead,
    attractor: Attractor,
    classes: Vec<String>,
    feature_names: Vec<String>,
    scaler: MinMaxScaler,
    inner: InnerWeights,
    outer: OuterWeights,
}

impl LtcnModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            transfer: self.config.transfer.kind(),
            epsilon: self.config.transfer.epsilon(),
            phi: self.config.phi,
            tolerance: self.config.tolerance,
            cycle_window: self.config.cycle_window,
            max_iterations: self.config.max_iterations,
            iterations: self.outer.iterations,
            head: self.head,
            attractor: self.attractor,
            classes: self.classes.clone(),
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
            inner: self.inner.clone(),
            outer: self.outer.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::ModelFormat("missing field `version`".into()))?;
        if version > u64::from(FORMAT_VERSION) || version == 0 {
            return Err(Error::ModelVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                supported: FORMAT_VERSION,
            });
        }
        let doc: ModelDocument =
            serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format != FORMAT_NAME {
            return Err(Error::ModelFormat(format!("unexpected format {:?}", doc.format)));
        }

        let transfer = TransferFunction::new(doc.transfer, doc.epsilon)?;
        let config = ReasoningConfig {
            phi: doc.phi,
            max_iterations: doc.max_iterations,
            tolerance: doc.tolerance,
            cycle_window: doc.cycle_window,
            transfer,
        };
        config.validate()?;
        let model = LtcnModel {
            inner: doc.inner,
            outer: doc.outer,
            config,
            head: doc.head,
            classes: doc.classes,
            scaler: doc.scaler,
            feature_names: doc.feature_names,
            attractor: doc.attractor,
        };
        if doc.iterations != model.outer.iterations {
            return Err(Error::ModelFormat("iteration count disagrees with outer weights".into()));
        }
        model.check_consistency()?;
        Ok(model)
    }

    fn check_consistency(&self) -> Result<()> {
        let m = self.n_features();
        let bad = |msg: String| Err(Error::ModelFormat(msg));
        if (self.inner.w.nrows(), self.inner.w.ncols()) != (m, m) {
            return bad(format!("inner weights must be {m}x{m}"));
        }
        if self.feature_names.len() != m || self.scaler.n_features() != m || self.scaler.maxs.len() != m {
            return bad("feature names, scaler and inner weights disagree on feature count".into());
        }
        let expected_rows = match self.head {
            DecisionHead::RecurrenceAware => m * (self.outer.iterations + 1),
            DecisionHead::LastStateOnly => m,
        };
        if self.outer.r.nrows() != expected_rows {
            return bad(format!(
                "outer weights have {} rows, expected {expected_rows}",
                self.outer.r.nrows()
            ));
        }
        if self.outer.r.ncols() != self.classes.len() || self.outer.q.len() != self.classes.len() {
            return bad("outer weights and class list disagree on class count".into());
        }
        if self.classes.len() < 2 {
            return bad("need at least 2 classes".into());
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::TransferFunction;

    fn handmade(head: DecisionHead) -> LtcnModel {
        let mut w = Mat::zeros(2, 2);
        w[(0, 1)] = 0.5;
        w[(1, 0)] = -0.25;
        let r = Mat::from_fn(4, 1, |i, _| [0.2, 0.1, -0.3, 0.4][i]);
        LtcnModel {
            inner: InnerWeights { w, b: vec![0.0, 0.0] },
            outer: OuterWeights {
                r,
                q: vec![0.7],
                iterations: 1,
            },
            config: ReasoningConfig::default(),
            head,
            classes: vec!["only".into()],
            scaler: MinMaxScaler {
                mins: vec![0.0, 0.0],
                maxs: vec![1.0, 1.0],
            },
            feature_names: vec!["f1".into(), "f2".into()],
            attractor: Attractor::NonConvergent,
        }
    }

    fn serializable() -> LtcnModel {
        let mut m = handmade(DecisionHead::RecurrenceAware);
        m.outer.r = Mat::from_fn(4, 2, |i, j| (i as f64 + 1.0) / 3.0 - j as f64 * 1e-17);
        m.outer.q = vec![0.1 + 0.2, std::f64::consts::PI];
        m.classes = vec!["yes".into(), "no".into()];
        m
    }

    #[test]
    fn relevance_hand_example() {
        let report = handmade(DecisionHead::RecurrenceAware).relevance().unwrap();
        let scores = report.scores_by_index();
        assert!((scores[0] - 1.0).abs() < 1e-15);
        assert!((scores[1] - 0.75).abs() < 1e-15);
        assert_eq!(report.entries[0].name, "f1");
        assert!((report.entries[0].inner - 0.5).abs() < 1e-15);
        assert!((report.entries[1].outer - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relevance_zero_and_sign_flip() {
        let mut m = handmade(DecisionHead::RecurrenceAware);
        let base = m.relevance().unwrap().scores_by_index();
        m.inner.w = Mat::from_fn(2, 2, |i, j| -m.inner.w[(i, j)]);
        m.outer.r = Mat::from_fn(4, 1, |i, j| -m.outer.r[(i, j)]);
        assert_eq!(m.relevance().unwrap().scores_by_index(), base);

        m.inner.w = Mat::zeros(2, 2);
        m.outer.r = Mat::zeros(4, 1);
        assert_eq!(m.relevance().unwrap().scores_by_index(), vec![0.0, 0.0]);
    }

    #[test]
    fn relevance_requires_recurrence_head() {
        let mut m = handmade(DecisionHead::LastStateOnly);
        m.outer.r = Mat::zeros(2, 1);
        assert!(matches!(m.relevance(), Err(Error::UnsupportedHead)));
    }

    #[test]
    fn argmax_tie_rule() {
        let s = Mat::from_fn(3, 3, |i, j| [[0.9, 0.1, 0.0], [0.5, 0.5, 0.1], [0.1, 0.7, 0.2]][i][j]);
        assert_eq!(argmax_rows(&s), vec![0, 0, 1]);
    }

    #[test]
    fn head_names_parse() {
        assert_eq!("recurrence".parse::<DecisionHead>().unwrap(), DecisionHead::RecurrenceAware);
        assert_eq!("laststate".parse::<DecisionHead>().unwrap(), DecisionHead::LastStateOnly);
        assert!("both".parse::<DecisionHead>().is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = serializable();
        let back = LtcnModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_missing_classes_is_structured_error() {
        let m = serializable();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("classes");
        let err = LtcnModel::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::ModelFormat(ref msg) if msg.contains("classes")), "{err}");
    }

    #[test]
    fn json_newer_version_rejected() {
        let m = serializable();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["version"] = serde_json::json!(FORMAT_VERSION + 1);
        assert!(matches!(
            LtcnModel::from_json(&v.to_string()),
            Err(Error::ModelVersion { .. })
        ));
    }

    #[test]
    fn json_shape_mismatch_rejected() {
        let m = serializable();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["outer"]["iterations"] = serde_json::json!(3);
        v["iterations"] = serde_json::json!(3);
        assert!(matches!(LtcnModel::from_json(&v.to_string()), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn empty_batch_predicts_nothing() {
        let m = handmade(DecisionHead::RecurrenceAware);
        let scores = m.predict_scores(&Mat::zeros(0, 2)).unwrap();
        assert_eq!((scores.nrows(), scores.ncols()), (0, 1));
        assert!(m.predict_class(&Mat::zeros(0, 2)).unwrap().is_empty());
        assert!(m.predict_scores(&Mat::zeros(1, 3)).is_err());
    }

    #[test]
    fn activations_are_transfer_of_scores() {
        let m = handmade(DecisionHead::RecurrenceAware);
        let x = Mat::from_fn(3, 2, |i, j| (i + j) as f64 / 4.0);
        let s = m.predict_scores(&x).unwrap();
        let a = m.predict_activations(&x).unwrap();
        let tf = TransferFunction::sigmoid();
        for i in 0..3 {
            assert_eq!(a[(i, 0)], tf.forward(s[(i, 0)]));
        }
    }
}
