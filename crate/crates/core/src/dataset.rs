//! Tabular input: CSV loading, min-max scaling, target encoding and fold plans.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::TransferFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Numeric features plus one categorical label per row, before scaling.
#[derive(Debug, Clone)]
pub struct RawTable {
    feature_names: Vec<String>,
    label_name: String,
    features: Mat<f64>,
    labels: Vec<String>,
}

impl RawTable {
    pub fn new(
        feature_names: Vec<String>,
        label_name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Vec<String>,
    ) -> Result<Self> {
        let m = feature_names.len();
        if m == 0 {
            return Err(Error::NoFeatures);
        }
        if rows.len() != labels.len() {
            return Err(Error::shape("label count", rows.len(), labels.len()));
        }
        if rows.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                found: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: m,
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumeric {
                    row: i + 1,
                    column: j + 1,
                    value: row[j].to_string(),
                });
            }
        }
        if class_order(&labels).len() < 2 {
            return Err(Error::TooFewClasses);
        }
        let features = Mat::from_fn(rows.len(), m, |i, j| rows[i][j]);
        Ok(Self {
            feature_names,
            label_name: label_name.into(),
            features,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Mat<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    /// Rows at `indices`, in that order. The result may hold a single class.
    pub fn select(&self, indices: &[usize]) -> RawTable {
        let features = Mat::from_fn(indices.len(), self.n_features(), |i, j| {
            self.features[(indices[i], j)]
        });
        RawTable {
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

fn csv_reader<R: Read>(reader: R, options: &CsvOptions) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            row,
            column,
            value: cell.to_string(),
        }),
    }
}

/// Loads a labelled table; the last column is the label.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<RawTable> {
    read_csv(open(path.as_ref())?, options)
}

/// Row numbers in errors are 1-based file lines; columns are 1-based.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<RawTable> {
    let mut rdr = csv_reader(reader, options);
    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row: line,
                expected,
                found: record.len(),
            });
        }
        if expected < 2 {
            return Err(Error::NoFeatures);
        }
        let row = record
            .iter()
            .take(expected - 1)
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, line, j + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        labels.push(record[expected - 1].to_string());
    }

    let width = width.unwrap_or(0);
    if width < 2 {
        return Err(if rows.is_empty() {
            Error::TooFewRows { needed: 2, found: 0 }
        } else {
            Error::NoFeatures
        });
    }
    let (feature_names, label_name) = match header {
        Some(mut h) => {
            let label = h.pop().unwrap_or_default();
            (h, label)
        }
        None => ((1..width).map(|j| format!("f{j}")).collect(), "class".to_string()),
    };
    RawTable::new(feature_names, label_name, &rows, labels)
}

/// Writes a table back out with a header line, label column last. Floats
/// use the shortest representation that round-trips.
pub fn write_csv<W: Write>(out: W, table: &RawTable, options: &CsvOptions) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(options.delimiter).from_writer(out);
    if options.has_header {
        let mut header = table.feature_names().to_vec();
        header.push(table.label_name().to_string());
        w.write_record(&header)?;
    }
    for i in 0..table.n_rows() {
        let mut row: Vec<String> = (0..table.n_features())
            .map(|j| table.features()[(i, j)].to_string())
            .collect();
        row.push(table.labels()[i].clone());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Unlabelled (or optionally labelled) rows for prediction.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub features: Mat<f64>,
    /// Present when the file carried one extra trailing column.
    pub labels: Option<Vec<String>>,
}

/// Reads rows with exactly `n_features` numeric columns, or `n_features + 1`
/// where the trailing column is a label that is passed through untouched.
pub fn load_feature_csv(
    path: impl AsRef<Path>,
    options: &CsvOptions,
    n_features: usize,
) -> Result<FeatureTable> {
    read_feature_csv(open(path.as_ref())?, options, n_features)
}

pub fn read_feature_csv<R: Read>(
    reader: R,
    options: &CsvOptions,
    n_features: usize,
) -> Result<FeatureTable> {
    let mut rdr = csv_reader(reader, options);
    let mut width = if options.has_header {
        Some(rdr.headers()?.len())
    } else {
        None
    };
    if let Some(w) = width {
        check_width(w, n_features)?;
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let expected = match width {
            Some(w) => w,
            None => {
                check_width(record.len(), n_features)?;
                *width.insert(record.len())
            }
        };
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row: line,
                expected,
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .take(n_features)
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, line, j + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        if expected == n_features + 1 {
            labels.push(record[n_features].to_string());
        }
    }
    let labelled = width == Some(n_features + 1);
    Ok(FeatureTable {
        features: Mat::from_fn(rows.len(), n_features, |i, j| rows[i][j]),
        labels: labelled.then_some(labels),
    })
}

fn check_width(found: usize, n_features: usize) -> Result<()> {
    if found == n_features || found == n_features + 1 {
        Ok(())
    } else {
        Err(Error::shape(
            "feature column count",
            format!("{n_features} (or {} with a label column)", n_features + 1),
            found,
        ))
    }
}

/// Per-feature `(min, max)` captured on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Mat<f64>) -> Self {
        let (mut mins, mut maxs) = (Vec::new(), Vec::new());
        for j in 0..x.ncols() {
            let col = x.col(j);
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            mins.push(lo);
            maxs.push(hi);
        }
        Self { mins, maxs }
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// Constant columns map to 0.5; values outside the fitted range clip to [0, 1].
    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.mins[j], self.maxs[j]);
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    pub fn transform(&self, x: &Mat<f64>) -> Result<Mat<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::shape("feature count", self.n_features(), x.ncols()));
        }
        Ok(Mat::from_fn(x.nrows(), x.ncols(), |i, j| self.scale(j, x[(i, j)])))
    }
}

pub fn normalize_min_max(table: &RawTable) -> (Mat<f64>, MinMaxScaler) {
    let scaler = MinMaxScaler::fit(table.features());
    let x = scaler
        .transform(table.features())
        .expect("scaler fitted on the same table");
    (x, scaler)
}

/// Distinct labels in first-appearance order.
pub fn class_order(labels: &[String]) -> Vec<String> {
    let mut seen = Vec::<String>::new();
    for l in labels {
        if !seen.contains(l) {
            seen.push(l.clone());
        }
    }
    seen
}

pub fn label_indices(labels: &[String], classes: &[String]) -> Result<Vec<usize>> {
    let lookup: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    labels
        .iter()
        .map(|l| {
            lookup
                .get(l.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownLabel(l.clone()))
        })
        .collect()
}

/// One-hot targets with `tf.high()` at the class position and `tf.low()` elsewhere.
pub fn encode_targets(
    labels: &[String],
    classes: &[String],
    tf: &TransferFunction,
) -> Result<Mat<f64>> {
    let idx = label_indices(labels, classes)?;
    let (hi, lo) = (tf.high(), tf.low());
    Ok(Mat::from_fn(labels.len(), classes.len(), |i, j| {
        if idx[i] == j {
            hi
        } else {
            lo
        }
    }))
}

/// Scaled features and encoded targets ready for fitting.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    pub classes: Vec<String>,
    pub scaler: MinMaxScaler,
    pub feature_names: Vec<String>,
    /// Class index per row, aligned with `classes`.
    pub targets: Vec<usize>,
}

impl Dataset {
    /// Fits the scaler and class order on `raw` itself.
    pub fn from_raw(raw: &RawTable, tf: &TransferFunction) -> Result<Self> {
        let scaler = MinMaxScaler::fit(raw.features());
        let classes = class_order(raw.labels());
        Self::with_encoding(raw, scaler, classes, tf)
    }

    /// Applies an existing scaler and class order, e.g. one fitted on a training split.
    pub fn with_encoding(
        raw: &RawTable,
        scaler: MinMaxScaler,
        classes: Vec<String>,
        tf: &TransferFunction,
    ) -> Result<Self> {
        let x = scaler.transform(raw.features())?;
        let y = encode_targets(raw.labels(), &classes, tf)?;
        let targets = label_indices(raw.labels(), &classes)?;
        Ok(Self {
            x,
            y,
            classes,
            scaler,
            feature_names: raw.feature_names().to_vec(),
            targets,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Stratified, seeded assignment of every row to one test fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles each class independently, lays the classes end to end in
/// first-appearance order and deals positions round-robin into folds. Total
/// and per-class fold sizes then differ by at most one.
pub fn make_folds(labels: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > labels.len() {
        return Err(Error::FoldCount {
            k,
            rows: labels.len(),
        });
    }
    let classes = class_order(labels);
    let idx = label_indices(labels, &classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut position = 0;
    for c in 0..classes.len() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| idx[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = position % k;
            position += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
