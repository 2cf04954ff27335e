//! Independent reference implementations. Nothing here calls into the crate's
//! linear algebra; everything is plain loops over `Vec<Vec<f64>>`.
#![allow(dead_code, clippy::needless_range_loop)]

use ltcn::{Mat, RawTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rows_of(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn mat_of(rows: &[Vec<f64>]) -> Mat<f64> {
    let c = rows.first().map_or(0, Vec::len);
    Mat::from_fn(rows.len(), c, |i, j| rows[i][j])
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Solves the square system `a·x = b` by Gaussian elimination with partial
/// pivoting. `b` may have several columns.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..b[row].len() {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let nb = b[0].len();
    let mut x = vec![vec![0.0; nb]; n];
    for row in (0..n).rev() {
        for k in 0..nb {
            let mut s = b[row][k];
            for c in row + 1..n {
                s -= a[row][c] * x[c][k];
            }
            x[row][k] = s / a[row][row];
        }
    }
    x
}

/// Least squares through the normal equations. Only for full-column-rank,
/// well-conditioned `a`.
pub fn lstsq(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let at = transpose(a);
    solve(matmul(&at, a), matmul(&at, b))
}

/// Min-max scaling fitted on `train`, constant columns to 0.5, unseen values
/// clipped.
pub fn minmax(train: &[Vec<f64>], data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = train[0].len();
    let lo: Vec<f64> = (0..m).map(|j| train.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..m).map(|j| train.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    data.iter()
        .map(|r| {
            (0..m)
                .map(|j| {
                    if hi[j] == lo[j] {
                        0.5
                    } else {
                        ((r[j] - lo[j]) / (hi[j] - lo[j])).clamp(0.0, 1.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Relevance recomputed from the serialized model: absolute row sums of the
/// inner matrix plus absolute row sums of every outer block.
pub fn relevance_from_json(json: &str) -> Vec<f64> {
    let doc: serde_json::Value = serde_json::from_str(json).unwrap();
    let grid = |v: &serde_json::Value| -> Vec<Vec<f64>> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
            .collect()
    };
    let w = grid(&doc["inner"]["w"]);
    let r = grid(&doc["outer"]["r"]);
    let m = w.len();
    let blocks = r.len() / m;
    (0..m)
        .map(|i| {
            let mut inner = 0.0;
            for x in &w[i] {
                inner += x.abs();
            }
            let mut outer = 0.0;
            for t in 0..blocks {
                for x in &r[t * m + i] {
                    outer += x.abs();
                }
            }
            inner + outer
        })
        .collect()
}

/// Uniform random table with labels independent of the features.
pub fn random_table(n: usize, m: usize, classes: usize, seed: u64) -> RawTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let labels: Vec<String> = (0..n).map(|i| format!("k{}", (i + rng.random_range(0..classes)) % classes)).collect();
    let names = (0..m).map(|j| format!("x{j}")).collect();
    RawTable::new(names, "y", &rows, labels).unwrap()
}

pub fn table_rows(raw: &RawTable) -> Vec<Vec<f64>> {
    rows_of(raw.features())
}
