//! Seeded synthetic tables used by the tests, the acceptance suite, the CLI
//! `generate` command and the browser demo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::RawTable;

fn table(rows: Vec<Vec<f64>>, labels: Vec<String>) -> RawTable {
    let m = rows[0].len();
    let names = (1..=m).map(|j| format!("f{j}")).collect();
    RawTable::new(names, "class", &rows, labels).expect("generator emits valid tables")
}

fn label(c: usize) -> String {
    format!("c{c}")
}

/// Two well-separated isotropic Gaussian blobs in 2D, alternating classes.
pub fn blobs(n: usize, seed: u64) -> RawTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.6).expect("valid sigma");
    let centres = [[-2.0, -2.0], [2.0, 2.0]];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        rows.push(vec![
            centres[c][0] + noise.sample(&mut rng),
            centres[c][1] + noise.sample(&mut rng),
        ]);
        labels.push(label(c));
    }
    table(rows, labels)
}

/// Four equally sized blobs on the corners of the unit square; diagonal
/// corners share a class. No linear function of the raw features does better
/// than chance here.
pub fn xor(n: usize, seed: u64) -> RawTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).expect("valid sigma");
    let corners = [([0.0, 0.0], 0), ([1.0, 1.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1)];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (centre, c) = corners[i % 4];
        rows.push(vec![
            centre[0] + noise.sample(&mut rng),
            centre[1] + noise.sample(&mut rng),
        ]);
        labels.push(label(c));
    }
    table(rows, labels)
}

/// Classes are angular sectors around the centre of the unit cube, measured
/// in a random 2D projection. Sector boundaries are hyperplanes through the
/// centre, so every class is a convex cone (linearly separable from the rest
/// for two classes) and every class has positive volume. Points closer than
/// `0.15` to a boundary, or than `0.1` to the centre of the projection, are
/// rejected.
pub fn linear(n: usize, m: usize, classes: usize, seed: u64) -> RawTable {
    assert!(classes >= 2 && (m >= 2 || (m == 1 && classes == 2)), "one feature only supports two classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("valid sigma");
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..m).map(|_| gauss.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let u = unit(&mut rng);
    // Gram-Schmidt against u; a single feature leaves only the u axis.
    let mut v = unit(&mut rng);
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(x, a)| *x -= dot * a);
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x = if vn > 1e-12 { *x / vn } else { 0.0 });

    let sector = std::f64::consts::TAU / classes as f64;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let c = rows.len() % classes;
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let a: f64 = x.iter().zip(&u).map(|(xi, ui)| (xi - 0.5) * ui).sum();
        let b: f64 = x.iter().zip(&v).map(|(xi, vi)| (xi - 0.5) * vi).sum();
        let r = a.hypot(b);
        if r < 0.1 {
            continue;
        }
        // Sectors are centred on the angles k·sector, so with one feature the
        // two classes sit on either side of the centre.
        let theta = (b.atan2(a) + sector / 2.0).rem_euclid(std::f64::consts::TAU);
        let k = ((theta / sector) as usize).min(classes - 1);
        let offset = theta - k as f64 * sector;
        let gap = r * offset.min(sector - offset).min(std::f64::consts::FRAC_PI_2).sin();
        if k != c || gap < 0.15 {
            continue;
        }
        rows.push(x);
        labels.push(label(c));
    }
    table(rows, labels)
}

/// Two independent, heavily skewed features (`u⁴`), labelled by which side
/// of the median of `a + b` they fall on, with a small margin.
///
/// Independence keeps the learned inner weights small and the skew pushes the
/// biases deep into saturation, so at `φ = 1` the map contracts every
/// instance onto one shared fixed point within a dozen iterations. The class
/// is still a linear function of the input.
pub fn collapsing(n: usize, seed: u64) -> RawTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = 2.0 * 0.5f64.powi(4);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let c = rows.len() % 2;
        let a = rng.random_range(0.0f64..1.0).powi(4);
        let b = rng.random_range(0.0f64..1.0).powi(4);
        let margin = a + b - threshold;
        if margin.abs() < 0.05 * threshold || (margin > 0.0) != (c == 1) {
            continue;
        }
        rows.push(vec![a, b]);
        labels.push(label(c));
    }
    table(rows, labels)
}

/// Phishing-scale binary table: `m` features with a shared latent factor and
/// labels from a noisy logistic rule.
pub fn wide(n: usize, m: usize, seed: u64) -> RawTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("valid sigma");
    let loadings: Vec<f64> = (0..m).map(|_| rng.random_range(-0.8..0.8)).collect();
    let coef: Vec<f64> = (0..m).map(|_| gauss.sample(&mut rng) / (m as f64).sqrt()).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let latent = gauss.sample(&mut rng);
        let x: Vec<f64> = loadings
            .iter()
            .map(|l| l * latent + gauss.sample(&mut rng))
            .collect();
        let z: f64 = coef.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() * 3.0;
        let p = 1.0 / (1.0 + (-z).exp());
        labels.push(label(usize::from(rng.random_range(0.0..1.0) < p)));
        rows.push(x);
    }
    table(rows, labels)
}

/// Replaces the labels with a seeded permutation of themselves.
pub fn shuffle_labels(raw: &RawTable, seed: u64) -> RawTable {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = raw.labels().to_vec();
    labels.shuffle(&mut rng);
    let rows: Vec<Vec<f64>> = (0..raw.n_rows())
        .map(|i| (0..raw.n_features()).map(|j| raw.features()[(i, j)]).collect())
        .collect();
    RawTable::new(raw.feature_names().to_vec(), raw.label_name(), &rows, labels)
        .expect("same shape as the source table")
}

/// A planted inner-weight regression: every column except `target` is
/// uniform in `(0.05, 0.95)`; column `target` equals
/// `f(bias + Σ_j x_j·w_j)` exactly.
#[derive(Debug, Clone)]
pub struct PlantedInner {
    pub x: faer::Mat<f64>,
    pub target: usize,
    pub bias: f64,
    /// Full length `m`; the entry at `target` is zero.
    pub weights: Vec<f64>,
}

pub fn planted_inner(
    k: usize,
    m: usize,
    tf: &crate::transfer::TransferFunction,
    seed: u64,
) -> PlantedInner {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(0..m);
    let bias = rng.random_range(-0.5..0.5);
    let weights: Vec<f64> = (0..m)
        .map(|j| if j == target { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    let mut x = faer::Mat::zeros(k, m);
    for i in 0..k {
        let mut z = bias;
        for j in 0..m {
            if j != target {
                let v = rng.random_range(0.05..0.95);
                x[(i, j)] = v;
                z += v * weights[j];
            }
        }
        x[(i, target)] = tf.forward(z);
    }
    PlantedInner {
        x,
        target,
        bias,
        weights,
    }
}
