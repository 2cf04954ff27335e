//! Closed-form parameter estimation.
//!
//! Inner weights come from `M` independent least-squares problems, one per
//! feature neuron, regressing `f⁻¹(X_i)` on the remaining features plus an
//! intercept. Outer weights are the minimum-norm least-squares solution over
//! the concatenated state matrix, computed through an SVD pseudoinverse.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::TransferFunction;

/// Gram matrices with a larger eigenvalue ratio go through the SVD path.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerWeights {
    /// `M×M`; column `i` feeds neuron `i`. The diagonal is zero.
    #[serde(with = "crate::model::matrix_serde")]
    pub w: Mat<f64>,
    pub b: Vec<f64>,
}

impl InnerWeights {
    pub fn zeros(m: usize) -> Self {
        Self {
            w: Mat::zeros(m, m),
            b: vec![0.0; m],
        }
    }

    pub fn n_features(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterWeights {
    /// Stacked blocks `R(0)…R(s)`, each `M` rows by `N` classes.
    #[serde(with = "crate::model::matrix_serde")]
    pub r: Mat<f64>,
    pub q: Vec<f64>,
    /// Iterations performed when the weights were fitted.
    pub iterations: usize,
}

impl OuterWeights {
    pub fn n_classes(&self) -> usize {
        self.q.len()
    }

    /// Rows of `R` belonging to state `t`, for a network of `m` neurons.
    pub fn block(&self, t: usize, m: usize) -> faer::MatRef<'_, f64> {
        self.r.as_ref().subrows(t * m, m)
    }
}

/// Pseudoinverse pieces `V`, `Σ⁺` and `U` of a thin SVD with the small
/// singular values already zeroed.
struct TruncatedSvd {
    u: Mat<f64>,
    v: Mat<f64>,
    inv_s: Vec<f64>,
}

fn truncated_svd(h: &Mat<f64>) -> Result<TruncatedSvd> {
    let svd = h.thin_svd().map_err(|_| Error::SvdFailed)?;
    let s = svd.S().column_vector();
    let sigma_max = s.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let rcond = h.nrows().max(h.ncols()) as f64 * f64::EPSILON;
    let cutoff = rcond * sigma_max;
    let inv_s = s
        .iter()
        .map(|&v| if v > cutoff && v > 0.0 { 1.0 / v } else { 0.0 })
        .collect();
    Ok(TruncatedSvd {
        u: svd.U().to_owned(),
        v: svd.V().to_owned(),
        inv_s,
    })
}

/// Moore-Penrose pseudoinverse. Singular values below
/// `max(P, D)·ε·σ_max` are treated as zero.
pub fn pinv(h: &Mat<f64>) -> Result<Mat<f64>> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Ok(Mat::zeros(h.ncols(), h.nrows()));
    }
    let t = truncated_svd(h)?;
    let scaled_v = Mat::from_fn(t.v.nrows(), t.v.ncols(), |i, j| t.v[(i, j)] * t.inv_s[j]);
    Ok(&scaled_v * t.u.transpose())
}

/// Minimum-norm least-squares solution of `h·β ≈ rhs`, i.e. `pinv(h)·rhs`
/// without forming the pseudoinverse.
pub fn lstsq_min_norm(h: &Mat<f64>, rhs: &Mat<f64>) -> Result<Mat<f64>> {
    if h.nrows() != rhs.nrows() {
        return Err(Error::shape("right-hand side rows", h.nrows(), rhs.nrows()));
    }
    if h.nrows() == 0 || h.ncols() == 0 {
        return Ok(Mat::zeros(h.ncols(), rhs.ncols()));
    }
    let t = truncated_svd(h)?;
    let proj = t.u.transpose() * rhs;
    let proj = Mat::from_fn(proj.nrows(), proj.ncols(), |i, j| proj[(i, j)] * t.inv_s[i]);
    Ok(&t.v * &proj)
}

/// Regressors `[1 | X without column i]`.
fn regressors_without(x: &Mat<f64>, i: usize) -> Mat<f64> {
    let m = x.ncols();
    Mat::from_fn(x.nrows(), m, |r, c| match c {
        0 => 1.0,
        c if c <= i => x[(r, c - 1)],
        c => x[(r, c)],
    })
}

/// Least squares through the normal equations when the Gram matrix is
/// comfortably conditioned, otherwise through the SVD.
fn solve_least_squares(a: &Mat<f64>, y: &Mat<f64>) -> Result<Mat<f64>> {
    let gram = a.transpose() * a;
    if let Ok(eigs) = gram.self_adjoint_eigenvalues(Side::Lower) {
        let lo = eigs.first().copied().unwrap_or(0.0);
        let hi = eigs.last().copied().unwrap_or(0.0);
        if lo > 0.0 && hi / lo <= GRAM_CONDITION_LIMIT {
            if let Ok(llt) = gram.llt(Side::Lower) {
                return Ok(llt.solve(a.transpose() * y));
            }
        }
    }
    lstsq_min_norm(a, y)
}

/// Coefficients `[b_i, w_{j≠i}]` of the regression for neuron `i`.
fn fit_neuron(x: &Mat<f64>, i: usize, tf: &TransferFunction) -> Result<Vec<f64>> {
    let target = Mat::from_fn(x.nrows(), 1, |r, _| tf.clipped_inverse(x[(r, i)]));
    if target.col(0).iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteTarget { feature: i });
    }
    let a = regressors_without(x, i);
    let beta = solve_least_squares(&a, &target)?;
    Ok(beta.col(0).iter().copied().collect())
}

/// Unsupervised step: each neuron is regressed on all the others.
pub fn fit_inner(x: &Mat<f64>, tf: &TransferFunction) -> Result<InnerWeights> {
    let (k, m) = (x.nrows(), x.ncols());
    if k < 2 {
        return Err(Error::TooFewRows { needed: 2, found: k });
    }
    if m == 0 {
        return Err(Error::NoFeatures);
    }

    #[cfg(feature = "parallel")]
    let columns: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..m)
            .into_par_iter()
            .map(|i| fit_neuron(x, i, tf))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<Vec<f64>> = (0..m).map(|i| fit_neuron(x, i, tf)).collect::<Result<_>>()?;

    let mut weights = InnerWeights::zeros(m);
    for (i, beta) in columns.iter().enumerate() {
        weights.b[i] = beta[0];
        for (slot, &coef) in beta[1..].iter().enumerate() {
            let j = if slot < i { slot } else { slot + 1 };
            weights.w[(j, i)] = coef;
        }
    }
    Ok(weights)
}

/// Appends a trailing column of ones.
pub fn with_intercept(h: &Mat<f64>) -> Mat<f64> {
    let d = h.ncols();
    Mat::from_fn(h.nrows(), d + 1, |i, j| if j < d { h[(i, j)] } else { 1.0 })
}

/// Supervised step: `[R; Q] = pinv([H | 1])·f⁻¹(Y)`.
pub fn fit_outer(
    h: &Mat<f64>,
    y: &Mat<f64>,
    tf: &TransferFunction,
    iterations: usize,
) -> Result<OuterWeights> {
    if h.nrows() != y.nrows() {
        return Err(Error::shape("target rows", h.nrows(), y.nrows()));
    }
    let targets = Mat::from_fn(y.nrows(), y.ncols(), |i, j| tf.clipped_inverse(y[(i, j)]));
    let beta = lstsq_min_norm(&with_intercept(h), &targets)?;
    let d = h.ncols();
    let r = beta.as_ref().subrows(0, d).to_owned();
    let q = (0..y.ncols()).map(|j| beta[(d, j)]).collect();
    Ok(OuterWeights { r, q, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_add(0x632B_E59B_D9B4_E019);
        move || {
            s = s.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random(k: usize, d: usize, seed: u64) -> Mat<f64> {
        let mut next = lcg(seed);
        Mat::from_fn(k, d, |_, _| next())
    }

    fn max_abs(m: &Mat<f64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..m.ncols() {
            for v in m.col(j).iter() {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    fn diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn pinv_small_cases() {
        let eye = Mat::<f64>::identity(3, 3);
        assert!(diff(&pinv(&eye).unwrap(), &eye) < 1e-15);

        let two = Mat::from_fn(1, 1, |_, _| 2.0);
        assert!((pinv(&two).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);

        let d = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        assert!(diff(&pinv(&d).unwrap(), &d) < 1e-15);

        let empty = Mat::<f64>::zeros(0, 3);
        let g = pinv(&empty).unwrap();
        assert_eq!((g.nrows(), g.ncols()), (3, 0));
    }

    #[test]
    fn pinv_left_inverse_on_tall_full_rank() {
        let h = random(10, 3, 11);
        let g = pinv(&h).unwrap();
        assert_eq!((g.nrows(), g.ncols()), (3, 10));
        assert!(diff(&(&g * &h), &Mat::identity(3, 3)) < 1e-9);
    }

    #[test]
    fn lstsq_matches_pinv_product() {
        let h = random(12, 5, 3);
        let y = random(12, 2, 4);
        let direct = pinv(&h).unwrap() * &y;
        assert!(diff(&lstsq_min_norm(&h, &y).unwrap(), &direct) < 1e-12);
    }

    proptest! {
        #[test]
        fn penrose_conditions(p in 1usize..12, d in 1usize..12, rank_cut in 0usize..4, seed in any::<u64>()) {
            let mut h = random(p, d, seed);
            // Copy earlier columns over later ones to force rank deficiency.
            for j in 0..rank_cut.min(d.saturating_sub(1)) {
                let src = h.col(j).to_owned();
                h.col_mut(d - 1 - j).copy_from(&src);
            }
            let g = pinv(&h).unwrap();
            let sigma_max = h.singular_values().unwrap()[0];
            let hg = &h * &g;
            let gh = &g * &h;
            prop_assert!(diff(&(&hg * &h), &h) <= 1e-8 * (1.0 + sigma_max));
            prop_assert!(diff(&(&gh * &g), &g) <= 1e-8 * (1.0 + max_abs(&g)));
            prop_assert!(diff(&hg, &hg.transpose().to_owned()) <= 1e-8);
            prop_assert!(diff(&gh, &gh.transpose().to_owned()) <= 1e-8);
        }
    }

    #[test]
    fn inner_constant_target_gives_pure_bias() {
        let tf = TransferFunction::sigmoid();
        let c = 0.4;
        let mut x = random(30, 3, 5);
        for r in 0..30 {
            x[(r, 1)] = tf.forward(c);
        }
        let inner = fit_inner(&x, &tf).unwrap();
        assert!((inner.b[1] - c).abs() < 1e-9);
        assert!(inner.w[(0, 1)].abs() < 1e-9 && inner.w[(2, 1)].abs() < 1e-9);
        for i in 0..3 {
            assert_eq!(inner.w[(i, i)], 0.0);
        }
    }

    #[test]
    fn inner_two_by_two_interpolates() {
        let tf = TransferFunction::sigmoid();
        let x = Mat::from_fn(2, 2, |i, j| [[0.2, 0.7], [0.9, 0.4]][i][j]);
        let inner = fit_inner(&x, &tf).unwrap();
        for i in 0..2 {
            let other = 1 - i;
            for r in 0..2 {
                let fitted = inner.b[i] + inner.w[(other, i)] * x[(r, other)];
                assert!((fitted - tf.inverse(x[(r, i)]).unwrap()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn inner_single_feature_is_mean_of_logits() {
        let tf = TransferFunction::sigmoid();
        let x = Mat::from_fn(4, 1, |i, _| [0.1, 0.3, 0.6, 0.8][i]);
        let inner = fit_inner(&x, &tf).unwrap();
        let mean = [0.1f64, 0.3, 0.6, 0.8].iter().map(|&v| tf.inverse(v).unwrap()).sum::<f64>() / 4.0;
        assert!((inner.b[0] - mean).abs() < 1e-12);
        assert_eq!(inner.w[(0, 0)], 0.0);
    }

    #[test]
    fn inner_collinear_columns_use_svd_path() {
        let tf = TransferFunction::tanh();
        let base = random(20, 2, 8);
        // Third column duplicates the first, so neuron 1's Gram matrix is singular.
        let x = Mat::from_fn(20, 3, |i, j| if j == 2 { base[(i, 0)] } else { base[(i, j)] });
        let inner = fit_inner(&x, &tf).unwrap();
        assert!((0..3).all(|i| inner.b[i].is_finite()));
        assert!((inner.w[(0, 1)] - inner.w[(2, 1)]).abs() < 1e-8, "min-norm splits evenly");
    }

    #[test]
    fn inner_rejects_nan() {
        let mut x = random(5, 2, 1);
        x[(2, 0)] = f64::NAN;
        assert!(matches!(
            fit_inner(&x, &TransferFunction::sigmoid()),
            Err(Error::NonFiniteTarget { feature: 0 })
        ));
    }

    #[test]
    fn outer_constant_targets() {
        let tf = TransferFunction::sigmoid();
        let h = random(15, 4, 21);
        let y = Mat::from_fn(15, 2, |_, j| [0.3, 0.8][j]);
        let outer = fit_outer(&h, &y, &tf, 0).unwrap();
        assert!(max_abs(&outer.r) < 1e-8);
        assert!((outer.q[0] - tf.inverse(0.3).unwrap()).abs() < 1e-8);
        assert!((outer.q[1] - tf.inverse(0.8).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn outer_square_system_interpolates() {
        let tf = TransferFunction::tanh();
        let h = random(6, 5, 2);
        let y = random(6, 3, 9);
        let y = Mat::from_fn(6, 3, |i, j| y[(i, j)] * 1.8 - 0.9);
        let outer = fit_outer(&h, &y, &tf, 0).unwrap();
        let mut beta = Mat::zeros(6, 3);
        beta.as_mut().subrows_mut(0, 5).copy_from(&outer.r);
        for j in 0..3 {
            beta[(5, j)] = outer.q[j];
        }
        let fitted = with_intercept(&h) * &beta;
        let targets = Mat::from_fn(6, 3, |i, j| tf.inverse(y[(i, j)]).unwrap());
        assert!(diff(&fitted, &targets) <= 1e-8);
    }

    #[test]
    fn outer_shape_mismatch() {
        let tf = TransferFunction::sigmoid();
        assert!(fit_outer(&Mat::zeros(3, 2), &Mat::zeros(4, 2), &tf, 0).is_err());
    }
}
