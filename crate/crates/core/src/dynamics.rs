//! Quasi-nonlinear recurrent reasoning over feature neurons.
//!
//! Each iteration mixes the transferred recurrent signal with the initial
//! activation: `A(t) = φ·f(A(t-1)·W + B) + (1-φ)·A(0)`. With `φ = 1` and a
//! zero bias this is the classic FCM update; with `φ = 0` the state never
//! leaves `A(0)`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::TransferFunction;

pub const DEFAULT_MAX_ITERATIONS: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_CYCLE_WINDOW: usize = 10;
pub const DEFAULT_PHI: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReasoningConfig {
    pub phi: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub cycle_window: usize,
    pub transfer: TransferFunction,
}

impl Default for ReasoningConfig {
    fn default() -> Self {
        Self {
            phi: DEFAULT_PHI,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            cycle_window: DEFAULT_CYCLE_WINDOW,
            transfer: TransferFunction::sigmoid(),
        }
    }
}

impl ReasoningConfig {
    pub fn new(phi: f64, max_iterations: usize, transfer: TransferFunction) -> Result<Self> {
        let cfg = Self {
            phi,
            max_iterations,
            transfer,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::param("phi", format!("{} not in [0, 1]", self.phi)));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("iters", "must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::param("tol", format!("{} must be positive", self.tolerance)));
        }
        if self.cycle_window == 0 {
            return Err(Error::param("cycle_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// How a trace ended. `detected_at` is the iteration whose state triggered
/// the stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attractor {
    FixedPoint { detected_at: usize },
    LimitCycle { detected_at: usize, period: usize },
    NonConvergent,
}

impl Attractor {
    pub fn label(&self) -> &'static str {
        match self {
            Attractor::FixedPoint { .. } => "fixed_point",
            Attractor::LimitCycle { .. } => "limit_cycle",
            Attractor::NonConvergent => "non_convergent",
        }
    }

    pub fn detected_at(&self) -> Option<usize> {
        match *self {
            Attractor::FixedPoint { detected_at } | Attractor::LimitCycle { detected_at, .. } => {
                Some(detected_at)
            }
            Attractor::NonConvergent => None,
        }
    }

    pub fn is_fixed_point(&self) -> bool {
        matches!(self, Attractor::FixedPoint { .. })
    }
}

#[derive(Debug, Clone)]
pub struct StateHistory {
    /// `A(0) … A(s)`; `A(0)` is the input batch.
    pub states: Vec<Mat<f64>>,
    pub attractor: Attractor,
}

impl StateHistory {
    /// Number of iterations performed, `s`.
    pub fn iterations(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn last(&self) -> &Mat<f64> {
        self.states.last().expect("history holds at least A(0)")
    }

    /// Max-abs change between consecutive states, one entry per iteration.
    pub fn deltas(&self) -> Vec<f64> {
        self.states.windows(2).map(|w| max_abs_diff(&w[1], &w[0])).collect()
    }
}

/// Infinity-norm distance over every entry of two equally shaped matrices.
pub fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    debug_assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for (x, y) in a.col(j).iter().zip(b.col(j).iter()) {
            let d = (x - y).abs();
            if d > worst || d.is_nan() {
                worst = d;
            }
        }
    }
    worst
}

fn check_shapes(a_prev: &Mat<f64>, a0: &Mat<f64>, w: &Mat<f64>, b: &[f64]) -> Result<()> {
    let m = a0.ncols();
    if (a_prev.nrows(), a_prev.ncols()) != (a0.nrows(), m) {
        return Err(Error::shape(
            "previous state",
            format!("{}x{}", a0.nrows(), m),
            format!("{}x{}", a_prev.nrows(), a_prev.ncols()),
        ));
    }
    if (w.nrows(), w.ncols()) != (m, m) {
        return Err(Error::shape(
            "inner weights",
            format!("{m}x{m}"),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    if b.len() != m {
        return Err(Error::shape("inner bias", m, b.len()));
    }
    Ok(())
}

/// One application of the quasi-nonlinear rule.
pub fn step(
    a_prev: &Mat<f64>,
    a0: &Mat<f64>,
    w: &Mat<f64>,
    b: &[f64],
    phi: f64,
    tf: &TransferFunction,
) -> Result<Mat<f64>> {
    check_shapes(a_prev, a0, w, b)?;
    Ok(step_unchecked(a_prev, a0, w, b, phi, tf))
}

fn step_unchecked(
    a_prev: &Mat<f64>,
    a0: &Mat<f64>,
    w: &Mat<f64>,
    b: &[f64],
    phi: f64,
    tf: &TransferFunction,
) -> Mat<f64> {
    if phi == 0.0 {
        return a0.clone();
    }
    let z = a_prev * w;
    let keep = 1.0 - phi;
    Mat::from_fn(a0.nrows(), a0.ncols(), |i, j| {
        phi * tf.forward(z[(i, j)] + b[j]) + keep * a0[(i, j)]
    })
}

fn all_finite(a: &Mat<f64>) -> bool {
    (0..a.ncols()).all(|j| a.col(j).iter().all(|v| v.is_finite()))
}

/// Iterates from `A(0) = x` until a fixed point or limit cycle is detected,
/// or `max_iterations` is reached.
pub fn run(x: &Mat<f64>, w: &Mat<f64>, b: &[f64], config: &ReasoningConfig) -> Result<StateHistory> {
    config.validate()?;
    check_shapes(x, x, w, b)?;
    let mut states = vec![x.clone()];
    for t in 1..=config.max_iterations {
        let next = step_unchecked(&states[t - 1], x, w, b, config.phi, &config.transfer);
        if !all_finite(&next) {
            return Err(Error::NonFinite { iteration: t });
        }
        states.push(next);
        let attractor = classify_attractor(&states, config.tolerance, config.cycle_window);
        if attractor != Attractor::NonConvergent {
            return Ok(StateHistory { states, attractor });
        }
    }
    Ok(StateHistory {
        states,
        attractor: Attractor::NonConvergent,
    })
}

/// Runs exactly `iterations` steps with no early stop. Used at prediction
/// time where the design-matrix width is fixed by the fitted model.
pub fn run_exact(
    x: &Mat<f64>,
    w: &Mat<f64>,
    b: &[f64],
    phi: f64,
    tf: &TransferFunction,
    iterations: usize,
) -> Result<Vec<Mat<f64>>> {
    check_shapes(x, x, w, b)?;
    let mut states = Vec::with_capacity(iterations + 1);
    states.push(x.clone());
    for t in 1..=iterations {
        let next = step_unchecked(&states[t - 1], x, w, b, phi, tf);
        if !all_finite(&next) {
            return Err(Error::NonFinite { iteration: t });
        }
        states.push(next);
    }
    Ok(states)
}

/// Inspects the tail of a trace. A match with the immediately preceding
/// state is a fixed point; otherwise the smallest period `2..=window` whose
/// lagged state matches within `tolerance` is a limit cycle.
pub fn classify_attractor(states: &[Mat<f64>], tolerance: f64, cycle_window: usize) -> Attractor {
    let n = states.len();
    if n < 2 {
        return Attractor::NonConvergent;
    }
    let t = n - 1;
    let last = &states[t];
    if max_abs_diff(last, &states[t - 1]) <= tolerance {
        return Attractor::FixedPoint { detected_at: t };
    }
    for period in 2..=cycle_window.min(t) {
        if max_abs_diff(last, &states[t - period]) <= tolerance {
            return Attractor::LimitCycle {
                detected_at: t,
                period,
            };
        }
    }
    Attractor::NonConvergent
}

/// Column-wise concatenation `[A(0) | A(1) | … | A(s)]`.
pub fn concat_states(states: &[Mat<f64>]) -> Mat<f64> {
    let k = states.first().map_or(0, Mat::nrows);
    let m = states.first().map_or(0, Mat::ncols);
    let mut h = Mat::zeros(k, m * states.len());
    for (t, a) in states.iter().enumerate() {
        h.as_mut().subcols_mut(t * m, m).copy_from(a);
    }
    h
}

pub fn concat_history(history: &StateHistory) -> Mat<f64> {
    concat_states(&history.states)
}
