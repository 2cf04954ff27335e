//! Transfer functions and their inverses.
//!
//! Both learning steps regress on `f⁻¹` of activations, so every value fed to
//! [`TransferFunction::inverse`] must first be pulled strictly inside the open
//! range by [`TransferFunction::clip`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipping margin shared by target encoding and inverse-friendly clipping.
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Sigmoid,
    Tanh,
}

impl TransferKind {
    pub const ALL: [TransferKind; 2] = [TransferKind::Sigmoid, TransferKind::Tanh];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::Sigmoid => "sigmoid",
            TransferKind::Tanh => "tanh",
        }
    }
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(TransferKind::Sigmoid),
            "tanh" => Ok(TransferKind::Tanh),
            other => Err(Error::param(
                "transfer",
                format!("expected sigmoid or tanh, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    kind: TransferKind,
    epsilon: f64,
}

impl TransferFunction {
    pub fn new(kind: TransferKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::param("epsilon", format!("{epsilon} not in (0, 0.5)")));
        }
        Ok(Self { kind, epsilon })
    }

    pub fn sigmoid() -> Self {
        Self {
            kind: TransferKind::Sigmoid,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn tanh() -> Self {
        Self {
            kind: TransferKind::Tanh,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn kind(&self) -> TransferKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Open activation range `(lo, hi)`.
    pub fn range(&self) -> (f64, f64) {
        match self.kind {
            TransferKind::Sigmoid => (0.0, 1.0),
            TransferKind::Tanh => (-1.0, 1.0),
        }
    }

    /// Largest inverse-friendly value, `1 - ε` for both kinds.
    pub fn high(&self) -> f64 {
        1.0 - self.epsilon
    }

    /// Smallest inverse-friendly value: `ε` for sigmoid, `-(1 - ε)` for tanh.
    pub fn low(&self) -> f64 {
        match self.kind {
            TransferKind::Sigmoid => self.epsilon,
            TransferKind::Tanh => -(1.0 - self.epsilon),
        }
    }

    #[inline]
    pub fn forward(&self, z: f64) -> f64 {
        match self.kind {
            TransferKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            TransferKind::Tanh => z.tanh(),
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(y > lo && y < hi) {
            return Err(Error::Domain { value: y, lo, hi });
        }
        Ok(self.inverse_unchecked(y))
    }

    /// Inverse without the domain check; callers guarantee `y` was clipped.
    #[inline]
    pub(crate) fn inverse_unchecked(&self, y: f64) -> f64 {
        match self.kind {
            TransferKind::Sigmoid => (y / (1.0 - y)).ln(),
            TransferKind::Tanh => y.atanh(),
        }
    }

    #[inline]
    pub fn clip(&self, y: f64) -> f64 {
        y.clamp(self.low(), self.high())
    }

    /// `f⁻¹(clip(y))`, always finite for finite `y`.
    #[inline]
    pub fn clipped_inverse(&self, y: f64) -> f64 {
        self.inverse_unchecked(self.clip(y))
    }
}

impl Default for TransferFunction {
    fn default() -> Self {
        Self::sigmoid()
    }
}
