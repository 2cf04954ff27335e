//! Recurrence-aware long-term cognitive network (LTCN) classifier.
//!
//! Features are mapped to neurons of a recurrent network driven by the
//! quasi-nonlinear rule `A(t) = φ·f(A(t-1)·W + B) + (1-φ)·A(0)`. Learning is
//! closed-form: the inner weights `W, B` come from per-feature least squares
//! (unsupervised), the outer weights `R, Q` from a pseudoinverse over the
//! concatenated states `[A(0) | … | A(s)]` (supervised). Classification is
//! the argmax of `[A(0) | … | A(s)]·R + Q`.

pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod learning;
pub mod model;
pub mod report;
pub mod synthetic;
pub mod transfer;

pub use faer::Mat;

pub use dataset::{CsvOptions, Dataset, FoldPlan, MinMaxScaler, RawTable};
pub use dynamics::{Attractor, ReasoningConfig, StateHistory};
pub use error::{Error, Result};
pub use eval::{EvalReport, GridSearchResult, PairedReport};
pub use learning::{InnerWeights, OuterWeights};
pub use model::{DecisionHead, LtcnModel, RelevanceReport};
pub use transfer::{TransferFunction, TransferKind};
