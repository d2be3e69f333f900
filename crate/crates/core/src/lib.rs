//! Random-forest feature significance testing.
//!
//! The crate is organised around four layers:
//!
//! * [`forest`]: CART regression trees and bootstrap random forests with
//!   out-of-bag bookkeeping.
//! * [`fact`]: the self-normalized feature-residual correlation (FACT) test
//!   family: basic, imbalanced, conditioning, ensemble and general variants,
//!   with either sample splitting or out-of-bag nuisance estimation.
//! * [`importance`]: MDI, MDA and conditional permutation importance used as
//!   bias baselines.
//! * [`inference`] and [`sim`]: multiple testing, grouping and rolling-window
//!   tools, plus the Friedman-model simulation harness.

pub mod dataset;
pub mod error;
pub mod fact;
pub mod forest;
pub mod importance;
pub mod inference;
pub mod rng;
pub mod sim;
pub mod stats;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use fact::{FactConfig, FactReport, SplitMode, Transform, Variant};
pub use forest::{ForestParams, RegressionForest, Resampling};
