//! Friedman-model simulations: the correlated feature design, experiment
//! runners and the JSON experiment schema.

mod design;
mod experiment;
mod runners;

pub use design::*;
pub use experiment::{DesignSpec, Experiment, ExperimentConfig, ExperimentOutput};
pub use runners::*;
