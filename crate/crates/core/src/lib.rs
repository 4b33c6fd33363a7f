//! Deep feedforward networks for lithium-ion state-of-charge regression.
//!
//! - [`tensor`]: dense row-major `f64` kernel
//! - [`dataset`]: CSV records, z-score normalization, holdout/K-fold splits, batching
//! - [`battsim`]: synthetic drive cycles and a Coulomb-counting cell model
//! - [`network`]: ReLU dense stack with dropout, backprop and L1/L2 penalties
//! - [`optimize`]: SGD, RMSProp and Adam
//! - [`train`]: training loops, learning curves, cross-validation
//! - [`persist`]: model files and CSV exports
//!
//! Every stochastic step draws from [`rng::seeded`], so runs with equal seeds
//! are bit-identical.

pub mod battsim;
pub mod dataset;
pub mod error;
pub mod network;
pub mod optimize;
pub mod persist;
pub mod presets;
pub mod rng;
pub mod tensor;
pub mod train;

pub use dataset::{Dataset, FoldAssignment, Normalizer, SampleRecord};
pub use error::{Error, Result};
pub use network::{LayerSpec, Network, RegConfig};
pub use optimize::{OptimizerConfig, OptimizerKind};
pub use tensor::{Matrix, Vector};
pub use train::{CVReport, RunHistory, TrainConfig};
