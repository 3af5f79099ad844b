//! Deterministic in-process simulator for cross-silo federated learning.
//!
//! A small dense binary classifier ([`nn`]) is trained across simulated sites
//! ([`federation`]) with FedAvg or FedProx, optionally privatized by DP-SGD or
//! the sparse vector technique ([`privacy`]). Synthetic or CSV data is split
//! across sites ([`datagen`]), models are scored with AUROC/AUPRC and
//! bootstrap intervals ([`metrics`]), and whole parameter grids are executed
//! and reported by [`experiments`].
//!
//! The numeric modules are generic over [`Scalar`]; the aliases below fix the
//! common widths.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod privacy;
pub mod rng;
pub mod scalar;
mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = nn::ParamVector<f64>;
pub type Params32 = nn::ParamVector<f32>;
pub type Batch = nn::Batch<f64>;
pub type Batch32 = nn::Batch<f32>;
pub type Dataset = datagen::Dataset<f64>;
pub type Dataset32 = datagen::Dataset<f32>;
pub type SiteState = federation::SiteState<f64>;
pub type OptimizerState = nn::OptimizerState<f64>;
