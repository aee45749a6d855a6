//! Analysis and bias optimization for renewable-powered cellular networks.
//!
//! Each base station is a quasi-birth-death chain over (battery level, busy
//! channels). Stochastic geometry turns the level distribution and an
//! association bias per level into coverage, throughput, power and carbon
//! metrics; a fixed-point loop couples user load and battery levels; and a
//! genetic algorithm searches for the bias maximizing carbon efficiency
//! under a coverage constraint.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod error;
pub mod fixed_point;
pub mod linalg;
pub mod montecarlo;
pub mod optimizer;
pub mod output;
pub mod qbd;
pub mod quadrature;
pub mod special;

pub use analytics::{BiasVector, NetworkMetrics, TierSplit};
pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use fixed_point::{FixedPointOptions, FixedPointResult};
pub use montecarlo::McEstimate;
pub use optimizer::{Evaluation, GaConfig, Individual};
pub use qbd::{LevelMetrics, QbdGenerator, SteadyState};
