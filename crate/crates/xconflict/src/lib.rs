//! Conflict evaluation for RAN control applications.
//!
//! The pipeline: generate observational parameter/KPI data from a surrogate
//! link-budget simulator, regress each KPI on the control parameters, run
//! exact Shapley attribution to find parameters competing over the same KPI,
//! assemble a causal DAG and classify direct/indirect/implicit conflicts,
//! and quantify each conflicting pair with backdoor-adjusted average and
//! conditional treatment effects. The simulator doubles as an interventional
//! oracle, so every causal estimate is checkable against ground truth.
//!
//! Numeric kernels are generic over the scalar type (see [`scalar::Real`]);
//! the aliases below fix `f64` for ordinary use.

pub mod causal;
pub mod cli;
pub mod confgraph;
pub mod dataset;
pub mod regressor;
pub mod rng;
pub mod scalar;
pub mod shapley;
pub mod simkernel;

pub type Dataset = dataset::Dataset<f64>;
pub type EpisodeRecord = dataset::EpisodeRecord<f64>;
pub type GbtModel = regressor::GbtModel<f64>;
pub type FitReport = regressor::FitReport<f64>;
pub type KpiRecord = simkernel::KpiRecord<f64>;
pub type OracleEstimate = simkernel::OracleEstimate<f64>;
pub type AttributionMatrix = shapley::AttributionMatrix<f64>;
pub type ImportanceTable = shapley::ImportanceTable<f64>;
pub type ImportanceRow = shapley::ImportanceRow<f64>;
pub type EffectEstimate = causal::EffectEstimate<f64>;
pub type CateEstimate = causal::CateEstimate<f64>;
pub type EffectEntry = causal::EffectEntry<f64>;

pub use confgraph::{CausalDag, ConflictGraph, ConflictReport, Finding};
pub use simkernel::{KpiName, RcpName, SimConfig};
