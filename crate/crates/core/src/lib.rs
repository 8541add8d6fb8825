//! Process-mining based mortality prediction for ICU cohorts: event logs,
//! Petri net discovery and replay, decay-replay features, a two-branch
//! neural network, evaluation and grouped Shapley attribution.

pub mod config;
pub mod discovery;
pub mod dream;
pub mod eval;
pub mod eventlog;
pub mod explain;
pub mod model;
pub mod petrinet;
pub mod pipeline;
pub mod scalar;
pub mod synthcohort;
pub mod vocabulary;

pub use scalar::Scalar;

pub type DecayParams = dream::DecayParams<f64>;
pub type DecayParamsF32 = dream::DecayParams<f32>;
pub type Sample = dream::TimedStateSample<f64>;
pub type SampleF32 = dream::TimedStateSample<f32>;
pub type Dataset = model::PredictionDataset<f64>;
pub type DatasetF32 = model::PredictionDataset<f32>;
pub type Weights = model::NetworkWeights<f64>;
pub type WeightsF32 = model::NetworkWeights<f32>;
