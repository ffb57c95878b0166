//! Anomaly detection with a linear SVM computed over a wireless
//! multiple-access channel.
//!
//! The crate trains a hard-margin linear classifier from labeled system
//! states ([`svm`]), simulates sensors that transmit their weighted
//! readings as random-phase transmit powers so the channel's superposition
//! computes the decision statistic ([`ota`]), simulates an orthogonal TDMA
//! reference ([`baseline`]) and measures reliability and energy of both by
//! seeded Monte Carlo ([`montecarlo`]).

pub mod baseline;
pub mod config;
pub mod montecarlo;
pub mod ota;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod svm;

pub use baseline::{EnergyModel, Scheme, TdmaConfig};
pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use montecarlo::{Experiment, OperatingPoint, ReliabilityReport, TestState};
pub use ota::{ChannelModel, PowerMapping};
pub use pipeline::Pipeline;
pub use rng::StreamFactory;
pub use scenario::{sample_states, ScenarioConfig, SensingRange};
pub use svm::{train_svm, Label, LabeledSample, SeparatingHyperplane, Sign, SolverConfig, TrainingSet};
