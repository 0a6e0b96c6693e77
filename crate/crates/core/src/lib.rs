pub mod agents;
pub mod baselines;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod losses;
pub mod mdp;
pub mod neuralnet;
pub mod rng;
pub mod scene;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
