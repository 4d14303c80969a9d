//! Scenario generation, Monte Carlo experiment driver, metrics and output
//! formats for the two-stage auction simulator.

pub mod cli;
pub mod experiment;
pub mod output;
pub mod scenario;
pub mod settings;
pub mod sweep;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] market_model::ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("attendance trace: {0}")]
    Trace(String),
    #[error("config: {0}")]
    Config(String),
}
