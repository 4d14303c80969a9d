//! Domain types and payoff formulas for the two-stage overbooking double auction.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod knapsack;
pub mod sample;
pub mod settle;
pub mod types;
pub mod utility;

pub use config::MarketConfig;
pub use error::ModelError;
pub use sample::{sample_realization, sample_realization_with};
pub use types::{Assignment, Buyer, Contract, Market, MemberOutcome, Realization, Seller, Trade};

pub type Result<T> = std::result::Result<T, ModelError>;
