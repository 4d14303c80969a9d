use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid buyer {id}: {reason}")]
    InvalidBuyer { id: usize, reason: String },
    #[error("invalid seller {id}: {reason}")]
    InvalidSeller { id: usize, reason: String },
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("contract references unknown party (buyer {buyer}, seller {seller})")]
    UnknownParty { buyer: usize, seller: usize },
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("invalid config: {0}")]
    Config(String),
}
