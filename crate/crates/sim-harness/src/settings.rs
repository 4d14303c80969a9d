//! Market configuration from a TOML file with command-line overrides.

use std::path::Path;

use clap::Args;
use market_model::MarketConfig;

use crate::HarnessError;

/// Every `MarketConfig` field as an optional flag.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    #[arg(long, global = true)]
    pub penalty_factor: Option<f64>,
    #[arg(long, global = true)]
    pub xi_s: Option<f64>,
    #[arg(long, global = true)]
    pub xi_b: Option<f64>,
    #[arg(long, global = true)]
    pub xi_v: Option<f64>,
    #[arg(long, global = true)]
    pub xi1: Option<f64>,
    #[arg(long, global = true)]
    pub xi2: Option<f64>,
    #[arg(long, global = true)]
    pub u_min: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_step: Option<f64>,
    #[arg(long, global = true)]
    pub search_tol: Option<f64>,
    #[arg(long, global = true)]
    pub search_max_iter: Option<u32>,
    #[arg(long, global = true)]
    pub golden_refine: Option<bool>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut MarketConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(penalty_factor, xi_s, xi_b, xi_v, xi1, xi2, u_min, lambda_step, search_tol, search_max_iter, golden_refine, seed);
    }
}

pub fn parse_config(text: &str) -> Result<MarketConfig, HarnessError> {
    toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Defaults, then the file, then the flags; the result is validated.
pub fn load_config(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<MarketConfig, HarnessError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => MarketConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Model(market_model::ModelError::Config(_)))
    }
}
