use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    /// Penalty factor mu: q(b->s) = mu * r_s, q(s->b) = mu * p_b.
    pub penalty_factor: f64,
    /// SRisk threshold.
    pub xi_s: f64,
    /// BRisk threshold.
    pub xi_b: f64,
    /// VRisk threshold.
    pub xi_v: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub u_min: f64,
    pub lambda_step: f64,
    pub search_tol: f64,
    pub search_max_iter: u32,
    pub golden_refine: bool,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            penalty_factor: 0.5,
            xi_s: 0.5,
            xi_b: 0.5,
            xi_v: 0.5,
            xi1: 1.0,
            xi2: 0.95,
            u_min: 1e-6,
            lambda_step: 0.05,
            search_tol: 1e-3,
            search_max_iter: 32,
            golden_refine: false,
            seed: 0,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModelError::Config(msg.to_string()));
        if !(0.0..=1.0).contains(&self.penalty_factor) {
            return bad("penalty_factor must lie in [0,1]");
        }
        for (name, v) in [("xi_s", self.xi_s), ("xi_b", self.xi_b), ("xi_v", self.xi_v)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ModelError::Config(format!("{name} must lie in (0,1]")));
            }
        }
        if !(self.xi1 > 0.0 && self.xi1.is_finite()) {
            return bad("xi1 must be positive");
        }
        if !(self.xi2 > 0.0 && self.xi2 < 1.0) {
            return bad("xi2 must lie in (0,1)");
        }
        if !(self.u_min > 0.0 && self.u_min.is_finite()) {
            return bad("u_min must be positive");
        }
        if !(self.lambda_step > 0.0 && self.lambda_step <= 1.0) {
            return bad("lambda_step must lie in (0,1]");
        }
        if !(self.search_tol > 0.0 && self.search_tol.is_finite()) {
            return bad("search_tol must be positive");
        }
        if self.search_max_iter == 0 {
            return bad("search_max_iter must be positive");
        }
        Ok(())
    }

    /// Candidate overbooking rates {0, step, 2 step, ..., 1}.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let k = (1.0 / self.lambda_step + 1e-9).floor() as usize;
        let mut grid: Vec<f64> = (0..=k).map(|i| (i as f64 * self.lambda_step).min(1.0)).collect();
        if (grid[grid.len() - 1] - 1.0).abs() > 1e-12 {
            grid.push(1.0);
        }
        grid
    }
}
