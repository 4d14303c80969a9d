//! Risk-constrained choice of the overbooking rate.

use market_model::utility::expected_social_welfare;
use market_model::{Assignment, Buyer, Contract, MarketConfig, Result, Seller};
use risk::{assess, Method, RiskReport};
use serde::{Deserialize, Serialize};

use crate::member::{member_determination, SortedLists};
use crate::pricing::{contract_pricing, SearchParams};

/// Which risk constraints take part in pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskToggles {
    pub brisk: bool,
    pub vrisk: bool,
    pub srisk: bool,
}

impl Default for RiskToggles {
    fn default() -> Self {
        RiskToggles { brisk: true, vrisk: true, srisk: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Outcome {
    pub assignment: Assignment,
    pub contracts: Vec<Contract>,
    pub lambda: f64,
    pub expected_sw: f64,
    pub risk_report: RiskReport,
    pub lists: SortedLists,
    pub objectives: Vec<(usize, f64)>,
    /// Set when no candidate rate satisfied the active risk constraints.
    pub risk_infeasible: bool,
}

impl Stage1Outcome {
    pub fn matches(&self) -> usize {
        self.contracts.len()
    }

    pub fn violates(&self, cfg: &MarketConfig, toggles: RiskToggles) -> bool {
        let eps = 1e-12;
        (toggles.brisk && self.risk_report.max_brisk() > cfg.xi_b + eps)
            || (toggles.vrisk && self.risk_report.max_vrisk() > cfg.xi_v + eps)
            || (toggles.srisk && self.risk_report.max_srisk() > cfg.xi_s + eps)
    }
}

pub fn search_params(cfg: &MarketConfig) -> SearchParams {
    SearchParams { tol: cfg.search_tol, max_iter: cfg.search_max_iter }
}

/// Member determination, pricing and approximate risk at one rate.
pub fn evaluate_lambda(buyers: &[Buyer], sellers: &[Seller], cfg: &MarketConfig, lambda: f64) -> Result<Stage1Outcome> {
    let matching = member_determination(buyers, sellers, lambda);
    let contracts = contract_pricing(buyers, sellers, lambda, &matching, cfg.penalty_factor, search_params(cfg));
    let risk_report = assess(buyers, sellers, &matching.assignment, &contracts, cfg, Method::Approx)?;
    let expected_sw = expected_social_welfare(buyers, sellers, &contracts, &risk_report.p_n)?;
    Ok(Stage1Outcome {
        assignment: matching.assignment,
        contracts,
        lambda,
        expected_sw,
        risk_report,
        lists: matching.lists,
        objectives: matching.objectives,
        risk_infeasible: false,
    })
}

fn better(a: &Stage1Outcome, b: &Stage1Outcome) -> bool {
    let eps = 1e-9;
    if a.expected_sw > b.expected_sw + eps {
        return true;
    }
    if a.expected_sw < b.expected_sw - eps {
        return false;
    }
    if a.matches() != b.matches() {
        return a.matches() > b.matches();
    }
    a.lambda < b.lambda
}

/// Index of the best feasible candidate, if any.
pub fn select(candidates: &[Stage1Outcome], cfg: &MarketConfig, toggles: RiskToggles) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.violates(cfg, toggles) {
            continue;
        }
        if best.map_or(true, |j| better(c, &candidates[j])) {
            best = Some(i);
        }
    }
    best
}

const GOLDEN_ITERS: usize = 10;

fn refine(
    buyers: &[Buyer],
    sellers: &[Seller],
    cfg: &MarketConfig,
    toggles: RiskToggles,
    winner: Stage1Outcome,
) -> Result<Stage1Outcome> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = (winner.lambda - cfg.lambda_step).max(0.0);
    let mut b = (winner.lambda + cfg.lambda_step).min(1.0);
    let score = |o: &Stage1Outcome| if o.violates(cfg, toggles) { f64::NEG_INFINITY } else { o.expected_sw };
    let mut best = winner;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut oc = evaluate_lambda(buyers, sellers, cfg, c)?;
    let mut od = evaluate_lambda(buyers, sellers, cfg, d)?;
    for _ in 0..GOLDEN_ITERS {
        for o in [&oc, &od] {
            if score(o) > f64::NEG_INFINITY && better(o, &best) {
                best = o.clone();
            }
        }
        if score(&oc) >= score(&od) {
            b = d;
            d = c;
            od = oc;
            c = b - inv_phi * (b - a);
            oc = evaluate_lambda(buyers, sellers, cfg, c)?;
        } else {
            a = c;
            c = d;
            oc = od;
            d = a + inv_phi * (b - a);
            od = evaluate_lambda(buyers, sellers, cfg, d)?;
        }
    }
    Ok(best)
}

/// Evaluate every rate in `grid`, prune risk violations, keep the best.
pub fn overbooking_opt_with(
    buyers: &[Buyer],
    sellers: &[Seller],
    cfg: &MarketConfig,
    grid: &[f64],
    toggles: RiskToggles,
) -> Result<Stage1Outcome> {
    let candidates: Vec<Stage1Outcome> =
        grid.iter().map(|&l| evaluate_lambda(buyers, sellers, cfg, l)).collect::<Result<_>>()?;
    choose(buyers, sellers, cfg, candidates, toggles)
}

/// Pick from precomputed candidates; falls back to the zero rate when
/// nothing is feasible.
pub fn choose(
    buyers: &[Buyer],
    sellers: &[Seller],
    cfg: &MarketConfig,
    mut candidates: Vec<Stage1Outcome>,
    toggles: RiskToggles,
) -> Result<Stage1Outcome> {
    match select(&candidates, cfg, toggles) {
        Some(i) => {
            let winner = candidates.swap_remove(i);
            if cfg.golden_refine && candidates.len() > 1 {
                refine(buyers, sellers, cfg, toggles, winner)
            } else {
                Ok(winner)
            }
        }
        None => {
            let zero = match candidates.iter().position(|c| c.lambda == 0.0) {
                Some(i) => candidates.swap_remove(i),
                None => evaluate_lambda(buyers, sellers, cfg, 0.0)?,
            };
            Ok(Stage1Outcome { risk_infeasible: true, ..zero })
        }
    }
}

pub fn overbooking_opt(buyers: &[Buyer], sellers: &[Seller], cfg: &MarketConfig) -> Result<Stage1Outcome> {
    overbooking_opt_with(buyers, sellers, cfg, &cfg.lambda_grid(), RiskToggles::default())
}

pub fn run_stage1(buyers: &[Buyer], sellers: &[Seller], cfg: &MarketConfig) -> Result<Stage1Outcome> {
    cfg.validate()?;
    overbooking_opt(buyers, sellers, cfg)
}
