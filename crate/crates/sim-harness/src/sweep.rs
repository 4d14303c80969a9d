//! Overbooking-rate sweep: realized welfare and utilities at each rate, and
//! the rate each risk-constraint variant would pick under a cap.

use market_model::utility::{
    auctioneer_utility, buyer_utility, seller_utility, stage2_auctioneer_utility, stage2_buyer_utility,
    stage2_seller_utility,
};
use market_model::{Buyer, MarketConfig, Realization, Seller};
use opdauction::{evaluate_lambda, select, RiskToggles, Stage1Outcome};
use rbdauction::run_transaction;
use serde::{Deserialize, Serialize};

use crate::experiment::{mean_se, trial_realization};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub contracts: usize,
    pub expected_sw: f64,
    pub sw: f64,
    pub se_sw: f64,
    pub buyer_utility: f64,
    pub seller_utility: f64,
    pub auctioneer_utility: f64,
    pub volunteers: f64,
    pub max_brisk: f64,
    pub max_vrisk: f64,
    pub max_srisk: f64,
}

/// One variant's choice when candidate rates are capped at `cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappedPoint {
    pub cap: f64,
    pub chosen: f64,
    pub sw: f64,
    pub buyer_utility: f64,
    pub seller_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCurve {
    pub name: String,
    pub toggles: RiskToggles,
    pub points: Vec<CappedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub trials: usize,
    pub points: Vec<SweepPoint>,
    /// Rate chosen by the full optimizer over the whole sweep grid.
    pub lambda_star: f64,
    pub risk_infeasible: bool,
    pub variants: Vec<VariantCurve>,
}

impl SweepReport {
    pub fn point(&self, lambda: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.lambda - lambda).abs() < 1e-9)
    }

    /// Rate with the highest mean realized SW.
    pub fn argmax_sw(&self) -> Option<f64> {
        self.points.iter().max_by(|a, b| a.sw.total_cmp(&b.sw)).map(|p| p.lambda)
    }

    pub fn variant(&self, name: &str) -> Option<&VariantCurve> {
        self.variants.iter().find(|v| v.name == name)
    }
}

pub fn sweep_grid(step: f64) -> Vec<f64> {
    let k = (1.0 / step + 1e-9).round() as usize;
    (0..=k).map(|i| (i as f64 * step).min(1.0)).collect()
}

fn realized(
    outcome: &Stage1Outcome,
    buyers: &[Buyer],
    sellers: &[Seller],
    realizations: &[Realization],
    cfg: &MarketConfig,
) -> Result<SweepPoint, HarnessError> {
    let mu = cfg.penalty_factor;
    let mut sw = Vec::with_capacity(realizations.len());
    let (mut ub, mut us, mut ua, mut vol) = (0.0, 0.0, 0.0, 0.0);
    for r in realizations {
        let t = run_transaction(outcome, buyers, sellers, r, cfg, true)?;
        let real = &t.settlement.realization;
        let trades = t.stage2.as_ref().map_or(&[][..], |s| &s.trades[..]);
        sw.push(t.total_sw);
        for n in 0..buyers.len() {
            ub += buyer_utility(buyers, sellers, &outcome.contracts, real, n, mu)? + stage2_buyer_utility(buyers, trades, n);
        }
        for m in 0..sellers.len() {
            us += seller_utility(buyers, sellers, &outcome.contracts, real, m)? + stage2_seller_utility(sellers, trades, m);
        }
        ua += auctioneer_utility(&outcome.contracts, real, mu)? + stage2_auctioneer_utility(trades);
        vol += t.volunteers as f64;
    }
    let k = realizations.len().max(1) as f64;
    let (mean, se) = mean_se(&sw);
    let rep = &outcome.risk_report;
    Ok(SweepPoint {
        lambda: outcome.lambda,
        contracts: outcome.contracts.len(),
        expected_sw: outcome.expected_sw,
        sw: mean,
        se_sw: se,
        buyer_utility: ub / k,
        seller_utility: us / k,
        auctioneer_utility: ua / k,
        volunteers: vol / k,
        max_brisk: rep.max_brisk(),
        max_vrisk: rep.max_vrisk(),
        max_srisk: rep.max_srisk(),
    })
}

pub fn default_variants() -> Vec<(String, RiskToggles)> {
    let full = RiskToggles::default();
    vec![
        ("TwoSAuction".into(), full),
        ("TwoSAuction_noBRisk".into(), RiskToggles { brisk: false, ..full }),
        ("TwoSAuction_noVRisk".into(), RiskToggles { vrisk: false, ..full }),
        ("TwoSAuction_noSRisk".into(), RiskToggles { srisk: false, ..full }),
    ]
}

/// Evaluate every rate in `grid` once, measure realized outcomes over
/// `trials` shared realizations, then replay each variant's choice with the
/// candidate set capped at each grid rate.
pub fn sweep_lambda(
    buyers: &[Buyer],
    sellers: &[Seller],
    cfg: &MarketConfig,
    grid: &[f64],
    trials: usize,
) -> Result<SweepReport, HarnessError> {
    cfg.validate()?;
    let realizations: Vec<Realization> = (0..trials).map(|t| trial_realization(buyers, sellers, cfg.seed, t)).collect();
    let candidates: Vec<Stage1Outcome> =
        grid.iter().map(|&l| evaluate_lambda(buyers, sellers, cfg, l)).collect::<Result<_, _>>()?;
    let points: Vec<SweepPoint> =
        candidates.iter().map(|c| realized(c, buyers, sellers, &realizations, cfg)).collect::<Result<_, _>>()?;
    let zero = candidates.iter().position(|c| c.lambda == 0.0);
    let pick = |upto: usize, toggles: RiskToggles| -> Option<usize> { select(&candidates[..upto], cfg, toggles).or(zero) };

    let full = select(&candidates, cfg, RiskToggles::default());
    let (lambda_star, risk_infeasible) = match full {
        Some(i) => (candidates[i].lambda, false),
        None => (0.0, true),
    };
    let variants = default_variants()
        .into_iter()
        .map(|(name, toggles)| {
            let points = (1..=candidates.len())
                .filter_map(|upto| {
                    let i = pick(upto, toggles)?;
                    let p = &points[i];
                    Some(CappedPoint {
                        cap: candidates[upto - 1].lambda,
                        chosen: p.lambda,
                        sw: p.sw,
                        buyer_utility: p.buyer_utility,
                        seller_utility: p.seller_utility,
                    })
                })
                .collect();
            VariantCurve { name, toggles, points }
        })
        .collect();
    Ok(SweepReport { trials, points, lambda_star, risk_infeasible, variants })
}
