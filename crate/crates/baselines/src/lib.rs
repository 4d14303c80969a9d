//! Comparison mechanisms and ablated variants of the two-stage auction.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use market_model::utility::stage2_social_welfare;
use market_model::{Buyer, MarketConfig, Realization, Result, Seller, Trade};
use opdauction::{overbooking_opt_with, RiskToggles, Stage1Outcome};
use rbdauction::{run_transaction, spot_auction, SubMarket};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MechanismId {
    TwoSAuction,
    CRDAuction,
    SSPDAuction,
    VRAuction,
    CRAuction,
    RSAuction,
    #[serde(rename = "TwoSAuction_NoOB")]
    TwoSAuctionNoOB,
    #[serde(rename = "SSPDAuction_NoOB")]
    SSPDAuctionNoOB,
    #[serde(rename = "TwoSAuction_noBRisk")]
    TwoSAuctionNoBRisk,
    #[serde(rename = "TwoSAuction_noVRisk")]
    TwoSAuctionNoVRisk,
    #[serde(rename = "TwoSAuction_noSRisk")]
    TwoSAuctionNoSRisk,
}

impl MechanismId {
    pub const ALL: [MechanismId; 11] = [
        MechanismId::TwoSAuction,
        MechanismId::CRDAuction,
        MechanismId::SSPDAuction,
        MechanismId::VRAuction,
        MechanismId::CRAuction,
        MechanismId::RSAuction,
        MechanismId::TwoSAuctionNoOB,
        MechanismId::SSPDAuctionNoOB,
        MechanismId::TwoSAuctionNoBRisk,
        MechanismId::TwoSAuctionNoVRisk,
        MechanismId::TwoSAuctionNoSRisk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismId::TwoSAuction => "TwoSAuction",
            MechanismId::CRDAuction => "CRDAuction",
            MechanismId::SSPDAuction => "SSPDAuction",
            MechanismId::VRAuction => "VRAuction",
            MechanismId::CRAuction => "CRAuction",
            MechanismId::RSAuction => "RSAuction",
            MechanismId::TwoSAuctionNoOB => "TwoSAuction_NoOB",
            MechanismId::SSPDAuctionNoOB => "SSPDAuction_NoOB",
            MechanismId::TwoSAuctionNoBRisk => "TwoSAuction_noBRisk",
            MechanismId::TwoSAuctionNoVRisk => "TwoSAuction_noVRisk",
            MechanismId::TwoSAuctionNoSRisk => "TwoSAuction_noSRisk",
        }
    }

    /// Stage-I configuration for contract-based mechanisms.
    pub fn stage1_plan(self) -> Option<Stage1Plan> {
        let full = RiskToggles::default();
        let plan = |zero_only, toggles| Some(Stage1Plan { zero_only, toggles });
        match self {
            MechanismId::TwoSAuction | MechanismId::SSPDAuction => plan(false, full),
            MechanismId::TwoSAuctionNoOB | MechanismId::SSPDAuctionNoOB => plan(true, full),
            MechanismId::TwoSAuctionNoBRisk => plan(false, RiskToggles { brisk: false, ..full }),
            MechanismId::TwoSAuctionNoVRisk => plan(false, RiskToggles { vrisk: false, ..full }),
            MechanismId::TwoSAuctionNoSRisk => plan(false, RiskToggles { srisk: false, ..full }),
            _ => None,
        }
    }

    pub fn has_backup(self) -> bool {
        !matches!(self, MechanismId::SSPDAuction | MechanismId::SSPDAuctionNoOB)
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        MechanismId::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mechanism '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Plan {
    pub zero_only: bool,
    pub toggles: RiskToggles,
}

impl Stage1Plan {
    pub fn grid(&self, cfg: &MarketConfig) -> Vec<f64> {
        if self.zero_only {
            vec![0.0]
        } else {
            cfg.lambda_grid()
        }
    }
}

pub fn prepare_stage1(id: MechanismId, buyers: &[Buyer], sellers: &[Seller], cfg: &MarketConfig) -> Result<Option<Stage1Outcome>> {
    match id.stage1_plan() {
        Some(plan) => Ok(Some(overbooking_opt_with(buyers, sellers, cfg, &plan.grid(cfg), plan.toggles)?)),
        None => Ok(None),
    }
}

/// Per-transaction metrics of one mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult {
    pub mechanism: MechanismId,
    pub sw: f64,
    pub expected_sw: f64,
    pub time_ns: u64,
    pub matches: usize,
    pub volunteers: usize,
    pub lambda: f64,
    pub trades: Vec<Trade>,
}

fn attended_ids(realization: &Realization) -> Vec<usize> {
    (0..realization.attended.len()).filter(|&n| realization.attended[n]).collect()
}

fn supply_caps(realization: &Realization) -> Vec<(usize, u32)> {
    realization.supply.iter().enumerate().filter(|(_, &r)| r > 0).map(|(m, &r)| (m, r)).collect()
}

/// Real-time double auction on the realized market.
pub fn crdauction(buyers: &[Buyer], sellers: &[Seller], realization: &Realization, cfg: &MarketConfig) -> MechanismResult {
    let start = Instant::now();
    let market = SubMarket::new(buyers, sellers, &attended_ids(realization), &supply_caps(realization));
    let trades = spot_auction(&market, cfg);
    let time_ns = start.elapsed().as_nanos() as u64;
    MechanismResult {
        mechanism: MechanismId::CRDAuction,
        sw: stage2_social_welfare(buyers, sellers, &trades),
        expected_sw: 0.0,
        time_ns,
        matches: trades.len(),
        volunteers: 0,
        lambda: 0.0,
        trades,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyRule {
    HighestValue,
    LowestCost,
    LargestSupply,
}

/// First-come greedy matching: each attended buyer, in index order, takes
/// the best feasible seller under `rule`. Prices are bid/ask midpoints.
pub fn greedy(buyers: &[Buyer], sellers: &[Seller], realization: &Realization, rule: GreedyRule) -> Vec<Trade> {
    let mut left = realization.supply.clone();
    let mut trades = Vec::new();
    for n in attended_ids(realization) {
        let b = &buyers[n];
        let feasible = (0..sellers.len()).filter(|&m| left[m] >= b.demand && b.bids[m] >= sellers[m].ask);
        let key = |m: usize| match rule {
            GreedyRule::HighestValue => b.valuations[m],
            GreedyRule::LowestCost => -sellers[m].unit_cost,
            GreedyRule::LargestSupply => sellers[m].expected_supply(),
        };
        let mut best: Option<usize> = None;
        for m in feasible {
            if best.map_or(true, |j| key(m) > key(j)) {
                best = Some(m);
            }
        }
        if let Some(m) = best {
            left[m] -= b.demand;
            let price = 0.5 * (b.bids[m] + sellers[m].ask);
            trades.push(Trade { buyer: n, seller: m, volume: b.demand, buyer_price: price, seller_price: price });
        }
    }
    trades
}

fn greedy_result(id: MechanismId, rule: GreedyRule, buyers: &[Buyer], sellers: &[Seller], realization: &Realization) -> MechanismResult {
    let start = Instant::now();
    let trades = greedy(buyers, sellers, realization, rule);
    let time_ns = start.elapsed().as_nanos() as u64;
    MechanismResult {
        mechanism: id,
        sw: stage2_social_welfare(buyers, sellers, &trades),
        expected_sw: 0.0,
        time_ns,
        matches: trades.len(),
        volunteers: 0,
        lambda: 0.0,
        trades,
    }
}

pub fn vrauction(buyers: &[Buyer], sellers: &[Seller], realization: &Realization) -> MechanismResult {
    greedy_result(MechanismId::VRAuction, GreedyRule::HighestValue, buyers, sellers, realization)
}

pub fn crauction(buyers: &[Buyer], sellers: &[Seller], realization: &Realization) -> MechanismResult {
    greedy_result(MechanismId::CRAuction, GreedyRule::LowestCost, buyers, sellers, realization)
}

pub fn rsauction(buyers: &[Buyer], sellers: &[Seller], realization: &Realization) -> MechanismResult {
    greedy_result(MechanismId::RSAuction, GreedyRule::LargestSupply, buyers, sellers, realization)
}

/// Run one mechanism on one realization. Contract-based mechanisms need
/// their stage-I outcome from [`prepare_stage1`].
pub fn run_mechanism(
    id: MechanismId,
    stage1: Option<&Stage1Outcome>,
    buyers: &[Buyer],
    sellers: &[Seller],
    realization: &Realization,
    cfg: &MarketConfig,
) -> Result<MechanismResult> {
    match id {
        MechanismId::CRDAuction => Ok(crdauction(buyers, sellers, realization, cfg)),
        MechanismId::VRAuction => Ok(vrauction(buyers, sellers, realization)),
        MechanismId::CRAuction => Ok(crauction(buyers, sellers, realization)),
        MechanismId::RSAuction => Ok(rsauction(buyers, sellers, realization)),
        _ => {
            let stage1 = stage1.ok_or_else(|| {
                market_model::ModelError::Domain(format!("{id} needs a stage-I outcome"))
            })?;
            let backup = id.has_backup();
            let report = run_transaction(stage1, buyers, sellers, realization, cfg, backup)?;
            let trades = report.stage2.as_ref().map_or_else(Vec::new, |s| s.trades.clone());
            Ok(MechanismResult {
                mechanism: id,
                sw: report.total_sw,
                expected_sw: stage1.expected_sw,
                time_ns: if backup { report.decision_ns } else { 0 },
                matches: report.matches,
                volunteers: report.volunteers,
                lambda: stage1.lambda,
                trades,
            })
        }
    }
}
