//! Stage II: contract settlement under realized attendance and supply,
//! then a backup auction of the residual supply.

use std::time::Instant;

use market_model::settle::select_served;
use market_model::utility::{social_welfare, stage2_social_welfare};
use market_model::{Buyer, Contract, MarketConfig, Realization, Result, Seller, Trade};
use opdauction::{contract_pricing, member_determination, search_params, Stage1Outcome};
use serde::{Deserialize, Serialize};

/// Money moved by stage-I contracts in one transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cashflows {
    pub buyer: Vec<f64>,
    pub seller: Vec<f64>,
    pub auctioneer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementResult {
    /// (seller, buyer) pairs served under contract.
    pub served_pairs: Vec<(usize, usize)>,
    pub volunteers: Vec<usize>,
    pub absent: Vec<usize>,
    pub residual_supply: Vec<u32>,
    pub residual_buyers: Vec<usize>,
    pub cashflows: Cashflows,
    pub realization: Realization,
}

/// Honor contracts: per seller, serve attended members if supply allows,
/// otherwise pick the served set by knapsack and make the rest volunteers.
pub fn settle(
    buyers: &[Buyer],
    sellers: &[Seller],
    contracts: &[Contract],
    realization: &Realization,
    mu: f64,
) -> SettlementResult {
    let mut real = realization.clone();
    real.served = vec![None; buyers.len()];
    let mut cash = Cashflows { buyer: vec![0.0; buyers.len()], seller: vec![0.0; sellers.len()], auctioneer: 0.0 };
    let mut served_pairs = Vec::new();
    let mut volunteers = Vec::new();
    let mut absent = Vec::new();
    let mut residual_supply = realization.supply.clone();

    let mut by_seller: Vec<Vec<&Contract>> = vec![Vec::new(); sellers.len()];
    for c in contracts {
        by_seller[c.seller].push(c);
    }
    for (m, own) in by_seller.iter().enumerate() {
        let present: Vec<&Contract> = own.iter().copied().filter(|c| realization.attended[c.buyer]).collect();
        let items: Vec<(u32, f64)> = present.iter().map(|c| (c.volume, buyers[c.buyer].bids[m])).collect();
        let flags = select_served(&items, realization.supply[m]);
        for (c, served) in present.iter().zip(flags) {
            let t = c.volume as f64;
            real.served[c.buyer] = Some(served);
            if served {
                served_pairs.push((m, c.buyer));
                residual_supply[m] -= c.volume;
                cash.buyer[c.buyer] -= t * c.buyer_price;
                cash.seller[m] += t * c.seller_reward;
                cash.auctioneer += t * (c.buyer_price - c.seller_reward);
            } else {
                volunteers.push(c.buyer);
                cash.buyer[c.buyer] += t * c.penalty_s2b;
                cash.seller[m] -= t * c.penalty_s2b;
            }
        }
        for c in own.iter().filter(|c| !realization.attended[c.buyer]) {
            let t = c.volume as f64;
            absent.push(c.buyer);
            cash.buyer[c.buyer] -= t * c.absence_charge(mu);
            cash.seller[m] += t * c.penalty_b2s;
            cash.auctioneer += t * (c.absence_charge(mu) - c.penalty_b2s);
        }
    }
    volunteers.sort_unstable();
    absent.sort_unstable();
    let mut member = vec![false; buyers.len()];
    for c in contracts {
        member[c.buyer] = true;
    }
    let residual_buyers = (0..buyers.len())
        .filter(|&n| realization.attended[n] && (!member[n] || real.served[n] == Some(false)))
        .collect();
    SettlementResult { served_pairs, volunteers, absent, residual_supply, residual_buyers, cashflows: cash, realization: real }
}

/// A sub-market re-indexed from zero, remembering original ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubMarket {
    pub buyers: Vec<Buyer>,
    pub sellers: Vec<Seller>,
    pub buyer_ids: Vec<usize>,
    pub seller_ids: Vec<usize>,
}

impl SubMarket {
    /// Sellers offer a fixed integer capacity each; buyers keep their
    /// valuations and bids toward the included sellers only.
    pub fn new(buyers: &[Buyer], sellers: &[Seller], buyer_ids: &[usize], capacities: &[(usize, u32)]) -> Self {
        let seller_ids: Vec<usize> = capacities.iter().map(|c| c.0).collect();
        let sub_sellers = capacities
            .iter()
            .enumerate()
            .map(|(i, &(m, cap))| Seller {
                id: i,
                unit_cost: sellers[m].unit_cost,
                ask: sellers[m].ask,
                supply_trials: cap,
                supply_prob: 1.0,
            })
            .collect();
        let sub_buyers = buyer_ids
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                let b = &buyers[n];
                Buyer {
                    id: j,
                    demand: b.demand,
                    valuations: seller_ids.iter().map(|&m| b.valuations[m]).collect(),
                    bids: seller_ids.iter().map(|&m| b.bids[m]).collect(),
                    attend_prob: 1.0,
                }
            })
            .collect();
        SubMarket { buyers: sub_buyers, sellers: sub_sellers, buyer_ids: buyer_ids.to_vec(), seller_ids }
    }

    pub fn is_empty(&self) -> bool {
        self.buyers.is_empty() || self.sellers.is_empty()
    }
}

/// Volunteers plus attended guests, facing sellers with leftover supply.
pub fn build_residual_market(settlement: &SettlementResult, buyers: &[Buyer], sellers: &[Seller]) -> SubMarket {
    let caps: Vec<(usize, u32)> = settlement
        .residual_supply
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0)
        .map(|(m, &r)| (m, r))
        .collect();
    SubMarket::new(buyers, sellers, &settlement.residual_buyers, &caps)
}

/// Spot double auction without overbooking: the stage-I matcher and pricer
/// on fixed capacities. Returned trades use original ids.
pub fn spot_auction(market: &SubMarket, cfg: &MarketConfig) -> Vec<Trade> {
    if market.is_empty() {
        return Vec::new();
    }
    let matching = member_determination(&market.buyers, &market.sellers, 0.0);
    let contracts = contract_pricing(
        &market.buyers,
        &market.sellers,
        0.0,
        &matching,
        cfg.penalty_factor,
        search_params(cfg),
    );
    contracts
        .iter()
        .map(|c| Trade {
            buyer: market.buyer_ids[c.buyer],
            seller: market.seller_ids[c.seller],
            volume: c.volume,
            buyer_price: c.buyer_price,
            seller_price: c.seller_reward,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Outcome {
    pub trades: Vec<Trade>,
    pub realized_sw: f64,
    pub total_sw: f64,
}

pub fn run_stage2(residual: &SubMarket, buyers: &[Buyer], sellers: &[Seller], cfg: &MarketConfig) -> Stage2Outcome {
    let trades = spot_auction(residual, cfg);
    let realized_sw = stage2_social_welfare(buyers, sellers, &trades);
    Stage2Outcome { trades, realized_sw, total_sw: realized_sw }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionReport {
    pub settlement: SettlementResult,
    pub stage2: Option<Stage2Outcome>,
    pub stage1_sw: f64,
    pub total_sw: f64,
    pub decision_ns: u64,
    pub matches: usize,
    pub volunteers: usize,
}

/// Settle contracts and, if `backup` is set, run the stage-II auction.
pub fn run_transaction(
    stage1: &Stage1Outcome,
    buyers: &[Buyer],
    sellers: &[Seller],
    realization: &Realization,
    cfg: &MarketConfig,
    backup: bool,
) -> Result<TransactionReport> {
    let start = Instant::now();
    let settlement = settle(buyers, sellers, &stage1.contracts, realization, cfg.penalty_factor);
    let stage2 = if backup {
        let residual = build_residual_market(&settlement, buyers, sellers);
        Some(run_stage2(&residual, buyers, sellers, cfg))
    } else {
        None
    };
    let decision_ns = start.elapsed().as_nanos() as u64;
    let stage1_sw = social_welfare(buyers, sellers, &stage1.contracts, &settlement.realization)?;
    let stage2_sw = stage2.as_ref().map_or(0.0, |s| s.realized_sw);
    let matches = settlement.served_pairs.len() + stage2.as_ref().map_or(0, |s| s.trades.len());
    let total_sw = stage1_sw + stage2_sw;
    let stage2 = stage2.map(|s| Stage2Outcome { total_sw, ..s });
    Ok(TransactionReport {
        volunteers: settlement.volunteers.len(),
        settlement,
        stage2,
        stage1_sw,
        total_sw,
        decision_ns,
        matches,
    })
}
