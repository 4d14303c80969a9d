//! Realized and expected utilities of buyers, sellers and the auctioneer,
//! social welfare, and the overbooking rate.

use crate::{Buyer, Contract, MemberOutcome, ModelError, Realization, Result, Seller, Trade};

fn check_party(c: &Contract, buyers: &[Buyer], sellers: &[Seller]) -> Result<()> {
    if c.buyer >= buyers.len() || c.seller >= sellers.len() {
        return Err(ModelError::UnknownParty { buyer: c.buyer, seller: c.seller });
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ModelError::Domain(format!("probability {p} outside [0,1]")));
    }
    Ok(())
}

/// Realized stage-I utility of one member.
pub fn member_utility(c: &Contract, valuation: f64, outcome: MemberOutcome, mu: f64) -> f64 {
    let t = c.volume as f64;
    match outcome {
        MemberOutcome::Served => t * (valuation - c.buyer_price),
        MemberOutcome::Volunteer => t * c.penalty_s2b,
        MemberOutcome::Absent => -t * c.absence_charge(mu),
    }
}

pub fn buyer_utility(
    buyers: &[Buyer],
    sellers: &[Seller],
    contracts: &[Contract],
    realization: &Realization,
    n: usize,
    mu: f64,
) -> Result<f64> {
    let mut u = 0.0;
    for c in contracts.iter().filter(|c| c.buyer == n) {
        check_party(c, buyers, sellers)?;
        let v = buyers[n].valuations[c.seller];
        u += member_utility(c, v, realization.outcome(n)?, mu);
    }
    Ok(u)
}

pub fn member_expected_utility(c: &Contract, valuation: f64, attend: f64, p: f64, mu: f64) -> f64 {
    let t = c.volume as f64;
    attend * t * ((1.0 - p) * (valuation - c.buyer_price) + p * c.penalty_s2b)
        - (1.0 - attend) * t * c.absence_charge(mu)
}

pub fn buyer_expected_utility(
    buyers: &[Buyer],
    sellers: &[Seller],
    contracts: &[Contract],
    n: usize,
    p_n: f64,
    mu: f64,
) -> Result<f64> {
    check_prob(p_n)?;
    let mut u = 0.0;
    for c in contracts.iter().filter(|c| c.buyer == n) {
        check_party(c, buyers, sellers)?;
        let b = &buyers[n];
        u += member_expected_utility(c, b.valuations[c.seller], b.attend_prob, p_n, mu);
    }
    Ok(u)
}

pub fn seller_utility(
    buyers: &[Buyer],
    sellers: &[Seller],
    contracts: &[Contract],
    realization: &Realization,
    m: usize,
) -> Result<f64> {
    let mut u = 0.0;
    for c in contracts.iter().filter(|c| c.seller == m) {
        check_party(c, buyers, sellers)?;
        let t = c.volume as f64;
        u += match realization.outcome(c.buyer)? {
            MemberOutcome::Served => t * (c.seller_reward - sellers[m].unit_cost),
            MemberOutcome::Volunteer => -t * c.penalty_s2b,
            MemberOutcome::Absent => t * c.penalty_b2s,
        };
    }
    Ok(u)
}

/// `p` is indexed by buyer.
pub fn seller_expected_utility(
    buyers: &[Buyer],
    sellers: &[Seller],
    contracts: &[Contract],
    m: usize,
    p: &[f64],
) -> Result<f64> {
    let mut u = 0.0;
    for c in contracts.iter().filter(|c| c.seller == m) {
        check_party(c, buyers, sellers)?;
        let pn = p[c.buyer];
        check_prob(pn)?;
        let a = buyers[c.buyer].attend_prob;
        let t = c.volume as f64;
        u += t * a * ((1.0 - pn) * (c.seller_reward - sellers[m].unit_cost) - pn * c.penalty_s2b)
            + t * (1.0 - a) * c.penalty_b2s;
    }
    Ok(u)
}

pub fn auctioneer_utility(contracts: &[Contract], realization: &Realization, mu: f64) -> Result<f64> {
    let mut u = 0.0;
    for c in contracts {
        let weight = match realization.outcome(c.buyer)? {
            MemberOutcome::Served => 1.0,
            MemberOutcome::Volunteer => 0.0,
            MemberOutcome::Absent => mu,
        };
        u += c.volume as f64 * weight * (c.buyer_price - c.seller_reward);
    }
    Ok(u)
}

pub fn auctioneer_expected_utility(buyers: &[Buyer], contracts: &[Contract], p: &[f64], mu: f64) -> Result<f64> {
    let mut u = 0.0;
    for c in contracts {
        let pn = p[c.buyer];
        check_prob(pn)?;
        let a = buyers[c.buyer].attend_prob;
        u += c.volume as f64 * (a * (1.0 - pn) + mu * (1.0 - a)) * (c.buyer_price - c.seller_reward);
    }
    Ok(u)
}

pub fn social_welfare(
    buyers: &[Buyer],
    sellers: &[Seller],
    contracts: &[Contract],
    realization: &Realization,
) -> Result<f64> {
    let mut sw = 0.0;
    for c in contracts {
        check_party(c, buyers, sellers)?;
        if realization.outcome(c.buyer)? == MemberOutcome::Served {
            sw += c.volume as f64 * (buyers[c.buyer].valuations[c.seller] - sellers[c.seller].unit_cost);
        }
    }
    Ok(sw)
}

pub fn expected_social_welfare(buyers: &[Buyer], sellers: &[Seller], contracts: &[Contract], p: &[f64]) -> Result<f64> {
    let mut sw = 0.0;
    for c in contracts {
        check_party(c, buyers, sellers)?;
        let pn = p[c.buyer];
        check_prob(pn)?;
        let b = &buyers[c.buyer];
        sw += c.volume as f64 * b.attend_prob * (1.0 - pn) * (b.valuations[c.seller] - sellers[c.seller].unit_cost);
    }
    Ok(sw)
}

pub fn overbooking_rate(booked: u32, expected_supply: f64) -> Result<f64> {
    if !(expected_supply > 0.0) {
        return Err(ModelError::Domain(format!("expected supply {expected_supply} must be positive")));
    }
    Ok(((booked as f64 - expected_supply) / expected_supply).max(0.0))
}

pub fn stage2_buyer_utility(buyers: &[Buyer], trades: &[Trade], n: usize) -> f64 {
    trades
        .iter()
        .filter(|t| t.buyer == n)
        .map(|t| t.volume as f64 * (buyers[n].valuations[t.seller] - t.buyer_price))
        .sum()
}

pub fn stage2_seller_utility(sellers: &[Seller], trades: &[Trade], m: usize) -> f64 {
    trades
        .iter()
        .filter(|t| t.seller == m)
        .map(|t| t.volume as f64 * (t.seller_price - sellers[m].unit_cost))
        .sum()
}

pub fn stage2_auctioneer_utility(trades: &[Trade]) -> f64 {
    trades.iter().map(|t| t.volume as f64 * (t.buyer_price - t.seller_price)).sum()
}

pub fn stage2_social_welfare(buyers: &[Buyer], sellers: &[Seller], trades: &[Trade]) -> f64 {
    trades
        .iter()
        .map(|t| t.volume as f64 * (buyers[t.buyer].valuations[t.seller] - sellers[t.seller].unit_cost))
        .sum()
}
