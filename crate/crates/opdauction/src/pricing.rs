//! Critical-value contract pricing by bisection on each winner's report.

use market_model::{Buyer, Contract, Seller};

use crate::member::{run, Matching, Stop, View};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams { tol: 1e-3, max_iter: 32 }
    }
}

/// Bids of buyer `n` shifted so that its bid toward `m` equals `level`.
pub fn shifted_bids(buyer: &Buyer, m: usize, level: f64) -> Vec<f64> {
    let delta = level - buyer.bids[m];
    buyer.bids.iter().map(|b| (b + delta).max(0.0)).collect()
}

pub fn buyer_is_member(buyers: &[Buyer], sellers: &[Seller], lambda: f64, n: usize, bids: &[f64]) -> bool {
    let view = View { bid_override: Some((n, bids)), ..View::new(buyers, sellers) };
    run(&view, lambda, Stop::BuyerMatched(n)).assignment.seller_of[n].is_some()
}

pub fn seller_is_matched(buyers: &[Buyer], sellers: &[Seller], lambda: f64, m: usize, ask: f64) -> bool {
    let view = View { ask_override: Some((m, ask)), ..View::new(buyers, sellers) };
    let matching = run(&view, lambda, Stop::SellerMatched(m));
    matching.assignment.seller_of.iter().any(|s| *s == Some(m))
}

/// Lowest probed level of `bid_{m,n}` at which buyer `n` keeps a match.
pub fn buyer_price(buyers: &[Buyer], sellers: &[Seller], lambda: f64, matching: &Matching, n: usize, p: SearchParams) -> f64 {
    let m = matching.assignment.seller_of[n].expect("priced buyer must be matched");
    let mut hi = buyers[n].bids[m];
    let mut lo = matching.lists.critical_bid().unwrap_or(0.0);
    if hi <= lo {
        return hi;
    }
    let mut iter = 0;
    while hi - lo > p.tol && iter < p.max_iter {
        let mid = 0.5 * (lo + hi);
        if buyer_is_member(buyers, sellers, lambda, n, &shifted_bids(&buyers[n], m, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
    }
    hi
}

/// Highest probed ask at which seller `m` keeps at least one member.
pub fn seller_price(buyers: &[Buyer], sellers: &[Seller], lambda: f64, matching: &Matching, m: usize, p: SearchParams) -> f64 {
    let mut lo = sellers[m].ask;
    let hi0 = match matching.lists.critical_ask() {
        Some(a) => a,
        None => return lo,
    };
    let mut hi = hi0;
    if hi <= lo {
        return lo;
    }
    let mut iter = 0;
    while hi - lo > p.tol && iter < p.max_iter {
        let mid = 0.5 * (lo + hi);
        if seller_is_matched(buyers, sellers, lambda, m, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
    }
    lo
}

/// Contracts for every matched pair, with penalties derived from `mu`.
pub fn contract_pricing(
    buyers: &[Buyer],
    sellers: &[Seller],
    lambda: f64,
    matching: &Matching,
    mu: f64,
    params: SearchParams,
) -> Vec<Contract> {
    let mut rewards = vec![None; sellers.len()];
    let mut contracts = Vec::new();
    for (n, s) in matching.assignment.seller_of.iter().enumerate() {
        let Some(m) = *s else { continue };
        let p_b = buyer_price(buyers, sellers, lambda, matching, n, params);
        let r_s = *rewards[m].get_or_insert_with(|| seller_price(buyers, sellers, lambda, matching, m, params));
        contracts.push(Contract::new(n, m, buyers[n].demand, p_b, r_s, mu));
    }
    contracts
}
