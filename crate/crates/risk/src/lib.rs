//! Buyer, volunteer and seller risk measures, each in a closed-form
//! Chebyshev approximation and an exact enumeration form.

use market_model::settle::select_served;
use market_model::utility::seller_expected_utility;
use market_model::{Assignment, Buyer, Contract, MarketConfig, ModelError, Result, Seller};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

pub const MAX_ENUM_MEMBERS: usize = 20;
pub const MAX_ENUM_TRIALS: u32 = 64;

/// A risk value together with whether the closed form was applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub valid: bool,
}

impl Estimate {
    fn ok(value: f64) -> Self {
        Estimate { value, valid: true }
    }

    fn flagged(value: f64) -> Self {
        Estimate { value, valid: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Approx,
    Exact,
}

/// Per-party risks. Buyer vectors are indexed by buyer, seller vectors by
/// seller; parties without contracts carry zero risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub brisk: Vec<f64>,
    pub p_n: Vec<f64>,
    pub vrisk: Vec<f64>,
    pub srisk: Vec<f64>,
    pub method: Method,
    pub p_valid: Vec<bool>,
    pub s_valid: Vec<bool>,
    pub b_degenerate: Vec<bool>,
}

impl RiskReport {
    pub fn max_brisk(&self) -> f64 {
        self.brisk.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_vrisk(&self) -> f64 {
        self.vrisk.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_srisk(&self) -> f64 {
        self.srisk.iter().cloned().fold(0.0, f64::max)
    }
}

/// Probability that a member's realized utility does not exceed xi1 * U_min.
///
/// Attendance is the only randomness here (a served member earns
/// t (v - p), an absent one pays t mu p), so the event reduces to
/// alpha * den <= num with den = v + mu p - p.
pub fn brisk(buyer: &Buyer, contract: &Contract, mu: f64, u_min: f64, xi1: f64) -> Estimate {
    let t = contract.volume as f64;
    let v = buyer.valuations[contract.seller];
    let p = contract.buyer_price;
    let num = u_min * xi1 / t + mu * p;
    let den = v + mu * p - p;
    if den.abs() < 1e-12 {
        return Estimate::flagged(1.0);
    }
    if den < 0.0 {
        // alpha * den <= 0 < num for both outcomes
        return Estimate::ok(1.0);
    }
    let c1 = num / den;
    let value = if c1 < 0.0 {
        0.0
    } else if c1 < 1.0 {
        1.0 - buyer.attend_prob
    } else {
        1.0
    };
    Estimate::ok(value)
}

pub fn vrisk(buyer: &Buyer, p_n: f64) -> f64 {
    buyer.attend_prob * p_n
}

fn seller_of(n: usize, assignment: &Assignment) -> Result<usize> {
    assignment
        .seller_of
        .get(n)
        .copied()
        .flatten()
        .ok_or_else(|| ModelError::Domain(format!("buyer {n} is not assigned to a seller")))
}

/// Mean and variance of the slack left for member n by its co-members.
fn slack_moments(n: usize, m: usize, assignment: &Assignment, buyers: &[Buyer], sellers: &[Seller]) -> (f64, f64) {
    let s = &sellers[m];
    let mut mean = s.expected_supply();
    let mut var = s.supply_variance();
    for k in assignment.members(m) {
        if k == n {
            continue;
        }
        let t = buyers[k].demand as f64;
        mean -= buyers[k].attend_prob * t;
        let a = buyers[k].attend_prob;
        var += a * (1.0 - a) * t * t;
    }
    (mean, var)
}

/// Unclamped Chebyshev lower bound on Pr(slack <= t_n); `None` when
/// t_n does not exceed the expected slack and the bound does not apply.
pub fn p_n_bound(n: usize, assignment: &Assignment, buyers: &[Buyer], sellers: &[Seller]) -> Result<Option<f64>> {
    let m = seller_of(n, assignment)?;
    let (mean, var) = slack_moments(n, m, assignment, buyers, sellers);
    let gap = buyers[n].demand as f64 - mean;
    if gap <= 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - var / (gap * gap)))
}

/// Approximate volunteer probability of member n.
pub fn p_n_approx(n: usize, assignment: &Assignment, buyers: &[Buyer], sellers: &[Seller]) -> Result<Estimate> {
    let m = seller_of(n, assignment)?;
    let (mean, var) = slack_moments(n, m, assignment, buyers, sellers);
    let gap = buyers[n].demand as f64 - mean;
    if gap == 0.0 {
        return Ok(Estimate::flagged(1.0));
    }
    if gap < 0.0 {
        // Expected slack covers the demand: the inequality gives no
        // information and the only sound lower bound is 0.
        return Ok(Estimate::flagged(0.0));
    }
    Ok(Estimate::ok((1.0 - var / (gap * gap)).clamp(0.0, 1.0)))
}

fn supply_pmf(s: &Seller) -> Result<Vec<f64>> {
    if s.supply_trials > MAX_ENUM_TRIALS {
        return Err(ModelError::TooLarge(format!(
            "seller {} has {} supply trials (limit {MAX_ENUM_TRIALS})",
            s.id, s.supply_trials
        )));
    }
    let d = s.supply_trials as u64;
    let dist = Binomial::new(s.supply_prob, d).map_err(|e| ModelError::Domain(e.to_string()))?;
    Ok((0..=d).map(|k| dist.pmf(k)).collect())
}

struct Roster {
    ids: Vec<usize>,
    items: Vec<(u32, f64)>,
    attend: Vec<f64>,
}

fn roster(m: usize, assignment: &Assignment, buyers: &[Buyer]) -> Result<Roster> {
    let ids = assignment.members(m);
    if ids.len() > MAX_ENUM_MEMBERS {
        return Err(ModelError::TooLarge(format!(
            "seller {m} has {} members (limit {MAX_ENUM_MEMBERS})",
            ids.len()
        )));
    }
    let items = ids.iter().map(|&k| (buyers[k].demand, buyers[k].bids[m])).collect();
    let attend = ids.iter().map(|&k| buyers[k].attend_prob).collect();
    Ok(Roster { ids, items, attend })
}

/// Calls `f(mask, weight)` for every attendance pattern; bits in `forced`
/// are treated as attending with probability one.
fn for_each_pattern(attend: &[f64], forced: usize, mut f: impl FnMut(usize, f64)) {
    let n = attend.len();
    for mask in 0..(1usize << n) {
        if mask & forced != forced {
            continue;
        }
        let mut w = 1.0;
        for (i, &a) in attend.iter().enumerate() {
            if forced >> i & 1 == 1 {
                continue;
            }
            w *= if mask >> i & 1 == 1 { a } else { 1.0 - a };
        }
        if w > 0.0 {
            f(mask, w);
        }
    }
}

/// Served flags (per roster position) for one attendance pattern and supply.
fn settle_pattern(r: &Roster, mask: usize, supply: u32) -> Vec<bool> {
    let present: Vec<usize> = (0..r.ids.len()).filter(|i| mask >> i & 1 == 1).collect();
    let items: Vec<(u32, f64)> = present.iter().map(|&i| r.items[i]).collect();
    let flags = select_served(&items, supply);
    let mut served = vec![false; r.ids.len()];
    for (j, &i) in present.iter().enumerate() {
        served[i] = flags[j];
    }
    served
}

/// Exact probability that member n, given it attends, is not served.
pub fn p_n_exact(n: usize, assignment: &Assignment, buyers: &[Buyer], sellers: &[Seller]) -> Result<f64> {
    let m = seller_of(n, assignment)?;
    let r = roster(m, assignment, buyers)?;
    let pmf = supply_pmf(&sellers[m])?;
    let pos = r.ids.iter().position(|&k| k == n).expect("member of its seller");
    let mut denied = 0.0;
    for_each_pattern(&r.attend, 1 << pos, |mask, w| {
        for (k, &pk) in pmf.iter().enumerate() {
            if pk > 0.0 && !settle_pattern(&r, mask, k as u32)[pos] {
                denied += w * pk;
            }
        }
    });
    Ok(denied.clamp(0.0, 1.0))
}

/// Exact Pr(supply - attended co-member demand <= t_n | n attends).
pub fn slack_shortfall_exact(n: usize, assignment: &Assignment, buyers: &[Buyer], sellers: &[Seller]) -> Result<f64> {
    let m = seller_of(n, assignment)?;
    let r = roster(m, assignment, buyers)?;
    let pmf = supply_pmf(&sellers[m])?;
    let pos = r.ids.iter().position(|&k| k == n).expect("member of its seller");
    let t_n = buyers[n].demand as i64;
    let mut prob = 0.0;
    for_each_pattern(&r.attend, 1 << pos, |mask, w| {
        let others: i64 = (0..r.ids.len())
            .filter(|&i| i != pos && mask >> i & 1 == 1)
            .map(|i| r.items[i].0 as i64)
            .sum();
        for (k, &pk) in pmf.iter().enumerate() {
            if k as i64 - others <= t_n {
                prob += w * pk;
            }
        }
    });
    Ok(prob.clamp(0.0, 1.0))
}

fn contract_of(contracts: &[Contract], n: usize) -> Result<&Contract> {
    contracts
        .iter()
        .find(|c| c.buyer == n)
        .ok_or_else(|| ModelError::Domain(format!("buyer {n} has no contract")))
}

fn seller_contracts(contracts: &[Contract], m: usize) -> Vec<&Contract> {
    contracts.iter().filter(|c| c.seller == m).collect()
}

/// Closed-form seller risk with M_n replaced by its conditional expectation
/// 1 - P_n. `p` is indexed by buyer.
pub fn srisk_approx(
    m: usize,
    contracts: &[Contract],
    buyers: &[Buyer],
    sellers: &[Seller],
    p: &[f64],
    xi2: f64,
) -> Result<Estimate> {
    let own = seller_contracts(contracts, m);
    if own.is_empty() {
        return Ok(Estimate::ok(0.0));
    }
    let expected = seller_expected_utility(buyers, sellers, contracts, m, p)?;
    let c4 = expected * xi2 - own.iter().map(|c| c.volume as f64 * c.penalty_b2s).sum::<f64>();
    let mut mean = 0.0;
    let mut var = 0.0;
    for c in &own {
        let pn = p[c.buyer];
        let t = c.volume as f64;
        let c2 = c.seller_reward - sellers[m].unit_cost + c.penalty_s2b;
        let c3 = c.penalty_s2b + c.penalty_b2s;
        let y = (1.0 - pn) * c2 - c3;
        mean += t * pn * y;
        var += t * t * pn * (1.0 - pn) * y * y;
    }
    let gap = mean - c4;
    if gap == 0.0 {
        return Ok(Estimate::flagged(1.0));
    }
    let value = (var / (gap * gap)).clamp(0.0, 1.0);
    Ok(Estimate { value, valid: gap > 0.0 })
}

/// Chebyshev bound built from the actual first two moments of the seller's
/// utility, treating members' outcomes as independent.
pub fn srisk_moment_bound(
    m: usize,
    contracts: &[Contract],
    buyers: &[Buyer],
    sellers: &[Seller],
    p: &[f64],
    xi2: f64,
) -> Result<Estimate> {
    let own = seller_contracts(contracts, m);
    if own.is_empty() {
        return Ok(Estimate::ok(0.0));
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for c in &own {
        let a = buyers[c.buyer].attend_prob;
        let pn = p[c.buyer];
        let t = c.volume as f64;
        let outcomes = [
            (a * (1.0 - pn), t * (c.seller_reward - sellers[m].unit_cost)),
            (a * pn, -t * c.penalty_s2b),
            (1.0 - a, t * c.penalty_b2s),
        ];
        let mu1: f64 = outcomes.iter().map(|(w, y)| w * y).sum();
        let mu2: f64 = outcomes.iter().map(|(w, y)| w * y * y).sum();
        mean += mu1;
        var += (mu2 - mu1 * mu1).max(0.0);
    }
    let gap = (1.0 - xi2) * mean;
    if gap <= 0.0 {
        return Ok(Estimate::flagged(1.0));
    }
    Ok(Estimate::ok((var / (gap * gap)).clamp(0.0, 1.0)))
}

/// Exact Pr(U_m <= xi2 * E[U_m]) by enumerating attendance and supply, with
/// the expectation taken under the exact volunteer probabilities.
pub fn srisk_exact(
    m: usize,
    contracts: &[Contract],
    assignment: &Assignment,
    buyers: &[Buyer],
    sellers: &[Seller],
    xi2: f64,
) -> Result<f64> {
    let r = roster(m, assignment, buyers)?;
    if r.ids.is_empty() {
        return Ok(0.0);
    }
    let pmf = supply_pmf(&sellers[m])?;
    let mut p = vec![0.0; buyers.len()];
    for &n in &r.ids {
        p[n] = p_n_exact(n, assignment, buyers, sellers)?;
    }
    let expected = seller_expected_utility(buyers, sellers, contracts, m, &p)?;
    let threshold = xi2 * expected;
    let own: Vec<&Contract> = r.ids.iter().map(|&n| contract_of(contracts, n)).collect::<Result<_>>()?;
    let cost = sellers[m].unit_cost;
    let mut prob = 0.0;
    for_each_pattern(&r.attend, 0, |mask, w| {
        for (k, &pk) in pmf.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            let served = settle_pattern(&r, mask, k as u32);
            let mut u = 0.0;
            for (i, c) in own.iter().enumerate() {
                let t = c.volume as f64;
                u += if mask >> i & 1 == 0 {
                    t * c.penalty_b2s
                } else if served[i] {
                    t * (c.seller_reward - cost)
                } else {
                    -t * c.penalty_s2b
                };
            }
            if u <= threshold + 1e-12 {
                prob += w * pk;
            }
        }
    });
    Ok(prob.clamp(0.0, 1.0))
}

/// Risk report for a contract set. The approximate method is what the
/// overbooking optimizer uses; the exact one is for small instances.
pub fn assess(
    buyers: &[Buyer],
    sellers: &[Seller],
    assignment: &Assignment,
    contracts: &[Contract],
    cfg: &MarketConfig,
    method: Method,
) -> Result<RiskReport> {
    let nb = buyers.len();
    let ns = sellers.len();
    let mut report = RiskReport {
        brisk: vec![0.0; nb],
        p_n: vec![0.0; nb],
        vrisk: vec![0.0; nb],
        srisk: vec![0.0; ns],
        method,
        p_valid: vec![true; nb],
        s_valid: vec![true; ns],
        b_degenerate: vec![false; nb],
    };
    let mu = cfg.penalty_factor;
    for c in contracts {
        let n = c.buyer;
        let b = brisk(&buyers[n], c, mu, cfg.u_min, cfg.xi1);
        report.brisk[n] = b.value;
        report.b_degenerate[n] = !b.valid;
        let p = match method {
            Method::Approx => p_n_approx(n, assignment, buyers, sellers)?,
            Method::Exact => Estimate::ok(p_n_exact(n, assignment, buyers, sellers)?),
        };
        report.p_n[n] = p.value;
        report.p_valid[n] = p.valid;
        report.vrisk[n] = vrisk(&buyers[n], p.value);
    }
    for m in 0..ns {
        let s = match method {
            Method::Approx => srisk_approx(m, contracts, buyers, sellers, &report.p_n, cfg.xi2)?,
            Method::Exact => Estimate::ok(srisk_exact(m, contracts, assignment, buyers, sellers, cfg.xi2)?),
        };
        report.srisk[m] = s.value;
        report.s_valid[m] = s.valid;
    }
    Ok(report)
}
