use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// A resource buyer: demand in RBs, per-seller valuations and bids, attendance probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Buyer {
    pub id: usize,
    pub demand: u32,
    pub valuations: Vec<f64>,
    pub bids: Vec<f64>,
    pub attend_prob: f64,
}

impl Buyer {
    pub fn validate(&self, n_sellers: usize) -> Result<()> {
        let fail = |reason: &str| {
            Err(ModelError::InvalidBuyer { id: self.id, reason: reason.to_string() })
        };
        if self.demand == 0 {
            return fail("demand must be at least one RB");
        }
        if self.valuations.len() != n_sellers || self.bids.len() != n_sellers {
            return fail("valuation/bid vectors must have one entry per seller");
        }
        if self.valuations.iter().chain(&self.bids).any(|x| !x.is_finite() || *x < 0.0) {
            return fail("valuations and bids must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.attend_prob) {
            return fail("attendance probability outside [0,1]");
        }
        Ok(())
    }

    pub fn avg_bid(&self) -> f64 {
        if self.bids.is_empty() {
            return 0.0;
        }
        self.bids.iter().sum::<f64>() / self.bids.len() as f64
    }
}

/// A resource seller with Binomial(d, r) supply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seller {
    pub id: usize,
    pub unit_cost: f64,
    pub ask: f64,
    pub supply_trials: u32,
    pub supply_prob: f64,
}

impl Seller {
    pub fn expected_supply(&self) -> f64 {
        self.supply_trials as f64 * self.supply_prob
    }

    pub fn supply_variance(&self) -> f64 {
        self.supply_trials as f64 * self.supply_prob * (1.0 - self.supply_prob)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(ModelError::InvalidSeller { id: self.id, reason: reason.to_string() })
        };
        if !self.unit_cost.is_finite() || self.unit_cost < 0.0 {
            return fail("unit cost must be finite and non-negative");
        }
        if !self.ask.is_finite() || self.ask < 0.0 {
            return fail("ask must be finite and non-negative");
        }
        if self.supply_trials == 0 {
            return fail("supply trials must be positive");
        }
        if !(0.0..=1.0).contains(&self.supply_prob) {
            return fail("supply probability outside [0,1]");
        }
        Ok(())
    }
}

/// Validated market: buyer and seller ids equal their positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub buyers: Vec<Buyer>,
    pub sellers: Vec<Seller>,
}

impl Market {
    pub fn new(buyers: Vec<Buyer>, sellers: Vec<Seller>) -> Result<Self> {
        for (i, s) in sellers.iter().enumerate() {
            if s.id != i {
                return Err(ModelError::InvalidSeller { id: s.id, reason: format!("id must equal position {i}") });
            }
            s.validate()?;
        }
        for (i, b) in buyers.iter().enumerate() {
            if b.id != i {
                return Err(ModelError::InvalidBuyer { id: b.id, reason: format!("id must equal position {i}") });
            }
            b.validate(sellers.len())?;
        }
        Ok(Market { buyers, sellers })
    }

    pub fn n_buyers(&self) -> usize {
        self.buyers.len()
    }

    pub fn n_sellers(&self) -> usize {
        self.sellers.len()
    }
}

/// Long-term contract between a member and a seller. Prices are per RB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub buyer: usize,
    pub seller: usize,
    pub volume: u32,
    pub buyer_price: f64,
    pub seller_reward: f64,
    pub penalty_b2s: f64,
    pub penalty_s2b: f64,
}

impl Contract {
    pub fn new(buyer: usize, seller: usize, volume: u32, buyer_price: f64, seller_reward: f64, mu: f64) -> Self {
        Contract {
            buyer,
            seller,
            volume,
            buyer_price,
            seller_reward,
            penalty_b2s: mu * seller_reward,
            penalty_s2b: mu * buyer_price,
        }
    }

    /// What an absent member pays per RB. Of this, `penalty_b2s` goes to the
    /// seller and the rest stays with the auctioneer.
    pub fn absence_charge(&self, mu: f64) -> f64 {
        mu * self.buyer_price
    }
}

/// A spot trade (stage II, or any per-transaction mechanism).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub buyer: usize,
    pub seller: usize,
    pub volume: u32,
    pub buyer_price: f64,
    pub seller_price: f64,
}

/// Buyer-to-seller assignment. Storing one optional seller per buyer makes
/// the one-seller-per-buyer constraint structural.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub n_sellers: usize,
    pub seller_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(n_sellers: usize, n_buyers: usize) -> Self {
        Assignment { n_sellers, seller_of: vec![None; n_buyers] }
    }

    pub fn x(&self, m: usize, n: usize) -> bool {
        self.seller_of[n] == Some(m)
    }

    pub fn members(&self, m: usize) -> Vec<usize> {
        (0..self.seller_of.len()).filter(|&n| self.seller_of[n] == Some(m)).collect()
    }

    pub fn matched(&self) -> usize {
        self.seller_of.iter().filter(|s| s.is_some()).count()
    }

    pub fn booked(&self, m: usize, buyers: &[Buyer]) -> u32 {
        self.members(m).iter().map(|&n| buyers[n].demand).sum()
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        let mut x = vec![vec![0u8; self.seller_of.len()]; self.n_sellers];
        for (n, s) in self.seller_of.iter().enumerate() {
            if let Some(m) = s {
                x[*m][n] = 1;
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberOutcome {
    Served,
    Volunteer,
    Absent,
}

/// One transaction's sampled attendance and supply, plus the settlement
/// outcome once it is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub attended: Vec<bool>,
    pub supply: Vec<u32>,
    pub served: Vec<Option<bool>>,
}

impl Realization {
    pub fn new(attended: Vec<bool>, supply: Vec<u32>) -> Self {
        let served = vec![None; attended.len()];
        Realization { attended, supply, served }
    }

    pub fn outcome(&self, n: usize) -> Result<MemberOutcome> {
        if !self.attended[n] {
            return Ok(MemberOutcome::Absent);
        }
        match self.served[n] {
            Some(true) => Ok(MemberOutcome::Served),
            Some(false) => Ok(MemberOutcome::Volunteer),
            None => Err(ModelError::Domain(format!("settlement outcome of buyer {n} not set"))),
        }
    }
}
