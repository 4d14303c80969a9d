//! Member determination: list sorting, pivotal indices and per-seller
//! knapsack matching.

use market_model::{knapsack, Assignment, Buyer, Seller};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedLists {
    pub buyer_order: Vec<usize>,
    pub seller_order: Vec<usize>,
    /// Number of candidate buyers (top of `buyer_order`); 0 means no trade.
    pub key_b: usize,
    /// Number of winning sellers (top of `seller_order`).
    pub key_s: usize,
    pub bid_avg: Vec<f64>,
    pub ask: Vec<f64>,
}

impl SortedLists {
    /// Average bid of the first excluded buyer, if any.
    pub fn critical_bid(&self) -> Option<f64> {
        self.buyer_order.get(self.key_b).map(|&n| self.bid_avg[n])
    }

    /// Ask of the first excluded seller, if any.
    pub fn critical_ask(&self) -> Option<f64> {
        self.seller_order.get(self.key_s).map(|&m| self.ask[m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub assignment: Assignment,
    pub lists: SortedLists,
    /// Knapsack objective sum t (bid - ask) per winning seller, in list order.
    pub objectives: Vec<(usize, f64)>,
}

/// Read-only view of the reports with at most one buyer's bids or one
/// seller's ask replaced; used to replay the matcher during pricing.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub buyers: &'a [Buyer],
    pub sellers: &'a [Seller],
    pub bid_override: Option<(usize, &'a [f64])>,
    pub ask_override: Option<(usize, f64)>,
}

impl<'a> View<'a> {
    pub fn new(buyers: &'a [Buyer], sellers: &'a [Seller]) -> Self {
        View { buyers, sellers, bid_override: None, ask_override: None }
    }

    fn bids(&self, n: usize) -> &[f64] {
        match self.bid_override {
            Some((k, b)) if k == n => b,
            _ => &self.buyers[n].bids,
        }
    }

    fn ask(&self, m: usize) -> f64 {
        match self.ask_override {
            Some((k, a)) if k == m => a,
            _ => self.sellers[m].ask,
        }
    }
}

pub(crate) enum Stop {
    Never,
    BuyerMatched(usize),
    SellerMatched(usize),
}

pub(crate) fn capacity(seller: &Seller, lambda: f64) -> f64 {
    seller.expected_supply() * (1.0 + lambda)
}

pub(crate) fn knapsack_capacity(seller: &Seller, lambda: f64) -> u32 {
    (capacity(seller, lambda) + 1e-9).floor().max(0.0) as u32
}

pub(crate) fn sort_lists(view: &View, lambda: f64) -> SortedLists {
    let nb = view.buyers.len();
    let ns = view.sellers.len();
    let bid_avg: Vec<f64> = (0..nb)
        .map(|n| {
            let b = view.bids(n);
            if b.is_empty() {
                0.0
            } else {
                b.iter().sum::<f64>() / b.len() as f64
            }
        })
        .collect();
    let ask: Vec<f64> = (0..ns).map(|m| view.ask(m)).collect();
    let mut buyer_order: Vec<usize> = (0..nb).collect();
    buyer_order.sort_by(|&a, &b| bid_avg[b].total_cmp(&bid_avg[a]));
    let mut seller_order: Vec<usize> = (0..ns).collect();
    seller_order.sort_by(|&a, &b| ask[a].total_cmp(&ask[b]));

    let bl: Vec<f64> = buyer_order.iter().map(|&n| bid_avg[n]).collect();
    let al: Vec<f64> = seller_order.iter().map(|&m| ask[m]).collect();
    let mut prefix_cap = vec![0.0; ns + 1];
    for (k, &m) in seller_order.iter().enumerate() {
        prefix_cap[k + 1] = prefix_cap[k] + capacity(&view.sellers[m], lambda);
    }
    let mut prefix_dem = vec![0u64; nb + 1];
    for (k, &n) in buyer_order.iter().enumerate() {
        prefix_dem[k + 1] = prefix_dem[k] + view.buyers[n].demand as u64;
    }
    let fit = |cap: f64| -> usize {
        // largest j with prefix_dem[j] <= cap
        prefix_dem.partition_point(|&d| d as f64 <= cap + 1e-9) - 1
    };

    let (mut key_b, mut key_s, mut best) = (0, 0, 0);
    for kb in (1..nb).rev() {
        if kb <= best {
            break;
        }
        for ks in (1..ns).rev() {
            let crosses = bl[kb] >= al[ks];
            let boundary = kb + 1 == nb || ks + 1 == ns || bl[kb + 1] < al[ks + 1];
            if !(crosses && boundary) {
                continue;
            }
            let served = kb.min(fit(prefix_cap[ks]));
            if served > best {
                best = served;
                key_b = kb;
                key_s = ks;
            }
        }
    }
    SortedLists { buyer_order, seller_order, key_b, key_s, bid_avg, ask }
}

pub(crate) fn run(view: &View, lambda: f64, stop: Stop) -> Matching {
    let lists = sort_lists(view, lambda);
    let mut assignment = Assignment::empty(view.sellers.len(), view.buyers.len());
    let mut objectives = Vec::new();
    if lists.key_b == 0 {
        return Matching { assignment, lists, objectives };
    }
    if let Stop::BuyerMatched(n) = stop {
        if !lists.buyer_order[..lists.key_b].contains(&n) {
            return Matching { assignment, lists, objectives };
        }
    }
    if let Stop::SellerMatched(m) = stop {
        if !lists.seller_order[..lists.key_s].contains(&m) {
            return Matching { assignment, lists, objectives };
        }
    }
    let mut remaining: Vec<usize> = lists.buyer_order[..lists.key_b].to_vec();
    for &m in &lists.seller_order[..lists.key_s] {
        let ask = lists.ask[m];
        let eligible: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&n| {
                let bid = view.bids(n)[m];
                bid >= lists.bid_avg[n] - 1e-9 && bid >= ask
            })
            .collect();
        let items: Vec<(u32, f64)> = eligible
            .iter()
            .map(|&n| (view.buyers[n].demand, view.buyers[n].demand as f64 * (view.bids(n)[m] - ask)))
            .collect();
        let (value, chosen) = knapsack::solve(&items, knapsack_capacity(&view.sellers[m], lambda));
        objectives.push((m, value));
        for &i in &chosen {
            assignment.seller_of[eligible[i]] = Some(m);
        }
        remaining.retain(|&n| assignment.seller_of[n].is_none());
        match stop {
            Stop::BuyerMatched(n) if assignment.seller_of[n].is_some() => break,
            Stop::SellerMatched(k) if k == m => break,
            _ => {}
        }
    }
    Matching { assignment, lists, objectives }
}

/// Match buyers to sellers at overbooking rate `lambda`, where each seller
/// offers its expected supply scaled by (1 + lambda).
pub fn member_determination(buyers: &[Buyer], sellers: &[Seller], lambda: f64) -> Matching {
    run(&View::new(buyers, sellers), lambda, Stop::Never)
}
