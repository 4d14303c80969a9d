//! Empirical checks of the auction's economic properties: individual
//! rationality, budget balance, truthfulness probes and the worked example.

use market_model::fixtures::{self, worked_example};
use market_model::utility::{buyer_expected_utility, seller_expected_utility};
use market_model::{Buyer, Contract, MarketConfig, Result, Seller, Trade};
use opdauction::{evaluate_lambda, Stage1Outcome};
use serde::{Deserialize, Serialize};

pub const PROBE_TOL: f64 = 1e-6;
const PRICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Buyer,
    Seller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrCheck {
    pub stage: u8,
    pub party: Party,
    pub index: usize,
    /// Price paid (buyer) or received (seller) per RB.
    pub price: f64,
    /// The report it must not cross: bid for buyers, ask for sellers.
    pub limit: f64,
    pub pass: bool,
}

/// One check per winner: payments never exceed bids, rewards never fall
/// below asks. Stage-I contracts and stage-II trades are checked separately.
pub fn check_ir(buyers: &[Buyer], sellers: &[Seller], contracts: &[Contract], trades: &[Trade]) -> Vec<IrCheck> {
    let mut out = Vec::new();
    let mut push = |stage, n: usize, m: usize, p: f64, r: f64| {
        let bid = buyers[n].bids[m];
        let ask = sellers[m].ask;
        out.push(IrCheck { stage, party: Party::Buyer, index: n, price: p, limit: bid, pass: p <= bid + PRICE_TOL });
        out.push(IrCheck { stage, party: Party::Seller, index: m, price: r, limit: ask, pass: r + PRICE_TOL >= ask });
    };
    for c in contracts {
        push(1, c.buyer, c.seller, c.buyer_price, c.seller_reward);
    }
    for t in trades {
        push(2, t.buyer, t.seller, t.buyer_price, t.seller_price);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub stage1: f64,
    pub stage2: f64,
}

impl BudgetReport {
    pub fn total(&self) -> f64 {
        self.stage1 + self.stage2
    }

    pub fn balanced(&self) -> bool {
        self.stage1 >= -PRICE_TOL && self.stage2 >= -PRICE_TOL
    }
}

/// Auctioneer net per stage when every contract is served: income from
/// buyers minus payouts to sellers.
pub fn check_budget_balance(contracts: &[Contract], trades: &[Trade]) -> BudgetReport {
    let stage1 = contracts.iter().map(|c| c.volume as f64 * (c.buyer_price - c.seller_reward)).sum();
    let stage2 = trades.iter().map(|t| t.volume as f64 * (t.buyer_price - t.seller_price)).sum();
    BudgetReport { stage1, stage2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subject {
    Buyer(usize),
    Seller(usize),
}

impl std::str::FromStr for Subject {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (kind, idx) = s.split_once(':').ok_or_else(|| format!("subject '{s}' is not buyer:IDX or seller:IDX"))?;
        let idx: usize = idx.trim().parse().map_err(|_| format!("bad index in '{s}'"))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "buyer" => Ok(Subject::Buyer(idx)),
            "seller" => Ok(Subject::Seller(idx)),
            _ => Err(format!("unknown subject kind '{kind}'")),
        }
    }
}

impl std::fmt::Display for Subject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subject::Buyer(n) => write!(f, "buyer:{n}"),
            Subject::Seller(m) => write!(f, "seller:{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// A losing subject overstates its value past the critical price and wins.
    LoserOverbid,
    /// The report moved the pivotal indices and with them the critical price.
    PivotShift,
    /// Same pivots, but the subject ends up with a different seller or
    /// member set.
    Reassignment,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub report: f64,
    pub utility: f64,
    pub winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub report: f64,
    pub utility: f64,
    pub gain: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub subject: Subject,
    /// Average valuation for a buyer, unit cost for a seller.
    pub true_value: f64,
    pub lambda: f64,
    pub truthful_utility: f64,
    pub truthful_winner: bool,
    pub sweep: Vec<ProbePoint>,
    pub violations: Vec<Violation>,
}

/// `points` uniform reports over [0, 1.5 x value], always including `value`.
pub fn probe_grid(value: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let hi = 1.5 * value;
    let mut grid: Vec<f64> = (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect();
    if !grid.iter().any(|g| (g - value).abs() < 1e-12) {
        grid.push(value);
        grid.sort_by(f64::total_cmp);
    }
    grid
}

fn subject_value(buyers: &[Buyer], sellers: &[Seller], subject: Subject) -> f64 {
    match subject {
        Subject::Buyer(n) => buyers[n].valuations.iter().sum::<f64>() / buyers[n].valuations.len() as f64,
        Subject::Seller(m) => sellers[m].unit_cost,
    }
}

/// Market with the subject's report set to `report`: a buyer's whole bid
/// vector is its valuations shifted so their mean equals `report`; a seller's
/// ask becomes `report`.
pub fn with_report(buyers: &[Buyer], sellers: &[Seller], subject: Subject, report: f64) -> (Vec<Buyer>, Vec<Seller>) {
    let mut buyers = buyers.to_vec();
    let mut sellers = sellers.to_vec();
    match subject {
        Subject::Buyer(n) => {
            let b = &mut buyers[n];
            let shift = report - subject_value(std::slice::from_ref(b), &[], Subject::Buyer(0));
            b.bids = b.valuations.iter().map(|v| (v + shift).max(0.0)).collect();
        }
        Subject::Seller(m) => sellers[m].ask = report,
    }
    (buyers, sellers)
}

struct Evaluated {
    utility: f64,
    winner: bool,
    /// RBs the subject trades under contract.
    volume: u32,
    pivots: (usize, usize),
    partners: Vec<usize>,
}

/// Expected utility of the subject, valued at its true valuations or cost.
fn subject_utility(buyers: &[Buyer], sellers: &[Seller], outcome: &Stage1Outcome, subject: Subject, mu: f64) -> Result<Evaluated> {
    let (utility, own, partners): (f64, Vec<&Contract>, Vec<usize>) = match subject {
        Subject::Buyer(n) => (
            buyer_expected_utility(buyers, sellers, &outcome.contracts, n, outcome.risk_report.p_n[n], mu)?,
            outcome.contracts.iter().filter(|c| c.buyer == n).collect(),
            outcome.contracts.iter().filter(|c| c.buyer == n).map(|c| c.seller).collect(),
        ),
        Subject::Seller(m) => (
            seller_expected_utility(buyers, sellers, &outcome.contracts, m, &outcome.risk_report.p_n)?,
            outcome.contracts.iter().filter(|c| c.seller == m).collect(),
            outcome.contracts.iter().filter(|c| c.seller == m).map(|c| c.buyer).collect(),
        ),
    };
    Ok(Evaluated {
        utility,
        winner: !own.is_empty(),
        volume: own.iter().map(|c| c.volume).sum(),
        pivots: (outcome.lists.key_b, outcome.lists.key_s),
        partners,
    })
}

/// Replay stage I at a fixed `lambda` for each report in `grid` and compare
/// the subject's expected utility with the one it gets by reporting truthfully.
///
/// Prices come from a bisection with tolerance `cfg.search_tol`, so a gain
/// counts only when it exceeds that resolution times the traded volume.
pub fn probe_truthfulness(
    buyers: &[Buyer],
    sellers: &[Seller],
    cfg: &MarketConfig,
    lambda: f64,
    subject: Subject,
    grid: &[f64],
) -> Result<ProbeReport> {
    let true_value = subject_value(buyers, sellers, subject);
    let evaluate = |report: f64| -> Result<Evaluated> {
        let (b, s) = with_report(buyers, sellers, subject, report);
        let outcome = evaluate_lambda(&b, &s, cfg, lambda)?;
        // Utility is judged against the true market, not the reported one.
        subject_utility(buyers, sellers, &outcome, subject, cfg.penalty_factor)
    };
    let truthful = evaluate(true_value)?;
    let (truthful_utility, truthful_winner) = (truthful.utility, truthful.winner);
    let mut sweep = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    for &report in grid {
        let point = evaluate(report)?;
        let (utility, winner) = (point.utility, point.winner);
        sweep.push(ProbePoint { report, utility, winner });
        let gain = utility - truthful_utility;
        let tol = PROBE_TOL + cfg.search_tol * point.volume.max(truthful.volume) as f64;
        if gain > tol {
            let overstated = match subject {
                Subject::Buyer(_) => report > true_value,
                Subject::Seller(_) => report < true_value,
            };
            let kind = if !truthful_winner && winner && overstated {
                ViolationKind::LoserOverbid
            } else if point.pivots != truthful.pivots {
                ViolationKind::PivotShift
            } else if point.partners != truthful.partners {
                ViolationKind::Reassignment
            } else {
                ViolationKind::Other
            };
            violations.push(Violation { report, utility, gain, kind });
        }
    }
    Ok(ProbeReport { subject, true_value, lambda, truthful_utility, truthful_winner, sweep, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenReport {
    pub checks: Vec<GoldenCheck>,
    pub elapsed_ns: u64,
}

impl GoldenReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn close_all(actual: &[f64], expected: &[f64], tol: f64) -> bool {
    actual.len() == expected.len() && actual.iter().zip(expected).all(|(a, e)| (a - e).abs() <= tol)
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

/// The 5x5 worked example at rate 0.2 against its published results.
pub fn golden_fixture() -> Result<GoldenReport> {
    let start = std::time::Instant::now();
    let market = worked_example();
    let cfg = MarketConfig::default();
    let outcome = evaluate_lambda(&market.buyers, &market.sellers, &cfg, fixtures::LAMBDA)?;
    let mut checks = Vec::new();
    let mut check = |name: &str, expected: String, actual: String, pass: bool| {
        checks.push(GoldenCheck { name: name.to_string(), expected, actual, pass });
    };

    let lists = &outcome.lists;
    check("k_b", "4".into(), lists.key_b.to_string(), lists.key_b == 4);
    check("k_s", "2".into(), lists.key_s.to_string(), lists.key_s == 2);

    let expected_pairs = [Some(2), Some(2), Some(4), Some(4), None];
    let pairs = &outcome.assignment.seller_of;
    let show = |p: &[Option<usize>]| {
        p.iter()
            .enumerate()
            .filter_map(|(n, s)| s.map(|m| format!("b{}->s{}", n + 1, m + 1)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check("matches", show(&expected_pairs), show(pairs), pairs.as_slice() == expected_pairs);

    let objectives: Vec<f64> = outcome.objectives.iter().map(|o| o.1).collect();
    check("objectives", fmt_list(&[5.6, 2.7]), fmt_list(&objectives), close_all(&objectives, &[5.6, 2.7], 1e-9));

    let mut by_buyer = outcome.contracts.clone();
    by_buyer.sort_by_key(|c| c.buyer);
    let payments: Vec<f64> = by_buyer.iter().map(|c| c.buyer_price).collect();
    let pay_expected = [2.07, 2.15, 2.05, 2.02];
    check("payments", fmt_list(&pay_expected), fmt_list(&payments), close_all(&payments, &pay_expected, 0.01));

    let mut rewards: Vec<(usize, f64)> = by_buyer.iter().map(|c| (c.seller, c.seller_reward)).collect();
    rewards.sort_by_key(|r| r.0);
    rewards.dedup_by_key(|r| r.0);
    let rewards: Vec<f64> = rewards.iter().map(|r| r.1).collect();
    let reward_expected = [1.96, 1.98];
    check("rewards", fmt_list(&reward_expected), fmt_list(&rewards), close_all(&rewards, &reward_expected, 0.01));

    let income: f64 = by_buyer.iter().map(|c| c.volume as f64 * c.buyer_price).sum();
    let payout: f64 = by_buyer.iter().map(|c| c.volume as f64 * c.seller_reward).sum();
    let profit = income - payout;
    check("auctioneer_profit", "1.030".into(), format!("{profit:.3}"), (profit - 1.03).abs() <= 0.02);

    let ir = check_ir(&market.buyers, &market.sellers, &outcome.contracts, &[]);
    let ir_ok = ir.iter().all(|c| c.pass);
    check("individual_rationality", "all pass".into(), format!("{} of {} pass", ir.iter().filter(|c| c.pass).count(), ir.len()), ir_ok);

    Ok(GoldenReport { checks, elapsed_ns: start.elapsed().as_nanos() as u64 })
}
