//! Property suites over seeded random markets: individual rationality,
//! budget balance, truthfulness probes and risk-bound checks.

use std::collections::HashMap;

use market_model::settle::select_served;
use market_model::utility::seller_expected_utility;
use market_model::{Buyer, MarketConfig, Seller};
use mechanism_verify::{check_budget_balance, check_ir, probe_grid, probe_truthfulness, Subject, ViolationKind};
use opdauction::{evaluate_lambda, run_stage1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbdauction::run_transaction;
use serde::{Deserialize, Serialize};

use crate::experiment::trial_realization;
use crate::scenario::{generate_market, Ranges, SizeSpec};
use crate::HarnessError;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    pub markets: usize,
    pub max_buyers: usize,
    pub max_sellers: usize,
    pub seed: u64,
}

impl Default for EconomicParams {
    fn default() -> Self {
        EconomicParams { markets: 1000, max_buyers: 200, max_sellers: 25, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicReport {
    pub markets: usize,
    pub ir_checks: usize,
    pub ir_violations: Vec<String>,
    pub budget_violations: Vec<String>,
    pub min_stage1_net: f64,
    pub min_stage2_net: f64,
    pub min_realized_net: f64,
}

impl EconomicReport {
    pub fn ir_pass(&self) -> bool {
        self.ir_violations.is_empty()
    }

    pub fn budget_pass(&self) -> bool {
        self.budget_violations.is_empty()
    }
}

/// Random market size with buyers in [10, max_buyers] and sellers in
/// [2, max_sellers].
pub fn random_size<R: Rng>(rng: &mut R, max_buyers: usize, max_sellers: usize) -> SizeSpec {
    SizeSpec {
        buyers: rng.gen_range(10.min(max_buyers)..=max_buyers),
        sellers: rng.gen_range(2.min(max_sellers)..=max_sellers),
    }
}

/// Full two-stage pipeline on random markets, one realization each.
pub fn economic_sweep(params: &EconomicParams, cfg: &MarketConfig) -> Result<EconomicReport, HarnessError> {
    let mut report = EconomicReport {
        markets: params.markets,
        ir_checks: 0,
        ir_violations: Vec::new(),
        budget_violations: Vec::new(),
        min_stage1_net: f64::INFINITY,
        min_stage2_net: f64::INFINITY,
        min_realized_net: f64::INFINITY,
    };
    for i in 0..params.markets {
        let mut rng = rng_for(params.seed, i as u64);
        let size = random_size(&mut rng, params.max_buyers, params.max_sellers);
        let market = generate_market(size, rng.gen(), &Ranges::default());
        let (buyers, sellers) = (&market.buyers, &market.sellers);
        let stage1 = run_stage1(buyers, sellers, cfg)?;
        let realization = trial_realization(buyers, sellers, params.seed, i);
        let tx = run_transaction(&stage1, buyers, sellers, &realization, cfg, true)?;
        let trades = tx.stage2.as_ref().map_or(&[][..], |s| &s.trades[..]);

        let ir = check_ir(buyers, sellers, &stage1.contracts, trades);
        report.ir_checks += ir.len();
        for c in ir.iter().filter(|c| !c.pass) {
            report.ir_violations.push(format!(
                "market {i} ({size}) stage {} {:?} {}: price {:.6} vs report {:.6}",
                c.stage, c.party, c.index, c.price, c.limit
            ));
        }
        let bb = check_budget_balance(&stage1.contracts, trades);
        let realized = tx.settlement.cashflows.auctioneer + bb.stage2;
        report.min_stage1_net = report.min_stage1_net.min(bb.stage1);
        report.min_stage2_net = report.min_stage2_net.min(bb.stage2);
        report.min_realized_net = report.min_realized_net.min(realized);
        if !bb.balanced() || realized < -1e-9 {
            report.budget_violations.push(format!(
                "market {i} ({size}): stage1 {:.6} stage2 {:.6} realized {:.6}",
                bb.stage1, bb.stage2, realized
            ));
        }
    }
    if params.markets == 0 {
        report.min_stage1_net = 0.0;
        report.min_stage2_net = 0.0;
        report.min_realized_net = 0.0;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub markets: usize,
    pub subjects: usize,
    pub points: usize,
    pub size: SizeSpec,
    pub seed: u64,
}

impl Default for TruthParams {
    fn default() -> Self {
        TruthParams { markets: 100, subjects: 5, points: 31, size: SizeSpec { buyers: 40, sellers: 8 }, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedViolation {
    pub market: usize,
    pub subject: Subject,
    pub true_value: f64,
    pub report: f64,
    pub gain: f64,
    pub truthful_winner: bool,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub probes: usize,
    pub subjects: usize,
    pub violations: Vec<LoggedViolation>,
}

impl TruthReport {
    pub fn rate(&self) -> f64 {
        if self.probes == 0 {
            0.0
        } else {
            self.violations.len() as f64 / self.probes as f64
        }
    }

    pub fn undocumented(&self) -> usize {
        self.violations.iter().filter(|v| v.kind != ViolationKind::LoserOverbid).count()
    }

    pub fn pass(&self) -> bool {
        self.rate() <= 0.01 && self.undocumented() == 0
    }
}

/// Misreport sweeps for random subjects; the rate is fixed at the one the
/// optimizer picks under truthful reports.
pub fn truthfulness_sweep(params: &TruthParams, cfg: &MarketConfig) -> Result<TruthReport, HarnessError> {
    let mut report = TruthReport { probes: 0, subjects: 0, violations: Vec::new() };
    for i in 0..params.markets {
        let mut rng = rng_for(params.seed, i as u64);
        let market = generate_market(params.size, rng.gen(), &Ranges::default());
        let (buyers, sellers) = (&market.buyers, &market.sellers);
        let lambda = run_stage1(buyers, sellers, cfg)?.lambda;
        for k in 0..params.subjects {
            let subject = if k % 2 == 0 {
                Subject::Buyer(rng.gen_range(0..buyers.len()))
            } else {
                Subject::Seller(rng.gen_range(0..sellers.len()))
            };
            let value = match subject {
                Subject::Buyer(n) => buyers[n].valuations.iter().sum::<f64>() / buyers[n].valuations.len() as f64,
                Subject::Seller(m) => sellers[m].unit_cost,
            };
            let grid = probe_grid(value, params.points);
            let probe = probe_truthfulness(buyers, sellers, cfg, lambda, subject, &grid)?;
            report.subjects += 1;
            report.probes += probe.sweep.iter().filter(|p| (p.report - value).abs() > 1e-12).count();
            for v in &probe.violations {
                report.violations.push(LoggedViolation {
                    market: i,
                    subject,
                    true_value: value,
                    report: v.report,
                    gain: v.gain,
                    truthful_winner: probe.truthful_winner,
                    kind: v.kind,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub instances: usize,
    pub samples: usize,
    pub max_members: usize,
    pub seed: u64,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams { instances: 200, samples: 1_000_000, max_members: 8, seed: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskComparison {
    pub instance: usize,
    /// "p_n:<buyer>" or "srisk:<seller>".
    pub quantity: String,
    pub exact: f64,
    pub monte_carlo: f64,
    pub se: f64,
}

impl RiskComparison {
    pub fn z(&self) -> f64 {
        let d = (self.monte_carlo - self.exact).abs();
        if self.se > 0.0 {
            d / self.se
        } else if d < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub instance: usize,
    pub seller: usize,
    pub exact: f64,
    pub approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBoundReport {
    pub instances: usize,
    pub sellers_checked: usize,
    /// Sellers where the closed form is valid.
    pub valid: Vec<DirectionCheck>,
    pub direction_failures: usize,
    pub invalid: usize,
    pub comparisons: Vec<RiskComparison>,
}

impl RiskBoundReport {
    pub fn beyond(&self, z: f64) -> usize {
        self.comparisons.iter().filter(|c| c.z() > z).count()
    }

    pub fn direction_pass(&self) -> bool {
        self.direction_failures == 0
    }

    /// Exceedances of 3 standard errors no more frequent than 1% (chance
    /// alone gives 0.27%) and none beyond 5.
    pub fn monte_carlo_pass(&self) -> bool {
        let n = self.comparisons.len().max(1) as f64;
        (self.beyond(3.0) as f64) / n <= 0.01 && self.beyond(5.0) == 0
    }
}

fn small_instance(rng: &mut ChaCha8Rng) -> (Vec<Buyer>, Vec<Seller>) {
    let size = SizeSpec { buyers: rng.gen_range(3..=14), sellers: rng.gen_range(1..=3) };
    let ranges = Ranges { supply_trials: (1, 24), supply_prob: (0.3, 1.0), ..Ranges::default() };
    let m = generate_market(size, rng.gen(), &ranges);
    (m.buyers, m.sellers)
}

/// Monte Carlo settlement of one seller's members: conditional denial
/// frequency per member and Pr(U_m <= threshold).
struct SellerSim<'a> {
    members: Vec<usize>,
    buyers: &'a [Buyer],
    seller: &'a Seller,
    m: usize,
    cache: HashMap<(u32, u32), Vec<bool>>,
}

impl<'a> SellerSim<'a> {
    fn served(&mut self, mask: u32, supply: u32) -> &Vec<bool> {
        let (members, buyers, m) = (&self.members, self.buyers, self.m);
        self.cache.entry((mask, supply)).or_insert_with(|| {
            let present: Vec<usize> = (0..members.len()).filter(|i| mask >> i & 1 == 1).collect();
            let items: Vec<(u32, f64)> =
                present.iter().map(|&i| (buyers[members[i]].demand, buyers[members[i]].bids[m])).collect();
            let flags = select_served(&items, supply);
            let mut out = vec![false; members.len()];
            for (j, &i) in present.iter().enumerate() {
                out[i] = flags[j];
            }
            out
        })
    }
}

/// Exact risk values against the approximations and against simulation.
pub fn risk_bound_sweep(params: &RiskParams, cfg: &MarketConfig) -> Result<RiskBoundReport, HarnessError> {
    let mut report = RiskBoundReport {
        instances: 0,
        sellers_checked: 0,
        valid: Vec::new(),
        direction_failures: 0,
        invalid: 0,
        comparisons: Vec::new(),
    };
    let grid = cfg.lambda_grid();
    let mut attempt = 0u64;
    while report.instances < params.instances {
        let mut rng = rng_for(params.seed, attempt);
        attempt += 1;
        let (buyers, sellers) = small_instance(&mut rng);
        let lambda = grid[rng.gen_range(0..grid.len())];
        let outcome = evaluate_lambda(&buyers, &sellers, cfg, lambda)?;
        let rosters: Vec<(usize, Vec<usize>)> = (0..sellers.len())
            .map(|m| (m, outcome.assignment.members(m)))
            .filter(|(_, r)| !r.is_empty() && r.len() <= params.max_members)
            .collect();
        if rosters.is_empty() {
            continue;
        }
        let instance = report.instances;
        report.instances += 1;
        let mut p_exact = vec![0.0; buyers.len()];
        for (_, roster) in &rosters {
            for &n in roster {
                p_exact[n] = risk::p_n_exact(n, &outcome.assignment, &buyers, &sellers)?;
            }
        }
        for (m, roster) in rosters {
            report.sellers_checked += 1;
            let exact = risk::srisk_exact(m, &outcome.contracts, &outcome.assignment, &buyers, &sellers, cfg.xi2)?;
            if outcome.risk_report.s_valid[m] {
                let approx = outcome.risk_report.srisk[m];
                if exact > approx + 1e-9 {
                    report.direction_failures += 1;
                }
                report.valid.push(DirectionCheck { instance, seller: m, exact, approx });
            } else {
                report.invalid += 1;
            }
            if params.samples == 0 {
                continue;
            }
            let threshold = cfg.xi2 * seller_expected_utility(&buyers, &sellers, &outcome.contracts, m, &p_exact)?;
            let contracts: Vec<_> = roster
                .iter()
                .map(|&n| outcome.contracts.iter().find(|c| c.buyer == n).expect("member has a contract").clone())
                .collect();
            let mut sim = SellerSim { members: roster.clone(), buyers: &buyers, seller: &sellers[m], m, cache: HashMap::new() };
            let mut mc = rng_for(params.seed ^ 0x5eed, attempt * 64 + m as u64);
            let mut attended = vec![0u64; roster.len()];
            let mut denied = vec![0u64; roster.len()];
            let mut low = 0u64;
            for _ in 0..params.samples {
                let mut mask = 0u32;
                for (i, &n) in roster.iter().enumerate() {
                    if mc.gen::<f64>() < buyers[n].attend_prob {
                        mask |= 1 << i;
                    }
                }
                let s = sim.seller;
                let supply = (0..s.supply_trials).filter(|_| mc.gen::<f64>() < s.supply_prob).count() as u32;
                let cost = s.unit_cost;
                let served = sim.served(mask, supply);
                let mut u = 0.0;
                for (i, c) in contracts.iter().enumerate() {
                    let t = c.volume as f64;
                    if mask >> i & 1 == 0 {
                        u += t * c.penalty_b2s;
                        continue;
                    }
                    attended[i] += 1;
                    if served[i] {
                        u += t * (c.seller_reward - cost);
                    } else {
                        denied[i] += 1;
                        u -= t * c.penalty_s2b;
                    }
                }
                if u <= threshold + 1e-12 {
                    low += 1;
                }
            }
            let se = |p: f64, k: u64| if k == 0 { 0.0 } else { (p * (1.0 - p) / k as f64).sqrt() };
            for (i, &n) in roster.iter().enumerate() {
                if attended[i] == 0 {
                    continue;
                }
                let freq = denied[i] as f64 / attended[i] as f64;
                report.comparisons.push(RiskComparison {
                    instance,
                    quantity: format!("p_n:{n}"),
                    exact: p_exact[n],
                    monte_carlo: freq,
                    se: se(p_exact[n], attended[i]),
                });
            }
            let freq = low as f64 / params.samples as f64;
            report.comparisons.push(RiskComparison {
                instance,
                quantity: format!("srisk:{m}"),
                exact,
                monte_carlo: freq,
                se: se(exact, params.samples as u64),
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub economic: EconomicParams,
    pub truth: TruthParams,
    pub risk: RiskParams,
}

impl VerifyParams {
    /// A smaller run of every suite, for routine checks.
    pub fn quick(seed: u64) -> Self {
        VerifyParams {
            economic: EconomicParams { markets: 100, max_buyers: 100, max_sellers: 15, seed },
            truth: TruthParams { markets: 20, seed: seed.wrapping_add(1), ..TruthParams::default() },
            risk: RiskParams { instances: 50, samples: 100_000, seed: seed.wrapping_add(2), ..RiskParams::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
    pub economic: EconomicReport,
    pub truthfulness: TruthReport,
    pub risk: RiskBoundReport,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }
}

pub fn verify_all(params: &VerifyParams, cfg: &MarketConfig) -> Result<VerifyReport, HarnessError> {
    cfg.validate()?;
    let economic = economic_sweep(&params.economic, cfg)?;
    let truthfulness = truthfulness_sweep(&params.truth, cfg)?;
    let risk = risk_bound_sweep(&params.risk, cfg)?;
    let suites = vec![
        SuiteResult {
            name: "individual_rationality".into(),
            pass: economic.ir_pass(),
            detail: format!("{} checks over {} markets, {} violations", economic.ir_checks, economic.markets, economic.ir_violations.len()),
        },
        SuiteResult {
            name: "budget_balance".into(),
            pass: economic.budget_pass(),
            detail: format!(
                "min net stage1 {:.4}, stage2 {:.4}, realized {:.4}",
                economic.min_stage1_net, economic.min_stage2_net, economic.min_realized_net
            ),
        },
        SuiteResult {
            name: "truthfulness".into(),
            pass: truthfulness.pass(),
            detail: format!(
                "{} violations in {} probes ({:.3}%), {} outside the loser-overbid case",
                truthfulness.violations.len(),
                truthfulness.probes,
                100.0 * truthfulness.rate(),
                truthfulness.undocumented()
            ),
        },
        SuiteResult {
            name: "risk_bound_direction".into(),
            pass: risk.direction_pass(),
            detail: format!(
                "{} of {} valid sellers with exact > approx ({} invalid)",
                risk.direction_failures,
                risk.valid.len(),
                risk.invalid
            ),
        },
        SuiteResult {
            name: "risk_monte_carlo".into(),
            pass: risk.monte_carlo_pass(),
            detail: format!(
                "{} comparisons, {} beyond 3 SE, {} beyond 5 SE",
                risk.comparisons.len(),
                risk.beyond(3.0),
                risk.beyond(5.0)
            ),
        },
    ];
    Ok(VerifyReport { suites, economic, truthfulness, risk })
}
