//! Random market generation over the experiment parameter ranges, and the
//! attendance-trace loader.

use std::collections::BTreeMap;
use std::path::Path;

use baselines::MechanismId;
use market_model::{Buyer, Market, MarketConfig, Seller};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeSpec {
    pub buyers: usize,
    pub sellers: usize,
}

impl std::str::FromStr for SizeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (b, m) = s.split_once('x').ok_or_else(|| format!("size '{s}' is not of the form BxS"))?;
        let buyers = b.trim().parse().map_err(|_| format!("bad buyer count in '{s}'"))?;
        let sellers = m.trim().parse().map_err(|_| format!("bad seller count in '{s}'"))?;
        if buyers == 0 || sellers == 0 {
            return Err(format!("size '{s}' must be positive"));
        }
        Ok(SizeSpec { buyers, sellers })
    }
}

impl std::fmt::Display for SizeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.buyers, self.sellers)
    }
}

/// Parameter ranges for generated markets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranges {
    pub demand: (u32, u32),
    pub valuation: (f64, f64),
    /// Per-seller multiplicative spread around a buyer's base valuation.
    pub valuation_spread: f64,
    pub bid_factor: (f64, f64),
    pub attend: (f64, f64),
    pub supply_trials: (u32, u32),
    pub supply_prob: (f64, f64),
    pub cost: (f64, f64),
    pub ask_factor: (f64, f64),
}

impl Default for Ranges {
    fn default() -> Self {
        Ranges {
            demand: (1, 10),
            valuation: (0.0, 10.0),
            valuation_spread: 0.2,
            bid_factor: (0.7, 1.0),
            attend: (0.5, 1.0),
            supply_trials: (1, 100),
            supply_prob: (0.0, 1.0),
            cost: (0.0, 10.0),
            ask_factor: (1.0, 1.3),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

pub fn generate_market(size: SizeSpec, seed: u64, ranges: &Ranges) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sellers: Vec<Seller> = (0..size.sellers)
        .map(|id| {
            let unit_cost = uniform(&mut rng, ranges.cost);
            let ask = unit_cost * uniform(&mut rng, ranges.ask_factor);
            Seller {
                id,
                unit_cost,
                ask,
                supply_trials: rng.gen_range(ranges.supply_trials.0..=ranges.supply_trials.1),
                supply_prob: uniform(&mut rng, ranges.supply_prob),
            }
        })
        .collect();
    let (vlo, vhi) = ranges.valuation;
    let buyers = (0..size.buyers)
        .map(|id| {
            let demand = rng.gen_range(ranges.demand.0..=ranges.demand.1).max(1);
            let base = uniform(&mut rng, ranges.valuation);
            let s = ranges.valuation_spread;
            let valuations: Vec<f64> =
                (0..size.sellers).map(|_| (base * uniform(&mut rng, (1.0 - s, 1.0 + s))).clamp(vlo, vhi)).collect();
            let bids = valuations.iter().map(|v| v * uniform(&mut rng, ranges.bid_factor)).collect();
            let attend_prob = uniform(&mut rng, ranges.attend);
            Buyer { id, demand, valuations, bids, attend_prob }
        })
        .collect();
    Market::new(buyers, sellers).expect("generated market is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub market: Market,
    pub config: MarketConfig,
    pub trials: usize,
    pub mechanisms: Vec<MechanismId>,
}

pub fn generate_scenario(size: SizeSpec, seed: u64, config: MarketConfig, trials: usize, mechanisms: Vec<MechanismId>) -> Scenario {
    Scenario { market: generate_market(size, seed, &Ranges::default()), config, trials, mechanisms }
}

/// Per-buyer attendance probabilities from a CSV trace, either
/// `buyer_id,prob` rows or `buyer_id,slot,attended` rows (empirical
/// frequency per buyer).
pub fn load_attendance_trace(path: &Path) -> Result<BTreeMap<usize, f64>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut counts: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let parse_err = |line: usize, what: &str| HarnessError::Trace(format!("row {line}: {what}"));
    match headers.len() {
        2 => {
            let mut out = BTreeMap::new();
            for (i, rec) in reader.records().enumerate() {
                let rec = rec?;
                let id: usize = rec[0].parse().map_err(|_| parse_err(i + 2, "bad buyer_id"))?;
                let p: f64 = rec[1].parse().map_err(|_| parse_err(i + 2, "bad prob"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(parse_err(i + 2, "prob outside [0,1]"));
                }
                out.insert(id, p);
            }
            Ok(out)
        }
        3 => {
            for (i, rec) in reader.records().enumerate() {
                let rec = rec?;
                let id: usize = rec[0].parse().map_err(|_| parse_err(i + 2, "bad buyer_id"))?;
                let hit = match rec[2].to_ascii_lowercase().as_str() {
                    "1" | "true" => 1.0,
                    "0" | "false" => 0.0,
                    _ => return Err(parse_err(i + 2, "attended must be 0/1")),
                };
                let e = counts.entry(id).or_insert((0.0, 0.0));
                e.0 += hit;
                e.1 += 1.0;
            }
            Ok(counts.into_iter().map(|(id, (hits, n))| (id, hits / n)).collect())
        }
        k => Err(HarnessError::Trace(format!("expected 2 or 3 columns, found {k}"))),
    }
}

/// Overwrite attendance probabilities of buyers present in `trace`.
pub fn apply_trace(market: &mut Market, trace: &BTreeMap<usize, f64>) {
    for b in &mut market.buyers {
        if let Some(&p) = trace.get(&b.id) {
            b.attend_prob = p;
        }
    }
}
