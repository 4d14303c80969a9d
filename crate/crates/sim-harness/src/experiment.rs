//! Paired Monte Carlo trials and summary statistics.

use std::collections::BTreeMap;
use std::time::Instant;

use baselines::{prepare_stage1, run_mechanism, MechanismId};
use market_model::{sample_realization_with, Buyer, Realization, Seller};
use opdauction::Stage1Outcome;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub mechanism: MechanismId,
    pub sw: f64,
    pub expected_sw: f64,
    pub time_ns: u64,
    pub matches: usize,
    pub volunteers: usize,
    pub lambda: f64,
}

/// Stage-I work done once per contract-based mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Record {
    pub mechanism: MechanismId,
    pub lambda: f64,
    pub expected_sw: f64,
    pub contracts: usize,
    pub risk_infeasible: bool,
    pub stage1_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub stage1: Vec<Stage1Record>,
}

/// Realization of trial `trial`: one ChaCha stream per trial, so every
/// mechanism and every worker sees the same draw.
pub fn trial_realization(buyers: &[Buyer], sellers: &[Seller], seed: u64, trial: usize) -> Realization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    sample_realization_with(buyers, sellers, &mut rng)
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn run_experiment(scenario: &Scenario) -> Result<Experiment, HarnessError> {
    run_experiment_with(scenario, default_threads())
}

pub fn run_experiment_with(scenario: &Scenario, threads: usize) -> Result<Experiment, HarnessError> {
    scenario.config.validate()?;
    let buyers = &scenario.market.buyers;
    let sellers = &scenario.market.sellers;
    let cfg = &scenario.config;

    let mut stage1: BTreeMap<MechanismId, Stage1Outcome> = BTreeMap::new();
    let mut stage1_records = Vec::new();
    for &id in &scenario.mechanisms {
        let start = Instant::now();
        if let Some(o) = prepare_stage1(id, buyers, sellers, cfg)? {
            stage1_records.push(Stage1Record {
                mechanism: id,
                lambda: o.lambda,
                expected_sw: o.expected_sw,
                contracts: o.contracts.len(),
                risk_infeasible: o.risk_infeasible,
                stage1_ns: start.elapsed().as_nanos() as u64,
            });
            stage1.insert(id, o);
        }
    }

    let run_trial = |trial: usize| -> Result<Vec<TrialRecord>, HarnessError> {
        let realization = trial_realization(buyers, sellers, cfg.seed, trial);
        scenario
            .mechanisms
            .iter()
            .map(|&id| {
                let r = run_mechanism(id, stage1.get(&id), buyers, sellers, &realization, cfg)?;
                Ok(TrialRecord {
                    trial,
                    mechanism: id,
                    sw: r.sw,
                    expected_sw: r.expected_sw,
                    time_ns: r.time_ns,
                    matches: r.matches,
                    volunteers: r.volunteers,
                    lambda: r.lambda,
                })
            })
            .collect()
    };

    let threads = threads.clamp(1, scenario.trials.max(1));
    let mut records = Vec::with_capacity(scenario.trials * scenario.mechanisms.len());
    if threads == 1 {
        for t in 0..scenario.trials {
            records.extend(run_trial(t)?);
        }
    } else {
        let chunks: Vec<Result<Vec<TrialRecord>, HarnessError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let run_trial = &run_trial;
                    s.spawn(move || {
                        let mut out = Vec::new();
                        for t in (w..scenario.trials).step_by(threads) {
                            out.extend(run_trial(t)?);
                        }
                        Ok(out)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
        });
        for c in chunks {
            records.extend(c?);
        }
    }
    let order: BTreeMap<MechanismId, usize> = scenario.mechanisms.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    records.sort_by_key(|r| (r.trial, order[&r.mechanism]));
    Ok(Experiment { records, stage1: stage1_records })
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSummary {
    pub mechanism: MechanismId,
    pub trials: usize,
    pub mean_sw: f64,
    pub se_sw: f64,
    pub mean_expected_sw: f64,
    pub mean_time_ns: f64,
    pub se_time_ns: f64,
    pub mean_matches: f64,
    pub mean_volunteers: f64,
    pub lambda: f64,
    /// Percent decision-time reduction against CRDAuction, when present.
    pub time_reduction_pct: Option<f64>,
}

/// Paired difference `a - b` of realized SW over shared trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub a: MechanismId,
    pub b: MechanismId,
    pub mean: f64,
    pub se: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mechanisms: Vec<MechanismSummary>,
    pub paired_vs_twos: Vec<PairedDiff>,
}

impl Summary {
    pub fn get(&self, id: MechanismId) -> Option<&MechanismSummary> {
        self.mechanisms.iter().find(|m| m.mechanism == id)
    }
}

fn by_mechanism(records: &[TrialRecord]) -> BTreeMap<MechanismId, BTreeMap<usize, &TrialRecord>> {
    let mut out: BTreeMap<MechanismId, BTreeMap<usize, &TrialRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.mechanism).or_default().insert(r.trial, r);
    }
    out
}

pub fn paired_diff(records: &[TrialRecord], a: MechanismId, b: MechanismId) -> Option<PairedDiff> {
    let groups = by_mechanism(records);
    let (ra, rb) = (groups.get(&a)?, groups.get(&b)?);
    let diffs: Vec<f64> = ra.iter().filter_map(|(t, x)| rb.get(t).map(|y| x.sw - y.sw)).collect();
    if diffs.is_empty() {
        return None;
    }
    let (mean, se) = mean_se(&diffs);
    Some(PairedDiff { a, b, mean, se, trials: diffs.len() })
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let groups = by_mechanism(records);
    let crd_time = groups.get(&MechanismId::CRDAuction).map(|g| {
        let t: Vec<f64> = g.values().map(|r| r.time_ns as f64).collect();
        mean_se(&t).0
    });
    let mechanisms = groups
        .iter()
        .map(|(&id, g)| {
            let col = |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> { g.values().map(|r| f(r)).collect() };
            let (mean_sw, se_sw) = mean_se(&col(&|r| r.sw));
            let (mean_time_ns, se_time_ns) = mean_se(&col(&|r| r.time_ns as f64));
            let time_reduction_pct = match crd_time {
                Some(c) if c > 0.0 && id != MechanismId::CRDAuction => Some(100.0 * (1.0 - mean_time_ns / c)),
                _ => None,
            };
            MechanismSummary {
                mechanism: id,
                trials: g.len(),
                mean_sw,
                se_sw,
                mean_expected_sw: mean_se(&col(&|r| r.expected_sw)).0,
                mean_time_ns,
                se_time_ns,
                mean_matches: mean_se(&col(&|r| r.matches as f64)).0,
                mean_volunteers: mean_se(&col(&|r| r.volunteers as f64)).0,
                lambda: mean_se(&col(&|r| r.lambda)).0,
                time_reduction_pct,
            }
        })
        .collect();
    let paired_vs_twos = groups
        .keys()
        .filter(|&&id| id != MechanismId::TwoSAuction)
        .filter_map(|&id| paired_diff(records, MechanismId::TwoSAuction, id))
        .collect();
    Summary { mechanisms, paired_vs_twos }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: crate::scenario::SizeSpec,
    pub trials: usize,
    pub twos_ns: f64,
    pub twos_se_ns: f64,
    pub crd_ns: f64,
    pub crd_se_ns: f64,
    pub stage1_ns: u64,
    pub reduction_pct: f64,
}

/// Per-transaction decision time of TwoSAuction against CRDAuction at each
/// size. Trials run on one thread so timings are not contended.
pub fn bench_time(
    sizes: &[crate::scenario::SizeSpec],
    trials: usize,
    seed: u64,
    cfg: &market_model::MarketConfig,
) -> Result<Vec<BenchRow>, HarnessError> {
    let mechanisms = vec![MechanismId::TwoSAuction, MechanismId::CRDAuction];
    sizes
        .iter()
        .map(|&size| {
            let scenario = crate::scenario::generate_scenario(size, seed, cfg.clone(), trials, mechanisms.clone());
            let exp = run_experiment_with(&scenario, 1)?;
            let summary = summarize(&exp.records);
            let two = summary.get(MechanismId::TwoSAuction).expect("TwoSAuction ran");
            let crd = summary.get(MechanismId::CRDAuction).expect("CRDAuction ran");
            Ok(BenchRow {
                size,
                trials,
                twos_ns: two.mean_time_ns,
                twos_se_ns: two.se_time_ns,
                crd_ns: crd.mean_time_ns,
                crd_se_ns: crd.se_time_ns,
                stage1_ns: exp.stage1.iter().map(|s| s.stage1_ns).sum(),
                reduction_pct: two.time_reduction_pct.unwrap_or(0.0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, SizeSpec};
    use market_model::MarketConfig;

    fn rec(trial: usize, mechanism: MechanismId, sw: f64, time_ns: u64) -> TrialRecord {
        TrialRecord { trial, mechanism, sw, expected_sw: 1.0, time_ns, matches: 2, volunteers: 1, lambda: 0.1 }
    }

    #[test]
    fn mean_and_standard_error() {
        assert_eq!(mean_se(&[]), (0.0, 0.0));
        assert_eq!(mean_se(&[3.0]), (3.0, 0.0));
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summary_by_hand() {
        use MechanismId::*;
        let records = vec![
            rec(0, TwoSAuction, 10.0, 100),
            rec(0, CRDAuction, 8.0, 1000),
            rec(1, TwoSAuction, 12.0, 300),
            rec(1, CRDAuction, 7.0, 3000),
            rec(2, CRDAuction, 9.0, 2000),
        ];
        let s = summarize(&records);
        let two = s.get(TwoSAuction).unwrap();
        assert_eq!((two.trials, two.mean_sw, two.mean_time_ns), (2, 11.0, 200.0));
        assert!((two.time_reduction_pct.unwrap() - 90.0).abs() < 1e-9);
        let crd = s.get(CRDAuction).unwrap();
        assert_eq!((crd.mean_sw, crd.time_reduction_pct), (8.0, None));
        let d = paired_diff(&records, TwoSAuction, CRDAuction).unwrap();
        // trials 0 and 1 only: diffs 2 and 5
        assert_eq!((d.trials, d.mean), (2, 3.5));
        assert!((d.se - 1.5).abs() < 1e-12);
        assert_eq!(s.paired_vs_twos, vec![d]);
        assert!(paired_diff(&records, TwoSAuction, VRAuction).is_none());
    }

    #[test]
    fn trial_streams() {
        let sc = generate_scenario(SizeSpec { buyers: 50, sellers: 8 }, 1, MarketConfig::default(), 1, vec![]);
        let (b, s) = (&sc.market.buyers, &sc.market.sellers);
        assert_eq!(trial_realization(b, s, 7, 3), trial_realization(b, s, 7, 3));
        assert_ne!(trial_realization(b, s, 7, 3), trial_realization(b, s, 7, 4));
        assert_ne!(trial_realization(b, s, 7, 3), trial_realization(b, s, 8, 3));
    }

    #[test]
    fn threads_do_not_change_results() {
        use MechanismId::*;
        let mechanisms = vec![TwoSAuction, CRDAuction, SSPDAuction, VRAuction];
        let sc = generate_scenario(SizeSpec { buyers: 40, sellers: 6 }, 2, MarketConfig::default(), 7, mechanisms.clone());
        let strip = |e: Experiment| -> Vec<TrialRecord> { e.records.into_iter().map(|r| TrialRecord { time_ns: 0, ..r }).collect() };
        let one = strip(run_experiment_with(&sc, 1).unwrap());
        let three = strip(run_experiment_with(&sc, 3).unwrap());
        assert_eq!(one, three);
        assert_eq!(one.len(), 7 * mechanisms.len());
        for (i, r) in one.iter().enumerate() {
            assert_eq!((r.trial, r.mechanism), (i / 4, mechanisms[i % 4]));
        }
        // SSPD settles the same contracts on the same draw, minus the backup
        for t in one.chunks(4) {
            assert!(t[0].sw >= t[2].sw - 1e-9);
            assert_eq!(t[0].volunteers, t[2].volunteers);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = MarketConfig { xi_b: 0.0, ..MarketConfig::default() };
        let sc = generate_scenario(SizeSpec { buyers: 5, sellers: 2 }, 1, cfg, 2, vec![MechanismId::CRDAuction]);
        assert!(run_experiment(&sc).unwrap_err().is_config());
    }
}
