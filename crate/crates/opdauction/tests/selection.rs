use market_model::fixtures::{worked_example, LAMBDA};
use market_model::{Buyer, MarketConfig, Seller};
use opdauction::{evaluate_lambda, overbooking_opt, overbooking_opt_with, run_stage1, select, RiskToggles};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn market(seed: u64, nb: usize, ns: usize, certain: bool) -> (Vec<Buyer>, Vec<Seller>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sellers: Vec<Seller> = (0..ns)
        .map(|id| {
            let ask = rng.gen_range(1.0..3.0);
            let r = if certain { 1.0 } else { rng.gen_range(0.5..1.0) };
            Seller { id, unit_cost: ask, ask, supply_trials: rng.gen_range(3..12), supply_prob: r }
        })
        .collect();
    let buyers = (0..nb)
        .map(|id| {
            let bid = rng.gen_range(1.5..5.0);
            let a = if certain { 1.0 } else { rng.gen_range(0.4..1.0) };
            Buyer { id, demand: rng.gen_range(1..4), valuations: vec![bid * 1.2; ns], bids: vec![bid; ns], attend_prob: a }
        })
        .collect();
    (buyers, sellers)
}

#[test]
fn selection_is_grid_argmax_over_feasible() {
    let off = RiskToggles { brisk: false, vrisk: false, srisk: false };
    for seed in 0..15 {
        let (buyers, sellers) = market(seed, 25, 5, false);
        let mut cfg = MarketConfig::default();
        cfg.xi_v = 0.1 + 0.05 * (seed % 5) as f64;
        let grid = cfg.lambda_grid();
        let candidates: Vec<_> = grid.iter().map(|&l| evaluate_lambda(&buyers, &sellers, &cfg, l).unwrap()).collect();
        for toggles in [RiskToggles::default(), off] {
            let feasible = |c: &opdauction::Stage1Outcome| {
                let r = &c.risk_report;
                let ok = |on: bool, v: f64, xi: f64| !on || v <= xi + 1e-12;
                ok(toggles.brisk, r.max_brisk(), cfg.xi_b) && ok(toggles.vrisk, r.max_vrisk(), cfg.xi_v) && ok(toggles.srisk, r.max_srisk(), cfg.xi_s)
            };
            let mut best: Option<usize> = None;
            for (i, c) in candidates.iter().enumerate() {
                if !feasible(c) {
                    continue;
                }
                best = match best {
                    None => Some(i),
                    Some(j) => {
                        let b = &candidates[j];
                        let key = |o: &opdauction::Stage1Outcome| (o.expected_sw, o.matches());
                        let (ka, kb) = (key(c), key(b));
                        if ka.0 > kb.0 + 1e-9 || ((ka.0 - kb.0).abs() <= 1e-9 && ka.1 > kb.1) {
                            Some(i)
                        } else {
                            Some(j)
                        }
                    }
                };
            }
            assert_eq!(select(&candidates, &cfg, toggles), best, "seed {seed}");
            let chosen = overbooking_opt_with(&buyers, &sellers, &cfg, &grid, toggles).unwrap();
            match best {
                Some(i) => {
                    assert_eq!(chosen.lambda, grid[i]);
                    assert!(!chosen.risk_infeasible);
                }
                None => {
                    assert_eq!(chosen.lambda, 0.0);
                    assert!(chosen.risk_infeasible);
                }
            }
        }
    }
}

#[test]
fn certain_markets_do_not_overbook() {
    for seed in 0..20 {
        let (buyers, sellers) = market(50 + seed, 20, 4, true);
        let out = overbooking_opt(&buyers, &sellers, &MarketConfig::default()).unwrap();
        assert_eq!(out.lambda, 0.0, "seed {seed}");
    }
}

#[test]
fn infeasible_thresholds_fall_back_to_zero() {
    let m = worked_example();
    let cfg = MarketConfig { xi_b: 1e-9, ..MarketConfig::default() };
    let out = run_stage1(&m.buyers, &m.sellers, &cfg).unwrap();
    assert!(out.risk_infeasible);
    assert_eq!(out.lambda, 0.0);
}

#[test]
fn outcome_is_consistent() {
    let m = worked_example();
    let out = evaluate_lambda(&m.buyers, &m.sellers, &MarketConfig::default(), LAMBDA).unwrap();
    assert_eq!(out.matches(), out.assignment.matched());
    for c in &out.contracts {
        assert_eq!(out.assignment.seller_of[c.buyer], Some(c.seller));
        assert_eq!(c.volume, m.buyers[c.buyer].demand);
    }
    let cfg = MarketConfig { xi_s: 2.0, ..MarketConfig::default() };
    assert!(run_stage1(&m.buyers, &m.sellers, &cfg).is_err());
}

#[test]
fn golden_refine_never_worse() {
    for seed in 0..5 {
        let (buyers, sellers) = market(70 + seed, 30, 6, false);
        let cfg = MarketConfig::default();
        let plain = overbooking_opt(&buyers, &sellers, &cfg).unwrap();
        let refined = overbooking_opt(&buyers, &sellers, &MarketConfig { golden_refine: true, ..cfg }).unwrap();
        assert!(refined.expected_sw >= plain.expected_sw - 1e-9);
    }
}
