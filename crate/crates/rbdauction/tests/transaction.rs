use market_model::sample::sample_realization;
use market_model::utility::{auctioneer_utility, buyer_utility, seller_utility, social_welfare};
use market_model::{Buyer, MarketConfig, Realization, Seller};
use opdauction::run_stage1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbdauction::*;

fn market(seed: u64, nb: usize, ns: usize) -> (Vec<Buyer>, Vec<Seller>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sellers: Vec<Seller> = (0..ns)
        .map(|id| {
            let ask = rng.gen_range(1.0..3.0);
            Seller { id, unit_cost: ask * 0.9, ask, supply_trials: rng.gen_range(3..12), supply_prob: rng.gen_range(0.4..1.0) }
        })
        .collect();
    let buyers = (0..nb)
        .map(|id| {
            let base = rng.gen_range(1.5..5.0);
            let bids: Vec<f64> = (0..ns).map(|_| base + rng.gen_range(-0.3..0.3)).collect();
            let valuations = bids.iter().map(|b| b * 1.15).collect();
            Buyer { id, demand: rng.gen_range(1..4), valuations, bids, attend_prob: rng.gen_range(0.4..1.0) }
        })
        .collect();
    (buyers, sellers)
}

struct Case {
    buyers: Vec<Buyer>,
    sellers: Vec<Seller>,
    cfg: MarketConfig,
    stage1: opdauction::Stage1Outcome,
    real: Realization,
}

fn cases() -> impl Iterator<Item = Case> {
    (0..40).map(|seed| {
        let (buyers, sellers) = market(seed, 10 + seed as usize % 30, 2 + seed as usize % 5);
        let cfg = MarketConfig::default();
        let stage1 = run_stage1(&buyers, &sellers, &cfg).unwrap();
        let real = sample_realization(&buyers, &sellers, seed * 7 + 1);
        Case { buyers, sellers, cfg, stage1, real }
    })
}

#[test]
fn settlement_partitions_members_and_respects_supply() {
    for c in cases() {
        let s = settle(&c.buyers, &c.sellers, &c.stage1.contracts, &c.real, c.cfg.penalty_factor);
        let mut seen = vec![0; c.buyers.len()];
        for &(_, n) in &s.served_pairs {
            seen[n] += 1;
        }
        for &n in s.volunteers.iter().chain(&s.absent) {
            seen[n] += 1;
        }
        for n in 0..c.buyers.len() {
            let member = c.stage1.assignment.seller_of[n].is_some();
            assert_eq!(seen[n], member as i32);
            if member {
                assert_eq!(c.real.attended[n], !s.absent.contains(&n));
            }
        }
        for m in 0..c.sellers.len() {
            let used: u32 = s.served_pairs.iter().filter(|p| p.0 == m).map(|p| c.buyers[p.1].demand).sum();
            assert!(used <= c.real.supply[m]);
            assert_eq!(s.residual_supply[m], c.real.supply[m] - used);
        }
        for &(m, n) in &s.served_pairs {
            assert_eq!(c.stage1.assignment.seller_of[n], Some(m));
        }
    }
}

#[test]
fn volunteers_only_when_supply_is_short() {
    for c in cases() {
        let s = settle(&c.buyers, &c.sellers, &c.stage1.contracts, &c.real, c.cfg.penalty_factor);
        for &n in &s.volunteers {
            let m = c.stage1.assignment.seller_of[n].unwrap();
            let attended: u32 = c.stage1.assignment.members(m).iter().filter(|&&k| c.real.attended[k]).map(|&k| c.buyers[k].demand).sum();
            assert!(attended > c.real.supply[m]);
        }
    }
}

#[test]
fn cashflows_conserve_money_and_match_utilities() {
    for c in cases() {
        let mu = c.cfg.penalty_factor;
        let s = settle(&c.buyers, &c.sellers, &c.stage1.contracts, &c.real, mu);
        let f = &s.cashflows;
        let total: f64 = f.buyer.iter().sum::<f64>() + f.seller.iter().sum::<f64>() + f.auctioneer;
        assert!(total.abs() < 1e-9);
        assert!(f.auctioneer >= -1e-9);
        // utilities are cash plus value received or cost incurred
        let contracts = &c.stage1.contracts;
        for n in 0..c.buyers.len() {
            let value: f64 = s.served_pairs.iter().filter(|p| p.1 == n).map(|&(m, n)| c.buyers[n].demand as f64 * c.buyers[n].valuations[m]).sum();
            let u = buyer_utility(&c.buyers, &c.sellers, contracts, &s.realization, n, mu).unwrap();
            assert!((u - (f.buyer[n] + value)).abs() < 1e-9);
        }
        for m in 0..c.sellers.len() {
            let cost: f64 = s.served_pairs.iter().filter(|p| p.0 == m).map(|&(m, n)| c.buyers[n].demand as f64 * c.sellers[m].unit_cost).sum();
            let u = seller_utility(&c.buyers, &c.sellers, contracts, &s.realization, m).unwrap();
            assert!((u - (f.seller[m] - cost)).abs() < 1e-9);
        }
        let ua = auctioneer_utility(contracts, &s.realization, mu).unwrap();
        assert!((ua - f.auctioneer).abs() < 1e-9);
    }
}

#[test]
fn residual_market_composition() {
    for c in cases() {
        let s = settle(&c.buyers, &c.sellers, &c.stage1.contracts, &c.real, c.cfg.penalty_factor);
        let r = build_residual_market(&s, &c.buyers, &c.sellers);
        let expected: Vec<usize> = (0..c.buyers.len())
            .filter(|&n| c.real.attended[n] && (c.stage1.assignment.seller_of[n].is_none() || s.volunteers.contains(&n)))
            .collect();
        assert_eq!(r.buyer_ids, expected);
        let with_supply: Vec<usize> = (0..c.sellers.len()).filter(|&m| s.residual_supply[m] > 0).collect();
        assert_eq!(r.seller_ids, with_supply);
        for (i, &m) in r.seller_ids.iter().enumerate() {
            assert_eq!(r.sellers[i].supply_trials, s.residual_supply[m]);
            assert_eq!(r.sellers[i].supply_prob, 1.0);
            assert_eq!(r.sellers[i].ask, c.sellers[m].ask);
        }
        for (j, &n) in r.buyer_ids.iter().enumerate() {
            for (i, &m) in r.seller_ids.iter().enumerate() {
                assert_eq!(r.buyers[j].bids[i], c.buyers[n].bids[m]);
            }
        }
    }
}

#[test]
fn spot_trades_are_feasible_and_rational() {
    let mut traded = 0;
    for c in cases() {
        let s = settle(&c.buyers, &c.sellers, &c.stage1.contracts, &c.real, c.cfg.penalty_factor);
        let r = build_residual_market(&s, &c.buyers, &c.sellers);
        let trades = spot_auction(&r, &c.cfg);
        traded += trades.len();
        let mut buyers_seen = std::collections::HashSet::new();
        for t in &trades {
            assert!(buyers_seen.insert(t.buyer));
            assert!(r.buyer_ids.contains(&t.buyer));
            assert_eq!(t.volume, c.buyers[t.buyer].demand);
            assert!(t.buyer_price <= c.buyers[t.buyer].bids[t.seller] + 1e-12);
            assert!(t.seller_price >= c.sellers[t.seller].ask - 1e-12);
            assert!(t.buyer_price >= t.seller_price - 1e-9);
        }
        for m in 0..c.sellers.len() {
            let v: u32 = trades.iter().filter(|t| t.seller == m).map(|t| t.volume).sum();
            assert!(v <= s.residual_supply[m]);
        }
    }
    assert!(traded > 0);
}

#[test]
fn transaction_totals() {
    for c in cases() {
        let with = run_transaction(&c.stage1, &c.buyers, &c.sellers, &c.real, &c.cfg, true).unwrap();
        let without = run_transaction(&c.stage1, &c.buyers, &c.sellers, &c.real, &c.cfg, false).unwrap();
        let s1 = social_welfare(&c.buyers, &c.sellers, &c.stage1.contracts, &with.settlement.realization).unwrap();
        assert!((with.stage1_sw - s1).abs() < 1e-9);
        let st2 = with.stage2.as_ref().unwrap();
        assert!((with.total_sw - (s1 + st2.realized_sw)).abs() < 1e-9);
        assert_eq!(st2.total_sw, with.total_sw);
        assert_eq!(with.matches, with.settlement.served_pairs.len() + st2.trades.len());
        assert!(without.stage2.is_none());
        assert_eq!(without.total_sw, without.stage1_sw);
        assert_eq!(without.stage1_sw, with.stage1_sw);
        assert!(with.total_sw >= without.total_sw - 1e-9);
        assert_eq!(with.volunteers, with.settlement.volunteers.len());
    }
}

#[test]
fn ample_supply_leaves_no_volunteers() {
    let (buyers, mut sellers) = market(3, 20, 4);
    for s in &mut sellers {
        s.supply_prob = 1.0;
    }
    let cfg = MarketConfig::default();
    let stage1 = run_stage1(&buyers, &sellers, &cfg).unwrap();
    let full = Realization::new(vec![true; buyers.len()], sellers.iter().map(|s| s.supply_trials).collect());
    let booked_ok = (0..sellers.len()).all(|m| stage1.assignment.booked(m, &buyers) <= sellers[m].supply_trials);
    let s = settle(&buyers, &sellers, &stage1.contracts, &full, cfg.penalty_factor);
    if booked_ok {
        assert!(s.volunteers.is_empty());
    }
    assert!(s.absent.is_empty());
}

#[test]
fn empty_residual_market_has_no_trades() {
    let (buyers, sellers) = market(4, 5, 2);
    let r = SubMarket::new(&buyers, &sellers, &[], &[(0, 3)]);
    assert!(r.is_empty());
    assert!(spot_auction(&r, &MarketConfig::default()).is_empty());
}
