use market_model::settle::select_served;
use market_model::utility::seller_expected_utility;
use market_model::{Assignment, Buyer, Contract, ModelError, Seller};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risk::*;

struct Case {
    buyers: Vec<Buyer>,
    sellers: Vec<Seller>,
    assignment: Assignment,
    contracts: Vec<Contract>,
}

/// One seller (index 0) with `k` members, plus one unassigned buyer.
fn case(seed: u64, k: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = rng.gen_range(0.5..4.0);
    let sellers = vec![
        Seller { id: 0, unit_cost: cost, ask: cost * 1.1, supply_trials: rng.gen_range(2..16), supply_prob: rng.gen_range(0.2..1.0) },
        Seller { id: 1, unit_cost: 1.0, ask: 1.0, supply_trials: 5, supply_prob: 0.5 },
    ];
    let buyers: Vec<Buyer> = (0..=k)
        .map(|id| {
            let v = rng.gen_range(cost..10.0);
            Buyer { id, demand: rng.gen_range(1..6), valuations: vec![v, v], bids: vec![v * 0.9, v * 0.9], attend_prob: rng.gen_range(0.5..1.0) }
        })
        .collect();
    let mut seller_of = vec![Some(0); k];
    seller_of.push(None);
    let mu = 0.5;
    let contracts = (0..k)
        .map(|n| {
            let p = rng.gen_range(cost * 1.1..buyers[n].bids[0].max(cost * 1.2));
            let r = rng.gen_range(cost * 1.1..p.max(cost * 1.11));
            Contract::new(n, 0, buyers[n].demand, p, r.min(p), mu)
        })
        .collect();
    Case { buyers, sellers, assignment: Assignment { n_sellers: 2, seller_of }, contracts }
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binom_pmf(d: u32, r: f64) -> Vec<f64> {
    (0..=d).map(|k| choose(d as u64, k as u64) * r.powi(k as i32) * (1.0 - r).powi((d - k) as i32)).collect()
}

/// Denial probability of member `pos` by explicit double loop.
fn p_n_oracle(c: &Case, pos: usize) -> f64 {
    let members = c.assignment.members(0);
    let pmf = binom_pmf(c.sellers[0].supply_trials, c.sellers[0].supply_prob);
    let mut denied = 0.0;
    for mask in 0usize..(1 << members.len()) {
        if mask >> pos & 1 == 0 {
            continue;
        }
        let mut w = 1.0;
        for (i, &n) in members.iter().enumerate() {
            if i == pos {
                continue;
            }
            let a = c.buyers[n].attend_prob;
            w *= if mask >> i & 1 == 1 { a } else { 1.0 - a };
        }
        let present: Vec<usize> = (0..members.len()).filter(|i| mask >> i & 1 == 1).collect();
        let items: Vec<(u32, f64)> = present.iter().map(|&i| (c.buyers[members[i]].demand, c.buyers[members[i]].bids[0])).collect();
        for (k, pk) in pmf.iter().enumerate() {
            let served = select_served(&items, k as u32);
            let j = present.iter().position(|&i| i == pos).unwrap();
            if !served[j] {
                denied += w * pk;
            }
        }
    }
    denied
}

#[test]
fn p_n_exact_matches_enumeration_oracle() {
    for seed in 0..60 {
        let c = case(seed, 1 + seed as usize % 6);
        for (pos, &n) in c.assignment.members(0).iter().enumerate() {
            let got = p_n_exact(n, &c.assignment, &c.buyers, &c.sellers).unwrap();
            assert!((got - p_n_oracle(&c, pos)).abs() < 1e-9, "seed {seed} member {n}");
        }
    }
}

/// Simulated settlement of seller 0: per-member denial frequency given
/// attendance, and frequency of U_0 <= threshold.
fn simulate(c: &Case, samples: usize, threshold: f64, seed: u64) -> (Vec<(u64, u64)>, u64) {
    let members = c.assignment.members(0);
    let s = &c.sellers[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![(0u64, 0u64); members.len()];
    let mut low = 0;
    for _ in 0..samples {
        let att: Vec<bool> = members.iter().map(|&n| rng.gen::<f64>() < c.buyers[n].attend_prob).collect();
        let supply = (0..s.supply_trials).filter(|_| rng.gen::<f64>() < s.supply_prob).count() as u32;
        let present: Vec<usize> = (0..members.len()).filter(|&i| att[i]).collect();
        let items: Vec<(u32, f64)> = present.iter().map(|&i| (c.buyers[members[i]].demand, c.buyers[members[i]].bids[0])).collect();
        let served = select_served(&items, supply);
        let mut u = 0.0;
        for (i, &n) in members.iter().enumerate() {
            let k = &c.contracts[n];
            let t = k.volume as f64;
            match present.iter().position(|&j| j == i) {
                None => u += t * k.penalty_b2s,
                Some(j) => {
                    counts[i].0 += 1;
                    if served[j] {
                        u += t * (k.seller_reward - s.unit_cost);
                    } else {
                        counts[i].1 += 1;
                        u -= t * k.penalty_s2b;
                    }
                }
            }
        }
        if u <= threshold + 1e-12 {
            low += 1;
        }
    }
    (counts, low)
}

#[test]
fn exact_risks_agree_with_simulation() {
    let samples = 100_000;
    let mut comparisons = 0;
    let mut beyond = 0;
    for seed in 0..12 {
        let c = case(100 + seed, 2 + seed as usize % 5);
        let members = c.assignment.members(0);
        let mut p = vec![0.0; c.buyers.len()];
        for &n in &members {
            p[n] = p_n_exact(n, &c.assignment, &c.buyers, &c.sellers).unwrap();
        }
        let xi2 = 0.95;
        let threshold = xi2 * seller_expected_utility(&c.buyers, &c.sellers, &c.contracts, 0, &p).unwrap();
        let (counts, low) = simulate(&c, samples, threshold, seed);
        let mut check = |exact: f64, hits: u64, n: u64| {
            let freq = hits as f64 / n as f64;
            let se = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-12);
            comparisons += 1;
            if (freq - exact).abs() > 3.0 * se {
                beyond += 1;
            }
            assert!((freq - exact).abs() <= 5.0 * se, "seed {seed}: exact {exact} simulated {freq}");
        };
        for (i, &n) in members.iter().enumerate() {
            check(p[n], counts[i].1, counts[i].0);
        }
        let s = srisk_exact(0, &c.contracts, &c.assignment, &c.buyers, &c.sellers, xi2).unwrap();
        check(s, low, samples as u64);
    }
    assert!(beyond * 20 <= comparisons.max(20), "{beyond} of {comparisons} beyond 3 SE");
}

#[test]
fn chebyshev_bound_below_exact_shortfall() {
    for seed in 0..200 {
        let c = case(300 + seed, 1 + seed as usize % 7);
        for n in c.assignment.members(0) {
            let exact = slack_shortfall_exact(n, &c.assignment, &c.buyers, &c.sellers).unwrap();
            if let Some(bound) = p_n_bound(n, &c.assignment, &c.buyers, &c.sellers).unwrap() {
                assert!(exact >= bound - 1e-9, "seed {seed}: exact {exact} bound {bound}");
            }
            let approx = p_n_approx(n, &c.assignment, &c.buyers, &c.sellers).unwrap();
            assert!((0.0..=1.0).contains(&approx.value));
            if approx.valid {
                assert!(exact >= approx.value - 1e-9);
            }
        }
    }
}

#[test]
fn single_member_moment_bound_dominates_exact() {
    // With one member the outcomes are independent, so the Chebyshev
    // bound from the true moments is a valid upper bound.
    for seed in 0..100 {
        let c = case(500 + seed, 1);
        let p = vec![p_n_exact(0, &c.assignment, &c.buyers, &c.sellers).unwrap(), 0.0];
        let bound = srisk_moment_bound(0, &c.contracts, &c.buyers, &c.sellers, &p, 0.5).unwrap();
        let exact = srisk_exact(0, &c.contracts, &c.assignment, &c.buyers, &c.sellers, 0.5).unwrap();
        if bound.valid {
            assert!(exact <= bound.value + 1e-9, "seed {seed}: {exact} > {}", bound.value);
        }
    }
}

#[test]
fn enumeration_limits() {
    let mut c = case(1, 3);
    c.sellers[0].supply_trials = MAX_ENUM_TRIALS + 1;
    assert!(matches!(p_n_exact(0, &c.assignment, &c.buyers, &c.sellers), Err(ModelError::TooLarge(_))));
    let c = case(2, MAX_ENUM_MEMBERS + 1);
    assert!(matches!(srisk_exact(0, &c.contracts, &c.assignment, &c.buyers, &c.sellers, 0.9), Err(ModelError::TooLarge(_))));
    let c = case(3, 2);
    assert!(p_n_exact(2, &c.assignment, &c.buyers, &c.sellers).is_err());
}

#[test]
fn knapsack_settlement_can_beat_the_slack_bound() {
    // Certain supply 4, a certain low-bid co-member of demand 3 and member 0
    // of demand 2: the slack is always 1 < 2, so the bound is 1, yet the
    // knapsack serves member 0 and displaces the co-member.
    let sellers = vec![Seller { id: 0, unit_cost: 1.0, ask: 1.0, supply_trials: 4, supply_prob: 1.0 }];
    let b = |id, demand, bid| Buyer { id, demand, valuations: vec![bid], bids: vec![bid], attend_prob: 1.0 };
    let buyers = vec![b(0, 2, 9.0), b(1, 3, 2.0)];
    let asg = Assignment { n_sellers: 1, seller_of: vec![Some(0), Some(0)] };
    assert_eq!(p_n_bound(0, &asg, &buyers, &sellers).unwrap(), Some(1.0));
    assert_eq!(slack_shortfall_exact(0, &asg, &buyers, &sellers).unwrap(), 1.0);
    assert_eq!(p_n_exact(0, &asg, &buyers, &sellers).unwrap(), 0.0);
    assert_eq!(p_n_exact(1, &asg, &buyers, &sellers).unwrap(), 1.0);
}
