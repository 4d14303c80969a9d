use market_model::fixtures::{worked_example, LAMBDA};
use market_model::{Buyer, Seller};
use opdauction::member_determination;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn market(seed: u64, nb: usize, ns: usize) -> (Vec<Buyer>, Vec<Seller>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sellers: Vec<Seller> = (0..ns)
        .map(|id| {
            let ask = rng.gen_range(1.0..3.0);
            Seller { id, unit_cost: ask * 0.9, ask, supply_trials: rng.gen_range(2..10), supply_prob: rng.gen_range(0.5..1.0) }
        })
        .collect();
    let buyers = (0..nb)
        .map(|id| {
            let base = rng.gen_range(1.0..4.0);
            let bids: Vec<f64> = (0..ns).map(|_| base + rng.gen_range(-0.5..0.5)).collect();
            let valuations = bids.iter().map(|b| b * 1.1).collect();
            Buyer { id, demand: rng.gen_range(1..5), valuations, bids, attend_prob: rng.gen_range(0.5..1.0) }
        })
        .collect();
    (buyers, sellers)
}

fn avg(b: &Buyer) -> f64 {
    b.bids.iter().sum::<f64>() / b.bids.len() as f64
}

fn cap(s: &Seller, lambda: f64) -> u32 {
    (s.supply_trials as f64 * s.supply_prob * (1.0 + lambda) + 1e-9).floor() as u32
}

#[test]
fn worked_example_pivots() {
    let m = worked_example();
    let r = member_determination(&m.buyers, &m.sellers, LAMBDA);
    assert_eq!((r.lists.key_b, r.lists.key_s), (4, 2));
}

#[test]
fn matching_respects_lists_capacity_and_eligibility() {
    for seed in 0..300 {
        let (buyers, sellers) = market(seed, 3 + seed as usize % 20, 2 + seed as usize % 6);
        let lambda = (seed % 11) as f64 * 0.1;
        let r = member_determination(&buyers, &sellers, lambda);
        let top_b = &r.lists.buyer_order[..r.lists.key_b];
        let top_s = &r.lists.seller_order[..r.lists.key_s];
        for m in 0..sellers.len() {
            let members = r.assignment.members(m);
            if !members.is_empty() {
                assert!(top_s.contains(&m));
            }
            let booked: u32 = members.iter().map(|&n| buyers[n].demand).sum();
            assert!(booked <= cap(&sellers[m], lambda), "seed {seed} seller {m}");
            for n in members {
                assert!(top_b.contains(&n));
                assert!(buyers[n].bids[m] >= avg(&buyers[n]) - 1e-12);
                assert!(buyers[n].bids[m] >= sellers[m].ask);
            }
        }
    }
}

#[test]
fn sellers_fill_optimally_in_order() {
    // Each seller's choice, given the buyers still unmatched when its turn
    // comes, must be an optimal subset found by exhaustive search.
    for seed in 0..200 {
        let (buyers, sellers) = market(1000 + seed, 6, 2 + seed as usize % 2);
        let lambda = 0.2 + (seed % 4) as f64 * 0.2;
        let r = member_determination(&buyers, &sellers, lambda);
        let mut remaining: Vec<usize> = r.lists.buyer_order[..r.lists.key_b].to_vec();
        for &(m, objective) in &r.objectives {
            let ask = sellers[m].ask;
            let eligible: Vec<usize> =
                remaining.iter().copied().filter(|&n| buyers[n].bids[m] >= avg(&buyers[n]) - 1e-9 && buyers[n].bids[m] >= ask).collect();
            let mut best = 0.0f64;
            for mask in 0u32..(1 << eligible.len()) {
                let (mut w, mut v) = (0, 0.0);
                for (i, &n) in eligible.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        w += buyers[n].demand;
                        v += buyers[n].demand as f64 * (buyers[n].bids[m] - ask);
                    }
                }
                if w <= cap(&sellers[m], lambda) {
                    best = best.max(v);
                }
            }
            assert!((objective - best).abs() < 1e-9, "seed {seed} seller {m}: {objective} vs {best}");
            let members = r.assignment.members(m);
            let got: f64 = members.iter().map(|&n| buyers[n].demand as f64 * (buyers[n].bids[m] - ask)).sum();
            assert!((got - best).abs() < 1e-9);
            remaining.retain(|n| !members.contains(n));
        }
    }
}

#[test]
fn lists_are_sorted() {
    for seed in 0..50 {
        let (buyers, sellers) = market(2000 + seed, 12, 5);
        let r = member_determination(&buyers, &sellers, 0.3);
        let b = &r.lists.buyer_order;
        assert!(b.windows(2).all(|w| avg(&buyers[w[0]]) >= avg(&buyers[w[1]])));
        let s = &r.lists.seller_order;
        assert!(s.windows(2).all(|w| sellers[w[0]].ask <= sellers[w[1]].ask));
        if r.lists.key_b > 0 {
            assert!(r.lists.key_b < buyers.len() && r.lists.key_s < sellers.len());
        }
    }
}

#[test]
fn deterministic() {
    let (buyers, sellers) = market(9, 30, 6);
    assert_eq!(member_determination(&buyers, &sellers, 0.4), member_determination(&buyers, &sellers, 0.4));
}

#[test]
fn single_side_markets_do_not_trade() {
    let (buyers, sellers) = market(5, 1, 4);
    assert_eq!(member_determination(&buyers, &sellers, 0.5).assignment.matched(), 0);
    let (buyers, sellers) = market(5, 8, 1);
    assert_eq!(member_determination(&buyers, &sellers, 0.5).assignment.matched(), 0);
}
