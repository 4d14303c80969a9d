//! The five-buyer, five-seller worked example used as a golden fixture.

use crate::{Buyer, Market, Seller};

const BUYERS: [(u32, f64, f64, f64); 5] = [
    // (demand, attendance, bid, valuation)
    (3, 0.9, 3.0, 3.5),
    (2, 0.8, 2.8, 3.2),
    (4, 0.7, 2.5, 3.0),
    (1, 0.6, 2.2, 2.5),
    (3, 0.5, 2.0, 2.3),
];

const SELLERS: [(u32, f64, f64); 5] = [
    // (supply trials, supply prob, ask)
    (5, 0.8, 2.0),
    (4, 0.7, 2.2),
    (6, 0.9, 1.8),
    (3, 0.6, 2.5),
    (7, 0.85, 1.9),
];

pub const LAMBDA: f64 = 0.2;

/// Unit costs are not part of the example; they are set equal to the asks.
pub fn worked_example() -> Market {
    let sellers: Vec<Seller> = SELLERS
        .iter()
        .enumerate()
        .map(|(id, &(d, r, ask))| Seller { id, unit_cost: ask, ask, supply_trials: d, supply_prob: r })
        .collect();
    let buyers = BUYERS
        .iter()
        .enumerate()
        .map(|(id, &(t, a, bid, v))| Buyer {
            id,
            demand: t,
            valuations: vec![v; sellers.len()],
            bids: vec![bid; sellers.len()],
            attend_prob: a,
        })
        .collect();
    Market::new(buyers, sellers).expect("fixture is valid")
}
