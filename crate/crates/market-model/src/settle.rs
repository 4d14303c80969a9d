//! Per-seller settlement rule: which attended members get served.

use crate::knapsack;

/// `members` holds (demand, bid toward this seller) for the attended members.
/// If everyone fits they are all served; otherwise a knapsack over the
/// realized supply with value = per-RB bid picks the served subset.
pub fn select_served(members: &[(u32, f64)], supply: u32) -> Vec<bool> {
    let total: u32 = members.iter().map(|m| m.0).sum();
    if total <= supply {
        return vec![true; members.len()];
    }
    let (_, chosen) = knapsack::solve(members, supply);
    let mut served = vec![false; members.len()];
    for i in chosen {
        served[i] = true;
    }
    served
}
