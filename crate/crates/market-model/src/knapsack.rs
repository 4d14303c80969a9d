//! Exact 0-1 knapsack by dynamic programming over integer capacity.

/// Returns the optimal value and the chosen item indices (ascending).
///
/// Ties keep the earlier decision (an item is taken only on strict
/// improvement), so the result is deterministic for a fixed item order.
pub fn solve(items: &[(u32, f64)], capacity: u32) -> (f64, Vec<usize>) {
    let cap = capacity as usize;
    let n = items.len();
    if n == 0 || cap == 0 {
        return (0.0, Vec::new());
    }
    let mut best = vec![0.0f64; cap + 1];
    let mut take = vec![false; n * (cap + 1)];
    for (i, &(w, v)) in items.iter().enumerate() {
        let w = w as usize;
        if w > cap || v <= 0.0 {
            continue;
        }
        let row = &mut take[i * (cap + 1)..(i + 1) * (cap + 1)];
        for c in (w..=cap).rev() {
            let cand = best[c - w] + v;
            if cand > best[c] + 1e-12 {
                best[c] = cand;
                row[c] = true;
            }
        }
    }
    let mut chosen = Vec::new();
    let mut c = cap;
    for i in (0..n).rev() {
        if take[i * (cap + 1) + c] {
            chosen.push(i);
            c -= items[i].0 as usize;
        }
    }
    chosen.reverse();
    let value = chosen.iter().map(|&i| items[i].1).sum();
    (value, chosen)
}
