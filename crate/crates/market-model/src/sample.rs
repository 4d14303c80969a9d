use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Buyer, Realization, Seller};

/// Sample attendance (Bernoulli per buyer) and supply (Binomial per seller).
pub fn sample_realization(buyers: &[Buyer], sellers: &[Seller], seed: u64) -> Realization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_realization_with(buyers, sellers, &mut rng)
}

pub fn sample_realization_with<R: Rng>(buyers: &[Buyer], sellers: &[Seller], rng: &mut R) -> Realization {
    let attended = buyers.iter().map(|b| rng.gen::<f64>() < b.attend_prob).collect();
    let supply = sellers
        .iter()
        .map(|s| (0..s.supply_trials).filter(|_| rng.gen::<f64>() < s.supply_prob).count() as u32)
        .collect();
    Realization::new(attended, supply)
}
