//! Uniform random policy used as the non-learning comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::world::ACTION_COUNT;

pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> usize {
    rng.gen_range(0..ACTION_COUNT)
}

/// Stateless apart from its random stream.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn action(&mut self) -> usize {
        random_action(&mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_are_uniform() {
        let mut policy = RandomPolicy::new(17);
        let draws = 70_000;
        let mut counts = [0usize; ACTION_COUNT];
        for _ in 0..draws {
            let a = policy.action();
            assert!(a < ACTION_COUNT);
            counts[a] += 1;
        }
        let expected = draws as f64 / ACTION_COUNT as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 6 degrees of freedom, 0.999 quantile.
        assert!(chi2 < 22.46, "chi2 = {chi2}");
    }

    #[test]
    fn seeded_sequences_repeat() {
        let mut a = RandomPolicy::new(3);
        let mut b = RandomPolicy::new(3);
        let xs: Vec<usize> = (0..100).map(|_| a.action()).collect();
        let ys: Vec<usize> = (0..100).map(|_| b.action()).collect();
        assert_eq!(xs, ys);
    }
}
