//! Seeded randomness shared by corruption, initialization and training.
//!
//! Everything random in the crate draws from ChaCha8 seeded through
//! `seed_from_u64`, whose output stream is fixed across platforms.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Partial Fisher–Yates: moves a uniform sample of `n` items to the front
/// of `items` and returns it.
pub fn choose_prefix<'a, T>(items: &'a mut [T], n: usize, rng: &mut Rng) -> &'a mut [T] {
    let n = n.min(items.len());
    for i in 0..n {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    &mut items[..n]
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    let len = items.len();
    choose_prefix(items, len, rng);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_prefix_is_a_sample_without_replacement() {
        let mut rng = seeded(3);
        let mut v: Vec<u32> = (0..50).collect();
        let picked = choose_prefix(&mut v, 20, &mut rng).to_vec();
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        let mut all = v.clone();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a: Vec<u32> = (0..100).collect();
        let mut b = a.clone();
        shuffle(&mut a, &mut seeded(9));
        shuffle(&mut b, &mut seeded(9));
        assert_eq!(a, b);
    }
}
