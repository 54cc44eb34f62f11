//! Bounded FIFO experience replay with seeded uniform sampling.

use std::collections::VecDeque;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Experience;

pub const DEFAULT_REPLAY_CAPACITY: usize = 2000;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, experience: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(experience);
    }

    /// `n` distinct entries drawn uniformly, or `None` if fewer are stored.
    pub fn sample(&mut self, n: usize) -> Option<Vec<Experience>> {
        if self.items.len() < n {
            return None;
        }
        Some(
            index::sample(&mut self.rng, self.items.len(), n)
                .into_iter()
                .map(|i| self.items[i])
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Action;
    use proptest::prelude::*;

    fn sentinel(i: usize) -> Experience {
        Experience {
            state: [i as f64; 6],
            action: Action::NonAlarm,
            reward: i as f64,
            next_state: [0.0; 6],
            terminal: false,
        }
    }

    #[test]
    fn underfull_sample_is_none() {
        let mut b = ReplayBuffer::new(10, 0);
        b.push(sentinel(0));
        assert!(b.sample(8).is_none());
        assert_eq!(b.sample(1).unwrap().len(), 1);
    }

    #[test]
    fn seeded_sampling_repeats() {
        let fill = |seed| {
            let mut b = ReplayBuffer::new(100, seed);
            (0..100).for_each(|i| b.push(sentinel(i)));
            (0..5).map(|_| b.sample(8).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(fill(3), fill(3));
        assert_ne!(fill(3), fill(4));
    }

    proptest! {
        #[test]
        fn bounded_fifo(capacity in 1usize..50, pushes in 0usize..200) {
            let mut b = ReplayBuffer::new(capacity, 1);
            for i in 0..pushes {
                b.push(sentinel(i));
                prop_assert!(b.len() <= capacity);
            }
            let kept: Vec<f64> = b.iter().map(|e| e.reward).collect();
            let first = pushes.saturating_sub(capacity);
            let expected: Vec<f64> = (first..pushes).map(|i| i as f64).collect();
            prop_assert_eq!(kept, expected);
        }
    }
}
