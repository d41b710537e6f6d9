use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One recorded step, with the next state's feasibility mask so bootstrap
/// targets only consider actions that were actually available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
    pub mask_next: Vec<bool>,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay_capacity", "must be at least 1"));
        }
        Ok(ReplayMemory {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    /// Storage slot access; slot order is not insertion order once the ring
    /// wraps.
    pub fn slot(&self, slot: usize) -> Option<&Transition> {
        self.items.get(slot)
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.cursor);
        older.iter().chain(newer)
    }

    /// Uniform slots drawn with replacement.
    pub fn sample_slots<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::InsufficientMemory {
                have: self.items.len(),
                need: n.max(1),
            });
        }
        Ok((0..n)
            .map(|_| rng.random_range(0..self.items.len()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn tr(tag: usize) -> Transition {
        Transition {
            s: vec![tag as f64],
            a: tag,
            r: 0.0,
            s_next: vec![0.0],
            done: false,
            mask_next: vec![true],
        }
    }

    #[test]
    fn fifo_overwrite_keeps_order() {
        let cap = 5;
        for k in 0..12 {
            let mut mem = ReplayMemory::new(cap).unwrap();
            for i in 0..cap + k {
                mem.push(tr(i));
            }
            let tags: Vec<usize> = mem.iter().map(|t| t.a).collect();
            let lo = k.min(cap + k);
            let expected: Vec<usize> = (lo..cap + k).collect();
            assert_eq!(tags, expected, "k = {k}");
            assert_eq!(mem.len(), cap);
        }
    }

    #[test]
    fn partial_fill_iterates_in_order() {
        let mut mem = ReplayMemory::new(10).unwrap();
        for i in 0..4 {
            mem.push(tr(i));
        }
        assert_eq!(
            mem.iter().map(|t| t.a).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn sampling_needs_enough_items() {
        let mut mem = ReplayMemory::new(10).unwrap();
        let mut rng = seeded_rng(1);
        assert!(matches!(
            mem.sample_slots(2, &mut rng),
            Err(Error::InsufficientMemory { have: 0, need: 2 })
        ));
        mem.push(tr(0));
        mem.push(tr(1));
        let slots = mem.sample_slots(2, &mut rng).unwrap();
        assert!(slots.iter().all(|&s| s < 2));
        assert!(ReplayMemory::new(0).is_err());
    }
}
