use std::sync::Arc;

use super::channels::{channel_rate, ChannelSet, CollisionChannel};
use super::CollisionRates;
use crate::occupancy::ShellOccupancy;

/// Binary sum tree over non-negative weights.
///
/// Leaves sit at `[cap, 2 cap)`; node `i` holds the sum of `2i` and `2i+1`.
/// Interior nodes are always recomputed from their children, so the stored
/// sums never accumulate update drift.
#[derive(Debug, Clone)]
pub struct SumTree {
    nodes: Vec<f64>,
    cap: usize,
    len: usize,
}

impl SumTree {
    pub fn new(len: usize) -> Self {
        let cap = len.max(1).next_power_of_two();
        Self {
            nodes: vec![0.0; 2 * cap],
            cap,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Sets leaf `i` and refreshes its ancestors. O(log n).
    pub fn set(&mut self, i: usize, value: f64) {
        debug_assert!(value >= 0.0 && i < self.len);
        let mut node = self.cap + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Replaces every leaf and rebuilds all interior sums. O(n).
    pub fn fill(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in self.nodes[self.cap..].iter_mut() {
            *v = 0.0;
        }
        for (i, v) in values.into_iter().enumerate() {
            self.nodes[self.cap + i] = v;
        }
        for node in (1..self.cap).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Index of the leaf whose cumulative interval contains `target`.
    ///
    /// Only descends into subtrees with a positive sum, so the returned leaf
    /// always carries a positive weight when `total() > 0`.
    pub fn find(&self, mut target: f64) -> usize {
        let mut node = 1;
        while node < self.cap {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            if right <= 0.0 || (target < left && left > 0.0) {
                node *= 2;
            } else {
                target -= left;
                node = 2 * node + 1;
            }
        }
        node - self.cap
    }
}

/// Per-channel rate table backed by a [`SumTree`].
///
/// Sampling and single-channel updates are O(log C). After an event every
/// channel touching a changed shell is recomputed; a full recomputation from
/// the occupancy runs every `refresh_interval` updates.
#[derive(Debug, Clone)]
pub struct RateTable {
    channels: Arc<ChannelSet>,
    tree: SumTree,
    delta: f64,
    refresh_interval: u64,
    updates_since_refresh: u64,
}

pub const DEFAULT_REFRESH_INTERVAL: u64 = 100_000;

impl RateTable {
    pub fn new(channels: Arc<ChannelSet>, delta: f64) -> Self {
        let tree = SumTree::new(channels.len());
        Self {
            channels,
            tree,
            delta,
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
            updates_since_refresh: 0,
        }
    }

    pub fn with_refresh_interval(mut self, interval: u64) -> Self {
        self.refresh_interval = interval.max(1);
        self
    }

    pub fn channel_set(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn rate(&self, channel: usize) -> f64 {
        self.tree.get(channel)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.tree.len()).map(|i| self.tree.get(i))
    }

    /// Recomputes the listed channels from `state`.
    pub fn update_channels(&mut self, state: &ShellOccupancy, indices: &[usize]) {
        for &i in indices {
            let r = channel_rate(state, &self.channels.get(i), self.delta);
            self.tree.set(i, r);
        }
    }

    pub fn sample_index(&self, target: f64) -> usize {
        self.tree.find(target)
    }
}

impl CollisionRates for RateTable {
    fn rebuild(&mut self, state: &ShellOccupancy) {
        let channels = Arc::clone(&self.channels);
        let delta = self.delta;
        self.tree
            .fill(channels.channels().iter().map(|ch| channel_rate(state, ch, delta)));
        self.updates_since_refresh = 0;
    }

    fn update_shells(&mut self, state: &ShellOccupancy, shells: &[usize]) {
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.refresh_interval {
            self.rebuild(state);
            return;
        }
        let affected = self.channels.affected_by_shells(shells);
        self.update_channels(state, &affected);
    }

    fn total(&self) -> f64 {
        self.tree.total()
    }

    fn sample(&mut self, target: f64) -> CollisionChannel {
        self.channels.get(self.tree.find(target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_tree_find_respects_weights() {
        let mut t = SumTree::new(5);
        t.fill([1.0, 0.0, 2.0, 0.0, 3.0]);
        assert_eq!(t.total(), 6.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 4);
        // Round-off past the end never lands on a zero leaf.
        assert_eq!(t.find(6.0 + 1e-9), 4);
        t.set(4, 0.0);
        assert_eq!(t.find(5.0), 2);
    }

    #[test]
    fn incremental_update_matches_full_recompute() {
        let shells = 9;
        let set = Arc::new(ChannelSet::new(shells));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let counts: Vec<u64> = (0..shells).map(|_| rng.gen_range(0..12)).collect();
            let mut state = ShellOccupancy::from_counts(counts);
            let mut table = RateTable::new(Arc::clone(&set), 0.37);
            table.rebuild(&state);
            if table.total() <= 0.0 {
                continue;
            }
            let idx = table.sample_index(rng.gen::<f64>() * table.total());
            let ch = set.get(idx);
            assert!(table.rate(idx) > 0.0, "case {case}");
            ch.apply(&mut state);
            table.update_shells(&state, &ch.shells());

            let mut fresh = RateTable::new(Arc::clone(&set), 0.37);
            fresh.rebuild(&state);
            for (a, b) in table.rates().zip(fresh.rates()) {
                assert_eq!(a, b);
            }
            let direct: f64 = fresh.rates().sum();
            assert!((table.total() - direct).abs() <= 1e-9 * direct.max(1e-300));
        }
    }
}
