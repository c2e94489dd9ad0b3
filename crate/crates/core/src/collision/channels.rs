use serde::{Deserialize, Serialize};

use crate::occupancy::ShellOccupancy;
use crate::units::shell_degeneracy;

/// A directed energy-conserving collision `(m1, m2) -> (m3, m4)`.
///
/// In- and out-pairs are stored sorted (`m1 <= m2`, `m3 <= m4`) and
/// `m1 + m2 == m3 + m4`. Identity channels are never constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CollisionChannel {
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
    pub m4: usize,
}

impl CollisionChannel {
    /// Builds a channel from unordered pairs. Returns `None` for identity or
    /// non-energy-conserving combinations.
    pub fn new(a: (usize, usize), b: (usize, usize)) -> Option<Self> {
        let (m1, m2) = if a.0 <= a.1 { a } else { (a.1, a.0) };
        let (m3, m4) = if b.0 <= b.1 { b } else { (b.1, b.0) };
        if m1 + m2 != m3 + m4 || (m1, m2) == (m3, m4) {
            return None;
        }
        Some(Self { m1, m2, m3, m4 })
    }

    pub fn shells(&self) -> [usize; 4] {
        [self.m1, self.m2, self.m3, self.m4]
    }

    /// The reverse channel `(m3, m4) -> (m1, m2)`.
    pub fn reversed(&self) -> Self {
        Self {
            m1: self.m3,
            m2: self.m4,
            m3: self.m1,
            m4: self.m2,
        }
    }

    /// Smallest of the four shells; sets the prefactor `(m_j+1)(m_j+2)`.
    pub fn min_shell(&self) -> usize {
        self.m1.min(self.m3)
    }

    pub fn max_shell(&self) -> usize {
        self.m2.max(self.m4)
    }

    /// Applies the collision to `state`: two atoms leave the in-shells, two
    /// arrive in the out-shells. `N` and the energy are unchanged.
    pub fn apply(&self, state: &mut ShellOccupancy) {
        state.remove(self.m1);
        state.remove(self.m2);
        state.add(self.m3);
        state.add(self.m4);
    }
}

/// Shell prefactor `(m+1)(m+2)`, i.e. `2 g_m`.
#[inline]
pub(crate) fn min_shell_prefactor(m: usize) -> f64 {
    2.0 * shell_degeneracy(m) as f64
}

/// Unordered shell pairs `(lo, hi)`, `lo <= hi < shells`, with `lo + hi == sum`,
/// in increasing `lo`.
pub(crate) fn pairs_with_sum(sum: usize, shells: usize) -> impl Iterator<Item = (usize, usize)> {
    let lo_min = (sum + 1).saturating_sub(shells);
    (lo_min..=sum / 2).map(move |lo| (lo, sum - lo))
}

/// Every directed collision channel for a trap of `shells` shells, grouped by
/// total energy, then in-pair, then out-pair.
pub fn enumerate_channels(shells: usize) -> Vec<CollisionChannel> {
    let mut out = Vec::new();
    if shells == 0 {
        return out;
    }
    for sum in 0..=2 * (shells - 1) {
        let pairs: Vec<_> = pairs_with_sum(sum, shells).collect();
        for &a in &pairs {
            for &b in &pairs {
                if a != b {
                    out.push(CollisionChannel {
                        m1: a.0,
                        m2: a.1,
                        m3: b.0,
                        m4: b.1,
                    });
                }
            }
        }
    }
    out
}

/// In-pair factor `N_{m1} (N_{m2} - δ) / (g_{m1} g_{m2})`.
#[inline]
pub(crate) fn in_factor(counts: &[u64], lo: usize, hi: usize) -> f64 {
    let n_lo = counts[lo] as f64;
    let n_hi = counts[hi] as f64 - if lo == hi { 1.0 } else { 0.0 };
    if n_hi <= 0.0 {
        return 0.0;
    }
    n_lo * n_hi / (shell_degeneracy(lo) * shell_degeneracy(hi)) as f64
}

/// Out-pair factor `(N_{m3} + g_{m3}) (N_{m4} + g_{m4} + δ) / (g_{m3} g_{m4})`.
#[inline]
pub(crate) fn out_factor(counts: &[u64], lo: usize, hi: usize) -> f64 {
    let g_lo = shell_degeneracy(lo);
    let g_hi = shell_degeneracy(hi);
    let stim_hi = if lo == hi { 1 } else { 0 };
    ((counts[lo] + g_lo) as f64) * ((counts[hi] + g_hi + stim_hi) as f64) / (g_lo * g_hi) as f64
}

/// Ergodic collision rate of `ch` in units of `omega_g`, given `delta = Δ/omega_g`.
pub fn channel_rate(state: &ShellOccupancy, ch: &CollisionChannel, delta: f64) -> f64 {
    let counts = state.counts();
    delta
        * min_shell_prefactor(ch.min_shell())
        * in_factor(counts, ch.m1, ch.m2)
        * out_factor(counts, ch.m3, ch.m4)
}

/// Channel list with a shell -> channels index used for incremental updates.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    channels: Vec<CollisionChannel>,
    by_shell: Vec<Vec<u32>>,
    shells: usize,
}

impl ChannelSet {
    pub fn new(shells: usize) -> Self {
        let channels = enumerate_channels(shells);
        let mut by_shell = vec![Vec::new(); shells];
        for (i, ch) in channels.iter().enumerate() {
            let mut s = ch.shells();
            s.sort_unstable();
            let mut prev = usize::MAX;
            for m in s {
                if m != prev {
                    by_shell[m].push(i as u32);
                    prev = m;
                }
            }
        }
        Self {
            channels,
            by_shell,
            shells,
        }
    }

    pub fn shells(&self) -> usize {
        self.shells
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[CollisionChannel] {
        &self.channels
    }

    pub fn get(&self, index: usize) -> CollisionChannel {
        self.channels[index]
    }

    /// Channels whose rate involves shell `m`.
    pub fn touching(&self, m: usize) -> &[u32] {
        &self.by_shell[m]
    }

    /// Sorted, de-duplicated indices of every channel whose rate depends on
    /// any of `shells`.
    pub fn affected_by_shells(&self, shells: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = shells
            .iter()
            .flat_map(|&m| self.by_shell[m].iter().map(|&i| i as usize))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Channels whose rate changes when `channel` fires.
    pub fn affected_channels(&self, channel: usize) -> Vec<usize> {
        self.affected_by_shells(&self.channels[channel].shells())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// O(S⁴) brute force over all ordered shell quadruples.
    fn brute_force_count(shells: usize) -> usize {
        let mut set = std::collections::BTreeSet::new();
        for a in 0..shells {
            for b in 0..shells {
                for c in 0..shells {
                    for d in 0..shells {
                        if let Some(ch) = CollisionChannel::new((a, b), (c, d)) {
                            set.insert(ch);
                        }
                    }
                }
            }
        }
        set.len()
    }

    #[test]
    fn single_shell_has_no_channels() {
        assert!(enumerate_channels(1).is_empty());
    }

    #[test]
    fn three_shells_have_two_channels() {
        let ch = enumerate_channels(3);
        assert_eq!(
            ch,
            vec![
                CollisionChannel { m1: 0, m2: 2, m3: 1, m4: 1 },
                CollisionChannel { m1: 1, m2: 1, m3: 0, m4: 2 },
            ]
        );
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for s in [2, 4, 7, 21] {
            let ch = enumerate_channels(s);
            assert_eq!(ch.len(), brute_force_count(s), "S = {s}");
            let unique: std::collections::BTreeSet<_> = ch.iter().collect();
            assert_eq!(unique.len(), ch.len());
            for c in &ch {
                assert_eq!(c.m1 + c.m2, c.m3 + c.m4);
                assert!(c.m1 <= c.m2 && c.m3 <= c.m4 && c.max_shell() < s);
            }
        }
    }

    #[test]
    fn empty_trap_rates_vanish() {
        let state = ShellOccupancy::empty(6);
        for ch in enumerate_channels(6) {
            assert_eq!(channel_rate(&state, &ch, 1.0), 0.0);
        }
    }

    #[test]
    fn hand_evaluated_rates() {
        let mut counts = vec![0; 5];
        counts[2] = 2;
        let state = ShellOccupancy::from_counts(counts);
        let ch = CollisionChannel::new((2, 2), (0, 4)).unwrap();
        assert_relative_eq!(channel_rate(&state, &ch, 1.0), 1.0 / 9.0, max_relative = 1e-14);

        let state = ShellOccupancy::from_counts(vec![5, 0, 3]);
        let ch = CollisionChannel::new((0, 2), (1, 1)).unwrap();
        assert_relative_eq!(channel_rate(&state, &ch, 1.0), 20.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(channel_rate(&state, &ch, 0.5), 10.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn affected_channels_include_self() {
        let set = ChannelSet::new(3);
        assert_eq!(set.affected_channels(0), vec![0, 1]);
        let set = ChannelSet::new(9);
        for i in 0..set.len() {
            assert!(set.affected_channels(i).contains(&i));
        }
    }

    #[test]
    fn collision_conserves_number_and_energy() {
        let mut state = ShellOccupancy::from_counts(vec![1, 0, 2, 0, 0]);
        let before = (state.total(), state.excitation());
        CollisionChannel::new((2, 2), (1, 3)).unwrap().apply(&mut state);
        assert_eq!((state.total(), state.excitation()), before);
        assert_eq!(state.counts(), &[1, 1, 0, 1, 0]);
    }

    #[test]
    fn detailed_balance_ratio_in_classical_limit() {
        // n_m = N_m / g_m; with N_m >= 100 g_m the Kronecker corrections vanish.
        let shells = 7;
        let counts: Vec<u64> = (0..shells)
            .map(|m| 100 * shell_degeneracy(m) * (3 + m as u64 % 4))
            .collect();
        let state = ShellOccupancy::from_counts(counts.clone());
        let n = |m: usize| counts[m] as f64 / shell_degeneracy(m) as f64;
        for ch in enumerate_channels(shells) {
            let fwd = channel_rate(&state, &ch, 1.0);
            let bwd = channel_rate(&state, &ch.reversed(), 1.0);
            let expected = n(ch.m1) * n(ch.m2) * (1.0 + n(ch.m3)) * (1.0 + n(ch.m4))
                / (n(ch.m3) * n(ch.m4) * (1.0 + n(ch.m1)) * (1.0 + n(ch.m2)));
            assert_relative_eq!(fwd / bwd, expected, max_relative = 0.05);
        }
    }
}
