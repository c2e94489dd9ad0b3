use serde::{Deserialize, Serialize};

/// Integer population of every energy shell of the `|g>` trap.
///
/// `counts[0]` is the condensate. The totals `N = Σ N_m` and the excitation
/// `Σ N_m m` are cached and kept in sync by every mutator; the energy in units
/// of `hbar omega_g` is `excitation + 3/2 N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShellOccupancy {
    counts: Vec<u64>,
    total: u64,
    excitation: u64,
}

impl ShellOccupancy {
    pub fn empty(shells: usize) -> Self {
        Self {
            counts: vec![0; shells],
            total: 0,
            excitation: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        let excitation = counts.iter().enumerate().map(|(m, &n)| m as u64 * n).sum();
        Self {
            counts,
            total,
            excitation,
        }
    }

    #[inline]
    pub fn shell_count(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn get(&self, m: usize) -> u64 {
        self.counts[m]
    }

    /// Condensate population `N_0`.
    #[inline]
    pub fn condensate(&self) -> u64 {
        self.counts[0]
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    /// `Σ N_m m`, the energy above the zero-point energy in units of `hbar omega_g`.
    #[inline]
    pub fn excitation(&self) -> u64 {
        self.excitation
    }

    /// `Σ N_m (m + 3/2)` in units of `hbar omega_g`.
    pub fn energy(&self) -> f64 {
        self.excitation as f64 + 1.5 * self.total as f64
    }

    #[inline]
    pub fn add(&mut self, m: usize) {
        self.counts[m] += 1;
        self.total += 1;
        self.excitation += m as u64;
    }

    /// Removes one atom from shell `m`.
    ///
    /// # Panics
    /// If the shell is empty.
    #[inline]
    pub fn remove(&mut self, m: usize) {
        assert!(self.counts[m] > 0, "removing an atom from empty shell {m}");
        self.counts[m] -= 1;
        self.total -= 1;
        self.excitation -= m as u64;
    }

    /// Empties shell `m`, returning the number of atoms removed.
    pub fn clear_shell(&mut self, m: usize) -> u64 {
        let n = std::mem::take(&mut self.counts[m]);
        self.total -= n;
        self.excitation -= n * m as u64;
        n
    }

    /// Recomputes the cached totals and compares them with the stored ones.
    pub fn totals_consistent(&self) -> bool {
        let fresh = Self::from_counts(self.counts.clone());
        fresh.total == self.total && fresh.excitation == self.excitation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_track_mutations() {
        let mut s = ShellOccupancy::empty(5);
        s.add(0);
        s.add(3);
        s.add(3);
        assert_eq!(s.total(), 3);
        assert_eq!(s.excitation(), 6);
        assert_eq!(s.energy(), 6.0 + 4.5);
        s.remove(3);
        assert_eq!(s.clear_shell(3), 1);
        assert_eq!(s.total(), 1);
        assert!(s.totals_consistent());
    }

    #[test]
    #[should_panic]
    fn removing_from_empty_shell_panics() {
        let mut s = ShellOccupancy::empty(2);
        s.remove(1);
    }
}
