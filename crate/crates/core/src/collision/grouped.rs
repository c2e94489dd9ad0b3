use super::channels::{in_factor, min_shell_prefactor, out_factor, pairs_with_sum, CollisionChannel};
use super::CollisionRates;
use crate::occupancy::ShellOccupancy;

/// Collision rates aggregated by total shell energy.
///
/// Every channel rate factorises as `Δ h(min(lo_in, lo_out)) A(in) B(out)`,
/// where `A`/`B` only depend on the in/out pair. Within one energy group,
/// sorting pairs by their lower shell gives
///
/// `T = Σ_{p<q} h(lo_p) (A_p B_q + A_q B_p)`,
///
/// which one backward sweep evaluates in O(pairs). A shell change touches one
/// pair per group, so an update costs O(S²) flops instead of re-evaluating the
/// O(S³) individual channels that involve the shell.
#[derive(Debug, Clone)]
pub struct GroupedRates {
    delta: f64,
    // Flattened per-group pair storage.
    group_start: Vec<usize>,
    lo: Vec<usize>,
    hi: Vec<usize>,
    prefactor: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    group_of_pair: Vec<usize>,
    group_total: Vec<f64>,
    total: f64,
    // Per shell: flat indices of the pairs that contain it.
    pairs_of_shell: Vec<Vec<usize>>,
    dirty: Vec<bool>,
    dirty_list: Vec<usize>,
    suffix_a: Vec<f64>,
    suffix_b: Vec<f64>,
}

impl GroupedRates {
    pub fn new(shells: usize, delta: f64) -> Self {
        let groups = if shells == 0 { 0 } else { 2 * shells - 1 };
        let mut group_start = Vec::with_capacity(groups + 1);
        let (mut lo, mut hi, mut group_of_pair) = (Vec::new(), Vec::new(), Vec::new());
        let mut pairs_of_shell = vec![Vec::new(); shells];
        for sum in 0..groups {
            group_start.push(lo.len());
            for (l, h) in pairs_with_sum(sum, shells) {
                let idx = lo.len();
                lo.push(l);
                hi.push(h);
                group_of_pair.push(sum);
                pairs_of_shell[l].push(idx);
                if h != l {
                    pairs_of_shell[h].push(idx);
                }
            }
        }
        group_start.push(lo.len());
        let n = lo.len();
        let prefactor = lo.iter().map(|&l| min_shell_prefactor(l)).collect();
        Self {
            delta,
            group_start,
            lo,
            hi,
            prefactor,
            a: vec![0.0; n],
            b: vec![0.0; n],
            group_of_pair,
            group_total: vec![0.0; groups],
            total: 0.0,
            pairs_of_shell,
            dirty: vec![false; groups],
            dirty_list: Vec::with_capacity(groups),
            suffix_a: Vec::with_capacity(shells + 1),
            suffix_b: Vec::with_capacity(shells + 1),
        }
    }

    fn refresh_pair(&mut self, p: usize, counts: &[u64]) {
        let (l, h) = (self.lo[p], self.hi[p]);
        self.a[p] = in_factor(counts, l, h);
        self.b[p] = out_factor(counts, l, h);
    }

    fn group_sum(&self, g: usize) -> f64 {
        let range = self.group_start[g]..self.group_start[g + 1];
        let (mut sa, mut sb, mut t) = (0.0, 0.0, 0.0);
        for p in range.rev() {
            t += self.prefactor[p] * (self.a[p] * sb + self.b[p] * sa);
            sa += self.a[p];
            sb += self.b[p];
        }
        t
    }

    fn recompute_total(&mut self) {
        self.total = self.delta * self.group_total.iter().sum::<f64>();
    }

    /// Rate of one energy group (including `Δ`).
    pub fn group_rate(&self, sum: usize) -> f64 {
        self.delta * self.group_total[sum]
    }
}

impl CollisionRates for GroupedRates {
    fn rebuild(&mut self, state: &ShellOccupancy) {
        let counts = state.counts();
        for p in 0..self.lo.len() {
            self.refresh_pair(p, counts);
        }
        for g in 0..self.group_total.len() {
            self.group_total[g] = self.group_sum(g);
        }
        self.recompute_total();
    }

    fn update_shells(&mut self, state: &ShellOccupancy, shells: &[usize]) {
        let counts = state.counts();
        for &m in shells {
            for i in 0..self.pairs_of_shell[m].len() {
                let p = self.pairs_of_shell[m][i];
                self.refresh_pair(p, counts);
                let g = self.group_of_pair[p];
                if !self.dirty[g] {
                    self.dirty[g] = true;
                    self.dirty_list.push(g);
                }
            }
        }
        let dirty = std::mem::take(&mut self.dirty_list);
        for &g in &dirty {
            self.group_total[g] = self.group_sum(g);
            self.dirty[g] = false;
        }
        self.dirty_list = dirty;
        self.dirty_list.clear();
        self.recompute_total();
    }

    fn total(&self) -> f64 {
        self.total
    }

    fn sample(&mut self, target: f64) -> CollisionChannel {
        let mut target = target / self.delta;
        // Energy group.
        let mut group = None;
        for (g, &t) in self.group_total.iter().enumerate() {
            if t <= 0.0 {
                continue;
            }
            group = Some(g);
            if target < t {
                break;
            }
            target -= t;
        }
        let g = group.expect("sampling a collision with zero total rate");
        let start = self.group_start[g];
        let end = self.group_start[g + 1];
        let target = target.min(self.group_total[g]);

        // Suffix sums of A and B over pairs strictly after each pair.
        let n = end - start;
        self.suffix_a.clear();
        self.suffix_b.clear();
        self.suffix_a.resize(n + 1, 0.0);
        self.suffix_b.resize(n + 1, 0.0);
        for k in (0..n).rev() {
            self.suffix_a[k] = self.suffix_a[k + 1] + self.a[start + k];
            self.suffix_b[k] = self.suffix_b[k + 1] + self.b[start + k];
        }

        // Pair with the smaller lower shell, p; the other pair q > p.
        let mut rem = target;
        let mut chosen = None;
        for k in 0..n {
            let p = start + k;
            let w_in = self.prefactor[p] * self.a[p] * self.suffix_b[k + 1];
            let w_out = self.prefactor[p] * self.b[p] * self.suffix_a[k + 1];
            if w_in + w_out <= 0.0 {
                continue;
            }
            chosen = Some((k, w_in, w_out, rem));
            if rem < w_in + w_out {
                break;
            }
            rem -= w_in + w_out;
        }
        let (k, w_in, w_out, rem) = chosen.expect("empty collision group");
        let p = start + k;
        let p_is_in = w_out <= 0.0 || (rem < w_in && w_in > 0.0);
        let (mut rem, weights): (f64, &[f64]) = if p_is_in {
            (rem.min(w_in) / (self.prefactor[p] * self.a[p]), &self.b)
        } else {
            ((rem - w_in).max(0.0) / (self.prefactor[p] * self.b[p]), &self.a)
        };
        let mut q_pick = None;
        for q in (p + 1)..end {
            let w = weights[q];
            if w <= 0.0 {
                continue;
            }
            q_pick = Some(q);
            if rem < w {
                break;
            }
            rem -= w;
        }
        let q = q_pick.expect("no partner pair with positive weight");
        let (pin, pout) = if p_is_in { (p, q) } else { (q, p) };
        CollisionChannel {
            m1: self.lo[pin],
            m2: self.hi[pin],
            m3: self.lo[pout],
            m4: self.hi[pout],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::channels::{channel_rate, enumerate_channels};
    use super::super::table::RateTable;
    use super::super::ChannelSet;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;
    use std::sync::Arc;

    fn random_state(rng: &mut ChaCha8Rng, shells: usize, max: u64) -> ShellOccupancy {
        ShellOccupancy::from_counts((0..shells).map(|_| rng.gen_range(0..max)).collect())
    }

    #[test]
    fn total_matches_channel_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for shells in [1, 2, 3, 6, 13] {
            for _ in 0..20 {
                let state = random_state(&mut rng, shells, 30);
                let mut g = GroupedRates::new(shells, 0.25);
                g.rebuild(&state);
                let direct: f64 = enumerate_channels(shells)
                    .iter()
                    .map(|ch| channel_rate(&state, ch, 0.25))
                    .sum();
                assert!((g.total() - direct).abs() <= 1e-12 * direct.max(1e-300));
            }
        }
    }

    #[test]
    fn incremental_matches_rebuild_and_table() {
        let shells = 11;
        let set = Arc::new(ChannelSet::new(shells));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut state = random_state(&mut rng, shells, 20);
        let mut g = GroupedRates::new(shells, 1.3);
        let mut t = RateTable::new(Arc::clone(&set), 1.3);
        g.rebuild(&state);
        t.rebuild(&state);
        for _ in 0..500 {
            let target = rng.gen::<f64>() * g.total();
            let ch = g.sample(target);
            assert!(channel_rate(&state, &ch, 1.0) > 0.0);
            ch.apply(&mut state);
            g.update_shells(&state, &ch.shells());
            t.update_shells(&state, &ch.shells());
            let mut fresh = GroupedRates::new(shells, 1.3);
            fresh.rebuild(&state);
            assert!((g.total() - fresh.total()).abs() <= 1e-12 * fresh.total());
            assert!((g.total() - t.total()).abs() <= 1e-9 * fresh.total());
        }
    }

    #[test]
    fn sampling_frequencies_follow_channel_rates() {
        let shells = 5;
        let state = ShellOccupancy::from_counts(vec![3, 5, 2, 4, 1]);
        let mut g = GroupedRates::new(shells, 1.0);
        g.rebuild(&state);
        let total = g.total();
        let draws = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits: HashMap<CollisionChannel, u64> = HashMap::new();
        for _ in 0..draws {
            *hits.entry(g.sample(rng.gen::<f64>() * total)).or_default() += 1;
        }
        for ch in enumerate_channels(shells) {
            let p = channel_rate(&state, &ch, 1.0) / g.total();
            let observed = *hits.get(&ch).unwrap_or(&0) as f64;
            let expected = p * draws as f64;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (observed - expected).abs() <= 4.0 * sigma + 1e-9,
                "{ch:?}: observed {observed}, expected {expected}"
            );
        }
    }
}
