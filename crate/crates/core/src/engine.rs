//! Exact continuous-time Monte Carlo over collisions, loading and outcoupling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionBackend, CollisionChannel, CollisionRates, DEFAULT_REFRESH_INTERVAL};
use crate::error::{Error, Result};
use crate::occupancy::ShellOccupancy;
use crate::pump::{LoadingConfig, OutcouplingPolicy, OutcouplingProcess};
use crate::rng::{stream, StreamPurpose};
use crate::units::{collision_unit_rate, TrapSpec};

/// Time interval over which exact time-weighted moments are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        !(self.end > self.start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    pub trap: TrapSpec,
    pub loading: LoadingConfig,
    pub outcoupling: OutcouplingPolicy,
    /// Collision unit rate `Δ/omega_g`.
    pub delta: f64,
    pub t_end: f64,
    pub sample_grid: Vec<f64>,
    pub seed: u64,
    pub realizations: usize,
    /// Empty shells above `m_max` after every event. Off for closed systems.
    pub evaporation: bool,
    pub backend: CollisionBackend,
    pub refresh_interval: u64,
    /// Starting occupancy; empty trap when `None`.
    pub initial: Option<ShellOccupancy>,
    /// Optional cap on the number of events per trajectory.
    pub max_events: Option<u64>,
    /// Window for time-weighted condensate and occupancy moments.
    pub stats_window: Option<TimeWindow>,
}

impl SimulationParams {
    /// Parameters with `Δ` taken from the trap and an evenly spaced grid of
    /// `samples + 1` points on `[0, t_end]`.
    pub fn new(trap: TrapSpec, loading: LoadingConfig, t_end: f64, samples: usize) -> Self {
        let delta = collision_unit_rate(&trap).natural;
        Self {
            trap,
            loading,
            outcoupling: OutcouplingPolicy::off(),
            delta,
            t_end,
            sample_grid: uniform_grid(t_end, samples),
            seed: 0,
            realizations: 1,
            evaporation: true,
            backend: CollisionBackend::default(),
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
            initial: None,
            max_events: None,
            stats_window: None,
        }
    }

    /// Closed system: no loading, no outcoupling, no cutoff.
    pub fn closed(initial: ShellOccupancy, delta: f64, t_end: f64, samples: usize) -> Self {
        let shells = initial.shell_count();
        let trap = TrapSpec {
            m_max: shells.saturating_sub(1).max(1),
            virtual_extra: 0,
            ..TrapSpec::default()
        };
        let mut p = Self::new(
            trap,
            LoadingConfig {
                gamma_eff: 0.0,
                ..LoadingConfig::default()
            },
            t_end,
            samples,
        );
        p.delta = delta;
        p.evaporation = false;
        p.initial = Some(initial);
        p
    }

    pub fn shell_count(&self) -> usize {
        self.initial
            .as_ref()
            .map_or_else(|| self.trap.shell_count(), |s| s.shell_count())
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        self.loading.validate()?;
        self.outcoupling.validate()?;
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta must be non-negative"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end must be positive"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be at least 1"));
        }
        if self.sample_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("sample_grid must be sorted"));
        }
        if self
            .sample_grid
            .iter()
            .any(|&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(Error::invalid("sample_grid must lie within [0, t_end]"));
        }
        if let Some(init) = &self.initial {
            if init.shell_count() < 1 {
                return Err(Error::invalid("initial occupancy needs at least one shell"));
            }
            if self.evaporation && init.shell_count() != self.trap.shell_count() {
                return Err(Error::invalid(format!(
                    "initial occupancy has {} shells, trap has {}",
                    init.shell_count(),
                    self.trap.shell_count()
                )));
            }
        }
        if let Some(w) = self.stats_window {
            if w.is_empty() || w.start < 0.0 {
                return Err(Error::invalid("stats_window must be a non-empty interval"));
            }
        }
        Ok(())
    }
}

/// `samples + 1` evenly spaced times on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(1);
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

/// `samples + 1` times geometrically spaced on `[t_min, t_end]`, preceded by 0.
pub fn log_grid(t_min: f64, t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(1);
    let ratio = (t_end / t_min).ln();
    std::iter::once(0.0)
        .chain((0..=n).map(|i| {
            if i == n {
                t_end
            } else {
                t_min * (ratio * i as f64 / n as f64).exp()
            }
        }))
        .collect()
}

/// Running totals of one trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub collisions: u64,
    pub loads: u64,
    pub outcoupled: u64,
    pub evaporated: u64,
    pub not_trapped: u64,
    pub rate_changes: u64,
}

impl Counters {
    /// Physical events (collisions, loads and outcouplings).
    pub fn events_total(&self) -> u64 {
        self.collisions + self.loads + self.outcoupled
    }
}

/// State of a trajectory at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub n: u64,
    pub n0: u64,
    /// `Σ N_m m` in units of `hbar omega_g`.
    pub excitation: u64,
    pub counters: Counters,
}

impl Sample {
    pub fn fraction(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.n0 as f64 / self.n as f64
        }
    }

    /// `E/N` including zero-point energy; NaN when the trap is empty.
    pub fn energy_per_particle(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.excitation as f64 / self.n as f64 + 1.5
        }
    }
}

/// Exact time integrals over the statistics window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowMoments {
    pub window: Option<TimeWindow>,
    pub duration: f64,
    pub n0_integral: f64,
    pub n0_sq_integral: f64,
    pub counts_integral: Vec<f64>,
    pub outcoupled_at_start: u64,
    pub outcoupled_at_end: u64,
}

impl WindowMoments {
    fn new(window: Option<TimeWindow>, shells: usize) -> Self {
        Self {
            window,
            counts_integral: vec![0.0; if window.is_some() { shells } else { 0 }],
            ..Self::default()
        }
    }

    fn accumulate(&mut self, state: &ShellOccupancy, t0: f64, t1: f64) {
        let Some(w) = self.window else { return };
        let a = t0.max(w.start);
        let b = t1.min(w.end);
        if b <= a {
            return;
        }
        let dt = b - a;
        let n0 = state.condensate() as f64;
        self.duration += dt;
        self.n0_integral += n0 * dt;
        self.n0_sq_integral += n0 * n0 * dt;
        for (acc, &c) in self.counts_integral.iter_mut().zip(state.counts()) {
            *acc += c as f64 * dt;
        }
    }

    pub fn mean_n0(&self) -> f64 {
        self.n0_integral / self.duration
    }

    pub fn std_n0(&self) -> f64 {
        let m = self.mean_n0();
        (self.n0_sq_integral / self.duration - m * m).max(0.0).sqrt()
    }

    /// Time-averaged shell occupations `<N_m>`.
    pub fn mean_counts(&self) -> Vec<f64> {
        self.counts_integral
            .iter()
            .map(|x| x / self.duration)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub replica: u64,
    pub samples: Vec<Sample>,
    pub final_state: ShellOccupancy,
    pub final_time: f64,
    pub counters: Counters,
    pub initial_atoms: u64,
    pub window: WindowMoments,
    /// True when `max_events` stopped the run before `t_end`.
    pub truncated: bool,
}

/// What a single call to [`Simulation::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Collision(CollisionChannel),
    Load { shell: usize },
    Outcouple,
    /// The outcoupling rate per atom changed (start time or resample).
    RateChange,
    /// `t_end` reached.
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub event: Event,
    pub dt: f64,
}

/// One trajectory in progress.
pub struct Simulation {
    state: ShellOccupancy,
    collisions: Box<dyn CollisionRates>,
    outcoupling: OutcouplingProcess,
    loading: LoadingConfig,
    load_end: usize,
    seed_total: f64,
    m_max: usize,
    evaporation: bool,
    t: f64,
    t_end: f64,
    grid: Vec<f64>,
    next_sample: usize,
    samples: Vec<Sample>,
    counters: Counters,
    initial_atoms: u64,
    window: WindowMoments,
    rng: ChaCha8Rng,
    replica: u64,
    changed: Vec<usize>,
}

impl Simulation {
    pub fn new(params: &SimulationParams, replica: u64) -> Result<Self> {
        params.validate()?;
        let shells = params.shell_count();
        let state = params
            .initial
            .clone()
            .unwrap_or_else(|| ShellOccupancy::empty(shells));
        let mut collisions = params
            .backend
            .build(shells, params.delta, params.refresh_interval);
        collisions.rebuild(&state);
        let load_end = params.loading.load_end(shells);
        let seed_total = (0..load_end)
            .map(|m| params.loading.mode.seed_weight(m) as f64)
            .sum();
        let initial_atoms = state.total();
        Ok(Self {
            state,
            collisions,
            outcoupling: OutcouplingProcess::new(params.outcoupling.clone()),
            loading: params.loading.clone(),
            load_end,
            seed_total,
            m_max: params.trap.m_max,
            evaporation: params.evaporation,
            t: 0.0,
            t_end: params.t_end,
            grid: params.sample_grid.clone(),
            next_sample: 0,
            samples: Vec::with_capacity(params.sample_grid.len()),
            counters: Counters::default(),
            initial_atoms,
            window: WindowMoments::new(params.stats_window, shells),
            rng: stream(params.seed, replica, StreamPurpose::Trajectory),
            replica,
            changed: Vec::with_capacity(4),
        })
    }

    pub fn state(&self) -> &ShellOccupancy {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Grid samples recorded so far.
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn finished(&self) -> bool {
        self.t >= self.t_end
    }

    fn loading_total(&self) -> f64 {
        if self.loading.gamma_eff == 0.0 {
            return 0.0;
        }
        let stimulated = if self.load_end == self.state.shell_count() {
            self.state.total()
        } else {
            self.state.counts()[..self.load_end].iter().sum()
        };
        self.loading.gamma_eff * (stimulated as f64 + self.seed_total)
    }

    fn outcoupling_total(&self) -> f64 {
        self.outcoupling.xi() * self.loading.gamma_eff * self.state.condensate() as f64
    }

    /// Total event rate at the current state.
    pub fn total_rate(&self) -> f64 {
        self.collisions.total() + self.loading_total() + self.outcoupling_total()
    }

    fn record_until(&mut self, t: f64) {
        while self.next_sample < self.grid.len() && self.grid[self.next_sample] <= t {
            self.samples.push(Sample {
                t: self.grid[self.next_sample],
                n: self.state.total(),
                n0: self.state.condensate(),
                excitation: self.state.excitation(),
                counters: self.counters,
            });
            self.next_sample += 1;
        }
    }

    fn advance_clock(&mut self, t_new: f64) {
        self.window.accumulate(&self.state, self.t, t_new);
        if let Some(w) = self.window.window {
            if self.t < w.start && t_new >= w.start {
                self.window.outcoupled_at_start = self.counters.outcoupled;
            }
        }
        self.t = t_new;
    }

    fn pick_load_shell(&mut self, mut u: f64) -> usize {
        let gamma = self.loading.gamma_eff;
        let mut last = 0;
        for m in 0..self.load_end {
            let w = gamma * (self.state.get(m) + self.loading.mode.seed_weight(m)) as f64;
            last = m;
            if u < w {
                return m;
            }
            u -= w;
        }
        last
    }

    fn evaporate(&mut self, shells: &[usize]) -> u64 {
        if !self.evaporation {
            return 0;
        }
        let mut removed = 0;
        for &m in shells {
            if m > self.m_max {
                removed += self.state.clear_shell(m);
            }
        }
        removed
    }

    /// Advances to the next event or rate-change boundary.
    ///
    /// Grid times passed on the way are sampled with the pre-event state.
    pub fn step(&mut self) -> StepOutcome {
        let t0 = self.t;
        if self.finished() {
            self.record_until(self.t_end);
            return StepOutcome {
                event: Event::End,
                dt: 0.0,
            };
        }
        let r_coll = self.collisions.total();
        let r_load = self.loading_total();
        let r_out = self.outcoupling_total();
        let total = r_coll + r_load + r_out;
        let t_event = if total > 0.0 {
            let u: f64 = self.rng.gen();
            t0 - (1.0 - u).ln() / total
        } else {
            f64::INFINITY
        };
        let boundary = self.outcoupling.next_change().min(self.t_end);
        if t_event >= boundary {
            // Memoryless clock: truncate at the boundary and redraw afterwards.
            self.record_until(boundary);
            self.advance_clock(boundary);
            if boundary >= self.t_end {
                self.record_until(self.t_end);
                return StepOutcome {
                    event: Event::End,
                    dt: boundary - t0,
                };
            }
            self.outcoupling.advance(&mut self.rng);
            self.counters.rate_changes += 1;
            return StepOutcome {
                event: Event::RateChange,
                dt: boundary - t0,
            };
        }
        // Grid points strictly before the event see the old state.
        while self.next_sample < self.grid.len() && self.grid[self.next_sample] < t_event {
            self.record_until(self.grid[self.next_sample]);
        }
        self.advance_clock(t_event);

        let u = self.rng.gen::<f64>() * total;
        self.changed.clear();
        let event = if u < r_load {
            let m = self.pick_load_shell(u);
            self.state.add(m);
            self.counters.loads += 1;
            self.changed.push(m);
            let lost = self.evaporate(&[m]);
            self.counters.not_trapped += lost;
            Event::Load { shell: m }
        } else if u < r_load + r_out {
            self.state.remove(0);
            self.counters.outcoupled += 1;
            self.changed.push(0);
            Event::Outcouple
        } else {
            let target = (u - r_load - r_out).min(r_coll * (1.0 - f64::EPSILON));
            let ch = self.collisions.sample(target);
            ch.apply(&mut self.state);
            self.counters.collisions += 1;
            self.changed.extend_from_slice(&ch.shells());
            let lost = self.evaporate(&[ch.m3, ch.m4]);
            self.counters.evaporated += lost;
            Event::Collision(ch)
        };
        let changed = std::mem::take(&mut self.changed);
        self.collisions.update_shells(&self.state, &changed);
        self.changed = changed;

        debug_assert!(self.state.totals_consistent());
        debug_assert_eq!(
            self.initial_atoms + self.counters.loads,
            self.state.total()
                + self.counters.evaporated
                + self.counters.outcoupled
                + self.counters.not_trapped
        );
        StepOutcome {
            event,
            dt: t_event - t0,
        }
    }

    /// Steps until `t_end` or until `max_events` physical events.
    pub fn run_to_end(mut self, max_events: Option<u64>) -> Trajectory {
        let cap = max_events.unwrap_or(u64::MAX);
        let mut truncated = false;
        while !self.finished() {
            if self.counters.events_total() >= cap {
                truncated = true;
                break;
            }
            self.step();
        }
        if !truncated {
            self.record_until(self.t_end);
        }
        self.finish(truncated)
    }

    fn finish(mut self, truncated: bool) -> Trajectory {
        if let Some(w) = self.window.window {
            if self.t >= w.end || !truncated {
                self.window.outcoupled_at_end = self.counters.outcoupled;
            }
        }
        Trajectory {
            replica: self.replica,
            samples: self.samples,
            final_state: self.state,
            final_time: self.t,
            counters: self.counters,
            initial_atoms: self.initial_atoms,
            window: self.window,
            truncated,
        }
    }
}

/// Runs replica `replica` of `params`.
pub fn run_replica(params: &SimulationParams, replica: u64) -> Result<Trajectory> {
    Ok(Simulation::new(params, replica)?.run_to_end(params.max_events))
}

/// Runs replica 0.
pub fn run(params: &SimulationParams) -> Result<Trajectory> {
    run_replica(params, 0)
}

/// Mean and standard error of one observable at each grid point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Column {
    fn from_values(per_point: &[Vec<f64>]) -> Self {
        let mut col = Column::default();
        for values in per_point {
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let n = finite.len();
            if n == 0 {
                col.mean.push(f64::NAN);
                col.stderr.push(f64::NAN);
                continue;
            }
            let mean = finite.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            col.mean.push(mean);
            col.stderr.push(stderr);
        }
        col
    }
}

/// Per-grid-point ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub realizations: usize,
    pub t: Vec<f64>,
    pub n: Column,
    pub n0: Column,
    pub fraction: Column,
    pub energy_per_particle: Column,
    pub cum_evaporated: Column,
    pub cum_outcoupled: Column,
    pub cum_not_trapped: Column,
    pub events_total: Column,
}

impl EnsembleSummary {
    pub fn from_trajectories(trajectories: &[Trajectory]) -> Self {
        let points = trajectories
            .iter()
            .map(|t| t.samples.len())
            .max()
            .unwrap_or(0);
        let t = (0..points)
            .map(|k| {
                trajectories
                    .iter()
                    .find_map(|tr| tr.samples.get(k).map(|s| s.t))
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let column = |f: &dyn Fn(&Sample) -> f64| {
            let per_point: Vec<Vec<f64>> = (0..points)
                .map(|k| {
                    trajectories
                        .iter()
                        .filter_map(|tr| tr.samples.get(k).map(f))
                        .collect()
                })
                .collect();
            Column::from_values(&per_point)
        };
        Self {
            realizations: trajectories.len(),
            t,
            n: column(&|s| s.n as f64),
            n0: column(&|s| s.n0 as f64),
            fraction: column(&|s| s.fraction()),
            energy_per_particle: column(&|s| s.energy_per_particle()),
            cum_evaporated: column(&|s| s.counters.evaporated as f64),
            cum_outcoupled: column(&|s| s.counters.outcoupled as f64),
            cum_not_trapped: column(&|s| s.counters.not_trapped as f64),
            events_total: column(&|s| s.counters.events_total() as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub summary: EnsembleSummary,
}

/// Runs every replica (in parallel) and aggregates in replica order.
pub fn ensemble(params: &SimulationParams) -> Result<Ensemble> {
    params.validate()?;
    let trajectories = (0..params.realizations as u64)
        .into_par_iter()
        .map(|r| run_replica(params, r))
        .collect::<Result<Vec<_>>>()?;
    let summary = EnsembleSummary::from_trajectories(&trajectories);
    Ok(Ensemble {
        trajectories,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pump::LoadingMode;

    fn pumped(gamma: f64, delta: f64, t_end: f64) -> SimulationParams {
        let trap = TrapSpec {
            m_max: 4,
            virtual_extra: 2,
            ..TrapSpec::default()
        };
        let mut p = SimulationParams::new(
            trap,
            LoadingConfig {
                gamma_eff: gamma,
                mode: LoadingMode::PerShell,
                max_load_shell: None,
            },
            t_end,
            20,
        );
        p.delta = delta;
        p
    }

    #[test]
    fn idle_system_stays_empty() {
        let traj = run(&pumped(0.0, 0.0, 10.0)).unwrap();
        assert_eq!(traj.samples.len(), 21);
        assert!(traj.samples.iter().all(|s| s.n == 0 && s.n0 == 0));
        assert_eq!(traj.counters.events_total(), 0);
        assert_eq!(traj.final_time, 10.0);
    }

    #[test]
    fn runs_are_bit_identical() {
        let mut p = pumped(0.5, 0.3, 20.0);
        p.outcoupling = OutcouplingPolicy::randomized(1.1, 0.05, 1.0, 5.0);
        let a = run(&p).unwrap();
        let b = run(&p).unwrap();
        assert_eq!(a, b);
        assert!(a.counters.collisions > 0 && a.counters.outcoupled > 0);
    }

    #[test]
    fn bookkeeping_holds_at_every_sample() {
        let mut p = pumped(0.4, 0.5, 30.0);
        p.outcoupling = OutcouplingPolicy::constant(0.8, 10.0);
        for r in 0..4 {
            let traj = run_replica(&p, r).unwrap();
            let mut prev = Counters::default();
            for s in &traj.samples {
                let c = s.counters;
                assert_eq!(c.loads, s.n + c.evaporated + c.outcoupled + c.not_trapped);
                assert!(s.n0 <= s.n);
                assert!(c.evaporated >= prev.evaporated && c.outcoupled >= prev.outcoupled);
                prev = c;
            }
            assert!(traj.counters.not_trapped > 0);
        }
    }

    #[test]
    fn closed_system_conserves_number_and_energy() {
        let init = ShellOccupancy::from_counts(vec![5, 4, 3, 2, 1, 0, 0, 0]);
        let p = SimulationParams::closed(init.clone(), 1.0, 1.0e3, 10);
        let traj = run(&p).unwrap();
        assert!(traj.counters.collisions > 1000);
        for s in &traj.samples {
            assert_eq!(s.n, init.total());
            assert_eq!(s.excitation, init.excitation());
        }
    }

    #[test]
    fn exponential_waiting_time_and_selection() {
        // Empty two-shell trap with per-state loading: rates g_0 = 1 and g_1 = 3.
        let trap = TrapSpec {
            m_max: 1,
            virtual_extra: 0,
            ..TrapSpec::default()
        };
        let mut p = SimulationParams::new(
            trap,
            LoadingConfig {
                gamma_eff: 0.5,
                mode: LoadingMode::PerStateErgodic,
                max_load_shell: None,
            },
            1e9,
            1,
        );
        p.delta = 0.0;
        let draws = 100_000;
        let (mut sum, mut upper) = (0.0, 0u64);
        for r in 0..draws {
            let out = Simulation::new(&p, r).unwrap().step();
            sum += out.dt;
            if out.event == (Event::Load { shell: 1 }) {
                upper += 1;
            }
        }
        let mean = sum / draws as f64;
        assert!((mean - 0.5).abs() < 0.02 * 0.5, "mean dt {mean}");
        let sigma = (draws as f64 * 0.75 * 0.25).sqrt();
        assert!((upper as f64 - 0.75 * draws as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn rate_zero_jumps_to_grid() {
        let mut p = pumped(0.0, 0.0, 5.0);
        p.sample_grid = vec![0.0, 1.0, 5.0];
        let mut sim = Simulation::new(&p, 0).unwrap();
        let out = sim.step();
        assert_eq!(out.event, Event::End);
        assert_eq!(sim.time(), 5.0);
    }

    #[test]
    fn ensemble_of_one_equals_run() {
        let p = pumped(0.3, 0.2, 10.0);
        let e = ensemble(&p).unwrap();
        let t = run(&p).unwrap();
        assert_eq!(e.trajectories[0], t);
        for (k, s) in t.samples.iter().enumerate() {
            assert_eq!(e.summary.n0.mean[k], s.n0 as f64);
            assert_eq!(e.summary.n0.stderr[k], 0.0);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = pumped(0.3, 0.2, 10.0);
        p.sample_grid = vec![0.0, 20.0];
        assert!(run(&p).is_err());
        let mut p = pumped(0.3, 0.2, 10.0);
        p.realizations = 0;
        assert!(ensemble(&p).is_err());
        let mut p = pumped(0.3, 0.2, 10.0);
        p.t_end = 0.0;
        assert!(run(&p).is_err());
    }

    #[test]
    fn window_moments_match_constant_state() {
        let init = ShellOccupancy::from_counts(vec![7, 0, 0]);
        let mut p = SimulationParams::closed(init, 0.0, 10.0, 2);
        p.stats_window = Some(TimeWindow { start: 2.0, end: 8.0 });
        let traj = run(&p).unwrap();
        assert_eq!(traj.window.duration, 6.0);
        assert_eq!(traj.window.mean_n0(), 7.0);
        assert_eq!(traj.window.std_n0(), 0.0);
        assert_eq!(traj.window.mean_counts(), vec![7.0, 0.0, 0.0]);
    }
}
