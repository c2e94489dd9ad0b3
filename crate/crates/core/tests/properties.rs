use std::sync::Arc;

use atomlaser::bre::{
    a2a_bad_correlation, build_alpha, compute_order_terms, CouplingTensor, LambdaSystemSpec, ReducedBREModel,
};
use atomlaser::collision::{channel_rate, ChannelSet, CollisionRates, GroupedRates, RateTable};
use atomlaser::config::{preset, ExperimentConfig, PRESET_NAMES};
use atomlaser::engine::{run, SimulationParams};
use atomlaser::observables::{energy_per_particle, onset_time, threshold_bracket, OnsetCriterion, ThresholdPoint};
use atomlaser::occupancy::ShellOccupancy;
use atomlaser::pump::{apply_evaporation, LoadingConfig, LoadingMode, OutcouplingPolicy};
use atomlaser::units::{collision_unit_rate, TrapSpec, HBAR};
use proptest::prelude::*;

fn occupancy(max_shells: usize, max_count: u64) -> impl Strategy<Value = ShellOccupancy> {
    prop::collection::vec(0..max_count, 1..=max_shells).prop_map(ShellOccupancy::from_counts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_depends_only_on_counts(shells in prop::collection::vec(0usize..12, 1..60), seed in any::<u64>()) {
        let build = |order: &[usize]| {
            let mut s = ShellOccupancy::empty(12);
            for &m in order {
                s.add(m);
            }
            s
        };
        let mut shuffled = shells.clone();
        // Deterministic Fisher-Yates from the drawn seed.
        let mut x = seed | 1;
        for i in (1..shuffled.len()).rev() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            shuffled.swap(i, (x % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(energy_per_particle(&build(&shells)), energy_per_particle(&build(&shuffled)));
    }

    #[test]
    fn tighter_onset_criterion_is_never_earlier(
        n0 in prop::collection::vec(0.0f64..200.0, 2..40),
        n_abs in 1.0f64..100.0,
        f_rel in 0.0f64..0.5,
        dn in 0.0f64..50.0,
        df in 0.0f64..0.3,
        sustained: bool,
    ) {
        let t: Vec<f64> = (0..n0.len()).map(|k| k as f64).collect();
        let fraction: Vec<f64> = n0.iter().map(|x| x / 250.0).collect();
        let loose = OnsetCriterion { n_abs, f_rel, sustained };
        let tight = OnsetCriterion { n_abs: n_abs + dn, f_rel: f_rel + df, sustained };
        if let Some(tt) = onset_time(&t, &n0, &fraction, &tight) {
            let tl = onset_time(&t, &n0, &fraction, &loose);
            prop_assert!(tl.is_some_and(|tl| tl <= tt));
        }
    }

    #[test]
    fn refined_bracket_lies_inside_coarse_one(
        mut values in prop::collection::vec(0.0f64..1000.0, 6..20),
        criterion in 1.0f64..999.0,
    ) {
        values.sort_by(|a, b| b.total_cmp(a));
        let points: Vec<ThresholdPoint> = values
            .iter()
            .enumerate()
            .map(|(k, &v)| ThresholdPoint { xi: 1.0 + 0.1 * k as f64, final_n0: v, stderr: 0.0 })
            .collect();
        let coarse: Vec<ThresholdPoint> = points.iter().copied().step_by(2).collect();
        let fine = threshold_bracket(&points, criterion);
        let wide = threshold_bracket(&coarse, criterion);
        prop_assert!(fine.monotone && wide.monotone);
        prop_assert!(fine.width() <= wide.width());
        if let (Some(a), Some(b)) = (fine.lower, fine.upper) {
            prop_assert!(wide.contains(a) && wide.contains(b));
        }
    }

    #[test]
    fn collisions_conserve_number_and_energy(state in occupancy(10, 30), pick in any::<prop::sample::Index>()) {
        let set = ChannelSet::new(state.shell_count());
        let possible: Vec<_> = set
            .channels()
            .iter()
            .filter(|ch| channel_rate(&state, ch, 1.0) > 0.0)
            .collect();
        prop_assume!(!possible.is_empty());
        let ch = possible[pick.index(possible.len())];
        let mut after = state.clone();
        ch.apply(&mut after);
        prop_assert_eq!(after.total(), state.total());
        prop_assert_eq!(after.excitation(), state.excitation());
        prop_assert!(after.totals_consistent());
    }

    #[test]
    fn grouped_and_table_totals_agree(state in occupancy(12, 50), delta in 1e-6f64..1.0) {
        let set = Arc::new(ChannelSet::new(state.shell_count()));
        let mut table = RateTable::new(set.clone(), delta);
        let mut grouped = GroupedRates::new(state.shell_count(), delta);
        table.rebuild(&state);
        grouped.rebuild(&state);
        let direct: f64 = set.channels().iter().map(|ch| channel_rate(&state, ch, delta)).sum();
        prop_assert!((table.total() - direct).abs() <= 1e-9 * direct.max(1e-300));
        prop_assert!((grouped.total() - direct).abs() <= 1e-9 * direct.max(1e-300));
    }

    #[test]
    fn evaporation_never_increases_a_shell(state in occupancy(15, 20), m_max in 0usize..15) {
        let mut after = state.clone();
        let removed = apply_evaporation(&mut after, m_max);
        prop_assert_eq!(after.total() + removed, state.total());
        for m in 0..state.shell_count() {
            prop_assert!(after.get(m) <= state.get(m));
            if m <= m_max {
                prop_assert_eq!(after.get(m), state.get(m));
            }
        }
    }

    #[test]
    fn alpha_is_hermitian_in_paired_indices(
        eta in -1.5f64..1.5,
        l in 0usize..5, m in 0usize..5, mp in 0usize..5, lp in 0usize..5,
    ) {
        let tensor = CouplingTensor::new(6, eta);
        let a = tensor.alpha(l, m, mp, lp);
        let b = tensor.alpha(lp, mp, m, l).conj();
        prop_assert!((a - b).norm() <= 1e-12);
        prop_assert!(a.im.abs() <= 1e-12);
    }

    #[test]
    fn delta_formulas_agree(a in 1e-10f64..1e-7, omega in 1.0f64..1e5, mass_amu in 1.0f64..250.0) {
        let trap = TrapSpec {
            omega_g: omega,
            scattering_length: a,
            mass: mass_amu * atomlaser::units::AMU,
            ..TrapSpec::default()
        };
        let d = collision_unit_rate(&trap);
        prop_assert!((d.si / omega / d.natural - 1.0).abs() <= 1e-10);
        let ell = (HBAR / (trap.mass * omega)).sqrt();
        prop_assert!((trap.oscillator_length() / ell - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn overridden_configs_round_trip(
        name in prop::sample::select(PRESET_NAMES.to_vec()),
        seed in any::<u32>(),
        realizations in 1usize..20,
        m_max in 2usize..80,
    ) {
        let cfg = preset(name)
            .unwrap()
            .with_overrides(&[format!("seed={seed}"), format!("realizations={realizations}"), format!("trap.m_max={m_max}")])
            .unwrap();
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pumped_runs_keep_their_books(
        seed in any::<u64>(),
        gamma in 1e-3f64..2e-2,
        per_state: bool,
        xi in 0.0f64..3.0,
    ) {
        let trap = TrapSpec { m_max: 5, virtual_extra: 2, ..TrapSpec::default() };
        let mode = if per_state { LoadingMode::PerStateErgodic } else { LoadingMode::PerShell };
        let loading = LoadingConfig { gamma_eff: gamma, mode, max_load_shell: None };
        let mut p = SimulationParams::new(trap, loading, 400.0, 40);
        p.seed = seed;
        p.delta = 0.05;
        p.outcoupling = OutcouplingPolicy::constant(xi, 100.0);
        let tr = run(&p).unwrap();
        let mut prev = None;
        for s in &tr.samples {
            let c = s.counters;
            prop_assert!(s.n0 <= s.n);
            prop_assert_eq!(c.loads, s.n + c.evaporated + c.outcoupled + c.not_trapped);
            if let Some(q) = prev {
                let q: atomlaser::engine::Counters = q;
                prop_assert!(c.loads >= q.loads && c.collisions >= q.collisions);
                prop_assert!(c.outcoupled >= q.outcoupled && c.evaporated >= q.evaporated);
                prop_assert!(c.not_trapped >= q.not_trapped);
            }
            prev = Some(c);
        }
    }
}

#[test]
fn bre_correlation_decays_within_five_lifetimes() {
    for (eps, n0) in [(1e-3, 1), (1e-3, 10), (1e-2, 30)] {
        let spec = LambdaSystemSpec::default().with_epsilon(eps);
        let model = ReducedBREModel::with_condensate(4, n0);
        let f0 = a2a_bad_correlation(&model, &spec, 0.0).unwrap().norm();
        let f5 = a2a_bad_correlation(&model, &spec, 5.0 / spec.gamma_er).unwrap().norm();
        assert!(f5 <= ((-5.0f64).exp() + 1e-3) * f0, "eps {eps} n0 {n0}: {f5} vs {f0}");
    }
}

#[test]
fn bre_small_corrections_keep_ground_populations() {
    for (eps, n0) in [(1e-4, 1), (1e-3, 10), (3e-3, 100)] {
        let spec = LambdaSystemSpec::default().with_epsilon(eps);
        let model = ReducedBREModel::with_condensate(4, n0);
        let terms = compute_order_terms(&model, &spec).unwrap();
        assert!(terms.a1b_population_changing.abs() <= 1e-12 * terms.a1b.abs().max(1e-300));
        assert!(terms.a2b_population_changing.abs() <= 1e-12 * terms.a2b.abs().max(1e-300));
        let bound = 10.0 * (eps * n0 as f64).powi(3);
        assert!(terms.residual().abs() <= bound);
    }
}

#[test]
fn truncated_alpha_is_unitary() {
    for eta in [0.0, 0.3, 1.0] {
        let spec = LambdaSystemSpec { eta, ..LambdaSystemSpec::default() };
        let l_max = 3usize;
        let levels = l_max + (10.0f64 * (1.0 + eta * eta)).ceil() as usize + 1;
        let model = ReducedBREModel::with_condensate(levels, 1);
        assert!(build_alpha(&model, &spec).unitarity_defect(l_max) <= 1e-8);
    }
}
