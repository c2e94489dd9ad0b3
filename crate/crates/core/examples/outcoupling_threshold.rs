//! Scan of the constant outcoupling ratio `xi` on a pre-grown condensate.
//!
//! Each ratio starts from the same grown state (the outcoupling switches on at
//! `t_grow`) and the bracket is where the final condensate drops below half of
//! its value at switch-on.

use atomlaser::engine::{ensemble, uniform_grid, SimulationParams};
use atomlaser::observables::threshold_scan;
use atomlaser::pump::{LoadingConfig, LoadingMode, OutcouplingPolicy};
use atomlaser::units::TrapSpec;

fn main() -> atomlaser::Result<()> {
    let trap = TrapSpec { m_max: 6, virtual_extra: 2, ..TrapSpec::default() };
    let loading = LoadingConfig { gamma_eff: 5e-3, mode: LoadingMode::PerStateErgodic, max_load_shell: None };
    let t_grow = 1000.0;
    let t_end = 2000.0;
    let mut base = SimulationParams::new(trap, loading, t_end, 20);
    base.realizations = 4;
    base.seed = 5;

    let grown = ensemble(&SimulationParams { t_end: t_grow, sample_grid: uniform_grid(t_grow, 1), ..base.clone() })?;
    let n0_start = *grown.summary.n0.mean.last().unwrap();
    println!("N0 at switch-on: {n0_start:.1}");

    let scan = threshold_scan(&[1.0, 1.25, 1.5, 2.0, 3.0], 0.5 * n0_start, 2, |xi| {
        let mut p = base.clone();
        p.outcoupling = OutcouplingPolicy::constant(xi, t_grow);
        let ens = ensemble(&p)?;
        let k = ens.summary.len() - 1;
        println!("  xi = {xi:.4}: final N0 = {:.1} +- {:.1}", ens.summary.n0.mean[k], ens.summary.n0.stderr[k]);
        Ok((ens.summary.n0.mean[k], ens.summary.n0.stderr[k]))
    })?;
    let b = &scan.bracket;
    println!(
        "bracket [{:?}, {:?}], estimate {:?}, monotone {}",
        b.lower, b.upper, b.estimate, b.monotone
    );
    Ok(())
}
