//! Condensate growth from an empty trap.
//!
//! Without collisions and with per-shell loading, the ground shell is a pure
//! birth process with rate `gamma (N0 + 1)`, so `<N0(t)> = exp(gamma t) - 1`.
//! The second part turns collisions on and reports the onset time.

use atomlaser::engine::{ensemble, SimulationParams};
use atomlaser::observables::{ensemble_onset, OnsetCriterion};
use atomlaser::pump::{LoadingConfig, LoadingMode};
use atomlaser::units::TrapSpec;

fn main() -> atomlaser::Result<()> {
    let gamma = 0.5;
    let trap = TrapSpec { m_max: 4, virtual_extra: 0, ..TrapSpec::default() };
    let loading = LoadingConfig { gamma_eff: gamma, mode: LoadingMode::PerShell, max_load_shell: None };
    let mut params = SimulationParams::new(trap, loading, 6.0, 6);
    params.delta = 0.0;
    params.realizations = 2000;
    params.seed = 3;
    let ens = ensemble(&params)?;
    println!("   t   <N0>      exp(gt)-1   stderr");
    for (k, &t) in ens.summary.t.iter().enumerate() {
        let exact = (gamma * t).exp() - 1.0;
        println!(
            "{t:4.1} {:10.3} {exact:10.3} {:8.3}",
            ens.summary.n0.mean[k], ens.summary.n0.stderr[k]
        );
    }

    // Collisions on: small trap, larger loading rate so it finishes quickly.
    let trap = TrapSpec { m_max: 12, virtual_extra: 3, ..TrapSpec::default() };
    let loading = LoadingConfig { gamma_eff: 2e-3, mode: LoadingMode::PerStateErgodic, max_load_shell: None };
    let mut params = SimulationParams::new(trap, loading, 1500.0, 30);
    params.realizations = 4;
    let ens = ensemble(&params)?;
    let crit = OnsetCriterion::default();
    let last = ens.summary.len() - 1;
    println!(
        "\ncollisional loading: delta = {:.3e}, onset = {:?}, final N = {:.0}, N0 = {:.0}",
        params.delta,
        ensemble_onset(&ens.summary, &crit),
        ens.summary.n.mean[last],
        ens.summary.n0.mean[last]
    );
    Ok(())
}
