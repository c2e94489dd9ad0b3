//! Condensate held under a randomized outcoupling ratio.
//!
//! `xi = c - f` with `f` redrawn uniformly from `[0, f_max]` every resample
//! interval. Fluctuations of `N0` are time-averaged over a window that starts
//! once the condensate has relaxed to its steady state.

use atomlaser::engine::{ensemble, SimulationParams, TimeWindow};
use atomlaser::observables::ensemble_stabilization;
use atomlaser::pump::{LoadingConfig, LoadingMode, OutcouplingPolicy};
use atomlaser::units::TrapSpec;

fn main() -> atomlaser::Result<()> {
    let trap = TrapSpec { m_max: 6, virtual_extra: 2, ..TrapSpec::default() };
    let loading = LoadingConfig { gamma_eff: 5e-3, mode: LoadingMode::PerStateErgodic, max_load_shell: None };
    let (t_on, t_settled, t_end) = (1000.0, 4000.0, 7000.0);
    let mut params = SimulationParams::new(trap, loading, t_end, 70);
    params.outcoupling = OutcouplingPolicy::randomized(1.17, 0.05, 62.83, t_on);
    params.stats_window = Some(TimeWindow { start: t_settled, end: t_end });
    params.realizations = 3;
    let ens = ensemble(&params)?;
    let st = ensemble_stabilization(&ens.trajectories)?;
    let units = params.trap.units();
    println!("<N0> = {:.1}", st.mean_n0);
    println!("std within run = {:.1} ({:.3} relative)", st.std_n0_within_run, st.std_n0_within_run / st.mean_n0);
    println!("std pooled     = {:.1}", st.std_n0_pooled);
    println!(
        "extracted {:.0} atoms, {:.1} atoms/s",
        st.extracted_atoms,
        units.rate_to_si(st.extraction_rate)
    );
    Ok(())
}
