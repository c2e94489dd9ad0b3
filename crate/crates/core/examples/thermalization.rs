//! Closed-system relaxation to a Bose-Einstein distribution.
//!
//! 200 atoms split between two excited shells collide until the time-averaged
//! occupations settle; the result is compared with the grand-canonical fit
//! that has the same atom number and energy.

use atomlaser::engine::{ensemble, TimeWindow, SimulationParams};
use atomlaser::observables::{fit_bose_einstein, max_relative_deviation};
use atomlaser::occupancy::ShellOccupancy;
use atomlaser::units::shell_degeneracy;

fn main() -> atomlaser::Result<()> {
    let shells = 15;
    let mut counts = vec![0u64; shells];
    counts[2] = 100;
    counts[8] = 100;
    let initial = ShellOccupancy::from_counts(counts);
    let (n, excitation) = (initial.total() as f64, initial.excitation() as f64);

    let mut params = SimulationParams::closed(initial, 1.0, 60.0, 10);
    params.stats_window = Some(TimeWindow { start: 15.0, end: 60.0 });
    params.realizations = 2;
    let ens = ensemble(&params)?;

    let mut mean = vec![0.0; shells];
    for tr in &ens.trajectories {
        for (acc, c) in mean.iter_mut().zip(tr.window.mean_counts()) {
            *acc += c / ens.trajectories.len() as f64;
        }
    }
    let fit = fit_bose_einstein(shells, n, excitation)?;
    println!("mu = {:.4}, tau = {:.4}", fit.mu, fit.tau);
    println!(" m   <N_m>/g_m   BE");
    for m in 0..shells {
        println!("{m:2} {:10.4} {:8.4}", mean[m] / shell_degeneracy(m) as f64, fit.occupations[m]);
    }
    println!("max relative deviation (<N_m> >= 5): {:.3}", max_relative_deviation(&mean, &fit, 5.0));
    Ok(())
}
