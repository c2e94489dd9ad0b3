//! Energy-conserving shell collisions under the ergodic approximation.

mod channels;
mod grouped;
mod table;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use channels::{channel_rate, enumerate_channels, ChannelSet, CollisionChannel};
pub use grouped::GroupedRates;
pub use table::{RateTable, SumTree, DEFAULT_REFRESH_INTERVAL};

use crate::occupancy::ShellOccupancy;

/// Incrementally maintained collision rates of one trajectory.
pub trait CollisionRates: Send {
    /// Recomputes every rate from `state`.
    fn rebuild(&mut self, state: &ShellOccupancy);
    /// Refreshes the rates that depend on any of `shells` after they changed.
    fn update_shells(&mut self, state: &ShellOccupancy, shells: &[usize]);
    /// Sum of all channel rates (units of `omega_g`).
    fn total(&self) -> f64;
    /// Channel whose cumulative-rate interval contains `target ∈ [0, total)`.
    fn sample(&mut self, target: f64) -> CollisionChannel;
}

/// Which rate structure drives the collision sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollisionBackend {
    /// Energy-grouped factorised sums ([`GroupedRates`]).
    #[default]
    Grouped,
    /// One sum-tree leaf per channel ([`RateTable`]).
    Table,
}

impl CollisionBackend {
    pub fn build(self, shells: usize, delta: f64, refresh_interval: u64) -> Box<dyn CollisionRates> {
        match self {
            CollisionBackend::Grouped => Box::new(GroupedRates::new(shells, delta)),
            CollisionBackend::Table => Box::new(
                RateTable::new(Arc::new(ChannelSet::new(shells)), delta)
                    .with_refresh_interval(refresh_interval),
            ),
        }
    }
}
