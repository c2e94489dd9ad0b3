//! The two collision-rate backends on the same state.
//!
//! The channel table keeps one leaf per channel; the grouped kernel only keeps
//! per-pair factors. Totals agree, and so do the sampled channel frequencies.

use std::collections::HashMap;
use std::sync::Arc;

use atomlaser::collision::{channel_rate, ChannelSet, CollisionRates, GroupedRates, RateTable};
use atomlaser::occupancy::ShellOccupancy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let state = ShellOccupancy::from_counts(vec![40, 12, 9, 5, 3, 1]);
    let delta = 1e-3;
    let channels = Arc::new(ChannelSet::new(state.shell_count()));

    let mut table = RateTable::new(channels.clone(), delta);
    let mut grouped = GroupedRates::new(state.shell_count(), delta);
    table.rebuild(&state);
    grouped.rebuild(&state);
    println!("{} channels", channels.len());
    println!("table total   {:.10e}", table.total());
    println!("grouped total {:.10e}", grouped.total());

    let draws = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = HashMap::new();
    for _ in 0..draws {
        let ch = grouped.sample(rng.gen::<f64>() * grouped.total());
        *hits.entry(ch).or_insert(0u32) += 1;
    }
    let mut rows: Vec<_> = channels
        .channels()
        .iter()
        .map(|ch| (channel_rate(&state, ch, delta) / table.total(), *ch))
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("\nmost likely channels (in -> out): expected vs sampled");
    for (p, ch) in rows.iter().take(8) {
        let seen = hits.get(ch).copied().unwrap_or(0) as f64 / draws as f64;
        println!(
            "({},{}) -> ({},{})  {p:.4}  {seen:.4}",
            ch.m1, ch.m2, ch.m3, ch.m4
        );
    }
}
