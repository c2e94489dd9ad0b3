//! Configuration files, presets and overrides.
//!
//! Loads a preset, shortens it with `key=value` overrides, runs it and writes
//! the CSV/JSON outputs into a temporary directory.

use atomlaser::config::{preset, ExperimentConfig, PRESET_NAMES};
use atomlaser::experiment::run_and_write;

fn main() -> atomlaser::Result<()> {
    println!("presets: {}", PRESET_NAMES.join(", "));
    let out = std::env::temp_dir().join("atomlaser-presets-example");
    let cfg = preset("fig3")?.with_overrides(&[
        "run.t_end=5000",
        "run.samples=10",
        "realizations=2",
        "m_max=20",
        &format!("output.dir=\"{}\"", out.display()),
    ])?;
    let text = cfg.to_toml()?;
    assert_eq!(ExperimentConfig::from_toml(&text)?, cfg);
    println!("--- expanded configuration ---\n{text}");

    let (result, files) = run_and_write(&cfg)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    let p = &result.summary.points[0];
    println!("final N = {:.1}, N0 = {:.1}", p.final_values.n, p.final_values.n0);
    Ok(())
}
