use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use atomlaser::config::{preset, ExperimentConfig, ExperimentKind};
use atomlaser::experiment::run_and_write;
use atomlaser::Result;

#[derive(Parser)]
#[command(name = "atomlaser", version, about = "Continuous loading of a trapped Bose gas: simulations and reabsorption analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and JSON outputs.
    Run(RunArgs),
    /// Print the fully expanded configuration of a preset as TOML.
    PresetDump {
        name: String,
        /// key=value override applied before printing (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate the reabsorption expansion over an (epsilon, N0) grid.
    BreScan(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (fig3..fig8, thermalization, bre-scaling).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// key=value override, e.g. `trap.m_max=30` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self, default_preset: Option<&str>) -> Result<ExperimentConfig> {
        let base = match (&self.config, &self.preset, default_preset) {
            (Some(path), _, _) => ExperimentConfig::load(path)?,
            (None, Some(name), _) => preset(name)?,
            (None, None, Some(name)) => preset(name)?,
            (None, None, None) => {
                return Err(atomlaser::Error::Config("pass --config FILE or --preset NAME".into()))
            }
        };
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(r) = self.realizations {
            overrides.push(format!("realizations={r}"));
        }
        let mut cfg = base.with_overrides(&overrides)?;
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cfg: &ExperimentConfig) -> Result<()> {
    let (result, files) = run_and_write(cfg)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    for p in &result.summary.points {
        let label = if p.label.is_empty() { "run" } else { &p.label };
        let onset = p
            .onset
            .time
            .map_or("none".to_string(), |t| format!("{t:.4e}"));
        eprintln!(
            "{label}: onset {onset}, final N = {:.1}, N0 = {:.1}, fraction = {:.3}",
            p.final_values.n, p.final_values.n0, p.final_values.fraction
        );
    }
    if let Some(th) = &result.summary.threshold {
        eprintln!(
            "threshold bracket [{:?}, {:?}] estimate {:?}",
            th.bracket.lower, th.bracket.upper, th.bracket.estimate
        );
    }
    if let Some(b) = &result.summary.bre {
        eprintln!(
            "A2a_bad exponents: epsilon {:.3}, N0 {:.3}",
            b.a2a_bad.exponent_epsilon.value,
            b.a2a_bad.exponent_n0.map_or(f64::NAN, |e| e.value)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => args.resolve(None).and_then(|c| execute(&c)),
        Command::BreScan(args) => args.resolve(Some("bre-scaling")).and_then(|c| {
            if c.kind != ExperimentKind::BreScaling {
                return Err(atomlaser::Error::Config(format!(
                    "`{}` is not a bre-scaling experiment",
                    c.name
                )));
            }
            execute(&c)
        }),
        Command::PresetDump { name, set } => preset(&name)
            .and_then(|c| c.with_overrides(&set))
            .and_then(|c| c.to_toml())
            .map(|text| print!("{text}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
