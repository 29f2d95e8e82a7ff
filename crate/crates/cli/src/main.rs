use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neuroevo::Layout;
use neuroevo_cli::commands::{self, SweepGrid};
use neuroevo_cli::config::{extract_overrides, load_config_value, threads_from_env, Override};
use neuroevo_cli::CliError;
use serde_json::json;

/// Evolves neural-network drivers on 2D tracks.
///
/// Any config field can be overridden with a dotted flag such as
/// `--ga.mutation-rate 0.1` or `--physics.layout=FR`.
#[derive(Parser, Debug)]
#[command(name = "neuroevo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one seeded evolution. Exits 0 on success, 2 at the generation limit.
    Run(Common),
    /// Run a layout × crossover × mutation × seed grid and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Layouts to sweep.
        #[arg(long, value_delimiter = ',', default_values = ["FR", "FF"])]
        layouts: Vec<Layout>,
        /// Crossover rates to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.9])]
        crossover_rates: Vec<f64>,
        /// Mutation rates to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1])]
        mutation_rates: Vec<f64>,
        /// Seeds to sweep; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Re-simulate the best episode of a replay and check it bit-exactly.
    Replay {
        /// Replay file written by `run`.
        replay: PathBuf,
        /// Track the replay was recorded on.
        #[arg(long)]
        track: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Track file; overrides `track_path`.
    #[arg(long)]
    track: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Generation cap; overrides `max_generations`.
    #[arg(long)]
    max_generations: Option<u64>,
    /// Suppress per-generation progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    /// Named flags come after dotted ones so they win.
    fn overrides(&self, mut dotted: Vec<Override>) -> Vec<Override> {
        if let Some(t) = &self.track {
            dotted.push(Override::set(&["track_path"], json!(t)));
        }
        if let Some(s) = self.seed {
            dotted.push(Override::set(&["seed"], json!(s)));
        }
        if let Some(o) = &self.out {
            dotted.push(Override::set(&["out_dir"], json!(o)));
        }
        if let Some(g) = self.max_generations {
            dotted.push(Override::set(&["max_generations"], json!(g)));
        }
        dotted
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<u8, CliError> {
    let (args, dotted) = extract_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout with status 0; misuse is status 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return Ok(code);
        }
    };
    match cli.command {
        Command::Run(common) => {
            let raw = load_config_value(common.config.as_deref())?;
            let overrides = common.overrides(dotted);
            let threads = threads_from_env()?;
            let exit = commands::run(raw, &overrides, threads, common.quiet)?;
            Ok(exit.code() as u8)
        }
        Command::Sweep {
            common,
            layouts,
            crossover_rates,
            mutation_rates,
            seeds,
        } => {
            let raw = load_config_value(common.config.as_deref())?;
            let overrides = common.overrides(dotted);
            let threads = threads_from_env()?;
            let grid = SweepGrid {
                layouts,
                crossover_rates,
                mutation_rates,
                seeds,
            };
            commands::sweep(raw, &overrides, &grid, threads, common.quiet)?;
            Ok(0)
        }
        Command::Replay { replay, track } => {
            if !dotted.is_empty() {
                return Err(CliError::Usage("replay takes no config overrides".into()));
            }
            commands::replay(&replay, &track)?;
            Ok(0)
        }
    }
}
