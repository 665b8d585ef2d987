//! Command-line entry point: `probe`, `run`, `ablate`, `report`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dpi::commands::{cmd_ablate, cmd_probe, cmd_report, cmd_run, CmdOptions};
use dpi::config::default_config_text;

#[derive(Parser)]
#[command(
    name = "dpi",
    about = "Dynamic parameter isolation fine-tuning on small deterministic models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe each task, extract core regions, and write the grouping plan.
    Probe {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Override a config key: --set section.key=value (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides run.out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace a non-empty output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Execute the configured method end to end into a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
        /// Shorthand for --set run.seed=N.
        #[arg(long)]
        seed: Option<u64>,
        /// Shorthand for --set run.method=M.
        #[arg(long)]
        method: Option<String>,
        /// Shorthand for --set run.p=P.
        #[arg(long)]
        p: Option<f64>,
        /// Shorthand for --set run.tau=T.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Sweep the core percentage with shared probe checkpoints.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated core percentages (default 0.1,0.5,1,5,10).
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Merge run directories into one combined scoreboard.
    Report {
        /// Run directories to merge.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the merged report.json and scoreboard.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a fully commented sample configuration to stdout.
    InitConfig,
}

fn parse_sets(set: Vec<String>) -> dpi::Result<Vec<(String, String)>> {
    set.into_iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| {
                    dpi::Error::config("--set", format!("expected KEY=VALUE, got `{s}`"))
                })
        })
        .collect()
}

fn execute(cli: Cli) -> dpi::Result<()> {
    match cli.command {
        Command::Probe {
            config,
            set,
            out,
            overwrite,
        } => {
            let opts = CmdOptions {
                overrides: parse_sets(set)?,
                out_dir: out,
                overwrite,
            };
            let dir = cmd_probe(&config, &opts)?;
            println!("wrote {}", dir.display());
        }
        Command::Run {
            config,
            set,
            out,
            overwrite,
            seed,
            method,
            p,
            tau,
        } => {
            let mut overrides = parse_sets(set)?;
            if let Some(seed) = seed {
                overrides.push(("run.seed".into(), seed.to_string()));
            }
            if let Some(method) = method {
                overrides.push(("run.method".into(), method));
            }
            if let Some(p) = p {
                overrides.push(("run.p".into(), p.to_string()));
            }
            if let Some(tau) = tau {
                overrides.push(("run.tau".into(), tau.to_string()));
            }
            let opts = CmdOptions {
                overrides,
                out_dir: out,
                overwrite,
            };
            let dir = cmd_run(&config, &opts)?;
            println!("wrote {}", dir.display());
        }
        Command::Ablate {
            config,
            p_values,
            set,
            out,
            overwrite,
        } => {
            let opts = CmdOptions {
                overrides: parse_sets(set)?,
                out_dir: out,
                overwrite,
            };
            let p_values = p_values.unwrap_or_else(|| vec![0.1, 0.5, 1.0, 5.0, 10.0]);
            let dir = cmd_ablate(&config, &p_values, &opts)?;
            println!("wrote {}", dir.display());
        }
        Command::Report { dirs, out } => {
            let board = cmd_report(&dirs, out.as_deref())?;
            print!("{}", board.render_table());
        }
        Command::InitConfig => {
            print!("{}", default_config_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
