use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cryoporo::commands::{self, RunOptions};
use cryoporo::config::{self, FileConfig};
use cryoporo::error::CliError;
use cryoporo::presets;

#[derive(Parser, Debug)]
#[command(name = "cryoporo", version, about = "Freezing porous medium simulator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Print the full default configuration with comments and exit.
    #[arg(long, global = true)]
    print_defaults: bool,

    /// Configuration file.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Shipped scenario instead of a file.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory, overriding `[output] out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Modes of the spectral reference solver.
    #[arg(long, global = true)]
    n_modes: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the finite-volume solver.
    Simulate {
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many steps and write a checkpoint.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Run the spectral reference solver.
    Oracle,
    /// Run both solvers and report their discrepancy.
    Compare,
    /// Run every point of the `[sweep]` grid.
    Sweep,
    /// Check material parameters only.
    Check,
    /// List the shipped presets.
    Presets,
}

fn load(cli: &Cli) -> Result<FileConfig, CliError> {
    match (&cli.config, &cli.preset) {
        (Some(path), _) => config::parse_file(path),
        (None, Some(name)) => presets::load(name),
        (None, None) => Err(CliError::Config("--config <path> or --preset <name> is required".into())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.print_defaults {
        print!("{}", config::dump(&config::defaults(), true));
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Config("no subcommand given (see --help)".into()));
    };
    if let Command::Presets = command {
        presets::names().for_each(|n| println!("{n}"));
        return Ok(());
    }
    let cfg = load(&cli)?;
    let mut opts = RunOptions {
        out: cli.out.clone(),
        n_modes: cli.n_modes,
        ..RunOptions::default()
    };
    match command {
        Command::Simulate { resume, max_steps } => {
            opts.resume = resume.clone();
            opts.max_steps = *max_steps;
            let o = commands::simulate(&cfg, &opts)?;
            let t = o.trajectory.final_state.t;
            let state = if o.finished { "finished" } else { "paused" };
            println!("{state} at t = {t} after {} steps; output in {}", o.steps, o.out_dir.display());
        }
        Command::Oracle => {
            let snaps = commands::oracle(&cfg, &opts)?;
            println!("{} oracle snapshots written", snaps.len());
        }
        Command::Compare => {
            let d = commands::compare_run(&cfg, &opts)?;
            println!("{:<6} {:>24} {:>24}", "field", "rel_l2", "sup");
            for (i, name) in cryoporo_core::galerkin::Discrepancy::FIELDS.iter().enumerate() {
                println!("{name:<6} {:>24.16e} {:>24.16e}", d.rel_l2[i], d.sup[i]);
            }
            println!("matched snapshot times: {}", d.matched_times);
        }
        Command::Sweep => {
            let results = commands::sweep(&cfg, &opts)?;
            let mut worst: Option<CliError> = None;
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(steps) => println!("point_{i:04}: ok ({steps} steps)"),
                    Err(e) => {
                        println!("point_{i:04}: {e}");
                        if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                            worst = Some(e);
                        }
                    }
                }
            }
            if let Some(e) = worst {
                return Err(e);
            }
        }
        Command::Check => {
            if !commands::check(&cfg) {
                return Err(CliError::Config("material parameters are not admissible".into()));
            }
        }
        Command::Presets => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
