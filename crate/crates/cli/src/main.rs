//! `qdo`: run optimizers on benchmark problems, render archive heatmaps and
//! print problem metadata.

mod heatmap;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qdo_core::problems;
use qdo_core::Error;

#[derive(Parser)]
#[command(name = "qdo", version, about = "Quality-diversity optimization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimizer for one or more seeds and write metrics and archives.
    Run(run::RunArgs),
    /// Render an archive CSV as an SVG heatmap plus a value matrix CSV.
    Heatmap(heatmap::HeatmapArgs),
    /// List the registered problems.
    ListProblems,
    /// Print brute-force per-niche optima of a synthetic problem.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct OracleArgs {
    /// Synthetic problem id, e.g. peaks_d6.
    #[arg(long)]
    problem: String,
    /// Lattice points per feature axis.
    #[arg(long, default_value_t = 201)]
    resolution: usize,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn list_problems() {
    for def in problems::paper_problems() {
        println!(
            "{:<40} {:<22} {:>5} niches",
            def.id,
            def.feature_names.join("+"),
            def.archive.cells()
        );
    }
    for id in problems::SYNTHETIC_IDS {
        println!("{id:<40} {:<22} {:>5} niches", "g_0+g_1", 100);
    }
}

fn oracle(args: &OracleArgs) -> qdo_core::Result<()> {
    let cells = problems::niche_optima(&args.problem, args.resolution)?;
    let mut text = String::from("bin_0,bin_1,objective\n");
    for c in cells {
        text.push_str(&format!("{},{},{}\n", c.bins[0], c.bins[1], c.objective));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run::run(args),
        Command::Heatmap(args) => heatmap::heatmap(args),
        Command::ListProblems => {
            list_problems();
            Ok(())
        }
        Command::Oracle(args) => oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
