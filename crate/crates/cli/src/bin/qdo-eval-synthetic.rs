//! A `qdo-eval/1` evaluator process backed by the synthetic problems.
//!
//! Synthetic ids are evaluated as-is. Benchmark ids get a stand-in: the
//! configuration is normalized into its search space, scored with the peaks
//! landscape, and the first two genotype coordinates are stretched over the
//! problem's archive bounds as features.

use std::io::{BufRead, Write};
use std::process::ExitCode;

use clap::Parser;
use qdo_core::problems::{self, EvaluationResult, Peaks, Problem, ProblemDef, PROTOCOL};
use qdo_core::{Configuration, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "qdo-eval-synthetic", about = "Synthetic qdo-eval/1 evaluator")]
struct Cli {
    /// Problem id; falls back to $QDO_PROBLEM.
    #[arg(long, env = "QDO_PROBLEM")]
    problem: String,
    /// Exit without answering once this many requests were served.
    #[arg(long)]
    exit_after: Option<u64>,
}

enum Backend {
    Synthetic(Problem),
    StandIn(ProblemDef, Peaks),
}

impl Backend {
    fn new(id: &str) -> Result<Self> {
        if let Ok(p) = problems::synthetic_problem(id) {
            return Ok(Backend::Synthetic(p));
        }
        let def = problems::paper_problem(id)?;
        let peaks = Peaks::new(def.space.dim())?;
        Ok(Backend::StandIn(def, peaks))
    }

    fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult> {
        match self {
            Backend::Synthetic(p) => p.evaluate(config),
            Backend::StandIn(def, peaks) => {
                let g = def.space.normalize(config)?;
                let r = peaks.value(g.as_slice());
                let features = def
                    .archive
                    .dims()
                    .iter()
                    .zip(g.as_slice())
                    .map(|(d, v)| d.lower + v * (d.upper - d.lower))
                    .collect();
                Ok(EvaluationResult::new(r.objective, features))
            }
        }
    }
}

fn serve(cli: &Cli) -> std::result::Result<(), String> {
    let backend = Backend::new(&cli.problem).map_err(|e| e.to_string())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let send = |out: &mut std::io::StdoutLock, v: Value| -> std::result::Result<(), String> {
        writeln!(out, "{v}").and_then(|_| out.flush()).map_err(|e| e.to_string())
    };
    send(&mut out, json!({ "protocol": PROTOCOL, "m": 3 }))?;
    let mut served = 0u64;
    for line in std::io::stdin().lock().lines() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        if cli.exit_after == Some(served) {
            return Ok(());
        }
        let req: Value = serde_json::from_str(&line).map_err(|e| format!("bad request: {e}"))?;
        let id = req["id"].as_u64().ok_or("request without id")?;
        let config: Configuration =
            serde_json::from_value(req["config"].clone()).map_err(|e| format!("bad config: {e}"))?;
        let r = backend.evaluate(&config).map_err(|e| e.to_string())?;
        send(
            &mut out,
            json!({ "id": id, "objective": r.objective, "features": r.features }),
        )?;
        served += 1;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match serve(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdo-eval-synthetic: {e}");
            ExitCode::from(2)
        }
    }
}
