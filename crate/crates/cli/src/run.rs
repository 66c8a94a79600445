use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use qdo_core::archive::ArchiveSpec;
use qdo_core::problems::{self, Evaluator, ExternalEvaluator, Problem, SampleTable, TabularEvaluator};
use qdo_core::reporting::{self, FinalSummary, RunReport};
use qdo_core::scheduler::{OptimizerChoice, PRESETS};
use qdo_core::{Error, OptimizerSpec, Result, RunConfig, RunSpec};
use rayon::prelude::*;

pub const EVALUATOR_ENV: &str = "QDO_EVALUATOR_CMD";

#[derive(Args)]
pub struct RunArgs {
    /// Problem id (see `qdo list-problems`).
    #[arg(long)]
    problem: Option<String>,
    /// Preset name or path to an optimizer JSON file.
    #[arg(long)]
    optimizer: Option<String>,
    /// Run-config JSON; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Evaluations per iteration.
    #[arg(long)]
    batch: Option<usize>,
    /// Seed of the first replication; replication r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Evaluation threads per replication.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Sample-table CSV serving as the evaluator for a benchmark problem.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io(path))
}

struct Resolved {
    problem: String,
    archive: Option<ArchiveSpec>,
    optimizer: OptimizerSpec,
    label: String,
    iterations: usize,
    seed: u64,
}

fn resolve(args: &RunArgs) -> Result<Resolved> {
    let config = match &args.config {
        Some(path) => Some(RunConfig::from_json(&read(path)?)?),
        None => None,
    };
    let problem = args
        .problem
        .clone()
        .or_else(|| config.as_ref().map(|c| c.problem.clone()))
        .ok_or_else(|| usage("--problem is required"))?;
    let iterations = args
        .iterations
        .or(config.as_ref().map(|c| c.iterations))
        .ok_or_else(|| usage("--iterations is required"))?;
    let seed = args.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
    let batch = args.batch.or(config.as_ref().and_then(|c| c.batch));

    let (choice, label) = match &args.optimizer {
        Some(name) if PRESETS.contains(&name.as_str()) => (
            OptimizerChoice::Preset {
                preset: name.clone(),
            },
            name.clone(),
        ),
        Some(path) => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(usage(format!(
                    "--optimizer {:?} is neither a preset ({}) nor a file",
                    path,
                    PRESETS.join(", ")
                )));
            }
            let choice: OptimizerChoice = serde_json::from_str(&read(path)?)?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            (choice, stem)
        }
        None => match &config {
            Some(c) => {
                let label = match &c.optimizer {
                    OptimizerChoice::Preset { preset } => preset.clone(),
                    OptimizerChoice::Emitters { .. } => "custom".into(),
                };
                (c.optimizer.clone(), label)
            }
            None => (
                OptimizerChoice::Preset {
                    preset: "map_elites".into(),
                },
                "map_elites".into(),
            ),
        },
    };
    Ok(Resolved {
        problem,
        archive: config.and_then(|c| c.archive),
        optimizer: choice.resolve(batch)?,
        label,
        iterations,
        seed,
    })
}

/// Shared evaluator source for all replications.
enum Source {
    Builtin,
    Shared(Arc<dyn Evaluator>),
    External(String),
}

fn evaluator_source(problem: &str, table: Option<&Path>) -> Result<Source> {
    if problems::synthetic_problem(problem).is_ok() {
        if table.is_some() {
            return Err(usage("--table applies to benchmark problems only"));
        }
        return Ok(Source::Builtin);
    }
    let def = problems::paper_problem(problem)?;
    if let Some(path) = table {
        let table = SampleTable::load(path)?;
        return Ok(Source::Shared(Arc::new(TabularEvaluator::new(def.space, table)?)));
    }
    match std::env::var(EVALUATOR_ENV) {
        Ok(cmd) if !cmd.trim().is_empty() => Ok(Source::External(cmd)),
        _ => Err(usage(format!(
            "problem {problem} needs an evaluator: pass --table or set {EVALUATOR_ENV}"
        ))),
    }
}

fn bind(resolved: &Resolved, source: &Source) -> Result<Problem> {
    let problem = match source {
        Source::Builtin => problems::synthetic_problem(&resolved.problem)?,
        Source::Shared(ev) => problems::paper_problem(&resolved.problem)?.bind(ev.clone())?,
        Source::External(cmd) => {
            // One process per replication: a process serves one request at a time.
            let ev = ExternalEvaluator::from_shell(
                cmd,
                &[("QDO_PROBLEM", resolved.problem.as_str())],
                problems::DEFAULT_TIMEOUT,
            )?;
            problems::paper_problem(&resolved.problem)?.bind(Arc::new(ev))?
        }
    };
    match &resolved.archive {
        Some(archive) => problems::ProblemDef {
            archive: archive.clone(),
            ..problem.def
        }
        .bind(problem.evaluator),
        None => Ok(problem),
    }
}

fn final_summary(report: &RunReport) -> FinalSummary {
    let last = report.last();
    FinalSummary {
        coverage_pct: last.coverage * 100.0,
        qd_score: last.qd_score,
        max_objective: last.max_objective.unwrap_or(f64::NAN),
    }
}

pub fn run(args: &RunArgs) -> Result<()> {
    if args.replications == 0 {
        return Err(usage("--replications must be >= 1"));
    }
    let resolved = resolve(args)?;
    let source = evaluator_source(&resolved.problem, args.table.as_deref())?;
    let seeds: Vec<u64> = (0..args.replications as u64)
        .map(|r| resolved.seed.wrapping_add(r))
        .collect();
    if resolved.iterations == 0 {
        return Err(usage("--iterations must be >= 1"));
    }

    let reports: Vec<RunReport> = seeds
        .par_iter()
        .map(|&seed| {
            let problem = bind(&resolved, &source)?;
            let spec = RunSpec::new(problem, resolved.optimizer.clone(), resolved.iterations, seed)?
                .with_workers(args.workers);
            qdo_core::run(&spec)
        })
        .collect::<Result<_>>()?;

    let out = &args.out;
    std::fs::create_dir_all(out).map_err(io(out))?;
    for r in &reports {
        let seed = r.seed();
        reporting::write_metrics_csv(r, &out.join(format!("metrics_seed{seed}.csv")))?;
        r.archive.save_csv(&out.join(format!("archive_seed{seed}.csv")))?;
    }
    let mut manifest = serde_json::to_value(&reports[0].spec)?;
    manifest["seeds"] = serde_json::to_value(&seeds)?;
    let path = out.join("run_config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io(&path))?;

    let summary = if reports.len() >= 2 {
        let agg = reporting::aggregate(&reports)?;
        agg.save_csv(&out.join("aggregate.csv"))?;
        agg.final_summary()
    } else {
        final_summary(&reports[0])
    };
    print!("{}", reporting::summary_table(&[(resolved.label, summary)]));
    Ok(())
}
