//! Anytime metrics, replication aggregates and heatmaps.

pub mod heatmap;
pub mod stats;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::archive::{ArchiveSpec, GridArchive};
use crate::error::{Error, Result};
use crate::scheduler::OptimizerSpec;
use stats::MeanSe;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub evaluations: u64,
    pub coverage: f64,
    pub qd_score: f64,
    pub max_objective: Option<f64>,
}

/// What was run, minus the evaluator itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub problem: String,
    pub archive: ArchiveSpec,
    pub optimizer: OptimizerSpec,
    pub iterations: usize,
    pub batch: usize,
    pub seed: u64,
}

impl RunEcho {
    fn same_except_seed(&self, other: &RunEcho) -> bool {
        RunEcho {
            seed: other.seed,
            ..self.clone()
        } == *other
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub spec: RunEcho,
    pub records: Vec<IterationRecord>,
    pub archive: GridArchive,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a run has at least one iteration")
    }
}

const METRICS_HEADER: &str = "iteration,evaluations,coverage,qd_score,max_objective";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics<W: Write>(records: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            r.evaluations,
            r.coverage,
            r.qd_score,
            opt(r.max_objective)
        )?;
    }
    out.flush()
}

pub fn write_metrics_csv(report: &RunReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics(&report.records, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line: line as u64,
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(parse(1, format!("expected header {METRICS_HEADER:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(parse(i + 2, format!("expected 5 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| parse(i + 2, e.to_string()));
            let int = |s: &str| s.parse::<u64>().map_err(|e| parse(i + 2, e.to_string()));
            Ok(IterationRecord {
                iteration: int(f[0])?,
                evaluations: int(f[1])?,
                coverage: num(f[2])?,
                qd_score: num(f[3])?,
                max_objective: if f[4].is_empty() { None } else { Some(num(f[4])?) },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub iteration: u64,
    pub evaluations: u64,
    pub coverage: MeanSe,
    pub qd_score: MeanSe,
    pub max_objective: MeanSe,
}

/// Final-iteration summary in table form: coverage in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalSummary {
    pub coverage_pct: f64,
    pub qd_score: f64,
    pub max_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub spec: RunEcho,
    pub seeds: Vec<u64>,
    pub rows: Vec<AggregateRow>,
}

impl AggregateReport {
    pub fn replications(&self) -> usize {
        self.seeds.len()
    }

    pub fn final_summary(&self) -> FinalSummary {
        let last = self.rows.last().expect("aggregate has rows");
        FinalSummary {
            coverage_pct: last.coverage.mean * 100.0,
            qd_score: last.qd_score.mean,
            max_objective: last.max_objective.mean,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "iteration,evaluations,coverage_mean,coverage_se,qd_score_mean,qd_score_se,max_objective_mean,max_objective_se"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.iteration,
                r.evaluations,
                r.coverage.mean,
                r.coverage.se,
                r.qd_score.mean,
                r.qd_score.se,
                r.max_objective.mean,
                r.max_objective.se
            )?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

/// Per-iteration mean and standard error over replications of one spec.
pub fn aggregate(reports: &[RunReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::usage("nothing to aggregate"))?;
    if reports.len() < 2 {
        return Err(Error::usage(
            "standard errors need at least two replications",
        ));
    }
    if let Some(bad) = reports.iter().find(|r| !first.spec.same_except_seed(&r.spec)) {
        return Err(Error::usage(format!(
            "cannot aggregate runs with different specs (seed {} differs from seed {} beyond the seed)",
            bad.spec.seed, first.spec.seed
        )));
    }
    let rows = (0..first.records.len())
        .map(|i| {
            let col = |f: &dyn Fn(&IterationRecord) -> f64| {
                let xs: Vec<f64> = reports.iter().map(|r| f(&r.records[i])).collect();
                stats::mean_se(&xs)
            };
            AggregateRow {
                iteration: first.records[i].iteration,
                evaluations: first.records[i].evaluations,
                coverage: col(&|r| r.coverage),
                qd_score: col(&|r| r.qd_score),
                max_objective: col(&|r| r.max_objective.unwrap_or(f64::NAN)),
            }
        })
        .collect();
    Ok(AggregateReport {
        spec: first.spec.clone(),
        seeds: reports.iter().map(|r| r.spec.seed).collect(),
        rows,
    })
}

/// Renders final summaries in the `Coverage % | QD-Score | Max` layout.
pub fn summary_table(rows: &[(String, FinalSummary)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(9);
    let mut out = format!(
        "{:<width$}  {:>10}  {:>10}  {:>8}\n",
        "Algorithm", "Coverage %", "QD-Score", "Max"
    );
    for (name, s) in rows {
        out.push_str(&format!(
            "{:<width$}  {:>10.2}  {:>10.2}  {:>8.4}\n",
            name, s.coverage_pct, s.qd_score, s.max_objective
        ));
    }
    out
}
