//! The optimize loop.
//!
//! Each iteration asks every emitter for its allocation, evaluates the whole
//! batch (optionally on a worker pool), inserts results into the archive in
//! batch order, and tells every emitter its own slice. Insert outcomes for
//! later solutions in a batch see the insertions made earlier in that batch.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{ArchiveSpec, Elite, GridArchive};
use crate::emitters::{Emitter, EmitterConfig, EvaluatedSolution};
use crate::error::{Error, Result};
use crate::problems::{self, EvaluationResult, Problem, ProblemDef};
use crate::reporting::{IterationRecord, RunEcho, RunReport};
use crate::search_space::{Configuration, Genotype};

pub const PRESETS: [&str; 5] = ["map_elites", "cma_me", "gauss_imp", "random", "illuminate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSlot {
    #[serde(flatten)]
    pub config: EmitterConfig,
    pub allocation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub emitters: Vec<EmitterSlot>,
}

/// Splits `batch` over `n` emitters, earlier emitters taking the remainder.
pub fn split_batch(batch: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| batch / n + usize::from(i < batch % n))
        .collect()
}

impl OptimizerSpec {
    pub fn new(emitters: Vec<EmitterSlot>) -> Result<Self> {
        if emitters.is_empty() {
            return Err(Error::usage("optimizer needs at least one emitter"));
        }
        for slot in &emitters {
            slot.config.validate()?;
            if slot.allocation == 0 {
                return Err(Error::usage("emitter allocation must be >= 1"));
            }
        }
        Ok(Self { emitters })
    }

    /// Emitters sharing `batch` evenly (ceil-first).
    pub fn even(configs: Vec<EmitterConfig>, batch: usize) -> Result<Self> {
        if batch < configs.len() {
            return Err(Error::usage(format!(
                "batch {batch} cannot feed {} emitters",
                configs.len()
            )));
        }
        let split = split_batch(batch, configs.len());
        Self::new(
            configs
                .into_iter()
                .zip(split)
                .map(|(config, allocation)| EmitterSlot { config, allocation })
                .collect(),
        )
    }

    pub fn preset(name: &str) -> Result<Self> {
        use EmitterConfig::*;
        let configs = match name {
            "map_elites" => vec![Gaussian { sigma: 0.1 }],
            "cma_me" => vec![Improvement { sigma0: 0.1 }],
            "gauss_imp" => vec![Gaussian { sigma: 0.1 }, Improvement { sigma0: 0.1 }],
            "random" => vec![Random],
            "illuminate" => vec![
                Gaussian { sigma: 0.1 },
                Gaussian { sigma: 0.2 },
                Gaussian { sigma: 0.3 },
                Random,
            ],
            _ => {
                return Err(Error::usage(format!(
                    "unknown optimizer preset {name:?}; presets: {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Self::even(configs, 100)
    }

    /// Same emitters, batch re-split evenly.
    pub fn with_batch(&self, batch: usize) -> Result<Self> {
        Self::even(self.emitters.iter().map(|s| s.config.clone()).collect(), batch)
    }

    pub fn batch(&self) -> usize {
        self.emitters.iter().map(|s| s.allocation).sum()
    }
}

/// Optimizer section of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptimizerChoice {
    Preset { preset: String },
    Emitters { emitters: Vec<EmitterEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterEntry {
    #[serde(flatten)]
    pub config: EmitterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<usize>,
}

impl OptimizerChoice {
    pub fn resolve(&self, batch: Option<usize>) -> Result<OptimizerSpec> {
        match self {
            OptimizerChoice::Preset { preset } => {
                let spec = OptimizerSpec::preset(preset)?;
                match batch {
                    Some(b) => spec.with_batch(b),
                    None => Ok(spec),
                }
            }
            OptimizerChoice::Emitters { emitters } => {
                if emitters.iter().all(|e| e.allocation.is_some()) {
                    let spec = OptimizerSpec::new(
                        emitters
                            .iter()
                            .map(|e| EmitterSlot {
                                config: e.config.clone(),
                                allocation: e.allocation.unwrap_or_default(),
                            })
                            .collect(),
                    )?;
                    if let Some(b) = batch.filter(|&b| b != spec.batch()) {
                        return Err(Error::usage(format!(
                            "batch {b} does not match emitter allocations summing to {}",
                            spec.batch()
                        )));
                    }
                    Ok(spec)
                } else if emitters.iter().any(|e| e.allocation.is_some()) {
                    Err(Error::usage("give an allocation for every emitter or for none"))
                } else {
                    let batch = batch.ok_or_else(|| {
                        Error::usage("batch is required when emitters carry no allocation")
                    })?;
                    OptimizerSpec::even(emitters.iter().map(|e| e.config.clone()).collect(), batch)
                }
            }
        }
    }
}

/// The run-config JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archive: Option<ArchiveSpec>,
    pub optimizer: OptimizerChoice,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves a synthetic problem; other problems need an explicit evaluator
    /// binding through [`RunSpec::new`].
    pub fn into_spec(self) -> Result<RunSpec> {
        let problem = problems::synthetic_problem(&self.problem)?;
        let optimizer = self.optimizer.resolve(self.batch)?;
        let problem = match self.archive {
            Some(archive) => ProblemDef { archive, ..problem.def }.bind(problem.evaluator)?,
            None => problem,
        };
        RunSpec::new(problem, optimizer, self.iterations, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: Problem,
    pub optimizer: OptimizerSpec,
    pub iterations: usize,
    pub seed: u64,
    /// Evaluation worker threads; values above 1 enable parallel evaluation
    /// when the evaluator allows it.
    pub workers: usize,
}

impl RunSpec {
    pub fn new(problem: Problem, optimizer: OptimizerSpec, iterations: usize, seed: u64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::usage("iterations must be >= 1"));
        }
        Ok(Self {
            problem,
            optimizer,
            iterations,
            seed,
            workers: 1,
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn echo(&self) -> RunEcho {
        RunEcho {
            problem: self.problem.def.id.clone(),
            archive: self.problem.def.archive.clone(),
            optimizer: self.optimizer.clone(),
            iterations: self.iterations,
            batch: self.optimizer.batch(),
            seed: self.seed,
        }
    }
}

fn evaluate_one(problem: &Problem, config: &Configuration) -> Result<EvaluationResult> {
    problem.evaluate(config).map_err(|e| match e {
        Error::EvaluationFault(msg) if !msg.contains("configuration") => {
            Error::EvaluationFault(format!("{msg} (configuration {config})"))
        }
        Error::Protocol(msg) => Error::Protocol(format!("{msg} (configuration {config})")),
        other => other,
    })
}

pub fn run(spec: &RunSpec) -> Result<RunReport> {
    let started = Instant::now();
    let def = &spec.problem.def;
    let dim = def.space.dim();
    let mut emitters = spec
        .optimizer
        .emitters
        .iter()
        .enumerate()
        .map(|(i, slot)| Emitter::new(&slot.config, dim, slot.allocation, spec.seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut archive = GridArchive::new(def.archive.clone());
    let pool = if spec.workers > 1 && spec.problem.evaluator.parallel_safe() {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(spec.workers)
                .build()
                .map_err(|e| Error::usage(format!("cannot build worker pool: {e}")))?,
        )
    } else {
        None
    };

    let batch = spec.optimizer.batch();
    let mut records = Vec::with_capacity(spec.iterations);
    let mut evaluations: u64 = 0;
    for iteration in 1..=spec.iterations {
        let mut proposals: Vec<(Genotype, Configuration)> = Vec::with_capacity(batch);
        for (emitter, slot) in emitters.iter_mut().zip(&spec.optimizer.emitters) {
            for g in emitter.ask(&archive, slot.allocation)? {
                let c = def.space.denormalize(&g)?;
                proposals.push((g, c));
            }
        }
        let results: Vec<Result<EvaluationResult>> = match &pool {
            Some(pool) => pool.install(|| {
                proposals
                    .par_iter()
                    .map(|(_, c)| evaluate_one(&spec.problem, c))
                    .collect()
            }),
            None => proposals
                .iter()
                .map(|(_, c)| evaluate_one(&spec.problem, c))
                .collect(),
        };

        let mut told = Vec::with_capacity(batch);
        for ((genotype, configuration), result) in proposals.into_iter().zip(results) {
            let r = result?;
            let outcome = archive.insert(Elite {
                genotype: genotype.clone(),
                configuration,
                objective: r.objective,
                features: r.features.clone(),
                eval_index: evaluations,
            })?;
            evaluations += 1;
            told.push(EvaluatedSolution {
                genotype,
                objective: r.objective,
                features: r.features,
                outcome,
            });
        }

        let mut start = 0;
        for (emitter, slot) in emitters.iter_mut().zip(&spec.optimizer.emitters) {
            let end = start + slot.allocation;
            emitter.tell(&archive, &told[start..end])?;
            start = end;
        }

        let s = archive.summary();
        records.push(IterationRecord {
            iteration: iteration as u64,
            evaluations,
            coverage: s.coverage,
            qd_score: s.qd_score,
            max_objective: s.max_objective,
        });
    }

    Ok(RunReport {
        spec: spec.echo(),
        records,
        archive,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let p = OptimizerSpec::preset("gauss_imp").unwrap();
        assert_eq!(p.batch(), 100);
        assert_eq!(p.emitters[0].allocation, 50);
        assert_eq!(p.emitters[0].config, EmitterConfig::Gaussian { sigma: 0.1 });
        assert_eq!(p.emitters[1].config, EmitterConfig::Improvement { sigma0: 0.1 });
        let p = OptimizerSpec::preset("illuminate").unwrap();
        assert_eq!(p.emitters.len(), 4);
        assert!(p.emitters.iter().all(|s| s.allocation == 25));
        assert_eq!(OptimizerSpec::preset("map_elites").unwrap().emitters.len(), 1);
        assert_eq!(OptimizerSpec::preset("random").unwrap().batch(), 100);
        let err = OptimizerSpec::preset("nope").unwrap_err().to_string();
        assert!(err.contains("map_elites") && err.contains("illuminate"));
    }

    #[test]
    fn odd_split_is_ceil_first() {
        assert_eq!(split_batch(101, 2), vec![51, 50]);
        assert_eq!(split_batch(7, 3), vec![3, 2, 2]);
        assert!(OptimizerSpec::preset("illuminate").unwrap().with_batch(3).is_err());
    }

    #[test]
    fn optimizer_json_forms() {
        let c: OptimizerChoice = serde_json::from_str(r#"{"preset":"cma_me"}"#).unwrap();
        assert_eq!(c.resolve(Some(40)).unwrap().batch(), 40);
        let c: OptimizerChoice = serde_json::from_str(
            r#"{"emitters":[{"kind":"gaussian","sigma":0.2},{"kind":"random"}]}"#,
        )
        .unwrap();
        let s = c.resolve(Some(5)).unwrap();
        assert_eq!(s.emitters[0].allocation, 3);
        assert!(c.resolve(None).is_err());
        let c: OptimizerChoice = serde_json::from_str(
            r#"{"emitters":[{"kind":"improvement","sigma0":0.1,"allocation":8}]}"#,
        )
        .unwrap();
        assert_eq!(c.resolve(None).unwrap().batch(), 8);
        assert!(c.resolve(Some(9)).is_err());
    }

    #[test]
    fn run_config_roundtrip() {
        let text = r#"{"problem":"grid_sphere_d6","optimizer":{"preset":"map_elites"},"iterations":3,"batch":10,"seed":4}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let spec = cfg.clone().into_spec().unwrap();
        assert_eq!(spec.optimizer.batch(), 10);
        let report = run(&spec).unwrap();
        assert_eq!(report.records.len(), 3);
        assert_eq!(report.records.last().unwrap().evaluations, 30);
        assert_eq!(RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn single_evaluation_run() {
        let problem = problems::synthetic_problem("grid_sphere_d6").unwrap();
        let opt = OptimizerSpec::preset("random").unwrap().with_batch(1).unwrap();
        let report = run(&RunSpec::new(problem, opt, 1, 0).unwrap()).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].evaluations, 1);
        assert_eq!(report.records[0].coverage, 1.0 / 100.0);
    }
}
