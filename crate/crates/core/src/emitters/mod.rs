//! Candidate generators over the unit cube.
//!
//! Every emitter follows the same ask/tell cycle: `ask` proposes genotypes,
//! the caller evaluates and inserts them, then `tell` hands back the same
//! solutions, in ask order, together with their archive insert outcomes.

mod cma;

pub use cma::{recombination_weights, CmaEs, CmaStatus, RestartReason};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::archive::{GridArchive, InsertOutcome};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::search_space::{clip_unit, sample_unit, Genotype};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmitterConfig {
    /// MAP-Elites style isotropic Gaussian perturbation of random elites.
    Gaussian { sigma: f64 },
    /// CMA-ES driven by archive improvement ("filter" selection).
    Improvement { sigma0: f64 },
    /// Uniform random sampling.
    Random,
}

impl EmitterConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EmitterConfig::Gaussian { sigma: s } | EmitterConfig::Improvement { sigma0: s }
                if !(s > 0.0 && s.is_finite()) =>
            {
                Err(Error::usage(format!(
                    "emitter standard deviation must be positive, got {s}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSolution {
    pub genotype: Genotype,
    pub objective: f64,
    pub features: Vec<f64>,
    pub outcome: InsertOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TellOutcome {
    /// Stateless emitters acknowledge and ignore feedback.
    Acknowledged,
    Updated,
    Restarted(RestartReason),
}

#[derive(Debug, Clone)]
pub struct GaussianEmitter {
    sigma: f64,
    dim: usize,
    rng: Stream,
}

impl GaussianEmitter {
    /// Perturbs uniformly chosen elites; falls back to uniform sampling while
    /// the archive is empty.
    pub fn ask(&mut self, archive: &GridArchive, n: usize) -> Result<Vec<Genotype>> {
        let noise = Normal::new(0.0, self.sigma)
            .map_err(|e| Error::usage(format!("invalid sigma: {e}")))?;
        (0..n)
            .map(|_| match archive.random_elite(&mut self.rng) {
                None => Ok(sample_unit(&mut self.rng, self.dim)),
                Some(parent) => {
                    let child: Vec<f64> = parent
                        .genotype
                        .as_slice()
                        .iter()
                        .map(|v| v + noise.sample(&mut self.rng))
                        .collect();
                    clip_unit(&child)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ImprovementEmitter {
    cma: CmaEs,
    rng: Stream,
    pending: usize,
}

impl ImprovementEmitter {
    pub fn cma(&self) -> &CmaEs {
        &self.cma
    }

    pub fn cma_mut(&mut self) -> &mut CmaEs {
        &mut self.cma
    }

    pub fn ask(&mut self, n: usize) -> Result<Vec<Genotype>> {
        self.pending = n;
        self.cma
            .ask(&mut self.rng, n)
            .iter()
            .map(|x| clip_unit(x))
            .collect()
    }

    pub fn tell(
        &mut self,
        archive: &GridArchive,
        solutions: &[EvaluatedSolution],
    ) -> Result<TellOutcome> {
        if solutions.len() != self.pending {
            return Err(Error::usage(format!(
                "told {} solutions, last ask produced {}",
                solutions.len(),
                self.pending
            )));
        }
        self.pending = 0;
        match filter_tell(&mut self.cma, solutions)? {
            CmaStatus::Updated => Ok(TellOutcome::Updated),
            CmaStatus::NeedsRestart(reason) => {
                let mean = match archive.random_elite(&mut self.rng) {
                    Some(e) => e.genotype.as_slice().to_vec(),
                    None => sample_unit(&mut self.rng, self.cma.dim()).into_vec(),
                };
                self.cma.reset(mean);
                Ok(TellOutcome::Restarted(reason))
            }
        }
    }
}

/// Order of the archive-improving solutions: new cells first (by objective,
/// descending), then improvements (by gain, descending). Rejected solutions
/// are dropped. Ties keep ask order.
pub fn rank_survivors(solutions: &[EvaluatedSolution]) -> Vec<usize> {
    let mut fresh: Vec<usize> = Vec::new();
    let mut improved: Vec<(usize, f64)> = Vec::new();
    for (i, s) in solutions.iter().enumerate() {
        match s.outcome {
            InsertOutcome::NewCell => fresh.push(i),
            InsertOutcome::Improved(delta) => improved.push((i, delta)),
            InsertOutcome::Rejected => {}
        }
    }
    fresh.sort_by(|&a, &b| solutions[b].objective.total_cmp(&solutions[a].objective));
    improved.sort_by(|a, b| b.1.total_cmp(&a.1));
    fresh.extend(improved.into_iter().map(|(i, _)| i));
    fresh
}

/// CMA-ES update driven only by solutions that entered the archive.
pub fn filter_tell(cma: &mut CmaEs, solutions: &[EvaluatedSolution]) -> Result<CmaStatus> {
    if solutions.len() > cma.lambda() {
        return Err(Error::usage(format!(
            "batch of {} exceeds CMA-ES population {}",
            solutions.len(),
            cma.lambda()
        )));
    }
    let ranked = rank_survivors(solutions);
    let parents: Vec<&[f64]> = ranked
        .iter()
        .map(|&i| solutions[i].genotype.as_slice())
        .collect();
    cma.update(&parents)
}

#[derive(Debug, Clone)]
pub struct RandomEmitter {
    dim: usize,
    rng: Stream,
}

impl RandomEmitter {
    pub fn ask(&mut self, n: usize) -> Vec<Genotype> {
        ask_random(&mut self.rng, n, self.dim)
    }
}

pub fn ask_random<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Vec<Genotype> {
    (0..n).map(|_| sample_unit(rng, d)).collect()
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Emitter {
    Gaussian(GaussianEmitter),
    Improvement(ImprovementEmitter),
    Random(RandomEmitter),
}

impl Emitter {
    /// Builds an emitter for genotypes of dimension `dim` whose stream is
    /// derived from `(master_seed, ordinal)`. `allocation` is the per-ask batch
    /// and sets the CMA-ES population size.
    pub fn new(
        cfg: &EmitterConfig,
        dim: usize,
        allocation: usize,
        master_seed: u64,
        ordinal: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::usage("genotype dimension must be >= 1"));
        }
        let rng = rng::stream(master_seed, ordinal);
        Ok(match *cfg {
            EmitterConfig::Gaussian { sigma } => Emitter::Gaussian(GaussianEmitter { sigma, dim, rng }),
            EmitterConfig::Improvement { sigma0 } => Emitter::Improvement(ImprovementEmitter {
                cma: CmaEs::new(vec![0.5; dim], sigma0, allocation.max(1))?,
                rng,
                pending: 0,
            }),
            EmitterConfig::Random => Emitter::Random(RandomEmitter { dim, rng }),
        })
    }

    pub fn ask(&mut self, archive: &GridArchive, n: usize) -> Result<Vec<Genotype>> {
        match self {
            Emitter::Gaussian(g) => g.ask(archive, n),
            Emitter::Improvement(e) => e.ask(n),
            Emitter::Random(r) => Ok(r.ask(n)),
        }
    }

    pub fn tell(
        &mut self,
        archive: &GridArchive,
        solutions: &[EvaluatedSolution],
    ) -> Result<TellOutcome> {
        match self {
            Emitter::Improvement(e) => e.tell(archive, solutions),
            _ => Ok(TellOutcome::Acknowledged),
        }
    }
}
