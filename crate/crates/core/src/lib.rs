//! Quality-diversity optimization over bounded hyperparameter search spaces.
//!
//! The crate is organised around the optimize loop:
//!
//! * [`search_space`] maps unit-cube genotypes to original-scale configurations.
//! * [`archive`] bins solutions into a uniform grid of behavioral niches.
//! * [`emitters`] propose candidates (Gaussian perturbation, CMA-ES driven
//!   improvement, uniform random) under an ask/tell contract.
//! * [`scheduler`] runs an emitter portfolio against a problem and records
//!   anytime metrics.
//! * [`problems`] holds the evaluators: synthetic landscapes, a tabular
//!   interpolator, the `qdo-eval/1` process protocol and the benchmark registry.
//! * [`reporting`] persists metrics, aggregates replications and renders heatmaps.

pub mod archive;
pub mod emitters;
mod error;
pub mod problems;
pub mod reporting;
pub mod rng;
pub mod scheduler;
pub mod search_space;

pub use archive::{ArchiveDim, ArchiveSpec, Elite, GridArchive, InsertOutcome, Summary};
pub use emitters::{CmaEs, Emitter, EmitterConfig, EvaluatedSolution, TellOutcome};
pub use error::{Error, Result};
pub use problems::{EvaluationResult, Evaluator, ProblemDef};
pub use reporting::{AggregateReport, IterationRecord, RunReport};
pub use scheduler::{run, OptimizerSpec, RunConfig, RunSpec};
pub use search_space::{Configuration, Genotype, ParamDef, ParamKind, SearchSpace};
