//! Bayesian Bradley–Terry model with ties: likelihoods, a Pólya-Gamma
//! augmented Gibbs sampler under a graph-based spatial prior, a random-walk
//! Metropolis baseline and the simulation studies that compare them.

pub mod dataset;
pub mod error;
pub mod exec;
pub mod gibbs;
pub mod graph;
pub mod linalg;
pub mod mhrw;
pub mod model;
pub mod polya_gamma;
pub mod sim;
pub mod spatial;
pub mod stats;
pub mod summary;

pub use dataset::{ComparisonDataset, Judgement, Outcome};
pub use error::{Error, Result};
pub use exec::Execution;
pub use gibbs::{run_gibbs, run_gibbs_standard, PosteriorSamples, SamplerConfig, SamplerKind};
pub use graph::WardGraph;
pub use mhrw::run_mhrw_baseline;
pub use model::{PairRegressor, QualityVector, TieParameter};
pub use polya_gamma::{sample_pg, PgParams};
pub use spatial::{build_spatial_covariance, InverseGammaPrior, SpatialPrior};
pub use summary::{summarize, IntervalSummary, PosteriorSummary};
