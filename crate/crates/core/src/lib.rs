//! Provider-group exposure control for top-k recommendation.
//!
//! A pairwise matrix-factorization model ([`bpr`]) produces candidate
//! lists; [`rerank`] re-orders each list greedily so that the
//! position-discounted exposure of every provider group ([`exposure`])
//! approaches a policy target under a Hellinger-distance objective; [`eval`]
//! measures utility, exposure and beyond-accuracy effects. [`experiment`]
//! wires the stages together behind a plain-text [`config`].

pub mod bpr;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod exposure;
pub mod ranking;
pub mod rerank;
pub mod seed;

pub use bpr::{FactorModel, TrainConfig, Triplet};
pub use config::{DataSource, ExperimentConfig};
pub use dataset::{GroupShares, IdIndex, Interaction, InteractionLog, ItemCatalog, SplitPair, SynthParams};
pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use exposure::{ExposureDistribution, Policy, PolicyKind};
pub use ranking::RankedList;
pub use rerank::RerankConfig;
