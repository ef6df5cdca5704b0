//! Corruption-robust model-based reinforcement learning on finite-horizon
//! tabular MDPs with finite model classes.
//!
//! The online learner ([`omle`]) acts optimistically over a confidence set
//! built from uncertainty-weighted log-likelihoods; the offline learner
//! ([`pmle`]) iterates the weights to a fixed point and plays the max-min
//! policy over its confidence set. [`corruption`] provides adversaries that
//! perturb transition rows under a per-stage budget, and [`uncertainty`]
//! the information ratios and complexity measures. [`harness`] runs seeded
//! experiments from a TOML configuration.

pub mod corruption;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mdp;
pub mod model_class;
pub mod omle;
pub mod params;
pub mod pmle;
pub mod rng;
pub mod simulate;
pub mod uncertainty;

pub use corruption::{Adversary, CorruptionLedger, LedgerSummary, Strategy};
pub use error::{Error, Result};
pub use mdp::{EpisodicMdp, Policy, StochasticPolicy, Trajectory, Transition, ValueTables};
pub use model_class::ModelClass;
pub use omle::{run_online, OmleLearner, OnlineOptions, OnlineRun, Weighting};
pub use params::{default_parameters, CorruptionKnowledge, Params};
pub use pmle::{fit_offline, generate_offline_dataset, OfflineDataset, OfflineFit, OfflineOptions, PolicySearch};
pub use rng::SeedTree;
pub use uncertainty::{HistoryBuffer, WeightTable};
