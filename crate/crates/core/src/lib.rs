//! Bayesian optimization with consistent Gaussian-process hyperparameter
//! estimation.
//!
//! The crate contains the GP machinery ([`gp`]), the pseudo-label
//! hyperparameter estimator ([`estimation`]), EXP3 bandits ([`bandit`]),
//! GP-UCB acquisition ([`acquisition`]), the BO strategies and baselines
//! ([`strategies`]), synthetic objectives ([`benchmarks`]) and the
//! experiment harness ([`harness`]).

pub mod acquisition;
pub mod bandit;
pub mod benchmarks;
pub mod error;
pub mod estimation;
pub mod gp;
pub mod harness;
pub mod space;
pub mod strategies;
pub mod trace;

pub use acquisition::AcquisitionConfig;
pub use bandit::{Exp3State, RewardRecord};
pub use benchmarks::Objective;
pub use error::{Error, Result};
pub use estimation::{Estimate, EstimatorConfig, PseudoDataset};
pub use gp::{Dataset, GammaPriors, GpPosterior, Hyperparams, LossKind, Predictor};
pub use harness::{ExperimentConfig, ExperimentSummary};
pub use space::Bounds;
pub use strategies::{run_strategy, BoConfig, StrategyKind};
pub use trace::{Arm, RunTrace, TraceRecord};
