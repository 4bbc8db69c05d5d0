//! Experiment harness: run configuration, seeded rollout collection, the
//! staged training loop, evaluation on fixed trial sets, manifests, and
//! comparison reports.

pub mod config;
pub mod evaluate;
pub mod manifest;
pub mod report;
pub mod rollout;
pub mod trainer;

pub use config::{Ablation, RunConfig};
pub use evaluate::{
    evaluate_policy, AgentPolicy, EvalReport, RolloutPolicy, ScriptedPolicy, TestSetId,
    ZeroActionPolicy,
};
pub use manifest::{RunManifest, Stage};
pub use report::{ablation_report, failure_report, per_trial_csv, FailureCounts, LabeledReport};
pub use rollout::{collect_rollouts, derive_seed, RewardMode};
pub use trainer::{load_checkpoint_agents, train, write_artifacts, TrainResult};
