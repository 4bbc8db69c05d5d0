//! Fixed-seed, noise-free policy evaluation.
//!
//! A test set is a pure function of its base seed and trial count, so every
//! checkpoint is compared on identical initial poses and goals.

use serde::{Deserialize, Serialize};

use crate::agents::{local_observation, Agent};
use crate::env::{
    classify_outcome, EnvConfig, EnvState, Goal, ObjectShape, Outcome, PlanarHandEnv,
    TrajectoryStep,
};
use crate::error::{Error, Result};
use crate::harness::rollout::derive_seed;
use crate::scalar::Real;
use crate::stability::{sample_series, summarize_trial, StabilitySeries, TrialSummary};

/// Action source driven by the trial runner.
pub trait RolloutPolicy<R: Real> {
    /// Called once per trial before the first action.
    fn begin_episode(&mut self) {}

    fn act(
        &mut self,
        state: &EnvState<R>,
        goal: &Goal<R>,
        prev_actions: &[Vec<R>],
    ) -> Result<Vec<Vec<R>>>;
}

/// Greedy actor-mean policy over trained agents.
pub struct AgentPolicy<'a, R: Real> {
    agents: &'a [Agent<R>],
}

impl<'a, R: Real> AgentPolicy<'a, R> {
    pub fn new(agents: &'a [Agent<R>]) -> Self {
        AgentPolicy { agents }
    }
}

impl<R: Real> RolloutPolicy<R> for AgentPolicy<'_, R> {
    fn act(
        &mut self,
        state: &EnvState<R>,
        goal: &Goal<R>,
        prev_actions: &[Vec<R>],
    ) -> Result<Vec<Vec<R>>> {
        let mut actions = Vec::with_capacity(self.agents.len());
        for agent in self.agents {
            let obs = local_observation(agent.spec.agent_index, state, goal);
            let input = agent.actor_input(&obs, prev_actions)?;
            let zero = vec![R::zero(); agent.spec.action_dim];
            actions.push(agent.select_action_with(&input, &zero)?);
        }
        Ok(actions)
    }
}

/// Holds every joint still.
pub struct ZeroActionPolicy {
    dims: Vec<usize>,
}

impl ZeroActionPolicy {
    pub fn new<R: Real>(env_config: &EnvConfig<R>) -> Self {
        ZeroActionPolicy { dims: env_config.dofs_per_agent.clone() }
    }
}

impl<R: Real> RolloutPolicy<R> for ZeroActionPolicy {
    fn act(
        &mut self,
        _state: &EnvState<R>,
        _goal: &Goal<R>,
        _prev_actions: &[Vec<R>],
    ) -> Result<Vec<Vec<R>>> {
        Ok(self.dims.iter().map(|&d| vec![R::zero(); d]).collect())
    }
}

/// Hand-written wrist-rotation controller; a learned-policy stand-in.
pub struct ScriptedPolicy<R: Real> {
    env_config: EnvConfig<R>,
}

impl<R: Real> ScriptedPolicy<R> {
    pub fn new(env_config: EnvConfig<R>) -> Self {
        ScriptedPolicy { env_config }
    }
}

impl<R: Real> RolloutPolicy<R> for ScriptedPolicy<R> {
    fn act(
        &mut self,
        state: &EnvState<R>,
        goal: &Goal<R>,
        _prev_actions: &[Vec<R>],
    ) -> Result<Vec<Vec<R>>> {
        Ok(crate::env::scripted_rotation_actions(&self.env_config, state, goal))
    }
}

/// Identity of a fixed evaluation set; reports refuse to compare across
/// different identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSetId {
    pub seed_base: u64,
    pub trials: usize,
    pub threshold: f64,
    pub object: ObjectShape,
}

impl std::fmt::Display for TestSetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "seed_base={} trials={} threshold={} object={:?}",
            self.seed_base, self.trials, self.threshold, self.object
        )
    }
}

/// Everything evaluation produces for one policy on one test set.
#[derive(Debug, Clone)]
pub struct EvalReport<R: Real> {
    pub test_set: TestSetId,
    pub outcomes: Vec<Outcome>,
    pub summaries: Vec<TrialSummary<R>>,
    pub series: Vec<StabilitySeries<R>>,
}

impl<R: Real> EvalReport<R> {
    pub fn success_count(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == Outcome::Success).count()
    }

    pub fn success_rate(&self) -> f64 {
        self.success_count() as f64 / self.outcomes.len() as f64
    }
}

/// Runs one noise-free trial and returns the full trajectory, initial state
/// included.
pub fn run_trial<R: Real>(
    env_config: &EnvConfig<R>,
    policy: &mut dyn RolloutPolicy<R>,
    seed: u64,
) -> Result<Vec<TrajectoryStep<R>>> {
    let mut env = PlanarHandEnv::new(env_config.clone())?;
    let (state, goal, report) = env.reset(seed);
    policy.begin_episode();
    let mut prev_actions: Vec<Vec<R>> =
        env_config.dofs_per_agent.iter().map(|&d| vec![R::zero(); d]).collect();
    let mut steps = vec![TrajectoryStep { step: 0, goal, state, report }];
    while !env.terminated() {
        let actions = policy.act(env.state(), &goal, &prev_actions)?;
        let result = env.step(&actions)?;
        steps.push(TrajectoryStep {
            step: result.state.step_index,
            goal,
            state: result.state,
            report: result.report,
        });
        prev_actions = actions;
    }
    Ok(steps)
}

/// Evaluates a policy over the fixed trial set `seed_base + 0..trials`,
/// classifying outcomes at `threshold` and sampling stability series at
/// `stability_stride`.
pub fn evaluate_policy<R: Real>(
    env_config: &EnvConfig<R>,
    policy: &mut dyn RolloutPolicy<R>,
    trials: usize,
    seed_base: u64,
    threshold: R,
    stability_stride: usize,
) -> Result<EvalReport<R>> {
    if trials == 0 {
        return Err(Error::config("evaluation needs at least one trial"));
    }
    let mut outcomes = Vec::with_capacity(trials);
    let mut summaries = Vec::with_capacity(trials);
    let mut series = Vec::with_capacity(trials);
    for k in 0..trials {
        let seed = derive_seed(&[seed_base, k as u64]);
        let steps = run_trial(env_config, policy, seed)?;
        let goal = steps[0].goal;
        outcomes.push(classify_outcome(&steps, &goal, threshold)?);
        summaries.push(summarize_trial(&steps, stability_stride, env_config.time_step, threshold)?);
        series.push(sample_series(&steps, stability_stride, env_config.time_step)?);
    }
    Ok(EvalReport {
        test_set: TestSetId {
            seed_base,
            trials,
            threshold: threshold.to_f64_lossy(),
            object: env_config.object_shape,
        },
        outcomes,
        summaries,
        series,
    })
}
