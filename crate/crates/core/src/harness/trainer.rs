//! The training loop: seeded rollout collection and the per-cycle stage
//! sequence occupancy -> critic -> information sharing -> actor, with
//! epoch-end target updates and validation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    build_agent_specs, critic_targets, replay_actor_gradient, shadow_gradient, Agent,
    ReplayBuffer, ShadowStep, TransitionRecord,
};
use crate::checkpoint::{AgentCheckpoint, CheckpointBundle};
use crate::consensus::{build_ring_topology, metropolis_weights, share_network_interiors, MixingMatrix};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::evaluate::{evaluate_policy, AgentPolicy};
use crate::harness::manifest::{RunManifest, Stage};
use crate::harness::rollout::{collect_rollouts, derive_seed, EpisodeData, RewardMode};
use crate::net::Network;
use crate::occupancy::{BinningSpec, FeatureKind, OccupancyTable};
use crate::reward::{
    compose_shadow, contact_reward, safe_region_reward, AgentRewardProfile, SafeRegionSpec,
};
use crate::scalar::Real;

/// Everything a finished run produces in memory.
#[derive(Debug, Clone)]
pub struct TrainResult<R: Real> {
    pub manifest: RunManifest,
    /// Validation success rate after each epoch.
    pub validation_curve: Vec<f64>,
    pub bundle: CheckpointBundle<R>,
}

/// Paths written by [`write_artifacts`].
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub manifest: PathBuf,
    pub validation_curve: PathBuf,
    pub checkpoint: PathBuf,
    pub config_echo: PathBuf,
}

/// Trains one seed of the configured run. When `out_dir` is given, a
/// partial manifest is flushed there even on failure.
pub fn train<R: Real>(
    config: &RunConfig<R>,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainResult<R>> {
    config.validate()?;
    let mut manifest = RunManifest::new();
    match train_inner(config, seed, &mut manifest) {
        Ok(result) => Ok(result),
        Err(err) => {
            manifest.push("partial", "true");
            manifest.push("error", &err);
            if let Some(dir) = out_dir {
                let _ = std::fs::create_dir_all(dir);
                let _ = manifest.write_to(&dir.join("manifest.txt"));
            }
            Err(err)
        }
    }
}

fn train_inner<R: Real>(
    config: &RunConfig<R>,
    seed: u64,
    manifest: &mut RunManifest,
) -> Result<TrainResult<R>> {
    let start = Instant::now();
    let env_config = config.effective_env();
    let n_agents = env_config.n_agents();
    let alpha = config.effective_alpha();
    let gamma = config.agent.gamma;
    let sigma = config.agent.sigma_explore;

    let topology = build_ring_topology(n_agents, config.consensus.include_wrist)?;
    let mixing: Option<MixingMatrix<R>> = if config.ablation.sharing_enabled() {
        Some(metropolis_weights(&topology)?)
    } else {
        None
    };
    let specs = build_agent_specs(&env_config, &topology)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x1A17]));
    let mut agents: Vec<Agent<R>> = specs
        .into_iter()
        .map(|s| Agent::new(s, &config.agent.hidden, config.agent.learning_rate, &mut init_rng))
        .collect::<Result<_>>()?;
    let mut replay: ReplayBuffer<R> = ReplayBuffer::new(config.agent.replay_capacity)?;
    let mut occupancy: OccupancyTable<R> = OccupancyTable::new(
        BinningSpec::new(vec![
            FeatureKind::Linear {
                lo: R::zero(),
                hi: env_config.palm_radius * R::from_f64_lossy(1.5),
                bins: config.occupancy.offset_bins,
            },
            FeatureKind::Count { max: env_config.sensor_count as u32 },
        ])?,
        gamma,
        config.occupancy.window,
    )?;
    let weights = config.reward.weights(alpha);
    let region = SafeRegionSpec {
        center: env_config.palm_center,
        radius: config.reward.safe_radius_fraction * env_config.palm_radius,
    };
    let profiles: Vec<AgentRewardProfile> =
        (0..n_agents).map(|i| AgentRewardProfile::for_position(i, n_agents)).collect();
    let mode = if config.ablation.dense_reward() {
        RewardMode::Dense
    } else {
        RewardMode::Sparse { threshold: config.train_threshold }
    };
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x5A3F]));

    manifest.push("config_hash", format!("{:016x}", config.config_hash()?));
    manifest.push("seed", seed);
    manifest.push("ablation", config.ablation.label());
    manifest.push(
        "ablation_flags",
        format!(
            "dense={} shadow={} sharing={} alpha={}",
            config.ablation.dense_reward(),
            config.ablation.shadow_enabled(),
            config.ablation.sharing_enabled(),
            alpha.to_f64_lossy()
        ),
    );
    manifest.push("agents", n_agents);
    manifest.push(
        "schedule",
        format!(
            "epochs={} cycles={} batches={} workers={}",
            config.epochs, config.cycles_per_epoch, config.batches_per_cycle, config.rollout_workers
        ),
    );
    if let Some(m) = &mixing {
        for i in 0..m.n() {
            let row: Vec<String> =
                m.row(i).iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
            manifest.push(format!("mixing_row_{i}"), row.join(" "));
        }
    }

    let mut validation_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        for cycle in 0..config.cycles_per_epoch {
            let cycle_seed = derive_seed(&[seed, 0xC1C, epoch as u64, cycle as u64]);
            let episodes = collect_rollouts(
                &env_config,
                &agents,
                config.rollout_workers,
                cycle_seed,
                sigma,
                mode,
            )?;

            // Stage 1: occupancy refresh, shadow bonuses, replay insertion.
            manifest.push_stage(epoch, cycle, Stage::Occupancy);
            for episode in &episodes {
                occupancy.add_episode(&episode.feature_rows())?;
            }
            let shadow_values: Vec<R> = if alpha > R::zero() {
                let r2 = safe_region_reward(&occupancy, &region, &weights);
                let r3 = contact_reward(&occupancy, &weights);
                profiles.iter().map(|p| alpha * compose_shadow(*p, r2, r3)).collect()
            } else {
                vec![R::zero(); n_agents]
            };
            for episode in &episodes {
                for step in &episode.steps {
                    replay.push(TransitionRecord {
                        global_state: step.global_state.clone(),
                        local_observations: step.local_observations.clone(),
                        prev_actions: step.prev_actions.clone(),
                        actions: step.actions.clone(),
                        rewards: vec![step.task_reward; n_agents],
                        shadow_values: shadow_values.clone(),
                        next_global_state: step.next_global_state.clone(),
                        next_local_observations: step.next_local_observations.clone(),
                        contact_count: step.contact_count,
                        done: step.done,
                    });
                }
            }

            // Stage 2: synchronized critic updates.
            manifest.push_stage(epoch, cycle, Stage::Critic);
            let mut loss_sum = 0.0f64;
            for _ in 0..config.batches_per_cycle {
                let indices = replay.sample_indices(&mut sample_rng, config.agent.batch_size)?;
                let records = replay.select(&indices);
                let inputs: Vec<Vec<R>> = records
                    .iter()
                    .map(|r| agents[0].critic_input(&r.global_state, &r.actions))
                    .collect::<Result<_>>()?;
                let targets: Vec<Vec<R>> = (0..n_agents)
                    .map(|i| critic_targets(&agents, i, &records, gamma))
                    .collect::<Result<_>>()?;
                for (agent, target) in agents.iter_mut().zip(&targets) {
                    loss_sum += agent.update_critic(&inputs, target)?.to_f64_lossy();
                }
            }
            let loss_mean = loss_sum / (config.batches_per_cycle * n_agents) as f64;
            manifest.push("critic_loss", format!("epoch={epoch} cycle={cycle} mean={loss_mean}"));

            // Stage 3: consensus averaging of actor interiors.
            if let Some(m) = &mixing {
                manifest.push_stage(epoch, cycle, Stage::Sharing);
                let mut actors: Vec<Network<R>> =
                    agents.iter().map(|a| a.actor.clone()).collect();
                share_network_interiors(m, &mut actors)?;
                for (agent, actor) in agents.iter_mut().zip(actors) {
                    agent.actor = actor;
                }
            }

            // Stage 4: policy-gradient plus shadow-gradient ascent.
            manifest.push_stage(epoch, cycle, Stage::Actor);
            let shadow_data: Option<Vec<Vec<Vec<ShadowStep<R>>>>> = if alpha > R::zero() {
                Some(build_shadow_data(&agents, &episodes)?)
            } else {
                None
            };
            for _ in 0..config.batches_per_cycle {
                let indices = replay.sample_indices(&mut sample_rng, config.agent.batch_size)?;
                let records = replay.select(&indices);
                let mut grads: Vec<Vec<R>> = (0..n_agents)
                    .map(|i| replay_actor_gradient(&agents, i, &records))
                    .collect::<Result<_>>()?;
                if let Some(data) = &shadow_data {
                    for (i, grad) in grads.iter_mut().enumerate() {
                        let sg = shadow_gradient(&agents[i].actor, &data[i], alpha, sigma, gamma)?;
                        for (g, s) in grad.iter_mut().zip(&sg) {
                            *g = *g + *s;
                        }
                    }
                }
                for (agent, grad) in agents.iter_mut().zip(&grads) {
                    agent.update_actor(grad)?;
                }
            }
        }

        // Epoch end: target tracking, then fixed-set validation.
        for agent in &mut agents {
            agent.soft_update_targets(config.agent.tau_soft)?;
        }
        let mut policy = AgentPolicy::new(&agents);
        let report = evaluate_policy(
            &env_config,
            &mut policy,
            config.eval_trials_validation,
            config.validation_seed,
            config.train_threshold,
            config.stability_stride,
        )?;
        let rate = report.success_rate();
        validation_curve.push(rate);
        manifest.push("validation", format!("epoch={epoch} rate={rate}"));
    }

    manifest.push("timing_total_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    let bundle = CheckpointBundle {
        config_text: config.to_toml()?,
        agents: agents
            .iter()
            .map(|a| AgentCheckpoint {
                spec: a.spec.clone(),
                actor: a.actor.clone(),
                critic: a.critic.clone(),
                target_actor: a.target_actor.clone(),
                target_critic: a.target_critic.clone(),
            })
            .collect(),
        occupancy: vec![occupancy.snapshot()],
    };
    Ok(TrainResult { manifest: manifest.clone(), validation_curve, bundle })
}

/// Score-function inputs for every agent over the cycle's fresh episodes:
/// actor inputs, taken actions, and critic values of the joint actions.
fn build_shadow_data<R: Real>(
    agents: &[Agent<R>],
    episodes: &[EpisodeData<R>],
) -> Result<Vec<Vec<Vec<ShadowStep<R>>>>> {
    let mut per_agent = Vec::with_capacity(agents.len());
    for agent in agents {
        let mut eps = Vec::with_capacity(episodes.len());
        for episode in episodes {
            let mut steps = Vec::with_capacity(episode.steps.len());
            for step in &episode.steps {
                let actor_input = agent
                    .actor_input(&step.local_observations[agent.spec.agent_index], &step.prev_actions)?;
                let critic_in = agent.critic_input(&step.global_state, &step.actions)?;
                let q_value = agent.critic.forward(&critic_in)?[0];
                steps.push(ShadowStep {
                    actor_input,
                    action: step.actions[agent.spec.agent_index].clone(),
                    q_value,
                });
            }
            eps.push(steps);
        }
        per_agent.push(eps);
    }
    Ok(per_agent)
}

/// Rebuilds evaluation-ready agents and the run configuration from a
/// checkpoint.
pub fn load_checkpoint_agents<R: Real>(
    bundle: &CheckpointBundle<R>,
) -> Result<(RunConfig<R>, Vec<Agent<R>>)> {
    let config = RunConfig::from_toml_str(&bundle.config_text)?;
    let agents = bundle
        .agents
        .iter()
        .map(|a| {
            Agent::from_networks(
                a.spec.clone(),
                a.actor.clone(),
                a.critic.clone(),
                a.target_actor.clone(),
                a.target_critic.clone(),
                config.agent.learning_rate,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if agents.len() != config.effective_env().n_agents() {
        return Err(Error::checkpoint("checkpoint agent count does not match its config"));
    }
    Ok((config, agents))
}

/// Writes manifest, validation curve, checkpoint, and config echo under
/// `out_dir`.
pub fn write_artifacts<R: Real>(
    result: &TrainResult<R>,
    out_dir: &Path,
) -> Result<ArtifactPaths> {
    std::fs::create_dir_all(out_dir)?;
    let paths = ArtifactPaths {
        manifest: out_dir.join("manifest.txt"),
        validation_curve: out_dir.join("validation.csv"),
        checkpoint: out_dir.join("checkpoint.ckpt"),
        config_echo: out_dir.join("config.toml"),
    };
    let mut curve = String::from("epoch,success_rate\n");
    for (e, r) in result.validation_curve.iter().enumerate() {
        curve.push_str(&format!("{e},{r}\n"));
    }
    std::fs::write(&paths.validation_curve, curve)?;
    std::fs::write(&paths.config_echo, &result.bundle.config_text)?;
    result.bundle.write_to(&paths.checkpoint)?;
    result.manifest.write_to(&paths.manifest)?;
    Ok(paths)
}
