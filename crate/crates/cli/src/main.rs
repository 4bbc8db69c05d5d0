//! Command-line harness: trains runs from config files, evaluates
//! checkpoints on fixed test sets, compares ablations, and tabulates
//! failure modes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use inhand_core::checkpoint::CheckpointBundle;
use inhand_core::harness::evaluate::{evaluate_policy, AgentPolicy, EvalReport};
use inhand_core::harness::report::{
    ablation_report, failure_report, per_trial_csv, LabeledReport,
};
use inhand_core::harness::trainer::{load_checkpoint_agents, train, write_artifacts};
use inhand_core::RunConfig;

#[derive(Parser)]
#[command(
    name = "inhand",
    version,
    about = "Multi-agent in-hand rotation: train, evaluate, compare",
    after_help = "Outputs are written under ./runs unless INHAND_OUT_DIR is set."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed listed in the config file.
    Train {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Train only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on its configured fixed test set.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Trial count; defaults to the config's test trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Train every config over its seeds and emit the comparison table.
    Ablate {
        /// Two or more TOML run configurations sharing one test set.
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
    },
    /// Compare failure modes of two checkpoints on a shared trial set.
    Failures {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Trial count; defaults to the config's failure trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Output root: `$INHAND_OUT_DIR` when set, else `./runs`.
fn out_root() -> PathBuf {
    std::env::var_os("INHAND_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_path(path).with_context(|| format!("loading config {}", path.display()))
}

fn train_one(config: &RunConfig, seed: u64, dir: &Path) -> Result<PathBuf> {
    let result = train(config, seed, Some(dir))
        .with_context(|| format!("training seed {seed}"))?;
    let paths = write_artifacts(&result, dir)?;
    let final_rate = result.validation_curve.last().copied().unwrap_or(0.0);
    println!(
        "trained seed {seed}: final validation success {final_rate} -> {}",
        paths.checkpoint.display()
    );
    Ok(paths.checkpoint)
}

/// Test-set evaluation shared by every verb: noise-free policy on the
/// config's held-out seeded trials.
fn evaluate_checkpoint(path: &Path, trials: Option<usize>) -> Result<(RunConfig, EvalReport<f64>)> {
    let bundle = CheckpointBundle::read_from(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let (config, agents) = load_checkpoint_agents(&bundle)?;
    let trials = trials.unwrap_or(config.eval_trials_test);
    let mut policy = AgentPolicy::new(&agents);
    let report = evaluate_policy(
        &config.effective_env(),
        &mut policy,
        trials,
        config.test_seed,
        config.test_threshold,
        config.stability_stride,
    )?;
    Ok((config, report))
}

fn cmd_train(config_path: &Path, seed: Option<u64>) -> Result<()> {
    let config = load_config(config_path)?;
    let seeds = match seed {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    };
    let root = out_root().join(file_stem(config_path));
    for s in seeds {
        train_one(&config, s, &root.join(format!("seed-{s}")))?;
    }
    Ok(())
}

fn cmd_evaluate(checkpoint: &Path, trials: Option<usize>) -> Result<()> {
    let (_, report) = evaluate_checkpoint(checkpoint, trials)?;
    let csv = per_trial_csv(&report);
    let out = out_root().join(format!("evaluate-{}.csv", file_stem(checkpoint)));
    std::fs::create_dir_all(out.parent().unwrap())?;
    std::fs::write(&out, &csv)?;
    println!("test set: {}", report.test_set);
    println!("success_rate = {}", report.success_rate());
    println!("per-trial metrics -> {}", out.display());
    Ok(())
}

fn cmd_ablate(config_paths: &[PathBuf]) -> Result<()> {
    if config_paths.len() < 2 {
        bail!("ablate needs at least two configs");
    }
    let root = out_root().join("ablate");
    let configs: Vec<RunConfig> =
        config_paths.iter().map(|p| load_config(p)).collect::<Result<_>>()?;
    // Disambiguate repeated ablation labels by the config file names.
    let mut label_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for config in &configs {
        *label_counts.entry(config.ablation.label()).or_insert(0) += 1;
    }
    let mut rows = Vec::new();
    let mut by_seed = String::from("config,seed,final_validation,test_success\n");
    let mut summary = String::from("config,mean_test_success,best_test_success\n");
    for (path, config) in config_paths.iter().zip(&configs) {
        let stem = file_stem(path);
        let label = if label_counts[config.ablation.label()] > 1 {
            format!("{}-{stem}", config.ablation.label())
        } else {
            config.ablation.label().to_string()
        };
        let mut pooled: Option<EvalReport<f64>> = None;
        let mut rates = Vec::new();
        for &seed in &config.seeds {
            let dir = root.join(&stem).join(format!("seed-{seed}"));
            let result = train(config, seed, Some(&dir))?;
            let paths = write_artifacts(&result, &dir)?;
            let final_validation = result.validation_curve.last().copied().unwrap_or(0.0);
            let (_, report) = evaluate_checkpoint(&paths.checkpoint, None)?;
            by_seed.push_str(&format!(
                "{label},{seed},{final_validation},{}\n",
                report.success_rate()
            ));
            rates.push(report.success_rate());
            println!(
                "{label} seed {seed}: validation {final_validation}, test {}",
                report.success_rate()
            );
            pooled = Some(match pooled.take() {
                None => report,
                Some(mut acc) => {
                    if acc.test_set != report.test_set {
                        bail!("config {} changes the test set between seeds", path.display());
                    }
                    acc.outcomes.extend(report.outcomes);
                    acc.summaries.extend(report.summaries);
                    acc.series.extend(report.series);
                    acc
                }
            });
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let best = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        summary.push_str(&format!("{label},{mean},{best}\n"));
        rows.push(LabeledReport::new(label, pooled.expect("seeds validated non-empty")));
    }
    let table = ablation_report(&rows)?;
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join("ablation.csv"), &table)?;
    std::fs::write(root.join("success_by_seed.csv"), &by_seed)?;
    std::fs::write(root.join("success_summary.csv"), &summary)?;
    println!("\n{table}");
    println!("{summary}");
    println!("tables -> {}", root.display());
    Ok(())
}

fn cmd_failures(a: &Path, b: &Path, trials: Option<usize>) -> Result<()> {
    let bundle = CheckpointBundle::read_from(a)?;
    let (config_a, agents_a) = load_checkpoint_agents(&bundle)?;
    let bundle = CheckpointBundle::read_from(b)?;
    let (config_b, agents_b) = load_checkpoint_agents(&bundle)?;
    let trials = trials.unwrap_or(config_a.failure_trials);
    let run = |config: &RunConfig, agents: &[inhand_core::agents::Agent<f64>]| {
        let mut policy = AgentPolicy::new(agents);
        evaluate_policy(
            &config.effective_env(),
            &mut policy,
            trials,
            config.failure_seed,
            config.test_threshold,
            config.stability_stride,
        )
    };
    let report_a = run(&config_a, &agents_a)?;
    let report_b = run(&config_b, &agents_b)?;
    let mut label_a = config_a.ablation.label().to_string();
    let mut label_b = config_b.ablation.label().to_string();
    if label_a == label_b {
        label_a = format!("{label_a}-{}", file_stem(a));
        label_b = format!("{label_b}-{}", file_stem(b));
    }
    let table = failure_report(&[
        LabeledReport::new(label_a, report_a),
        LabeledReport::new(label_b, report_b),
    ])?;
    let out = out_root().join("failures.csv");
    std::fs::create_dir_all(out.parent().unwrap())?;
    std::fs::write(&out, &table)?;
    println!("{table}");
    println!("table -> {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train { config, seed } => cmd_train(config, *seed),
        Command::Evaluate { checkpoint, trials } => cmd_evaluate(checkpoint, *trials),
        Command::Ablate { configs } => cmd_ablate(configs),
        Command::Failures { a, b, trials } => cmd_failures(a, b, *trials),
    }
}
