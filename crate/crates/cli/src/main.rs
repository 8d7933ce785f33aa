use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use aoiuav::harness::{
    load_config, load_instance, read_checkpoint, run_sweep, run_training, set_key, write_sweep_csv, HarnessError,
    RunConfig, SweepMode, SweepParam,
};
use aoiuav::nets::gradcheck::run_trials;
use aoiuav::oracle::exact_min_peak_aoi;
use aoiuav::tensor::GradFault;
use aoiuav::trainer::{
    evaluate, threads_from_env, BaselineKind, EvalReport, GreedyPolicy, LearnedPolicy, Policy, RandomPolicy,
};
use aoiuav::world::Env;

#[derive(Parser)]
#[command(name = "aoiuav", version, about = "Laser-charged multi-UAV data collection: train, evaluate, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (`key = value` lines grouped by `[section]`).
    #[arg(long)]
    config: PathBuf,
    /// Override one key, e.g. `--set train.lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, HarnessError> {
        let mut cfg = load_config(&self.config)?;
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| HarnessError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
            set_key(&mut cfg, key.trim(), value.trim()).map_err(|source| HarnessError::Config {
                path: self.config.clone(),
                source,
            })?;
        }
        cfg.scenario.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the policy and write a run directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Also write one event log per episode.
        #[arg(long)]
        events: bool,
    },
    /// Evaluate a checkpoint or a heuristic baseline.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_enum, default_value_t = EvalPolicy::Learned)]
        policy: EvalPolicy,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate or train at several values of one scenario parameter.
    Sweep {
        /// One of eta_le, n_uavs, n_iots, P_L.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = SweepKind::Eval)]
        mode: SweepKind,
        /// Heuristic used in eval mode.
        #[arg(long, value_enum, default_value_t = Heuristic::Greedy)]
        policy: Heuristic,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Exact minimum peak AoI of a tiny instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Finite-difference checks of the actor and critic gradients.
    Gradcheck {
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Test fixture: use a wrong tanh derivative.
        #[arg(long, hide = true)]
        corrupt_tanh: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalPolicy {
    Greedy,
    Random,
    Learned,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Eval,
    Train,
}

#[derive(Clone, Copy, ValueEnum)]
enum Heuristic {
    Greedy,
    Random,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn stdout_err(e: io::Error) -> HarnessError {
    HarnessError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn train_cmd(config: &ConfigArgs, seed: Option<u64>, out: &Path, events: bool) -> Result<(), HarnessError> {
    let mut cfg = config.load()?;
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    cfg.run.write_events |= events;
    cfg.train.threads = threads_from_env();
    let outcome = run_training(&cfg, out, unix_now())?;
    let tail = &outcome.metrics[outcome.metrics.len().saturating_sub(20)..];
    let n = tail.len().max(1) as f64;
    let reward = tail.iter().map(|r| r.cum_reward).sum::<f64>() / n;
    let peak = tail.iter().map(|r| r.peak_aoi as f64).sum::<f64>() / n;
    println!(
        "trained {} episodes into {}\nlast {} episodes: mean cumulative reward {reward:.4}, mean peak AoI {peak:.2}",
        outcome.metrics.len(),
        out.display(),
        tail.len()
    );
    Ok(())
}

fn eval_cmd(
    checkpoint: Option<&Path>,
    config: &ConfigArgs,
    episodes: Option<usize>,
    policy: EvalPolicy,
    seed: Option<u64>,
) -> Result<(), HarnessError> {
    let mut cfg = config.load()?;
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    let episodes = episodes.unwrap_or(cfg.run.eval_episodes);
    let env = Env::new(cfg.scenario.clone())?;
    let mut policy: Box<dyn Policy> = match policy {
        EvalPolicy::Greedy => Box::new(GreedyPolicy::new()),
        EvalPolicy::Random => Box::new(RandomPolicy),
        EvalPolicy::Learned => {
            let path = checkpoint.ok_or_else(|| HarnessError::Usage("--policy learned needs --checkpoint".into()))?;
            Box::new(LearnedPolicy::greedy(read_checkpoint(path, &cfg)?.actors))
        }
    };
    let report = evaluate(policy.as_mut(), &env, episodes, cfg.run.seed)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{}\n\n{}\n{}", report.summary(), EvalReport::CSV_HEADER, report.csv_row()).map_err(stdout_err)
}

fn sweep_cmd(
    param: &str,
    values: &[f64],
    config: &ConfigArgs,
    mode: SweepKind,
    policy: Heuristic,
    out: &Path,
) -> Result<(), HarnessError> {
    let param = SweepParam::parse(param).ok_or_else(|| {
        HarnessError::Usage(format!(
            "unknown sweep parameter `{param}` (expected one of {})",
            SweepParam::NAMES.join(", ")
        ))
    })?;
    let mut cfg = config.load()?;
    cfg.train.threads = threads_from_env();
    let mode = match (mode, policy) {
        (SweepKind::Train, _) => SweepMode::Train,
        (SweepKind::Eval, Heuristic::Greedy) => SweepMode::Eval(BaselineKind::Greedy),
        (SweepKind::Eval, Heuristic::Random) => SweepMode::Eval(BaselineKind::Random),
    };
    let rows = run_sweep(&cfg, param, values, mode)?;
    fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let path = out.join("sweep.csv");
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows).map_err(stdout_err)?;
    fs::write(&path, &buf).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    io::stdout().write_all(&buf).map_err(stdout_err)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn oracle_cmd(instance: &Path) -> Result<(), HarnessError> {
    let inst = load_instance(instance)?;
    let result = exact_min_peak_aoi(&inst)?;
    println!(
        "instance: {}\noptimum peak AoI: {}\nwitness: {}\nstates expanded: {}",
        inst.describe(),
        result.optimum,
        result.witness_string(),
        result.states
    );
    Ok(())
}

fn gradcheck_cmd(trials: u64, seed: u64, corrupt_tanh: bool) -> Result<bool, HarnessError> {
    let fault = corrupt_tanh.then_some(GradFault::TanhDerivative);
    let summary = run_trials(trials as usize, seed, fault).map_err(|e| HarnessError::Usage(e.to_string()))?;
    println!(
        "{} trials, {} coordinate checks, max relative error {:.3e}",
        summary.trials, summary.checks, summary.max_rel_error
    );
    for f in summary.failures.iter().take(10) {
        println!(
            "FAIL trial {} {:?}: analytic {:.6e}, numeric {:.6e}, relative error {:.3e}",
            f.trial, f.graph, f.check.analytic, f.check.numeric, f.check.rel_error
        );
    }
    if summary.failures.len() > 10 {
        println!("... {} more failures", summary.failures.len() - 10);
    }
    Ok(summary.passed())
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            events,
        } => train_cmd(&config, seed, &out, events)?,
        Command::Eval {
            checkpoint,
            config,
            episodes,
            policy,
            seed,
        } => eval_cmd(checkpoint.as_deref(), &config, episodes, policy, seed)?,
        Command::Sweep {
            param,
            values,
            config,
            mode,
            policy,
            out,
        } => sweep_cmd(&param, &values, &config, mode, policy, &out)?,
        Command::Oracle { instance } => oracle_cmd(&instance)?,
        Command::Gradcheck {
            trials,
            seed,
            corrupt_tanh,
        } => {
            if !gradcheck_cmd(trials, seed, corrupt_tanh)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
