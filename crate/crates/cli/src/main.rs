use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use equiswarm::audit::{self, AuditReport, Check, GroupSpec};
use equiswarm::config::{ConfigError, RunConfig};
use equiswarm::par;
use equiswarm::policy::{load_policy, Policy};
use equiswarm::ppo::{evaluate_policy, trace_episode, Trainer};
use equiswarm::swarm::{summarize, write_trace};

#[derive(Parser)]
#[command(name = "equiswarm", version, about = "Equivariant multi-agent quadrotor control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace one config value, e.g. `lr=0.0001` or `env.room.width=4`.
    #[arg(long = "override", value_name = "K=V")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Start from these weights instead of a fresh initialization.
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Run deterministic episodes with a trained policy.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample group elements and check invariance or equivariance.
    Audit {
        #[arg(value_enum)]
        target: Target,
        #[arg(long, default_value = "se3")]
        group: GroupSpec,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        tol: Option<f64>,
        /// Policy checkpoint for the `policy` target.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the cyclic extension of a planar integrator.
    DemoPushforward {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one deterministic episode as CSV.
    ExportTraj {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        ckpt: PathBuf,
        /// CSV file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Reward,
    Dynamics,
    Policy,
    Pushforward,
}

enum Failure {
    Usage(String),
    Runtime(String),
    /// The audit ran and its verdict is fail; the report is already out.
    Verdict,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("no such file `{}`", path.display())))
    }
}

fn load_ckpt(path: &Path) -> Result<Policy, Failure> {
    require_file(path)?;
    load_policy(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    println!("{text}");
    if let Some(p) = out {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(runtime)?;
        }
        fs::write(p, text + "\n").map_err(runtime)?;
    }
    Ok(())
}

fn train(cfg: ConfigArgs, out: PathBuf, ckpt: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(&cfg)?;
    let mut trainer = match ckpt {
        Some(p) => {
            let policy = load_ckpt(&p)?;
            if policy.config != config.policy {
                return Err(Failure::Usage(format!("checkpoint `{}` was trained with a different [policy] section", p.display())));
            }
            Trainer::with_policy(config, policy)
        }
        None => Trainer::new(config),
    }
    .map_err(runtime)?;

    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    // A second handler cannot be installed in the same process; training
    // then simply runs to completion.
    let _ = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst));

    let total = trainer.config.train.total_steps;
    let summary = trainer
        .run_with(Some(&out), &stop, |r| {
            eprintln!(
                "update {:>5}  steps {:>9}/{total}  reward {:>9.3}  dist {:>6.3}  pi {:>8.4}  v {:>8.4}  clip {:.3}",
                r.update, r.steps, r.mean_episode_reward, r.mean_distance, r.stats.policy_loss, r.stats.value_loss, r.stats.clip_fraction
            );
        })
        .map_err(|e| Failure::Runtime(format!("{e}; checkpoints in `{}` are from the last good update", out.display())))?;
    emit(&summary, None)
}

#[derive(Serialize)]
struct EvalOutput {
    checkpoint: String,
    seed: u64,
    metrics: equiswarm::swarm::EpisodeMetrics,
}

fn eval(cfg: ConfigArgs, ckpt: PathBuf, episodes: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(&cfg)?;
    if episodes == 0 {
        return Err(Failure::Usage("--episodes must be positive".into()));
    }
    let policy = load_ckpt(&ckpt)?;
    let seed = config.train.seed;
    let records = evaluate_policy(&policy, config.env, config.quad.clone(), config.scenario, episodes, seed).map_err(runtime)?;
    let metrics = summarize(&records, config.env.success_radius).map_err(runtime)?;
    let result = EvalOutput {
        checkpoint: ckpt.display().to_string(),
        seed,
        metrics,
    };
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(runtime)?;
        let mut w = BufWriter::new(File::create(dir.join("episodes.jsonl")).map_err(runtime)?);
        for (k, r) in records.iter().enumerate() {
            let row = serde_json::json!({
                "episode": k,
                "steps": r.steps,
                "diverged": r.diverged,
                "metrics": r.metrics(config.env.success_radius),
            });
            writeln!(w, "{row}").map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
    }
    emit(&result, out.map(|d| d.join("eval.json")).as_deref())
}

#[allow(clippy::too_many_arguments)]
fn run_audit(
    target: Target,
    group: GroupSpec,
    n: usize,
    tol: Option<f64>,
    ckpt: Option<PathBuf>,
    cfg: ConfigArgs,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let config = load_config(&cfg)?;
    let seed = config.train.seed;
    let report = match target {
        Target::Reward => audit::audit_swarm_reward(group, config.env.agents, n, tol.unwrap_or(1e-9), seed),
        Target::Dynamics => audit::audit_quadrotor(config.quad.clone(), group, n, tol.unwrap_or(1e-9), seed),
        Target::Policy => {
            let policy = match ckpt {
                Some(p) => load_ckpt(&p)?,
                None => Policy::new(config.policy.clone(), seed).map_err(runtime)?,
            };
            let max_nodes = config.env.neighbors.cap() + 1;
            audit::audit_policy(&policy, group, max_nodes, n, tol.unwrap_or(1e-5), seed).map_err(runtime)?
        }
        Target::Pushforward => {
            let r = audit::pushforward_demo(4, n, 100, 0.01, tol.unwrap_or(1e-12), seed);
            let traj = Check::new("one-hot-trajectory", r.trajectory_deviation, 0.0);
            AuditReport::new("pushforward", "c4", "cyclic rotations by multiples of 90 degrees", n, seed, vec![r.equivariance, traj])
        }
    };
    eprint!("{}", report.table());
    emit(&report, out.as_deref())?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn export_traj(cfg: ConfigArgs, ckpt: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(&cfg)?;
    let policy = load_ckpt(&ckpt)?;
    let rows = trace_episode(&policy, config.env, config.quad.clone(), config.scenario, config.train.seed).map_err(runtime)?;
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(runtime)?;
            }
            write_trace(File::create(&p).map_err(runtime)?, &rows).map_err(runtime)
        }
        None => write_trace(io::stdout().lock(), &rows).map_err(runtime),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train { cfg, out, ckpt } => train(cfg, out, ckpt),
        Command::Eval { cfg, ckpt, episodes, out } => eval(cfg, ckpt, episodes, out),
        Command::Audit {
            target,
            group,
            n,
            tol,
            ckpt,
            cfg,
            out,
        } => run_audit(target, group, n, tol, ckpt, cfg, out),
        Command::DemoPushforward { k, n, steps, tol, seed, out } => {
            if k == 0 {
                return Err(Failure::Usage("--k must be positive".into()));
            }
            let report = audit::pushforward_demo(k, n, steps, 0.01, tol, seed);
            emit(&report, out.as_deref())?;
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Verdict)
            }
        }
        Command::ExportTraj { cfg, ckpt, out } => export_traj(cfg, ckpt, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("EQUISWARM_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                par::init_threads(n);
            }
            _ => {
                eprintln!("error: EQUISWARM_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
