//! `exosquat`: command-line front end for the squatting-controller
//! toolkit. Every command drives the job service over HTTP; without
//! `--server` an in-process server is spawned on an ephemeral port, so the
//! CLI works standalone while remaining a pure client of the service.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use exosquat_api::{ControllerSpec, JobKind, JobRequest, JobStatus, JobSummary};
use exosquat_client::ExoClient;
use exosquat_core::env::Mode;
use exosquat_core::RunConfig;

#[derive(Parser)]
#[command(name = "exosquat", version, about = "Balance-robust squatting controller toolkit")]
struct Cli {
    /// Job service URL; spawns an in-process server when omitted.
    #[arg(long, global = true)]
    server: Option<String>,

    /// Output root for in-process server job artifacts.
    #[arg(long, global = true, default_value = "runs")]
    out_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Clean,
    Perturbed,
    Human,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Clean => Mode::Clean,
            ModeArg::Perturbed => Mode::Perturbed,
            ModeArg::Human => Mode::Human,
        }
    }
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration TOML.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Built-in preset (case1, case2, case2_stress, case3, desk, full).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// Random seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Experiment mode override.
    #[arg(long)]
    mode: Option<ModeArg>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            (None, Some(name)) => RunConfig::preset(name)
                .ok_or_else(|| anyhow!("unknown preset '{name}'; try one of {:?}", RunConfig::PRESET_NAMES))?,
            (None, None) => RunConfig::case1(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.ppo.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode.into();
            cfg.env.mode = mode.into();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the job server in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8750")]
        addr: SocketAddr,
    },
    /// Train a policy.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for checkpoints and the training log.
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Sample budget override.
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Evaluate a checkpoint (or reference playback) for N cycles.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Policy checkpoint to play.
        #[arg(long, conflicts_with = "playback")]
        checkpoint: Option<PathBuf>,
        /// Feed the reference targets directly instead of a policy.
        #[arg(long)]
        playback: bool,
        /// Squat cycles to evaluate.
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
    },
    /// Evaluate across out-of-distribution environments.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, conflicts_with = "playback")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        playback: bool,
        /// Number of sampled environments.
        #[arg(long)]
        envs: Option<usize>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Run the analytic self-check suite.
    Check {
        #[arg(long, default_value = "runs/check")]
        out: PathBuf,
    },
    /// Print a built-in preset configuration as TOML.
    Preset {
        name: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in exoskeleton model spec as TOML.
    Model {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() {
    let cli = Cli::parse();
    match run(cli).await {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            let record = serde_json::json!({ "error": format!("{e:#}") });
            eprintln!("{record}");
            std::process::exit(1);
        }
    }
}

async fn connect(server: &Option<String>, out_root: &Path) -> Result<ExoClient> {
    let client = match server {
        Some(url) => ExoClient::new(url.clone()),
        None => {
            std::fs::create_dir_all(out_root)?;
            let (addr, _handle) =
                exosquat_service::serve("127.0.0.1:0".parse().unwrap(), out_root.to_path_buf())
                    .await
                    .context("starting in-process server")?;
            ExoClient::new(format!("http://{addr}"))
        }
    };
    client.health().await.context("server health check")?;
    Ok(client)
}

/// Submit, poll with progress lines, and return the final summary.
async fn run_job(client: &ExoClient, request: JobRequest) -> Result<JobSummary> {
    let id = client.submit(&request).await?;
    let mut last = String::new();
    let summary = client
        .wait(id, Duration::from_millis(300), None, |s| {
            if let Some(p) = &s.progress {
                let line = format!("[{}] {}/{} {}", p.phase, p.current, p.total, p.detail);
                if line != last {
                    eprintln!("{line}");
                    last = line;
                }
            }
        })
        .await?;
    Ok(summary)
}

fn finish(summary: JobSummary) -> Result<i32> {
    match summary.status {
        JobStatus::Finished => {
            if let Some(result) = &summary.result {
                println!("{}", serde_json::to_string_pretty(result)?);
            }
            eprintln!("artifacts: {}", summary.out_dir.display());
            Ok(0)
        }
        status => {
            let record = serde_json::json!({
                "error": summary.error.unwrap_or_else(|| format!("job ended {status:?}")),
                "status": format!("{status:?}").to_lowercase(),
                "out_dir": summary.out_dir,
            });
            eprintln!("{record}");
            Ok(1)
        }
    }
}

fn absolutize(path: &Path) -> Result<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(path))
    }
}

async fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Serve { addr } => {
            std::fs::create_dir_all(&cli.out_root)?;
            let (bound, handle) = exosquat_service::serve(addr, cli.out_root.clone()).await?;
            println!("exosquat service listening on http://{bound}");
            handle.await?;
            Ok(0)
        }
        Command::Train { config, out, samples } => {
            let mut cfg = config.resolve()?;
            if let Some(budget) = samples {
                cfg.ppo.sample_budget = budget;
            }
            let client = connect(&cli.server, &cli.out_root).await?;
            let request = JobRequest {
                kind: JobKind::Train,
                config: cfg,
                controller: ControllerSpec::Playback,
                out_dir: Some(absolutize(&out)?),
                label: "train".into(),
            };
            finish(run_job(&client, request).await?)
        }
        Command::Eval { config, checkpoint, playback, cycles, out } => {
            let mut cfg = config.resolve()?;
            if let Some(cycles) = cycles {
                cfg.eval_cycles = cycles;
            }
            let controller = controller_spec(checkpoint, playback)?;
            let client = connect(&cli.server, &cli.out_root).await?;
            let request = JobRequest {
                kind: JobKind::Eval,
                config: cfg,
                controller,
                out_dir: Some(absolutize(&out)?),
                label: "eval".into(),
            };
            finish(run_job(&client, request).await?)
        }
        Command::Sweep { config, checkpoint, playback, envs, out } => {
            let mut cfg = config.resolve()?;
            if let Some(envs) = envs {
                cfg.sweep_envs = envs;
            }
            let controller = controller_spec(checkpoint, playback)?;
            let client = connect(&cli.server, &cli.out_root).await?;
            let request = JobRequest {
                kind: JobKind::Sweep,
                config: cfg,
                controller,
                out_dir: Some(absolutize(&out)?),
                label: "sweep".into(),
            };
            finish(run_job(&client, request).await?)
        }
        Command::Check { out } => {
            let client = connect(&cli.server, &cli.out_root).await?;
            let request = JobRequest {
                kind: JobKind::Check,
                config: RunConfig::case1(),
                controller: ControllerSpec::Playback,
                out_dir: Some(absolutize(&out)?),
                label: "check".into(),
            };
            let summary = run_job(&client, request).await?;
            if let Some(result) = &summary.result {
                if let Some(checks) = result.get("checks").and_then(|c| c.as_array()) {
                    for check in checks {
                        let name = check["name"].as_str().unwrap_or("?");
                        let passed = check["passed"].as_bool().unwrap_or(false);
                        let detail = check["detail"].as_str().unwrap_or("");
                        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
                    }
                }
            }
            match summary.status {
                JobStatus::Finished => Ok(0),
                _ => {
                    eprintln!(
                        "{}",
                        serde_json::json!({ "error": summary.error.unwrap_or_default() })
                    );
                    Ok(1)
                }
            }
        }
        Command::Preset { name, out } => {
            let cfg = RunConfig::preset(&name)
                .ok_or_else(|| anyhow!("unknown preset '{name}'; try one of {:?}", RunConfig::PRESET_NAMES))?;
            emit(cfg.to_toml_string(), out)
        }
        Command::Model { out } => {
            emit(exosquat_core::default_exoskeleton().to_toml_string(), out)
        }
    }
}

fn controller_spec(checkpoint: Option<PathBuf>, playback: bool) -> Result<ControllerSpec> {
    match (checkpoint, playback) {
        (Some(path), false) => Ok(ControllerSpec::Checkpoint { path: absolutize(&path)? }),
        (None, true) => Ok(ControllerSpec::Playback),
        (None, false) => bail!("pass either --checkpoint PATH or --playback"),
        (Some(_), true) => unreachable!("clap conflicts_with"),
    }
}

fn emit(text: String, out: Option<PathBuf>) -> Result<i32> {
    match out {
        Some(path) => {
            std::fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(0)
}
