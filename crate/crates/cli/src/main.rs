use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use vdagent::action::{
    distribution, lint_trace, read_trace, write_trace, Severity, TaskMeta,
};
use vdagent::agent::{
    spawn_session, AgentOptions, ChatGenUi, Config, GenUiClient, HttpChat, LlmPolicy,
    OverlayPort, TemplateGenUi,
};
use vdagent::device::{AppDefinition, TaskTag};
use vdagent::metrics::{cohen_kappa, read_annotations, read_counts, read_ratings};
use vdagent::overlay::OverlayServer;
use vdagent::scenario::{
    auto_responder, load_scenario, replay_all, replay_headless, replay_live, replay_with,
    task_meta, ReplayReport,
};

#[derive(Parser)]
#[command(name = "vdagent", version, about = "Run, replay and check background GUI agent tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Scripted,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Answer asks with the scenario's scripted replies (default).
        #[arg(long, conflicts_with = "overlay_port")]
        headless: bool,
        /// Serve overlay frames on this port and wait for a client.
        #[arg(long)]
        overlay_port: Option<u16>,
        /// Seconds to wait for the overlay client to connect.
        #[arg(long, default_value_t = 120)]
        accept_timeout: u64,
        #[arg(long, value_enum, default_value_t = PolicyKind::Scripted)]
        policy: PolicyKind,
        /// Model settings; required with `--policy llm`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the step trace here as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Replay every scenario in a directory headless.
    ReplayAll {
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check a trace against the action rules.
    Lint {
        trace: PathBuf,
        /// Comma-separated task tags, e.g. `money`.
        #[arg(long, value_delimiter = ',')]
        tags: Vec<TaskTag>,
        /// App the trace was recorded on, to check element indices.
        #[arg(long)]
        app: Option<PathBuf>,
    },
    /// Pairwise Cohen's kappa over `task_id,rater,label` rows.
    Kappa { annotations: PathBuf },
    /// Mean and standard deviation per task over `task_id,rater,score` rows.
    Stats { ratings: PathBuf },
    /// Modality percentages from `annotator,full,partial,genui` rows.
    Distribution { counts: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(passed)`, or an error when the checks could not run at all.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            scenario,
            headless: _,
            overlay_port,
            accept_timeout,
            policy,
            config,
            trace,
            json,
        } => {
            let s = load_scenario(&scenario)?;
            let accept_timeout = Duration::from_secs(accept_timeout);
            let report = match policy {
                PolicyKind::Scripted => match overlay_port {
                    Some(port) => replay_live(&s, port, accept_timeout),
                    None => replay_headless(&s),
                },
                PolicyKind::Llm => {
                    let Some(path) = config else {
                        bail!("--policy llm needs --config");
                    };
                    run_llm(&s, &path, overlay_port, accept_timeout)?
                }
            };
            if let Some(path) = trace {
                let file = File::create(&path)
                    .with_context(|| format!("cannot create {}", path.display()))?;
                write_trace(file, &report.trace)?;
            }
            print_report(&report, json)?;
            Ok(report.pass)
        }
        Command::ReplayAll { dir, json } => {
            let reports = replay_all(&dir)?;
            if reports.is_empty() {
                bail!("no scenario files in {}", dir.display());
            }
            for r in &reports {
                print_report(r, json)?;
            }
            let passed = reports.iter().filter(|r| r.pass).count();
            if !json {
                println!("{passed}/{} scenarios passed", reports.len());
            }
            Ok(passed == reports.len())
        }
        Command::Lint { trace, tags, app } => {
            let file = File::open(&trace).with_context(|| format!("cannot open {}", trace.display()))?;
            let entries = read_trace(BufReader::new(file))?;
            let meta = match app {
                Some(p) => task_meta(&AppDefinition::load(&p)?, tags.into_iter().collect(), &entries),
                None => TaskMeta::with_tags(tags),
            };
            let findings = lint_trace(&entries, &meta);
            for f in &findings {
                println!("{f}");
            }
            let errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
            println!("{} findings, {errors} errors", findings.len());
            Ok(errors == 0)
        }
        Command::Kappa { annotations } => {
            let a = read_annotations(open(&annotations)?)?;
            let raters: Vec<_> = a.series.iter().collect();
            for (i, (ra, sa)) in raters.iter().enumerate() {
                for (rb, sb) in &raters[i + 1..] {
                    println!("{ra} vs {rb}: {:.4}", cohen_kappa(sa, sb)?);
                }
            }
            println!("mean pairwise kappa over {} tasks: {:.4}", a.tasks.len(), a.mean_pairwise_kappa()?);
            Ok(true)
        }
        Command::Stats { ratings } => {
            for (task, series) in read_ratings(open(&ratings)?)? {
                let s = series.stats()?;
                println!("{task}: n={} mean={:.2} std={:.2}", s.n, s.mean, s.std);
            }
            Ok(true)
        }
        Command::Distribution { counts } => {
            for (who, c) in read_counts(open(&counts)?)? {
                println!("{who}: {}", distribution(c));
            }
            Ok(true)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn print_report(r: &ReplayReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string(r)?);
    } else {
        println!("{}", r.summary());
    }
    Ok(())
}

/// Live model run. Uses the scenario's app and goal; the script is ignored.
fn run_llm(
    s: &vdagent::scenario::Scenario,
    config: &Path,
    overlay_port: Option<u16>,
    accept_timeout: Duration,
) -> Result<ReplayReport> {
    let cfg = Config::load(config).with_context(|| format!("cannot load {}", config.display()))?;
    let Some(llm) = cfg.llm else {
        bail!("{} has no \"llm\" section", config.display());
    };
    let key = std::env::var(&llm.key_env).ok();
    let mut policy = LlmPolicy::new(HttpChat::new(&llm.endpoint, &llm.model, key.clone()));
    let mut genui: Box<dyn GenUiClient> = match cfg.genui {
        Some(g) => Box::new(ChatGenUi::new(HttpChat::new(g.endpoint, g.model, key))),
        None => Box::new(TemplateGenUi),
    };
    let opts = AgentOptions {
        max_steps: cfg.limits.max_steps,
        viewport: s.viewport,
        ..AgentOptions::default()
    };
    let mut port: Box<dyn OverlayPort> = match overlay_port {
        Some(p) => {
            let session = OverlayServer::bind(p)?.accept(accept_timeout)?;
            Box::new(spawn_session(session))
        }
        None => Box::new(auto_responder(s)),
    };
    Ok(replay_with(s, &mut policy, genui.as_mut(), port.as_mut(), &opts))
}
