use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use hal_core::engine::{CycleRecord, Mode};
use hal_core::kb::{DocInput, Document, HashEmbedder, KnowledgeBase};
use hal_gateway::{Gateway, GatewayConfig};
use hal_scenarios::lint::lint_bundle;
use hal_scenarios::{load_lab, run, ApproveAll, Approver, RunOptions, ScenarioRegistry};
use hal_virtlab::LabConfig;

#[derive(Parser)]
#[command(name = "hal", version, about = "Lab automation sessions over a simulated superconducting lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a shipped scenario and print its report.
    Run {
        scenario: String,
        #[arg(long, default_value = "auto")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Dataset root; a temporary directory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// List shipped scenarios.
    Scenarios,
    /// Check every scenario bundle for consistency.
    Lint,
    /// Serve the simulator over TCP.
    ServeLab {
        /// Lab TOML file; a scenario's lab when it names a shipped fixture.
        #[arg(long)]
        config: Option<String>,
        #[arg(long, default_value = "127.0.0.1:7700")]
        listen: String,
    },
    /// Manage a knowledge base directory.
    Kb {
        #[arg(long, default_value = "kb")]
        dir: PathBuf,
        #[command(subcommand)]
        action: KbAction,
    },
    /// Serve the HTTP API.
    Gateway {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Seed the knowledge base from a scenario.
        #[arg(long)]
        scenario: Option<String>,
        /// Knowledge base directory used when no scenario is given.
        #[arg(long)]
        kb_dir: Option<PathBuf>,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        model: Option<String>,
    },
}

#[derive(Subcommand)]
enum KbAction {
    /// Add `.doc` files (header lines, blank line, body).
    Add { files: Vec<PathBuf> },
    List,
    Search {
        task: String,
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
}

struct AskStdin;

impl Approver for AskStdin {
    fn approve(&mut self, record: &CycleRecord) -> bool {
        eprintln!("--- cycle {}: {}\n{}\n---", record.index, record.prompt, record.script_source);
        eprint!("run this script? [y/N] ");
        let _ = io::stderr().flush();
        let mut line = String::new();
        io::stdin().lock().read_line(&mut line).is_ok() && line.trim().eq_ignore_ascii_case("y")
    }
}

fn open_kb(dir: PathBuf) -> Result<KnowledgeBase> {
    Ok(KnowledgeBase::open(dir, Arc::new(HashEmbedder::default()))?)
}

fn run_scenario(name: &str, mode: &str, seed: u64, report: Option<PathBuf>, data_dir: Option<PathBuf>) -> Result<bool> {
    let registry = ScenarioRegistry::standard()?;
    let scenario = registry.get(name)?;
    let mode = Mode::parse(mode).ok_or_else(|| anyhow!("mode must be auto or manual"))?;
    let scratch = data_dir.is_none();
    let data_dir = data_dir
        .unwrap_or_else(|| std::env::temp_dir().join(format!("hal-{}-{seed}-{}", scenario.name(), std::process::id())));
    let opts = RunOptions { seed, mode, data_dir };
    let out = match mode {
        Mode::Auto => run(scenario.as_ref(), &opts, &mut ApproveAll),
        Mode::Manual => run(scenario.as_ref(), &opts, &mut AskStdin),
    };
    if scratch {
        let _ = std::fs::remove_dir_all(&opts.data_dir);
    }
    let out = out?;
    let text = out.report.to_json();
    match report {
        Some(path) => std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    for c in &out.report.checks {
        eprintln!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(out.report.passed)
}

fn lab_config(config: Option<String>) -> Result<LabConfig> {
    let Some(c) = config else {
        return Ok(LabConfig::default());
    };
    if let Ok(cfg) = load_lab(&c) {
        return Ok(cfg);
    }
    let text = std::fs::read_to_string(&c).with_context(|| format!("reading {c}"))?;
    Ok(toml::from_str(&text).with_context(|| format!("parsing {c}"))?)
}

fn kb_command(dir: PathBuf, action: KbAction) -> Result<()> {
    let kb = open_kb(dir)?;
    match action {
        KbAction::Add { files } => {
            for f in files {
                let doc = Document::parse(&std::fs::read_to_string(&f)?).with_context(|| format!("parsing {}", f.display()))?;
                let id = kb.add(DocInput {
                    id: Some(doc.id),
                    title: doc.title,
                    kind: Some(doc.kind),
                    body: doc.body,
                    refs: doc.refs,
                })?;
                println!("{id}");
            }
        }
        KbAction::List => {
            for d in kb.list() {
                println!("{}\t{}\t{}", d.id, d.kind.as_str(), d.title);
            }
        }
        KbAction::Search { task, k } => {
            for (id, score) in kb.search_text(&task, k)? {
                println!("{score:.4}\t{id}");
            }
        }
    }
    Ok(())
}

fn gateway(listen: String, scenario: Option<String>, kb_dir: Option<PathBuf>, data_dir: PathBuf, model: Option<String>) -> Result<()> {
    let registry = ScenarioRegistry::standard()?;
    let kb = match (&scenario, kb_dir) {
        (Some(name), _) => registry.get(name)?.bundle().knowledge_base()?,
        (None, Some(dir)) => Arc::new(open_kb(dir)?),
        (None, None) => Arc::new(KnowledgeBase::in_memory(Arc::new(HashEmbedder::default()))),
    };
    let config = GatewayConfig {
        kb,
        data_dir,
        default_model: model.or(scenario.map(|s| format!("scripted:{s}"))),
        clock: "system".into(),
        max_poll: Duration::from_secs(30),
    };
    let gw = Arc::new(Gateway::new(config, registry));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&listen).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        hal_gateway::serve(listener, gw).await
    })?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, mode, seed, report, data_dir } => {
            if !run_scenario(&scenario, &mode, seed, report, data_dir)? {
                std::process::exit(1);
            }
        }
        Command::Scenarios => {
            let registry = ScenarioRegistry::standard()?;
            for s in registry.all() {
                println!("{}\t{}", s.name(), s.bundle().description);
            }
        }
        Command::Lint => {
            let registry = ScenarioRegistry::standard()?;
            let issues: Vec<_> = registry.all().flat_map(|s| lint_bundle(s.bundle())).collect();
            for i in &issues {
                match i.step {
                    Some(step) => println!("{}: step {step}: {}", i.scenario, i.message),
                    None => println!("{}: {}", i.scenario, i.message),
                }
            }
            if !issues.is_empty() {
                bail!("{} issues", issues.len());
            }
        }
        Command::ServeLab { config, listen } => {
            let server = hal_virtlab::serve(&listen, lab_config(config)?)?;
            eprintln!("lab listening on {}", server.endpoint());
            loop {
                std::thread::park();
            }
        }
        Command::Kb { dir, action } => kb_command(dir, action)?,
        Command::Gateway { listen, scenario, kb_dir, data_dir, model } => gateway(listen, scenario, kb_dir, data_dir, model)?,
    }
    Ok(())
}
