use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use twin_core::config::SceneConfig;
use twin_core::history::{HistoryStore, Retention};
use twin_core::ingest::{condition, default_rules, parse_rules, serialize_snapshot, AlertRule, Simulator, SimulatorConfig, SnapshotSchema};
use twin_core::pipeline::FramePipeline;
use twin_service::{read_snapshot, FramePacket, Service, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "txtwin", version, about = "Cluster digital twin: ingest, simulate, replay and serve telemetry scenes")]
struct Cli {
    /// Service config (TOML). Supplies scene, rules and history defaults.
    #[arg(long, global = true, env = "TXTWIN_CONFIG")]
    config: Option<PathBuf>,
    /// Snapshot schema file; the header is inferred when absent.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the live service.
    Serve {
        /// Overrides the configured bind address.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Parse a snapshot file, append it to history and print its alerts.
    Ingest {
        file: PathBuf,
        /// History directory (default: config `history_dir`, else ./history).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Write synthetic snapshot files.
    Simulate {
        #[arg(long, default_value_t = 318)]
        nodes: u32,
        #[arg(long, default_value_t = 2)]
        gpus: u32,
        #[arg(long, default_value_t = 0)]
        cpu_nodes: u32,
        #[arg(long, default_value_t = 1.0)]
        hz: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of ticks; runs in real time at `--hz` until interrupted
        /// when absent.
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long, default_value = "snapshots")]
        out: PathBuf,
    },
    /// Stream packets for stored frames as JSON lines.
    Replay {
        #[arg(long)]
        from: Option<i64>,
        #[arg(long)]
        to: Option<i64>,
        #[arg(long)]
        history: Option<PathBuf>,
        /// Scene config (default: config `scene`, else built-in).
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Print naive vs instanced batch and triangle counts for a scene config.
    Stats {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    match cli.command {
        Command::Serve { bind } => serve(config, bind),
        Command::Ingest { file, history } => ingest(&config, cli.schema.as_deref(), &file, history),
        Command::Simulate {
            nodes,
            gpus,
            cpu_nodes,
            hz,
            seed,
            ticks,
            out,
        } => {
            let sim = SimulatorConfig {
                node_count: nodes,
                gpus_per_node: gpus,
                cpu_node_count: cpu_nodes,
                tick_hz: hz,
                seed,
                ..Default::default()
            };
            simulate(sim, ticks, &out)
        }
        Command::Replay { from, to, history, scene } => replay(&config, from, to, history, scene),
        Command::Stats { scene, format } => {
            let scene = load_scene(scene.as_deref().or(config.scene.as_deref()))?;
            let report = scene.stats_report()?;
            let text = match format {
                Format::Text => report.to_table(),
                Format::Jsonl => report.to_json_lines(),
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scene(path: Option<&Path>) -> Result<SceneConfig> {
    Ok(match path {
        Some(p) => SceneConfig::load(p)?,
        None => SceneConfig::default(),
    })
}

fn load_rules(config: &ServiceConfig) -> Result<Vec<AlertRule>> {
    match &config.rules {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("{}", p.display()))?;
            parse_rules(&text).with_context(|| format!("{}", p.display()))
        }
        None => Ok(default_rules()),
    }
}

fn serve(config: ServiceConfig, bind: Option<String>) -> Result<()> {
    let mut config = config.with_env();
    if let Some(b) = bind {
        config.bind = b;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let svc = Service::start(config).await?;
        eprintln!("listening on http://{}", svc.addr());
        svc.wait().await?;
        Ok(())
    })
}

fn ingest(config: &ServiceConfig, schema: Option<&Path>, file: &Path, history: Option<PathBuf>) -> Result<()> {
    let schema = match schema {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("{}", p.display()))?;
            Some(SnapshotSchema::parse(&text).with_context(|| format!("{}", p.display()))?)
        }
        None => None,
    };
    let outcome = read_snapshot(file, schema.as_ref(), true)?;
    for e in &outcome.row_errors {
        eprintln!("{}:{}: {}", file.display(), e.line, e.message);
    }
    let rules = load_rules(config)?;
    let conditioned = condition(&outcome.frame, &rules, None);
    let dir = history
        .or_else(|| config.history_dir.clone())
        .unwrap_or_else(|| PathBuf::from("history"));
    let mut store = HistoryStore::open(&dir, config.retention)?;
    store
        .append(conditioned.frame)
        .with_context(|| format!("appending {} to {}", file.display(), dir.display()))?;

    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{}: {} nodes at {}, {} clamped values, {} row errors, {} alerts",
        file.display(),
        outcome.frame.nodes.len(),
        outcome.frame.timestamp,
        outcome.clamp_count,
        outcome.row_errors.len(),
        conditioned.alerts.len()
    )?;
    for alert in &conditioned.alerts {
        writeln!(out, "  {alert}")?;
    }
    Ok(())
}

fn simulate(config: SimulatorConfig, ticks: Option<u64>, out: &Path) -> Result<()> {
    if let Err(e) = config.validate() {
        bail!("{e}");
    }
    std::fs::create_dir_all(out).with_context(|| format!("{}", out.display()))?;
    let schema = SnapshotSchema::standard(config.gpus_per_node, '\t');
    let period = Duration::from_secs_f64(1.0 / config.tick_hz);
    let mut sim = Simulator::new(config);
    let mut frame = sim.current_frame();
    let mut written = 0u64;
    loop {
        let path = out.join(format!("snapshot-{:08}.tsv", sim.tick()));
        std::fs::write(&path, serialize_snapshot(&frame, &schema)).with_context(|| format!("{}", path.display()))?;
        println!("{}", path.display());
        written += 1;
        match ticks {
            Some(n) if written >= n => return Ok(()),
            Some(_) => {}
            None => std::thread::sleep(period),
        }
        frame = sim.next_frame();
    }
}

fn replay(config: &ServiceConfig, from: Option<i64>, to: Option<i64>, history: Option<PathBuf>, scene: Option<PathBuf>) -> Result<()> {
    let Some(dir) = history.or_else(|| config.history_dir.clone()) else {
        bail!("no history directory; pass --history or set history_dir in the config");
    };
    if !dir.is_dir() {
        bail!("{}: history directory does not exist", dir.display());
    }
    let store = HistoryStore::open(&dir, Retention::default())?;
    let frames = store.range(from.unwrap_or(i64::MIN), to.unwrap_or(i64::MAX))?;
    let scene = load_scene(scene.as_deref().or(config.scene.as_deref()))?;
    let mut pipeline = FramePipeline::new(scene.builder()?, load_rules(config)?, scene.mesh_library());
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    for frame in frames {
        let tick = pipeline.step((*frame).clone())?;
        writeln!(out, "{}", FramePacket::from_tick(&tick).to_json())?;
    }
    out.flush()?;
    Ok(())
}
