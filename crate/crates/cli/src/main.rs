//! `eln`: run the lab notebook engine from the command line.
//!
//! Exit status is 0 on success, 1 when an operation fails and 2 for usage
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::NaiveDateTime;
use clap::{Parser, Subcommand};
use eln_core::catalog::PathRule;
use eln_core::convention::TreeKind;
use eln_core::config::{Config, ENV_CONFIG};
use eln_core::engine::{EntryQuery, IngestOptions, NewSample, StampRecord};
use eln_core::stamper::{self, StampProof};
use eln_core::Engine;

const DEFAULT_CONFIG: &str = "eln.toml";

#[derive(Debug, Parser)]
#[command(name = "eln", version, about = "Self-generating electronic lab notebook")]
struct Cli {
    /// Configuration file [default: ./eln.toml]
    #[arg(long, global = true, env = ENV_CONFIG)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a starter config and create the store.
    Init,
    /// Serve the HTTP API (and the web client, if configured).
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Generate entries from the data tree.
    Ingest {
        /// Data root to scan instead of the configured one.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Reference time for the recency rule (YYYY-MM-DDTHH:MM:SS).
        #[arg(long, value_parser = parse_time)]
        now: Option<NaiveDateTime>,
        /// Accept files of any age.
        #[arg(long)]
        no_recency: bool,
        #[arg(long)]
        json: bool,
    },
    /// Show the latest ingest report.
    Report {
        #[arg(long)]
        json: bool,
    },
    /// Manage samples.
    Sample {
        #[command(subcommand)]
        command: SampleCommand,
    },
    /// Manage path rules.
    Rule {
        #[command(subcommand)]
        command: RuleCommand,
    },
    /// List entries matching all given filters, newest first.
    Query {
        #[arg(long)]
        sample: Option<String>,
        #[arg(long)]
        device: Option<String>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<TreeKind>,
        #[arg(long, value_parser = parse_time)]
        from: Option<NaiveDateTime>,
        #[arg(long, value_parser = parse_time)]
        to: Option<NaiveDateTime>,
        /// Text searched in descriptions and linked notes.
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Trusted timestamping.
    Stamp {
        #[command(subcommand)]
        command: StampCommand,
    },
}

#[derive(Debug, Subcommand)]
enum SampleCommand {
    /// Register a sample (two capital letters, underscore, two digits).
    Add {
        name: String,
        #[arg(long, default_value = "")]
        kind: String,
    },
    /// List samples.
    List,
}

#[derive(Debug, Subcommand)]
enum RuleCommand {
    /// Register where a device's files live.
    Add {
        /// Three-capital-letter device code.
        code: String,
        /// Device directory relative to the data root.
        #[arg(long)]
        root: String,
        /// Comma-separated allowed extensions.
        #[arg(long, value_delimiter = ',', required = true)]
        ext: Vec<String>,
        #[arg(long, value_parser = parse_kind, default_value = "main")]
        kind: TreeKind,
        #[arg(long, default_value = "")]
        variant: String,
    },
    /// List path rules.
    List,
}

#[derive(Debug, Subcommand)]
enum StampCommand {
    /// Batch unstamped entries and submit the Merkle root.
    Run {
        #[arg(long, value_parser = parse_time)]
        now: Option<NaiveDateTime>,
    },
    /// Print the inclusion proof for a file as JSON.
    Proof { file: PathBuf },
    /// Check that FILE is covered by the proof in PROOF.json.
    Verify { file: PathBuf, proof: PathBuf },
}

fn parse_time(s: &str) -> Result<NaiveDateTime, String> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| format!("`{s}` is not a timestamp like 2021-02-01T17:17:00"))
}

fn parse_kind(s: &str) -> Result<TreeKind, String> {
    s.parse::<TreeKind>().map_err(|e| e.to_string())
}

/// Failure of an operation; printed to stderr, exit status 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn config_path(cli: &Cli) -> (PathBuf, bool) {
    match &cli.config {
        Some(p) => (p.clone(), true),
        None => (PathBuf::from(DEFAULT_CONFIG), false),
    }
}

/// Loads the config. A missing default file means built-in defaults relative
/// to the working directory; a missing explicit file is an error.
fn load_config(path: &Path, explicit: bool) -> Result<Config, Failure> {
    if !explicit && !path.exists() {
        let mut config = Config::from_toml("", Path::new("."))?;
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        return Ok(config);
    }
    Ok(Config::load(path)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> Outcome {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn init(path: &Path) -> Outcome {
    if path.exists() {
        eprintln!("{} exists, keeping it", path.display());
    } else {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, Config::sample_toml())?;
        println!("wrote {}", path.display());
    }
    let config = Config::load(path)?;
    std::fs::create_dir_all(&config.data_root)?;
    Engine::open(config.clone())?;
    println!("store ready at {}", config.store_path.display());
    Ok(())
}

fn report_summary(report: &eln_core::ingest::IngestReport) {
    println!(
        "scanned {}, created {}, duplicates {}, skipped {}, links {}",
        report.scanned,
        report.created,
        report.duplicates,
        report.skipped.len(),
        report.links_created
    );
    for s in &report.skipped {
        println!("  skipped {} ({})", s.path, serde_json::to_value(s.reason).unwrap_or_default().as_str().unwrap_or("?"));
    }
}

fn verify(file: &Path, proof_path: &Path) -> Outcome {
    let text = std::fs::read_to_string(proof_path)
        .map_err(|e| Failure(format!("cannot read {}: {e}", proof_path.display())))?;
    let proof: StampProof = match serde_json::from_str::<StampRecord>(&text) {
        Ok(record) => record.proof,
        Err(_) => serde_json::from_str(&text).map_err(|e| Failure(format!("invalid proof file: {e}")))?,
    };
    let digest = stamper::hash_path(file)?;
    if digest != proof.leaf {
        return Err(Failure(format!("FAILED: {} hashes to {digest}, proof is for {}", file.display(), proof.leaf)));
    }
    match stamper::verify(&proof) {
        Ok(true) => {
            println!("OK");
            Ok(())
        }
        Ok(false) => Err(Failure("FAILED: proof does not lead to its root".into())),
        Err(e) => Err(Failure(format!("FAILED: {e}"))),
    }
}

fn run(cli: Cli) -> Outcome {
    let (path, explicit) = config_path(&cli);
    if let Command::Init = cli.command {
        return init(&path);
    }
    if let Command::Stamp { command: StampCommand::Verify { file, proof } } = &cli.command {
        return verify(file, proof);
    }
    let mut config = load_config(&path, explicit)?;
    if let Command::Serve { port, bind } = &cli.command {
        if let Some(port) = port {
            config.server.port = *port;
        }
        if let Some(bind) = bind {
            config.server.bind = bind.clone();
        }
    }
    let engine = Engine::open(config)?;

    match cli.command {
        Command::Init | Command::Stamp { command: StampCommand::Verify { .. } } => unreachable!("handled above"),
        Command::Serve { .. } => {
            let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
            let server = engine.config().server.clone();
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = eln_core::api::bind(&server.bind, server.port).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                eln_core::api::serve_on(listener, Arc::new(engine)).await?;
                Ok::<_, Failure>(())
            })
        }
        Command::Ingest { root, now, no_recency, json } => {
            let report = engine.ingest(&IngestOptions { now, no_recency, root })?;
            if json {
                print_json(&report)
            } else {
                report_summary(&report);
                Ok(())
            }
        }
        Command::Report { json } => {
            let report = engine.latest_report()?;
            if json {
                print_json(&report)
            } else {
                report_summary(&report);
                Ok(())
            }
        }
        Command::Sample { command: SampleCommand::Add { name, kind } } => {
            let sample = engine.register_sample(NewSample { name, kind, properties: Default::default() })?;
            println!("added sample {}", sample.name);
            Ok(())
        }
        Command::Sample { command: SampleCommand::List } => print_json(&engine.samples()?),
        Command::Rule { command: RuleCommand::Add { code, root, ext, kind, variant } } => {
            engine.register_rule(PathRule {
                device_code: code.clone(),
                tree_kind: kind,
                root_subpath: root,
                allowed_extensions: ext.into_iter().collect(),
                instrument_variant: variant,
            })?;
            println!("added {kind} rule for {code}");
            Ok(())
        }
        Command::Rule { command: RuleCommand::List } => print_json(&engine.rules()?),
        Command::Query { sample, device, kind, from, to, text, json } => {
            let entries = engine.query(&EntryQuery { sample, device, kind, from, to, q: text, ..Default::default() })?;
            if json {
                return print_json(&entries);
            }
            for e in &entries {
                println!(
                    "{:>6}  {:<4}  {}  {}  {}  {}",
                    e.id,
                    e.kind,
                    e.device_code,
                    e.sample_name,
                    e.observed_at.format("%Y-%m-%dT%H:%M:%S"),
                    e.file_path
                );
            }
            Ok(())
        }
        Command::Stamp { command: StampCommand::Run { now } } => {
            let batch = engine.stamp_run(now)?;
            println!(
                "batch {} with {} leaves, root {}, receipt {}",
                batch.batch_date,
                batch.leaves.len(),
                batch.root,
                batch.backend_receipt.as_deref().unwrap_or("-")
            );
            Ok(())
        }
        Command::Stamp { command: StampCommand::Proof { file } } => {
            let digest = stamper::hash_path(&file)?;
            print_json(&engine.stamp_proof(&digest.to_hex())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
