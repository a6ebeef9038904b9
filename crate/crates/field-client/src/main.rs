use std::collections::BTreeSet;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::Utc;
use clap::{Parser, Subcommand};

use disaster_core::domain::ActorId;
use disaster_core::geo::AdminHierarchy;
use disaster_core::server::api::VerifyRequest;
use field_client::build::{self, Answers, BuildContext};
use field_client::link::{LinkProfile, LossyLink};
use field_client::retry::{submit_with_retry, SubmitError};
use field_client::sleep::ThreadSleeper;
use field_client::transport::{HttpTransport, Transport, TransportError};
use field_client::watch::{CursorFile, Watcher, DEFAULT_TIMEOUT};

#[derive(Parser)]
#[command(name = "field-client", version, about = "Report disasters and watch alerts from the field")]
struct Cli {
    /// Base URL of the alert server.
    #[arg(long, global = true, default_value = "http://127.0.0.1:8080")]
    server: String,
    /// Simulated link as drop:latency_ms:jitter_ms, e.g. 0.3:120:40.
    #[arg(long, global = true, default_value = "0:0:0")]
    profile: LinkProfile,
    /// Seed for the simulated link.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a report (from an answer file or interactively) and submit it.
    Report {
        /// TOML answer file; without it the steps are asked on the terminal.
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Idempotency key; reuse it to retry a submission safely.
        #[arg(long)]
        key: Option<String>,
        #[arg(long, default_value_t = 10)]
        max_attempts: u32,
        /// Region file used to check the location before sending.
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long, default_value = "anonymous")]
        reporter: String,
        #[arg(long, default_value = "")]
        phone: String,
    },
    /// Follow push topics and print each alert once.
    Watch {
        /// Comma-separated topics, e.g. MAF,DAFO:Louangprabang,village:V1.
        #[arg(long, value_delimiter = ',', required = true)]
        topics: Vec<String>,
        #[arg(long)]
        subscriber: String,
        /// Where cursors are kept between runs.
        #[arg(long)]
        cursor_file: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_millis() as u64)]
        timeout_ms: u64,
        /// Stop after one poll.
        #[arg(long)]
        once: bool,
    },
    /// Record a verification of a report.
    Verify {
        #[arg(long)]
        report: String,
        #[arg(long)]
        verifier: String,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Fetch a report as a CAP 1.1 alert.
    Export {
        #[arg(long)]
        report: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sender: Option<String>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Build(#[from] build::BuildError),
    #[error(transparent)]
    Submit(#[from] SubmitError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Watch(#[from] field_client::watch::WatchError),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Submit(SubmitError::Unreachable { .. }) | CliError::Transport(TransportError::Unreachable(_)) => 3,
            CliError::Build(build::BuildError::AbortedByUser) => 130,
            _ => 1,
        }
    }
}

fn default_cursor_file(subscriber: &str) -> PathBuf {
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join(".field-client").join(format!("cursors-{subscriber}.json"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or_else(rand::random);
    let http = HttpTransport::new(&cli.server)?;
    let link = LossyLink::new(http, cli.profile, seed, ThreadSleeper);
    match cli.command {
        Command::Report {
            answers,
            key,
            max_attempts,
            regions,
            reporter,
            phone,
        } => {
            let hierarchy = match regions {
                Some(path) => Some(AdminHierarchy::load(&path).map_err(|e| CliError::Other(e.to_string()))?),
                None => None,
            };
            let ctx = BuildContext {
                reporter: ActorId::new(reporter),
                phone,
                hierarchy: hierarchy.as_ref(),
                now: Utc::now(),
            };
            let report = match answers {
                Some(path) => build::from_answers(&Answers::load(path)?, &ctx)?,
                None => {
                    let stdin = io::stdin();
                    build::interactive(stdin.lock(), io::stderr(), &ctx)?
                }
            };
            let key = key.unwrap_or_else(|| format!("{:016x}", rand::random::<u64>()));
            eprintln!("idempotency key {key}");
            let done = submit_with_retry(&link, &report, &key, max_attempts, &ThreadSleeper)?;
            eprintln!("accepted after {} attempt(s)", done.attempts);
            println!("{}", done.id);
        }
        Command::Watch {
            topics,
            subscriber,
            cursor_file,
            timeout_ms,
            once,
        } => {
            let topics: BTreeSet<String> = topics.into_iter().filter(|t| !t.is_empty()).collect();
            let file = CursorFile::new(cursor_file.unwrap_or_else(|| default_cursor_file(&subscriber)));
            let mut watcher = Watcher::new(&link, ThreadSleeper, ActorId::new(subscriber), topics, Some(file), timeout_ms)?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            if once {
                // The first round may only subscribe.
                watcher.watch_once(&mut out)?;
                watcher.watch_once(&mut out)?;
            } else {
                watcher.run(&mut out, |_| false)?;
            }
        }
        Command::Verify { report, verifier, note } => {
            let record = link.verify(
                &report,
                &VerifyRequest {
                    verifier: ActorId::new(verifier),
                    note,
                },
            )?;
            println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
        }
        Command::Export { report, out, sender } => {
            let sender = sender.map(ActorId::new);
            let xml = link.export_cap(&report, sender.as_ref())?;
            match out {
                Some(path) => std::fs::write(path, xml)?,
                None => io::stdout().write_all(&xml)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

