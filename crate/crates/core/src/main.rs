use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use pure_dialog::dialog::DialogConfig;
use pure_dialog::flight::{self, mock::{MockSite, MockSiteConfig}};
use pure_dialog::query::TableStore;
use pure_dialog::service::{self, Backend, Domain, SessionConfig, SessionManager};

#[derive(Parser)]
#[command(name = "dialog", about = "Schema-driven dialogue manager")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Local,
    Cgi,
}

#[derive(Subcommand)]
enum Command {
    /// Talk to a domain on the terminal.
    Repl {
        #[arg(long, default_value = "flights")]
        domain: String,
        #[arg(long, value_enum, default_value = "local")]
        backend: BackendKind,
        /// Base URL of the CGI site; the bundled mock is used in-process when absent.
        #[arg(long)]
        cgi_url: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        few_threshold: usize,
        #[arg(long, default_value = "packs")]
        packs: PathBuf,
        /// Pick among rule variants.
        #[arg(long)]
        vary: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "packs")]
        packs: PathBuf,
        /// Keep one transcript file per session here.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Re-run a transcript file and report any reply that differs.
    Replay {
        file: PathBuf,
        #[arg(long, default_value = "packs")]
        packs: PathBuf,
    },
    /// The mock airline site.
    MockAa {
        #[command(subcommand)]
        command: MockCommand,
    },
}

#[derive(Subcommand)]
enum MockCommand {
    /// Serve the flight table as the airline's CGI site.
    Serve {
        #[arg(long, default_value_t = 8089)]
        port: u16,
        #[arg(long, default_value = "packs/flights/flights.csv")]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Box<dyn std::error::Error>> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Repl {
            domain,
            backend,
            cgi_url,
            seed,
            few_threshold,
            packs,
            vary,
        } => {
            let manager = SessionManager::from_packs_dir(&packs)?;
            let backend = match backend {
                BackendKind::Local => Backend::Local,
                BackendKind::Cgi => Backend::Cgi { url: cgi_url },
            };
            let mut config = SessionConfig::new(&domain, backend, seed);
            config.dialog = DialogConfig { few_threshold };
            config.vary_prompts = vary;
            let (id, greeting) = manager.create(config)?;
            println!("{greeting}");
            let stdin = io::stdin();
            loop {
                print!("> ");
                io::stdout().flush()?;
                let mut line = String::new();
                if stdin.lock().read_line(&mut line)? == 0 {
                    break;
                }
                let r = manager.step(&id, line.trim_end())?;
                println!("{}", r.reply);
                tracing::debug!(state = %r.state, cause = %r.debug.cause, "turn");
                if r.closed {
                    break;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, packs, transcripts } => {
            let mut manager = SessionManager::from_packs_dir(&packs)?;
            if let Some(dir) = transcripts {
                manager = manager.with_persistence(dir)?;
            }
            runtime()?.block_on(service::http::serve(Arc::new(manager), port))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { file, packs } => {
            let (_, config, entries) = service::read_transcript(&file)?;
            let domain = Domain::load(&packs.join(&config.domain))?;
            let mismatches = service::replay(domain, config, &entries)?;
            for m in &mismatches {
                println!(
                    "turn {}: expected {} {:?}, got {} {:?}",
                    m.turn, m.expected_state, m.expected_reply, m.actual_state, m.actual_reply
                );
            }
            println!("{} turns, {} mismatches", entries.len(), mismatches.len());
            Ok(if mismatches.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::MockAa {
            command: MockCommand::Serve { port, dataset, latency_ms },
        } => {
            let store = TableStore::from_path(&dataset)?;
            let site = MockSite::new(flight::from_store(&store)?);
            let cfg = MockSiteConfig {
                port,
                latency_ms,
                dataset: Some(dataset),
            };
            runtime()?.block_on(site.serve(cfg))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
