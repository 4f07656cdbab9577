//! `spf-audit`: check, audit, expand and scan SPF policies against live DNS
//! or deterministic zone fixtures.

mod commands;
mod output;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_IO: u8 = 74;

#[derive(Debug, Parser)]
#[command(name = "spf-audit", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct CommonOpts {
    /// Zone fixture file; resolves offline and deterministically.
    #[arg(long, global = true)]
    zone: Option<PathBuf>,

    /// Upstream DNS resolver (UDP with TCP fallback).
    #[arg(long, global = true, env = "SPF_AUDIT_RESOLVER")]
    resolver: Option<SocketAddr>,

    /// Consult the fixture first, fall through to the live resolver.
    #[arg(long, global = true)]
    overlay: bool,

    /// Route operations through a running spf-auditd instance.
    #[arg(long, global = true, value_name = "URL")]
    server: Option<String>,

    /// Sustained DNS query rate limit.
    #[arg(long, global = true)]
    qps: Option<f64>,

    /// Concurrent audits during scans.
    #[arg(long, global = true, default_value_t = 8)]
    concurrency: usize,

    /// DNS answer cache capacity.
    #[arg(long, global = true, default_value_t = 10000)]
    cache: usize,

    /// DNS timeout in seconds (live resolver).
    #[arg(long, global = true, default_value_t = 5)]
    timeout: u64,

    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// RFC-grammar parsing instead of the lenient audit taxonomy
    /// (applies to `parse`).
    #[arg(long, global = true)]
    strict: bool,

    /// Enforce the 10-lookup budget during expansion.
    #[arg(long = "honor-budget", global = true)]
    honor_budget: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the sender policy of a domain for a client IP.
    Check {
        domain: String,
        ip: String,
        /// MAIL FROM identity; defaults to postmaster@<domain>.
        #[arg(long)]
        sender: Option<String>,
    },
    /// Parse one record and report findings.
    Parse {
        /// Raw record text; read from stdin when omitted.
        raw: Option<String>,
    },
    /// Audit one domain: errors, expansion, flags, DMARC.
    Audit {
        domain: String,
        /// Also print remediation text when there are findings.
        #[arg(long)]
        remediation: bool,
    },
    /// Expand a policy into its exact authorized IPv4 set.
    Expand {
        domain: String,
        #[arg(long, default_value_t = 20)]
        max_depth: u32,
    },
    /// Scan a domain list and write audits.
    Scan {
        /// Domain list: Tranco CSV (`rank,domain`) or plain names.
        list: PathBuf,
        /// Output path (JSONL/JSON) or directory (CSV); `-` is stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, value_parser = ["jsonl", "json", "csv"], default_value = "jsonl")]
        format: String,
        #[arg(long, value_parser = ["auto", "tranco", "plain"], default_value = "auto")]
        list_format: String,
    },
    /// Recompute corpus statistics from an audits.jsonl (no network).
    Stats {
        audits: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, value_parser = ["json", "csv"], default_value = "json")]
        format: String,
    },
    /// List the domains whose policy passes a given sender IP.
    Spoofable {
        ip: String,
        /// audits.jsonl or a plain domain list.
        corpus: PathBuf,
    },
}

/// Failures mapped onto the documented exit codes.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = err.print();
                    return ExitCode::SUCCESS;
                }
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(commands::run(cli.common, cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("spf-audit: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
