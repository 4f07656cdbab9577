use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;

use spf_audit::resolver::{build_resolver, ResolverSource};
use spf_audit_service::{router, AppState};

/// SPF audit service: parsing, evaluation, expansion and corpus scans over
/// HTTP/JSON.
#[derive(Debug, Parser)]
#[command(name = "spf-auditd", version)]
struct Args {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8378")]
    listen: SocketAddr,

    /// Zone fixture file for offline resolution.
    #[arg(long)]
    zone: Option<PathBuf>,

    /// Upstream DNS resolver (UDP with TCP fallback).
    #[arg(long, env = "SPF_AUDIT_RESOLVER")]
    resolver: Option<SocketAddr>,

    /// Consult the fixture first, fall through to the live resolver.
    #[arg(long)]
    overlay: bool,

    /// DNS timeout in seconds.
    #[arg(long, default_value_t = 5)]
    timeout: u64,

    /// Sustained upstream query rate limit.
    #[arg(long)]
    qps: Option<f64>,

    /// Shared DNS answer cache capacity.
    #[arg(long, default_value_t = 65536)]
    cache: usize,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt().init();

    let args = Args::parse();
    let source = ResolverSource {
        zone: args.zone,
        endpoint: args.resolver,
        overlay: args.overlay,
        timeout: Some(Duration::from_secs(args.timeout)),
    };
    let base = match build_resolver(&source) {
        Ok(base) => base,
        Err(err) => {
            eprintln!("spf-auditd: {err}");
            std::process::exit(2);
        }
    };

    let state = Arc::new(AppState::new(base, args.qps, args.cache));
    let app = router(state);

    let listener = match tokio::net::TcpListener::bind(args.listen).await {
        Ok(listener) => listener,
        Err(err) => {
            eprintln!("spf-auditd: cannot bind {}: {err}", args.listen);
            std::process::exit(2);
        }
    };
    tracing::info!("listening on {}", args.listen);
    if let Err(err) = axum::serve(listener, app).await {
        eprintln!("spf-auditd: server error: {err}");
        std::process::exit(1);
    }
}
