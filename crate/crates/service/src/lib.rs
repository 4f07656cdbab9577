//! HTTP/JSON surface over the audit library.
//!
//! Every operation the library exposes is reachable as a JSON endpoint so
//! the CLI and other clients can run against one long-lived service with a
//! shared DNS cache.

pub mod api;

use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

use spf_audit::resolver::{CachingResolver, RateLimitedResolver, Resolver};

pub struct AppState {
    pub resolver: Arc<dyn Resolver>,
    pub cache: Arc<CachingResolver<Arc<dyn Resolver>>>,
}

impl AppState {
    /// Layers the shared cache (and optional rate limit) over a base
    /// resolver; every request served by this process shares them.
    pub fn new(base: Arc<dyn Resolver>, qps: Option<f64>, cache_capacity: usize) -> Self {
        let limited: Arc<dyn Resolver> = match qps {
            Some(qps) => Arc::new(RateLimitedResolver::new(base, qps)),
            None => base,
        };
        let cache = Arc::new(CachingResolver::new(limited, cache_capacity));
        AppState {
            resolver: cache.clone() as Arc<dyn Resolver>,
            cache,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(api::health))
        .route("/v1/parse", post(api::parse))
        .route("/v1/check", post(api::check))
        .route("/v1/audit", post(api::audit))
        .route("/v1/expand", post(api::expand))
        .route("/v1/spoofable", post(api::spoofable))
        .route("/v1/scan", post(api::scan))
        .route("/v1/stats", post(api::stats))
        .route("/v1/remediation", post(api::remediation))
        .with_state(state)
}
