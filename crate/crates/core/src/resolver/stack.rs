//! Resolution-source selection shared by the service and CLI front ends.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use super::{load_zone_fixture_file, LiveResolver, LiveResolverConfig, OverlayResolver, Resolver};

#[derive(Debug, Clone, Default)]
pub struct ResolverSource {
    /// Zone fixture path for offline resolution.
    pub zone: Option<std::path::PathBuf>,
    /// Upstream resolver endpoint for live resolution.
    pub endpoint: Option<SocketAddr>,
    /// Consult the fixture first and fall through to the live resolver.
    pub overlay: bool,
    pub timeout: Option<Duration>,
}

#[derive(Debug, thiserror::Error)]
pub enum ResolverSourceError {
    #[error("no resolution source: pass a zone fixture or a resolver endpoint")]
    NoSource,
    #[error("--zone and a live resolver are mutually exclusive without overlay mode")]
    ConflictingSources,
    #[error(transparent)]
    Zone(#[from] super::ZoneParseError),
    #[error("live resolver: {0}")]
    Live(String),
}

/// Builds the base resolver from a source selection. Exactly one source
/// must be active unless overlay mode combines both.
pub fn build_resolver(source: &ResolverSource) -> Result<Arc<dyn Resolver>, ResolverSourceError> {
    let live_config = LiveResolverConfig {
        endpoint: source.endpoint,
        timeout: source.timeout.unwrap_or(Duration::from_secs(5)),
    };
    match (&source.zone, source.endpoint, source.overlay) {
        (Some(path), _, true) => {
            let fixture = load_zone_fixture_file(Path::new(path))?;
            let live = LiveResolver::new(live_config).map_err(ResolverSourceError::Live)?;
            Ok(Arc::new(OverlayResolver::new(fixture, live)))
        }
        (Some(_), Some(_), false) => Err(ResolverSourceError::ConflictingSources),
        (Some(path), None, false) => {
            let fixture = load_zone_fixture_file(Path::new(path))?;
            Ok(Arc::new(fixture))
        }
        (None, Some(_), _) => {
            let live = LiveResolver::new(live_config).map_err(ResolverSourceError::Live)?;
            Ok(Arc::new(live))
        }
        (None, None, _) => Err(ResolverSourceError::NoSource),
    }
}
