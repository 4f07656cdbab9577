//! Uniform DNS resolution interface.
//!
//! Three implementations share one trait: a live network resolver, a
//! deterministic [`ZoneFixture`] resolver for offline runs, and decorators
//! for caching and rate limiting. All failures are [`DnsAnswer`] outcomes,
//! never panics or transport errors, mirroring how SPF evaluation maps DNS
//! trouble onto temperror/permerror.

mod cache;
mod fixture;
mod live;
mod rate_limit;
mod stack;

pub use cache::{CacheStats, CachingResolver};
pub use fixture::{
    load_zone_fixture, load_zone_fixture_file, OverlayResolver, ZoneFixture, ZoneParseError,
};
pub use live::{LiveResolver, LiveResolverConfig};
pub use rate_limit::RateLimitedResolver;
pub use stack::{build_resolver, ResolverSource, ResolverSourceError};

use std::net::{Ipv4Addr, Ipv6Addr};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub const MAX_LABEL_OCTETS: usize = 63;
pub const MAX_NAME_OCTETS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RrType {
    Txt,
    A,
    Aaaa,
    Mx,
    Ptr,
    /// The deprecated SPF record type (99); queried only when auditing
    /// deprecated-record usage, never for evaluation.
    Spf,
}

impl RrType {
    pub fn as_str(&self) -> &'static str {
        match self {
            RrType::Txt => "TXT",
            RrType::A => "A",
            RrType::Aaaa => "AAAA",
            RrType::Mx => "MX",
            RrType::Ptr => "PTR",
            RrType::Spf => "SPF",
        }
    }

    pub fn from_str_ci(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TXT" => Some(RrType::Txt),
            "A" => Some(RrType::A),
            "AAAA" => Some(RrType::Aaaa),
            "MX" => Some(RrType::Mx),
            "PTR" => Some(RrType::Ptr),
            "SPF" => Some(RrType::Spf),
            _ => None,
        }
    }
}

/// A normalized DNS question: lowercase name, trailing dot stripped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DnsQuery {
    pub name: String,
    pub rrtype: RrType,
}

impl DnsQuery {
    pub fn new(name: &str, rrtype: RrType) -> Self {
        DnsQuery {
            name: normalize_name(name),
            rrtype,
        }
    }
}

pub fn normalize_name(name: &str) -> String {
    name.trim_end_matches('.').to_ascii_lowercase()
}

/// Syntactic length check on a query name. Violations are answers, not
/// errors, so they classify like any other lookup failure.
pub fn name_length_error(name: &str) -> Option<DnsAnswer> {
    if name.split('.').any(|label| label.len() > MAX_LABEL_OCTETS) {
        return Some(DnsAnswer::LabelTooLong);
    }
    if name.len() > MAX_NAME_OCTETS {
        return Some(DnsAnswer::NameTooLong);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RecordData {
    Txt(String),
    A(Ipv4Addr),
    Aaaa(Ipv6Addr),
    Mx { preference: u16, exchange: String },
    Ptr(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "records", rename_all = "snake_case")]
pub enum DnsAnswer {
    /// Non-empty answer set.
    Records(Vec<RecordData>),
    /// The name does not exist.
    NxDomain,
    /// The name exists but has no records of the queried type.
    Empty,
    Timeout,
    ServFail,
    LabelTooLong,
    NameTooLong,
    DecodeError,
}

impl DnsAnswer {
    /// Void answers (NXDOMAIN or no data) count against the 2-void-lookup
    /// budget during evaluation.
    pub fn is_void(&self) -> bool {
        matches!(self, DnsAnswer::NxDomain | DnsAnswer::Empty)
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, DnsAnswer::Timeout | DnsAnswer::ServFail)
    }

    /// TXT payloads in the answer, if any.
    pub fn txt_strings(&self) -> Vec<String> {
        match self {
            DnsAnswer::Records(records) => records
                .iter()
                .filter_map(|r| match r {
                    RecordData::Txt(s) => Some(s.clone()),
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[async_trait]
pub trait Resolver: Send + Sync {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer;
}

#[async_trait]
impl<T: Resolver + ?Sized> Resolver for Arc<T> {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        (**self).resolve(query).await
    }
}

#[async_trait]
impl<T: Resolver + ?Sized> Resolver for &T {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        (**self).resolve(query).await
    }
}
