//! Live DNS resolution over UDP with TCP fallback.

use std::net::SocketAddr;
use std::time::Duration;

use async_trait::async_trait;
use hickory_resolver::config::{NameServerConfig, Protocol, ResolverConfig, ResolverOpts};
use hickory_resolver::error::ResolveErrorKind;
use hickory_resolver::proto::op::ResponseCode;
use hickory_resolver::proto::rr::{RData, RecordType};
use hickory_resolver::TokioAsyncResolver;

use super::{name_length_error, DnsAnswer, DnsQuery, RecordData, Resolver, RrType};

#[derive(Debug, Clone)]
pub struct LiveResolverConfig {
    /// Upstream recursive resolver; system configuration when absent.
    pub endpoint: Option<SocketAddr>,
    pub timeout: Duration,
}

impl Default for LiveResolverConfig {
    fn default() -> Self {
        LiveResolverConfig {
            endpoint: None,
            timeout: Duration::from_secs(5),
        }
    }
}

pub struct LiveResolver {
    resolver: TokioAsyncResolver,
}

impl LiveResolver {
    pub fn new(config: LiveResolverConfig) -> Result<Self, String> {
        let mut opts = ResolverOpts::default();
        opts.timeout = config.timeout;
        // The audit pipeline layers its own cache; avoid double caching.
        opts.cache_size = 0;

        let resolver = match config.endpoint {
            Some(addr) => {
                let mut rc = ResolverConfig::new();
                rc.add_name_server(NameServerConfig::new(addr, Protocol::Udp));
                rc.add_name_server(NameServerConfig::new(addr, Protocol::Tcp));
                TokioAsyncResolver::tokio(rc, opts)
            }
            None => TokioAsyncResolver::tokio_from_system_conf()
                .map_err(|e| format!("no usable system resolver configuration: {e}"))?,
        };
        Ok(LiveResolver { resolver })
    }
}

fn record_type(rrtype: RrType) -> RecordType {
    match rrtype {
        RrType::Txt => RecordType::TXT,
        RrType::A => RecordType::A,
        RrType::Aaaa => RecordType::AAAA,
        RrType::Mx => RecordType::MX,
        RrType::Ptr => RecordType::PTR,
        RrType::Spf => RecordType::Unknown(99),
    }
}

/// Concatenates the character-strings of one TXT record; `None` marks
/// non-UTF-8 payloads, which classify as decode errors.
fn txt_payload(parts: &[Box<[u8]>]) -> Option<String> {
    let mut bytes = Vec::new();
    for part in parts {
        bytes.extend_from_slice(part);
    }
    String::from_utf8(bytes).ok()
}

#[async_trait]
impl Resolver for LiveResolver {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        if let Some(bad) = name_length_error(&query.name) {
            return bad;
        }

        // Trailing dot suppresses search-domain expansion.
        let fqdn = format!("{}.", query.name);
        let lookup = match self.resolver.lookup(fqdn, record_type(query.rrtype)).await {
            Ok(lookup) => lookup,
            Err(err) => {
                return match err.kind() {
                    ResolveErrorKind::NoRecordsFound { response_code, .. } => match response_code {
                        ResponseCode::NXDomain => DnsAnswer::NxDomain,
                        ResponseCode::NoError => DnsAnswer::Empty,
                        ResponseCode::ServFail => DnsAnswer::ServFail,
                        _ => DnsAnswer::ServFail,
                    },
                    ResolveErrorKind::Timeout => DnsAnswer::Timeout,
                    _ => DnsAnswer::ServFail,
                }
            }
        };

        let mut records = Vec::new();
        for rdata in lookup.iter() {
            match rdata {
                RData::A(a) => records.push(RecordData::A(a.0)),
                RData::AAAA(aaaa) => records.push(RecordData::Aaaa(aaaa.0)),
                RData::TXT(txt) => match txt_payload(txt.txt_data()) {
                    Some(s) => records.push(RecordData::Txt(s)),
                    None => return DnsAnswer::DecodeError,
                },
                RData::MX(mx) => records.push(RecordData::Mx {
                    preference: mx.preference(),
                    exchange: super::normalize_name(&mx.exchange().to_utf8()),
                }),
                RData::PTR(ptr) => {
                    records.push(RecordData::Ptr(super::normalize_name(&ptr.0.to_utf8())))
                }
                RData::Unknown { rdata, .. } => {
                    // Deprecated SPF RRT: presence matters, payload is
                    // TXT-shaped character-strings.
                    let bytes = rdata.anything();
                    match decode_character_strings(bytes) {
                        Some(s) => records.push(RecordData::Txt(s)),
                        None => return DnsAnswer::DecodeError,
                    }
                }
                _ => {}
            }
        }

        if records.is_empty() {
            DnsAnswer::Empty
        } else {
            DnsAnswer::Records(records)
        }
    }
}

fn decode_character_strings(mut bytes: &[u8]) -> Option<String> {
    let mut out = Vec::new();
    while let Some((&len, rest)) = bytes.split_first() {
        let len = len as usize;
        if rest.len() < len {
            return None;
        }
        out.extend_from_slice(&rest[..len]);
        bytes = &rest[len..];
    }
    String::from_utf8(out).ok()
}
