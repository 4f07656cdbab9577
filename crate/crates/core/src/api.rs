//! Wire types for the HTTP/JSON surface, shared by service and client.

use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, DomainAudit, DomainEntry, ScanReport};
use crate::parser::{SyntaxError, Term};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub schema: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseRequest {
    pub raw: String,
    /// RFC-grammar mode; default is the lenient audit taxonomy.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseResponse {
    /// The payload does not carry the version tag at all.
    pub not_spf: bool,
    /// Canonical rendering of the (possibly partial) term list.
    pub rendered: Option<String>,
    pub terms: Vec<Term>,
    pub errors: Vec<SyntaxError>,
    pub warnings: Vec<SyntaxError>,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRequest {
    pub ip: IpAddr,
    pub domain: String,
    /// MAIL FROM identity; defaults to `postmaster@<domain>`.
    pub sender: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRequest {
    pub domain: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandRequest {
    pub domain: String,
    #[serde(default)]
    pub honor_lookup_budget: bool,
    pub max_depth: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpoofableRequest {
    pub ip: IpAddr,
    pub domains: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpoofableResponse {
    pub ip: IpAddr,
    pub domains: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRequest {
    pub domains: Vec<DomainEntry>,
    pub concurrency: Option<usize>,
    pub qps: Option<f64>,
    pub cache_capacity: Option<usize>,
    #[serde(default)]
    pub honor_lookup_budget: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResponse {
    pub report: ScanReport,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsRequest {
    pub audits: Vec<DomainAudit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemediationRequest {
    pub domain: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemediationResponse {
    pub audit: DomainAudit,
    /// Absent when the audit is clean.
    pub remediation: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
