//! Corpus scanning: orchestrates per-domain audits over domain lists and
//! aggregates the corpus-level statistics.

mod domain_list;
mod scan;
mod stats;

pub use domain_list::{load_domain_list, DomainEntry, ListFormat, ListParseError};
pub use scan::{
    audit_domain, scan, DomainAudit, ExpansionSummary, ScanOptions, ScanReport, SpfInfo,
};
pub use stats::{aggregate, Adoption, CdfPoint, CorpusStats, CorpusTotals, TopInclude};
