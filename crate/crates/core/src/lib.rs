//! SPF policy parsing, evaluation and auditing.
//!
//! The crate is organized around the stages of an SPF audit pipeline:
//!
//! * [`parser`] turns raw TXT payloads into term lists and, in lenient
//!   mode, classifies malformed records instead of failing opaquely.
//! * [`resolver`] is the uniform DNS interface: a live resolver, a
//!   deterministic zone-fixture resolver for offline runs, and caching /
//!   rate-limiting decorators.
//! * [`eval`] implements `check_host` with the 10-lookup and 2-void-lookup
//!   budgets, loop detection and error classification.
//! * [`ipset`] and [`policy`] expand policies into exact authorized IPv4
//!   sets and score their permissiveness.
//! * [`dmarc`] detects DMARC presence and policy.
//! * [`corpus`] scans domain lists and aggregates corpus statistics;
//!   [`report`] serializes audits and renders remediation text.

pub mod api;
pub mod corpus;
pub mod dmarc;
pub mod eval;
pub mod ipset;
pub mod parser;
pub mod policy;
pub mod report;
pub mod resolver;

/// Schema version embedded in every emitted document.
pub const SCHEMA_VERSION: &str = "spf-audit/1";
