//! Per-domain audits and the concurrent corpus scan.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::dmarc::{fetch_dmarc, DmarcStatus};
use crate::eval::{
    fetch_spf_raw, term_causes_lookup, ErrorClass, InvalidIpKind, RecordNotFoundCause,
    MAX_DNS_LOOKUPS, MAX_VOID_LOOKUPS,
};
use crate::parser::{parse_spf, Mechanism, ParseMode, ParsedSpf, SyntaxError, TermKind};
use crate::policy::{
    permissiveness_flags, Expander, ExpansionLimits, ExpansionReport, PermissivenessFlags,
};
use crate::resolver::{
    CacheStats, CachingResolver, DnsAnswer, DnsQuery, RateLimitedResolver, Resolver, RrType,
};

use super::domain_list::DomainEntry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpfInfo {
    pub raw: String,
    /// True when the lenient parse reported no findings.
    pub valid: bool,
}

/// Record-derived expansion numbers carried in the audit; enough to
/// recompute every corpus statistic offline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub ipv4_count: u64,
    pub include_depth_max: u32,
    pub top_level_includes: u32,
    pub truncated: bool,
    pub unexpandable_terms: u64,
    /// Prefix histogram of contributions that originate inside includes.
    pub include_prefix_histogram: BTreeMap<u8, u64>,
    /// Every include target traversed, with its own exact address count.
    pub traversed_includes: BTreeMap<String, u64>,
}

impl ExpansionSummary {
    pub fn from_report(report: &ExpansionReport) -> Self {
        let mut include_prefix_histogram = BTreeMap::new();
        for c in &report.contributions {
            if c.via_include && c.kind != crate::policy::ContributionKind::All {
                *include_prefix_histogram.entry(c.cidr.prefix).or_insert(0) += 1;
            }
        }
        ExpansionSummary {
            ipv4_count: report.ipset.count(),
            include_depth_max: report.include_depth_max,
            top_level_includes: report.top_level_includes,
            truncated: report.truncated,
            unexpandable_terms: report.unexpandable.len() as u64,
            include_prefix_histogram,
            traversed_includes: report.traversed_includes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAudit {
    pub schema: String,
    pub domain: String,
    pub rank: Option<u32>,
    pub mx_present: bool,
    pub spf: Option<SpfInfo>,
    /// Why no SPF record was usable, when one was looked for.
    pub spf_lookup_error: Option<RecordNotFoundCause>,
    /// Top-level resolution failed transiently; excluded from the error
    /// histogram and counted separately.
    pub dns_failed: bool,
    pub errors: Vec<ErrorClass>,
    pub warnings: Vec<String>,
    pub expansion: Option<ExpansionSummary>,
    pub flags: PermissivenessFlags,
    pub dmarc: DmarcStatus,
    /// The record normalizes to exactly `v=spf1 -all` or `v=spf1 ~all`.
    pub deny_all_only: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub concurrency: usize,
    pub qps: Option<f64>,
    pub cache_capacity: usize,
    pub expansion: ExpansionLimits,
    /// Record-level analysis cache; identical SPF text is analyzed once.
    pub record_cache: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            concurrency: 8,
            qps: None,
            cache_capacity: 10_000,
            expansion: ExpansionLimits::default(),
            record_cache: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// Audits in canonical order (by domain name).
    pub audits: Vec<DomainAudit>,
    pub dns_cache: CacheStats,
    pub record_cache: CacheStats,
}

/// Scans a domain list. Per-domain failures are recorded in the audit and
/// never abort the scan; audits come back in canonical domain order.
pub async fn scan(
    entries: &[DomainEntry],
    resolver: Arc<dyn Resolver>,
    options: &ScanOptions,
) -> ScanReport {
    let resolver: Arc<dyn Resolver> = match options.qps {
        Some(qps) => Arc::new(RateLimitedResolver::new(resolver, qps)),
        None => resolver,
    };
    let cached = Arc::new(CachingResolver::new(resolver, options.cache_capacity));
    let auditor = Arc::new(Auditor {
        expander: Expander::new(cached.clone()),
        analysis_cache: Mutex::new(HashMap::new()),
        cache_hits: AtomicU64::new(0),
        cache_misses: AtomicU64::new(0),
        use_record_cache: options.record_cache,
        limits: options.expansion,
    });

    let mut audits: Vec<DomainAudit> = stream::iter(entries.iter().cloned())
        .map(|entry| {
            let auditor = auditor.clone();
            async move { auditor.audit(entry).await }
        })
        .buffer_unordered(options.concurrency.max(1))
        .collect()
        .await;
    audits.sort_by(|a, b| a.domain.cmp(&b.domain));

    let record_cache = CacheStats {
        hits: auditor.cache_hits.load(Ordering::Relaxed),
        misses: auditor.cache_misses.load(Ordering::Relaxed),
        entries: auditor.analysis_cache.lock().len() as u64,
    };
    ScanReport {
        audits,
        dns_cache: cached.stats(),
        record_cache,
    }
}

/// Audits one domain against a resolver; the standalone entry point used
/// by the CLI and service for single-domain audits.
pub async fn audit_domain(entry: &DomainEntry, resolver: Arc<dyn Resolver>) -> DomainAudit {
    let cached = Arc::new(CachingResolver::new(resolver, 1024));
    let auditor = Auditor {
        expander: Expander::new(cached),
        analysis_cache: Mutex::new(HashMap::new()),
        cache_hits: AtomicU64::new(0),
        cache_misses: AtomicU64::new(0),
        use_record_cache: false,
        limits: ExpansionLimits::default(),
    };
    auditor.audit(entry.clone()).await
}

/// Record-derived analysis, shared between domains publishing identical
/// SPF text (unless the record implicitly references its own domain).
#[derive(Clone)]
struct RecordAnalysis {
    valid: bool,
    errors: Vec<ErrorClass>,
    expansion: ExpansionSummary,
    flags: PermissivenessFlags,
    deny_all_only: bool,
}

enum CacheKey {
    Global(String),
    PerDomain(String, String),
}

impl CacheKey {
    fn as_string(&self) -> String {
        match self {
            CacheKey::Global(raw) => format!("g\u{0}{raw}"),
            CacheKey::PerDomain(raw, domain) => format!("d\u{0}{domain}\u{0}{raw}"),
        }
    }
}

struct Auditor {
    expander: Expander<Arc<CachingResolver<Arc<dyn Resolver>>>>,
    // Single-flight per key: concurrent audits of identical records share
    // one computation, so hit counts stay deterministic.
    analysis_cache: Mutex<HashMap<String, Arc<tokio::sync::OnceCell<RecordAnalysis>>>>,
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
    use_record_cache: bool,
    limits: ExpansionLimits,
}

impl Auditor {
    fn resolver(&self) -> &Arc<CachingResolver<Arc<dyn Resolver>>> {
        self.expander.resolver()
    }

    async fn audit(&self, entry: DomainEntry) -> DomainAudit {
        let domain = crate::resolver::normalize_name(&entry.domain);
        let resolver: &dyn Resolver = self.resolver();

        let mx_answer = resolver.resolve(&DnsQuery::new(&domain, RrType::Mx)).await;
        let mx_present = matches!(&mx_answer, DnsAnswer::Records(r) if !r.is_empty());

        let dmarc = fetch_dmarc(&domain, resolver).await;

        let spf_rrt = resolver.resolve(&DnsQuery::new(&domain, RrType::Spf)).await;
        let deprecated_spf_rrt = matches!(&spf_rrt, DnsAnswer::Records(r) if !r.is_empty());

        let mut audit = DomainAudit {
            schema: crate::SCHEMA_VERSION.to_string(),
            domain: domain.clone(),
            rank: entry.rank,
            mx_present,
            spf: None,
            spf_lookup_error: None,
            dns_failed: false,
            errors: Vec::new(),
            warnings: Vec::new(),
            expansion: None,
            flags: PermissivenessFlags::default(),
            dmarc,
            deny_all_only: false,
        };
        audit.flags.deprecated_spf_rrt = deprecated_spf_rrt;

        let raw = match fetch_spf_raw(&domain, resolver).await {
            Ok(raw) => raw,
            Err(cause) => {
                audit.spf_lookup_error = Some(cause);
                match cause {
                    RecordNotFoundCause::DnsError => audit.dns_failed = true,
                    // Publishing several SPF strings or an undecodable TXT
                    // is a record error; plain absence is not.
                    RecordNotFoundCause::MultipleRecords | RecordNotFoundCause::DecodeError => {
                        audit.errors.push(ErrorClass::RecordNotFound { cause });
                    }
                    _ => {}
                }
                return audit;
            }
        };

        let analysis = self.analyze_record(&domain, &raw).await;
        audit.spf = Some(SpfInfo {
            raw,
            valid: analysis.valid,
        });
        audit.errors.extend(analysis.errors);
        audit.expansion = Some(analysis.expansion);
        let mut flags = analysis.flags;
        flags.deprecated_spf_rrt = deprecated_spf_rrt;
        audit.flags = flags;
        audit.deny_all_only = analysis.deny_all_only;
        audit
    }

    async fn analyze_record(&self, domain: &str, raw: &str) -> RecordAnalysis {
        let parsed = match parse_spf(raw, ParseMode::Lenient) {
            Ok(parsed) => parsed,
            Err(_) => {
                // Unreachable for strings selected by the version tag.
                return RecordAnalysis {
                    valid: false,
                    errors: Vec::new(),
                    expansion: ExpansionSummary::default(),
                    flags: PermissivenessFlags::default(),
                    deny_all_only: false,
                };
            }
        };

        let key = if record_is_domain_sensitive(&parsed) {
            CacheKey::PerDomain(raw.to_string(), domain.to_string())
        } else {
            CacheKey::Global(raw.to_string())
        }
        .as_string();

        if !self.use_record_cache {
            return self.compute_analysis(domain, &parsed).await;
        }

        let cell = self
            .analysis_cache
            .lock()
            .entry(key)
            .or_insert_with(|| Arc::new(tokio::sync::OnceCell::new()))
            .clone();
        let mut computed_here = false;
        let analysis = cell
            .get_or_init(|| async {
                computed_here = true;
                self.compute_analysis(domain, &parsed).await
            })
            .await
            .clone();
        if computed_here {
            self.cache_misses.fetch_add(1, Ordering::Relaxed);
        } else {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
        }
        analysis
    }

    async fn compute_analysis(&self, domain: &str, parsed: &ParsedSpf) -> RecordAnalysis {
        let errors = classify_record_errors(domain, parsed, self.resolver()).await;
        let expansion_report = self.expander.expand(domain, &self.limits).await;
        let flags = permissiveness_flags(domain, parsed, &expansion_report, self.resolver()).await;
        // A partial term list can render as a bare deny-all even though the
        // source record had more in it; only clean records qualify.
        let rendered = parsed.record.render();
        let deny_all_only =
            parsed.is_valid() && (rendered == "v=spf1 -all" || rendered == "v=spf1 ~all");
        RecordAnalysis {
            valid: parsed.is_valid(),
            errors,
            expansion: ExpansionSummary::from_report(&expansion_report),
            flags,
            deny_all_only,
        }
    }
}


/// True when analysis output depends on which domain publishes the record:
/// an `a` or `mx` mechanism without an argument resolves the current domain.
fn record_is_domain_sensitive(parsed: &ParsedSpf) -> bool {
    parsed.record.terms.iter().any(|t| {
        matches!(
            &t.kind,
            TermKind::Directive(d)
                if matches!(
                    &d.mechanism,
                    Mechanism::A { domain: None, .. } | Mechanism::Mx { domain: None, .. }
                )
        )
    })
}

/// Evaluation-independent error detection: walks the whole record tree
/// (no client IP, no first-match short-circuit) counting lookups and void
/// answers, detecting loops, and classifying syntax trouble in every
/// record visited. Each error class is reported at most once per cause.
async fn classify_record_errors(
    domain: &str,
    parsed: &ParsedSpf,
    resolver: &dyn Resolver,
) -> Vec<ErrorClass> {
    let mut walker = ErrorWalker {
        resolver,
        errors: Vec::new(),
        lookups: 0,
        voids: 0,
        budget_blown: false,
        chain: vec![domain.to_string()],
    };
    walker.collect_parse_errors(parsed);
    walker.walk_record(parsed).await;
    walker.errors
}

struct ErrorWalker<'a> {
    resolver: &'a dyn Resolver,
    errors: Vec<ErrorClass>,
    lookups: u32,
    voids: u32,
    budget_blown: bool,
    chain: Vec<String>,
}

impl<'a> ErrorWalker<'a> {
    fn push_unique(&mut self, class: ErrorClass) {
        let duplicate = self.errors.iter().any(|e| match (e, &class) {
            (ErrorClass::RecordNotFound { cause: a }, ErrorClass::RecordNotFound { cause: b }) => {
                a == b
            }
            (ErrorClass::InvalidIp { cause: a }, ErrorClass::InvalidIp { cause: b }) => a == b,
            (ErrorClass::SyntaxError { .. }, ErrorClass::SyntaxError { .. }) => true,
            (ErrorClass::IncludeLoop { .. }, ErrorClass::IncludeLoop { .. }) => true,
            (a, b) => a == b,
        });
        if !duplicate {
            self.errors.push(class);
        }
    }

    fn collect_parse_errors(&mut self, parsed: &ParsedSpf) {
        let mut syntax: Vec<SyntaxError> = Vec::new();
        for finding in &parsed.errors {
            match InvalidIpKind::from_syntax(&finding.kind) {
                Some(cause) => self.push_unique(ErrorClass::InvalidIp { cause }),
                None => syntax.push(finding.clone()),
            }
        }
        if !syntax.is_empty() {
            match self.errors.iter_mut().find_map(|e| match e {
                ErrorClass::SyntaxError { findings } => Some(findings),
                _ => None,
            }) {
                Some(findings) => findings.extend(syntax),
                None => self
                    .errors
                    .push(ErrorClass::SyntaxError { findings: syntax }),
            }
        }
    }

    /// Charges one counted term; returns false once the budget is blown,
    /// which stops further descent (evaluation could not reach it either).
    fn charge(&mut self) -> bool {
        if self.budget_blown {
            return false;
        }
        self.lookups += 1;
        if self.lookups > MAX_DNS_LOOKUPS {
            self.budget_blown = true;
            self.push_unique(ErrorClass::TooManyLookups);
            return false;
        }
        true
    }

    fn charge_void(&mut self, answer: &DnsAnswer) {
        if answer.is_void() {
            self.voids += 1;
            if self.voids == MAX_VOID_LOOKUPS + 1 {
                self.push_unique(ErrorClass::TooManyVoidLookups);
            }
        }
    }

    fn walk_record<'b>(
        &'b mut self,
        parsed: &'b ParsedSpf,
    ) -> std::pin::Pin<Box<dyn std::future::Future<Output = ()> + Send + 'b>> {
        Box::pin(async move {
            for term in &parsed.record.terms {
                let counted = term_causes_lookup(&term.kind);
                if counted && !self.charge() {
                    return;
                }
                match &term.kind {
                    TermKind::Directive(d) => match &d.mechanism {
                        Mechanism::Include { domain } => {
                            if domain.is_dynamic() {
                                continue;
                            }
                            let name = crate::resolver::normalize_name(domain.as_str());
                            self.descend(name, false).await;
                        }
                        Mechanism::A { domain, .. } => {
                            let target = domain.as_ref().map(|m| m.as_str());
                            if let Some(name) = static_name(target, &self.chain) {
                                let answer = self
                                    .resolver
                                    .resolve(&DnsQuery::new(&name, RrType::A))
                                    .await;
                                self.charge_void(&answer);
                            }
                        }
                        Mechanism::Mx { domain, .. } => {
                            let target = domain.as_ref().map(|m| m.as_str());
                            if let Some(name) = static_name(target, &self.chain) {
                                let answer = self
                                    .resolver
                                    .resolve(&DnsQuery::new(&name, RrType::Mx))
                                    .await;
                                self.charge_void(&answer);
                            }
                        }
                        Mechanism::Exists { domain } => {
                            if !domain.is_dynamic() {
                                let name = crate::resolver::normalize_name(domain.as_str());
                                let answer = self
                                    .resolver
                                    .resolve(&DnsQuery::new(&name, RrType::A))
                                    .await;
                                self.charge_void(&answer);
                            }
                        }
                        // ptr resolves the client's reverse zone, which a
                        // session-free audit cannot query.
                        Mechanism::Ptr { .. } => {}
                        Mechanism::All | Mechanism::Ip4 { .. } | Mechanism::Ip6 { .. } => {}
                    },
                    TermKind::Modifier(m) if m.name == "redirect" => {
                        if !m.value.is_dynamic() {
                            let name = crate::resolver::normalize_name(m.value.as_str());
                            self.descend(name, true).await;
                        }
                        return; // statements after a redirect are ignored
                    }
                    TermKind::Modifier(_) => {}
                }
            }
        })
    }

    async fn descend(&mut self, name: String, via_redirect: bool) {
        if let Some(pos) = self.chain.iter().position(|d| *d == name) {
            if via_redirect {
                self.push_unique(ErrorClass::RedirectLoop);
            } else {
                let depth = (self.chain.len() - 1 - pos) as u32;
                self.push_unique(ErrorClass::IncludeLoop { depth });
            }
            return;
        }

        let answer = self
            .resolver
            .resolve(&DnsQuery::new(&name, RrType::Txt))
            .await;
        self.charge_void(&answer);
        let parsed = match crate::eval::classify_spf_answer(&answer) {
            Ok(raw) => match parse_spf(&raw, ParseMode::Lenient) {
                Ok(parsed) => parsed,
                Err(_) => {
                    self.push_unique(ErrorClass::RecordNotFound {
                        cause: RecordNotFoundCause::SpfMissing,
                    });
                    return;
                }
            },
            Err(cause) => {
                self.push_unique(ErrorClass::RecordNotFound { cause });
                return;
            }
        };

        self.collect_parse_errors(&parsed);
        self.chain.push(name);
        self.walk_record(&parsed).await;
        self.chain.pop();
    }
}

fn static_name(target: Option<&str>, chain: &[String]) -> Option<String> {
    match target {
        None => chain.last().cloned(),
        Some(t) if t.contains('%') => None,
        Some(t) => Some(crate::resolver::normalize_name(t)),
    }
}
