//! `check_host` evaluation: first-match semantics, lookup budgets, loop
//! detection, and classification of every evaluation-time error.

mod macros;

pub use macros::{expand_macros, MacroError};

use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::parser::{
    parse_spf, Mechanism, ParseMode, ParsedSpf, Qualifier, SpfLookupOutcome, SpfParseError,
    SyntaxError, SyntaxErrorKind, Term, TermKind,
};
use crate::resolver::{DnsAnswer, DnsQuery, RecordData, Resolver, RrType};

/// DNS-causing terms allowed per evaluation.
pub const MAX_DNS_LOOKUPS: u32 = 10;
/// Void (NXDOMAIN / empty) answers allowed per evaluation.
pub const MAX_VOID_LOOKUPS: u32 = 2;
/// Address lookups allowed while resolving the hosts of one `mx` term.
pub const MAX_MX_HOSTS: usize = 10;
/// Default recursion bound for the standalone loop walker.
pub const DEFAULT_MAX_LOOP_DEPTH: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpfResult {
    Pass,
    Fail,
    SoftFail,
    Neutral,
    None,
    TempError,
    PermError,
}

impl From<Qualifier> for SpfResult {
    fn from(q: Qualifier) -> Self {
        match q {
            Qualifier::Pass => SpfResult::Pass,
            Qualifier::Fail => SpfResult::Fail,
            Qualifier::SoftFail => SpfResult::SoftFail,
            Qualifier::Neutral => SpfResult::Neutral,
        }
    }
}

/// Sub-causes of a failed SPF record fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordNotFoundCause {
    /// TXT answer present, but no string starts with the version tag.
    SpfMissing,
    /// NXDOMAIN: the queried name does not exist.
    NotExisting,
    /// More than one SPF string in the TXT answer.
    MultipleRecords,
    /// The name exists but the TXT answer is empty.
    EmptyAnswer,
    /// Transient DNS trouble (timeout or server failure).
    DnsError,
    LabelTooLong,
    NameTooLong,
    DecodeError,
}

impl RecordNotFoundCause {
    pub fn name(&self) -> &'static str {
        match self {
            RecordNotFoundCause::SpfMissing => "spf_missing",
            RecordNotFoundCause::NotExisting => "not_existing",
            RecordNotFoundCause::MultipleRecords => "multiple_records",
            RecordNotFoundCause::EmptyAnswer => "empty_answer",
            RecordNotFoundCause::DnsError => "dns_error",
            RecordNotFoundCause::LabelTooLong => "label_too_long",
            RecordNotFoundCause::NameTooLong => "name_too_long",
            RecordNotFoundCause::DecodeError => "decode_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidIpKind {
    NoAddress,
    WrongOctets,
    DomainArg,
    WrongVersion,
}

impl InvalidIpKind {
    pub fn from_syntax(kind: &SyntaxErrorKind) -> Option<Self> {
        match kind {
            SyntaxErrorKind::InvalidIpNoAddress => Some(InvalidIpKind::NoAddress),
            SyntaxErrorKind::InvalidIpWrongOctets => Some(InvalidIpKind::WrongOctets),
            SyntaxErrorKind::InvalidIpDomainArg => Some(InvalidIpKind::DomainArg),
            SyntaxErrorKind::InvalidIpWrongVersion => Some(InvalidIpKind::WrongVersion),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InvalidIpKind::NoAddress => "no_address",
            InvalidIpKind::WrongOctets => "wrong_octets",
            InvalidIpKind::DomainArg => "domain_arg",
            InvalidIpKind::WrongVersion => "wrong_version",
        }
    }
}

/// The audit taxonomy of evaluation errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ErrorClass {
    RecordNotFound {
        cause: RecordNotFoundCause,
    },
    TooManyLookups,
    TooManyVoidLookups,
    SyntaxError {
        findings: Vec<SyntaxError>,
    },
    /// Depth 0 is a direct self-inclusion.
    IncludeLoop {
        depth: u32,
    },
    RedirectLoop,
    InvalidIp {
        cause: InvalidIpKind,
    },
}

impl ErrorClass {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorClass::RecordNotFound { .. } => "record_not_found",
            ErrorClass::TooManyLookups => "too_many_lookups",
            ErrorClass::TooManyVoidLookups => "too_many_void_lookups",
            ErrorClass::SyntaxError { .. } => "syntax_error",
            ErrorClass::IncludeLoop { .. } => "include_loop",
            ErrorClass::RedirectLoop => "redirect_loop",
            ErrorClass::InvalidIp { .. } => "invalid_ip",
        }
    }
}

/// The connection under check: client IP plus the MAIL FROM identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInput {
    pub client_ip: IpAddr,
    pub sender: String,
    pub helo: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sender '{0}' has no usable domain")]
pub struct InvalidSender(pub String);

impl SessionInput {
    /// `sender` may be a full address or a bare domain; a bare domain gets
    /// the conventional `postmaster` local part.
    pub fn new(client_ip: IpAddr, sender: &str) -> Result<Self, InvalidSender> {
        let domain = match sender.rsplit_once('@') {
            Some((_, d)) => d,
            None => sender,
        };
        if domain.is_empty() {
            return Err(InvalidSender(sender.to_string()));
        }
        Ok(SessionInput {
            client_ip,
            sender: sender.to_string(),
            helo: None,
        })
    }

    pub fn with_helo(mut self, helo: &str) -> Self {
        self.helo = Some(helo.to_string());
        self
    }

    pub fn sender(&self) -> &str {
        &self.sender
    }

    pub fn sender_domain(&self) -> &str {
        match self.sender.rsplit_once('@') {
            Some((_, d)) => d,
            None => &self.sender,
        }
    }

    pub fn local_part(&self) -> &str {
        match self.sender.rsplit_once('@') {
            Some((l, _)) if !l.is_empty() => l,
            _ => "postmaster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitedTerm {
    pub domain: String,
    pub term: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalTrace {
    pub lookups_used: u32,
    pub void_lookups_used: u32,
    /// (domain, term) pairs in evaluation order.
    pub visited: Vec<VisitedTerm>,
    pub error: Option<ErrorClass>,
    pub warnings: Vec<String>,
}

impl EvalTrace {
    /// Charges a term against the 10-lookup budget. Only the six
    /// DNS-causing term kinds count; the 11th counted term errors.
    pub fn budget_check(&mut self, term: &TermKind) -> Result<(), ErrorClass> {
        if !term_causes_lookup(term) {
            return Ok(());
        }
        self.lookups_used += 1;
        if self.lookups_used > MAX_DNS_LOOKUPS {
            Err(ErrorClass::TooManyLookups)
        } else {
            Ok(())
        }
    }

    /// Charges a counted lookup's answer against the 2-void-lookup budget.
    /// Two void answers complete; the third errors.
    pub fn void_check(&mut self, answer: &DnsAnswer) -> Result<(), ErrorClass> {
        if !answer.is_void() {
            return Ok(());
        }
        self.void_lookups_used += 1;
        if self.void_lookups_used > MAX_VOID_LOOKUPS {
            Err(ErrorClass::TooManyVoidLookups)
        } else {
            Ok(())
        }
    }

    fn visit(&mut self, domain: &str, term: &Term) {
        self.visited.push(VisitedTerm {
            domain: domain.to_string(),
            term: term.render(),
        });
    }
}

/// True for the term kinds that cause a DNS query: the `include`, `a`,
/// `mx`, `ptr` and `exists` mechanisms, and the `redirect` modifier.
pub fn term_causes_lookup(term: &TermKind) -> bool {
    match term {
        TermKind::Directive(d) => d.mechanism.counts_against_budget(),
        TermKind::Modifier(m) => m.name.eq_ignore_ascii_case("redirect"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedTerm {
    /// Domain owning the record in which the match fired.
    pub domain: String,
    pub term_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub result: SpfResult,
    pub matched: Option<MatchedTerm>,
    pub trace: EvalTrace,
}

/// Fetches the SPF record of `domain` and classifies every failure mode
/// into its record-not-found sub-cause.
pub async fn fetch_spf_raw(
    domain: &str,
    resolver: &dyn Resolver,
) -> Result<String, RecordNotFoundCause> {
    let answer = resolver.resolve(&DnsQuery::new(domain, RrType::Txt)).await;
    classify_spf_answer(&answer)
}

/// Maps a TXT answer onto either the single SPF payload or the
/// record-not-found sub-cause.
pub fn classify_spf_answer(answer: &DnsAnswer) -> Result<String, RecordNotFoundCause> {
    match answer {
        DnsAnswer::Records(_) => match crate::parser::classify_txt_set(&answer.txt_strings()) {
            SpfLookupOutcome::Found { raw } => Ok(raw),
            SpfLookupOutcome::Missing => Err(RecordNotFoundCause::SpfMissing),
            SpfLookupOutcome::Multiple { .. } => Err(RecordNotFoundCause::MultipleRecords),
        },
        DnsAnswer::NxDomain => Err(RecordNotFoundCause::NotExisting),
        DnsAnswer::Empty => Err(RecordNotFoundCause::EmptyAnswer),
        DnsAnswer::Timeout | DnsAnswer::ServFail => Err(RecordNotFoundCause::DnsError),
        DnsAnswer::LabelTooLong => Err(RecordNotFoundCause::LabelTooLong),
        DnsAnswer::NameTooLong => Err(RecordNotFoundCause::NameTooLong),
        DnsAnswer::DecodeError => Err(RecordNotFoundCause::DecodeError),
    }
}

/// Fetches and leniently parses; `Err` carries the record-not-found cause.
pub async fn fetch_and_classify(
    domain: &str,
    resolver: &dyn Resolver,
) -> Result<ParsedSpf, RecordNotFoundCause> {
    let raw = fetch_spf_raw(domain, resolver).await?;
    match parse_spf(&raw, ParseMode::Lenient) {
        Ok(parsed) => Ok(parsed),
        // classify_txt_set only returns strings with the version tag.
        Err(SpfParseError::NotSpf) | Err(SpfParseError::Syntax(_)) => {
            Err(RecordNotFoundCause::SpfMissing)
        }
    }
}

/// Evaluates the sender policy of `domain` for one session.
///
/// Terms run left to right and the first matching directive's qualifier is
/// the result; `include` matches only on a sub-evaluation Pass; `redirect`
/// replaces the evaluation entirely; no match and no redirect is Neutral;
/// a missing record is None.
pub async fn check_host(
    input: &SessionInput,
    domain: &str,
    resolver: &dyn Resolver,
) -> CheckOutcome {
    let domain = crate::resolver::normalize_name(domain);
    let mut ev = Evaluator {
        input,
        resolver,
        trace: EvalTrace::default(),
        chain: vec![domain.clone()],
    };

    // The initial record fetch is not a counted lookup.
    let parsed = match fetch_spf_raw(&domain, resolver).await {
        Ok(raw) => match parse_spf(&raw, ParseMode::Lenient) {
            Ok(parsed) => parsed,
            Err(_) => return ev.finish(SpfResult::None, None),
        },
        Err(RecordNotFoundCause::DnsError) => return ev.finish(SpfResult::TempError, None),
        Err(RecordNotFoundCause::MultipleRecords) => {
            ev.trace.error = Some(ErrorClass::RecordNotFound {
                cause: RecordNotFoundCause::MultipleRecords,
            });
            return ev.finish(SpfResult::PermError, None);
        }
        // Missing record, non-existing name or a malformed query name all
        // yield None at the top level.
        Err(_) => return ev.finish(SpfResult::None, None),
    };

    match ev.eval_record(&domain, &parsed).await {
        Ok((result, matched)) => ev.finish(result, matched),
        Err(Interrupt::Temp) => ev.finish(SpfResult::TempError, None),
        Err(Interrupt::Perm(class)) => {
            ev.trace.error = Some(class);
            ev.finish(SpfResult::PermError, None)
        }
    }
}

enum Interrupt {
    Temp,
    Perm(ErrorClass),
}

impl From<ErrorClass> for Interrupt {
    fn from(class: ErrorClass) -> Self {
        Interrupt::Perm(class)
    }
}

fn not_found_interrupt(cause: RecordNotFoundCause) -> Interrupt {
    match cause {
        RecordNotFoundCause::DnsError => Interrupt::Temp,
        cause => Interrupt::Perm(ErrorClass::RecordNotFound { cause }),
    }
}

/// First finding wins: a leading invalid-IP finding classifies the record
/// as InvalidIp, anything else as SyntaxError carrying all findings.
fn classify_parse_errors(parsed: &ParsedSpf) -> Option<ErrorClass> {
    let first = parsed.errors.first()?;
    match InvalidIpKind::from_syntax(&first.kind) {
        Some(cause) => Some(ErrorClass::InvalidIp { cause }),
        None => Some(ErrorClass::SyntaxError {
            findings: parsed.errors.clone(),
        }),
    }
}

struct Evaluator<'a> {
    input: &'a SessionInput,
    resolver: &'a dyn Resolver,
    trace: EvalTrace,
    /// Domains on the active include/redirect chain, outermost first.
    chain: Vec<String>,
}

impl<'a> Evaluator<'a> {
    fn finish(self, result: SpfResult, matched: Option<MatchedTerm>) -> CheckOutcome {
        CheckOutcome {
            result,
            matched,
            trace: self.trace,
        }
    }

    async fn eval_record(
        &mut self,
        domain: &str,
        parsed: &ParsedSpf,
    ) -> Result<(SpfResult, Option<MatchedTerm>), Interrupt> {
        if let Some(class) = classify_parse_errors(parsed) {
            return Err(class.into());
        }

        let mut redirect: Option<&Term> = None;
        for (index, term) in parsed.record.terms.iter().enumerate() {
            let directive = match &term.kind {
                TermKind::Directive(d) => d,
                TermKind::Modifier(m) if m.name == "redirect" => {
                    // Statements after a redirect are ignored.
                    redirect = Some(term);
                    break;
                }
                TermKind::Modifier(_) => continue, // exp and unknown modifiers
            };

            self.trace.budget_check(&term.kind)?;
            self.trace.visit(domain, term);

            if self.matches(domain, &directive.mechanism).await? {
                return Ok((
                    directive.qualifier.into(),
                    Some(MatchedTerm {
                        domain: domain.to_string(),
                        term_index: index,
                    }),
                ));
            }
        }

        if let Some(term) = redirect {
            let modifier = term.modifier().expect("redirect is a modifier");
            self.trace.budget_check(&term.kind)?;
            self.trace.visit(domain, term);

            let target = self.expand(modifier.value.as_str(), domain)?;
            if self.chain.contains(&target) {
                return Err(ErrorClass::RedirectLoop.into());
            }

            let answer = self
                .resolver
                .resolve(&DnsQuery::new(&target, RrType::Txt))
                .await;
            self.trace.void_check(&answer)?;
            // A redirect target without a usable record is permerror, not
            // None.
            let raw = classify_spf_answer(&answer).map_err(not_found_interrupt)?;
            let parsed = parse_spf(&raw, ParseMode::Lenient)
                .map_err(|_| not_found_interrupt(RecordNotFoundCause::SpfMissing))?;

            self.chain.push(target.clone());
            return Box::pin(self.eval_record(&target, &parsed)).await;
        }

        Ok((SpfResult::Neutral, None))
    }

    async fn matches(&mut self, domain: &str, mechanism: &Mechanism) -> Result<bool, Interrupt> {
        match mechanism {
            Mechanism::All => Ok(true),
            Mechanism::Ip4 { addr, prefix } => Ok(match self.input.client_ip {
                IpAddr::V4(client) => ipv4_in_cidr(client, *addr, *prefix),
                IpAddr::V6(_) => false,
            }),
            Mechanism::Ip6 { addr, prefix } => Ok(match self.input.client_ip {
                IpAddr::V6(client) => ipv6_in_cidr(client, *addr, *prefix),
                IpAddr::V4(_) => false,
            }),
            Mechanism::A {
                domain: target,
                cidr4,
                cidr6,
            } => {
                let name = self.target_name(target.as_ref().map(|m| m.as_str()), domain)?;
                let answer = self.counted_address_lookup(&name).await?;
                Ok(self.any_address_matches(&answer, *cidr4, *cidr6))
            }
            Mechanism::Mx {
                domain: target,
                cidr4,
                cidr6,
            } => {
                let name = self.target_name(target.as_ref().map(|m| m.as_str()), domain)?;
                let answer = self
                    .resolver
                    .resolve(&DnsQuery::new(&name, RrType::Mx))
                    .await;
                self.trace.void_check(&answer)?;
                if answer.is_transient() {
                    return Err(Interrupt::Temp);
                }
                let mut hosts: Vec<(u16, String)> = match &answer {
                    DnsAnswer::Records(records) => records
                        .iter()
                        .filter_map(|r| match r {
                            RecordData::Mx {
                                preference,
                                exchange,
                            } => Some((*preference, exchange.clone())),
                            _ => None,
                        })
                        .collect(),
                    _ => Vec::new(),
                };
                hosts.sort();
                if hosts.len() > MAX_MX_HOSTS {
                    self.trace
                        .warnings
                        .push(format!("mx term for {name} lists {} hosts", hosts.len()));
                    return Err(ErrorClass::TooManyLookups.into());
                }
                for (_, host) in hosts {
                    // Per-host address lookups sit under the mx term's own
                    // cap; they are neither budget- nor void-counted.
                    let answer = self.address_lookup(&host).await?;
                    if self.any_address_matches(&answer, *cidr4, *cidr6) {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Mechanism::Ptr { domain: target } => {
                self.trace
                    .warnings
                    .push("ptr mechanism is deprecated and slow".to_string());
                let name = self.target_name(target.as_ref().map(|m| m.as_str()), domain)?;
                let reverse = reverse_name(self.input.client_ip);
                let answer = self
                    .resolver
                    .resolve(&DnsQuery::new(&reverse, RrType::Ptr))
                    .await;
                self.trace.void_check(&answer)?;
                if answer.is_transient() {
                    return Err(Interrupt::Temp);
                }
                let ptrs: Vec<String> = match &answer {
                    DnsAnswer::Records(records) => records
                        .iter()
                        .filter_map(|r| match r {
                            RecordData::Ptr(p) => Some(p.clone()),
                            _ => None,
                        })
                        .take(MAX_MX_HOSTS)
                        .collect(),
                    _ => Vec::new(),
                };
                for ptr in ptrs {
                    if !(ptr == name || ptr.ends_with(&format!(".{name}"))) {
                        continue;
                    }
                    // Forward-confirm the reverse name.
                    let answer = self.address_lookup(&ptr).await?;
                    if self.any_address_matches(&answer, None, None) {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Mechanism::Exists { domain: target } => {
                let name = self.expand(target.as_str(), domain)?;
                // exists always queries A, regardless of client family.
                let answer = self
                    .resolver
                    .resolve(&DnsQuery::new(&name, RrType::A))
                    .await;
                self.trace.void_check(&answer)?;
                if answer.is_transient() {
                    return Err(Interrupt::Temp);
                }
                Ok(matches!(&answer, DnsAnswer::Records(r) if !r.is_empty()))
            }
            Mechanism::Include { domain: target } => {
                let name = self.expand(target.as_str(), domain)?;
                if let Some(pos) = self.chain.iter().position(|d| *d == name) {
                    let depth = (self.chain.len() - 1 - pos) as u32;
                    return Err(ErrorClass::IncludeLoop { depth }.into());
                }

                let answer = self
                    .resolver
                    .resolve(&DnsQuery::new(&name, RrType::Txt))
                    .await;
                self.trace.void_check(&answer)?;
                // An include target without a record is permerror for the
                // whole evaluation.
                let raw = classify_spf_answer(&answer).map_err(not_found_interrupt)?;
                let parsed = parse_spf(&raw, ParseMode::Lenient)
                    .map_err(|_| not_found_interrupt(RecordNotFoundCause::SpfMissing))?;

                self.chain.push(name.clone());
                let (result, _) = Box::pin(self.eval_record(&name, &parsed)).await?;
                self.chain.pop();

                // Only an explicit Pass inside the include is a match;
                // Fail/SoftFail/Neutral fall through to the next term.
                Ok(result == SpfResult::Pass)
            }
        }
    }

    /// Counted, void-checked address lookup for the `a` mechanism.
    async fn counted_address_lookup(&mut self, name: &str) -> Result<DnsAnswer, Interrupt> {
        let answer = self.address_lookup(name).await?;
        self.trace.void_check(&answer)?;
        Ok(answer)
    }

    /// Address lookup in the client's family; transient answers abort.
    async fn address_lookup(&mut self, name: &str) -> Result<DnsAnswer, Interrupt> {
        let rrtype = match self.input.client_ip {
            IpAddr::V4(_) => RrType::A,
            IpAddr::V6(_) => RrType::Aaaa,
        };
        let answer = self.resolver.resolve(&DnsQuery::new(name, rrtype)).await;
        if answer.is_transient() {
            return Err(Interrupt::Temp);
        }
        Ok(answer)
    }

    fn any_address_matches(
        &self,
        answer: &DnsAnswer,
        cidr4: Option<u8>,
        cidr6: Option<u8>,
    ) -> bool {
        let DnsAnswer::Records(records) = answer else {
            return false;
        };
        records.iter().any(|r| match (r, self.input.client_ip) {
            (RecordData::A(a), IpAddr::V4(client)) => ipv4_in_cidr(client, *a, cidr4.unwrap_or(32)),
            (RecordData::Aaaa(a), IpAddr::V6(client)) => {
                ipv6_in_cidr(client, *a, cidr6.unwrap_or(128))
            }
            _ => false,
        })
    }

    fn target_name(
        &mut self,
        target: Option<&str>,
        current_domain: &str,
    ) -> Result<String, Interrupt> {
        match target {
            Some(t) => self.expand(t, current_domain),
            None => Ok(current_domain.to_string()),
        }
    }

    fn expand(&mut self, template: &str, domain: &str) -> Result<String, Interrupt> {
        if !template.contains('%') {
            return Ok(crate::resolver::normalize_name(template));
        }
        match expand_macros(template, self.input, domain) {
            Ok(name) => Ok(crate::resolver::normalize_name(&name)),
            Err(err) => Err(ErrorClass::SyntaxError {
                findings: vec![SyntaxError {
                    kind: SyntaxErrorKind::Other {
                        detail: err.to_string(),
                    },
                    span: crate::parser::Span::new(0, 0),
                    token: template.to_string(),
                }],
            }
            .into()),
        }
    }
}

pub fn ipv4_in_cidr(client: std::net::Ipv4Addr, network: std::net::Ipv4Addr, prefix: u8) -> bool {
    crate::ipset::Cidr4::new(network, prefix.min(32)).contains(client)
}

pub fn ipv6_in_cidr(client: std::net::Ipv6Addr, network: std::net::Ipv6Addr, prefix: u8) -> bool {
    let prefix = prefix.min(128);
    if prefix == 0 {
        return true;
    }
    let mask = u128::MAX << (128 - prefix);
    (u128::from(client) & mask) == (u128::from(network) & mask)
}

/// The PTR query name for a client address.
pub fn reverse_name(ip: IpAddr) -> String {
    match ip {
        IpAddr::V4(v4) => {
            let o = v4.octets();
            format!("{}.{}.{}.{}.in-addr.arpa", o[3], o[2], o[1], o[0])
        }
        IpAddr::V6(v6) => {
            let mut labels = Vec::with_capacity(32);
            for byte in v6.octets().iter().rev() {
                labels.push(format!("{:x}", byte & 0xf));
                labels.push(format!("{:x}", byte >> 4));
            }
            format!("{}.ip6.arpa", labels.join("."))
        }
    }
}

/// Outcome of the standalone structural loop walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "loop", rename_all = "snake_case")]
pub enum LoopCheck {
    Clean,
    IncludeLoop { depth: u32 },
    RedirectLoop,
}

/// Walks every include/redirect edge reachable from `domain` (no IP
/// matching, no lookup budget) and reports the first loop found. Unlike
/// evaluation, this explores all branches.
pub async fn detect_loops(domain: &str, resolver: &dyn Resolver, max_depth: u32) -> LoopCheck {
    let root = crate::resolver::normalize_name(domain);
    let mut chain = vec![root.clone()];
    walk_loops(root, resolver, max_depth, &mut chain).await
}

fn walk_loops<'a>(
    domain: String,
    resolver: &'a dyn Resolver,
    budget: u32,
    chain: &'a mut Vec<String>,
) -> std::pin::Pin<Box<dyn std::future::Future<Output = LoopCheck> + Send + 'a>> {
    Box::pin(async move {
        if budget == 0 {
            return LoopCheck::Clean;
        }
        let Ok(parsed) = fetch_and_classify(&domain, resolver).await else {
            return LoopCheck::Clean;
        };

        for term in &parsed.record.terms {
            let (target, via_redirect) = match &term.kind {
                TermKind::Directive(d) => match &d.mechanism {
                    Mechanism::Include { domain } => (domain, false),
                    _ => continue,
                },
                TermKind::Modifier(m) if m.name == "redirect" => (&m.value, true),
                TermKind::Modifier(_) => continue,
            };
            if target.is_dynamic() {
                continue; // session-dependent, not walkable statically
            }
            let name = crate::resolver::normalize_name(target.as_str());
            if let Some(pos) = chain.iter().position(|d| *d == name) {
                if via_redirect {
                    return LoopCheck::RedirectLoop;
                }
                return LoopCheck::IncludeLoop {
                    depth: (chain.len() - 1 - pos) as u32,
                };
            }
            chain.push(name.clone());
            let found = walk_loops(name, resolver, budget - 1, chain).await;
            chain.pop();
            if found != LoopCheck::Clean {
                return found;
            }
        }
        LoopCheck::Clean
    })
}

#[cfg(test)]
mod tests;
