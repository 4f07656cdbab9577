//! SPF record parsing.
//!
//! Strict mode accepts only records that are fully valid under the RFC 7208
//! grammar. Lenient mode never aborts: it returns a best-effort partial term
//! list together with classified [`SyntaxError`]s so that audits can report
//! *why* a record is broken rather than just that it is.

use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

pub const VERSION_TAG: &str = "v=spf1";

/// Byte range into the raw record text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn slice<'a>(&self, raw: &'a str) -> &'a str {
        &raw[self.start..self.end]
    }
}

/// Result qualifier on a directive. An absent qualifier parses as `Pass`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualifier {
    Pass,
    Fail,
    SoftFail,
    Neutral,
}

impl Qualifier {
    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Qualifier::Pass),
            '-' => Some(Qualifier::Fail),
            '~' => Some(Qualifier::SoftFail),
            '?' => Some(Qualifier::Neutral),
            _ => None,
        }
    }

    pub fn symbol(&self) -> char {
        match self {
            Qualifier::Pass => '+',
            Qualifier::Fail => '-',
            Qualifier::SoftFail => '~',
            Qualifier::Neutral => '?',
        }
    }
}

/// A domain-spec argument, stored verbatim. Macro escapes (`%{..}`) are
/// validated for balance at parse time and expanded only during evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MacroString(String);

impl MacroString {
    pub fn new(s: impl Into<String>) -> Self {
        MacroString(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the argument needs macro expansion before use.
    pub fn is_dynamic(&self) -> bool {
        self.0.contains('%')
    }

    /// Checks `%` escape balance: `%` must introduce `%{..}`, `%%`, `%_`
    /// or `%-`, and every `%{` must close.
    pub fn is_balanced(&self) -> bool {
        let mut chars = self.0.chars();
        while let Some(c) = chars.next() {
            if c != '%' {
                continue;
            }
            match chars.next() {
                Some('%') | Some('_') | Some('-') => {}
                Some('{') => {
                    if !chars.by_ref().any(|c| c == '}') {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }
}

impl fmt::Display for MacroString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mech", rename_all = "snake_case")]
pub enum Mechanism {
    All,
    Include {
        domain: MacroString,
    },
    A {
        domain: Option<MacroString>,
        cidr4: Option<u8>,
        cidr6: Option<u8>,
    },
    Mx {
        domain: Option<MacroString>,
        cidr4: Option<u8>,
        cidr6: Option<u8>,
    },
    Ptr {
        domain: Option<MacroString>,
    },
    Ip4 {
        addr: Ipv4Addr,
        prefix: u8,
    },
    Ip6 {
        addr: Ipv6Addr,
        prefix: u8,
    },
    Exists {
        domain: MacroString,
    },
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::All => "all",
            Mechanism::Include { .. } => "include",
            Mechanism::A { .. } => "a",
            Mechanism::Mx { .. } => "mx",
            Mechanism::Ptr { .. } => "ptr",
            Mechanism::Ip4 { .. } => "ip4",
            Mechanism::Ip6 { .. } => "ip6",
            Mechanism::Exists { .. } => "exists",
        }
    }

    /// Whether evaluating this mechanism causes a DNS query that counts
    /// against the 10-lookup budget.
    pub fn counts_against_budget(&self) -> bool {
        matches!(
            self,
            Mechanism::Include { .. }
                | Mechanism::A { .. }
                | Mechanism::Mx { .. }
                | Mechanism::Ptr { .. }
                | Mechanism::Exists { .. }
        )
    }

    fn render(&self) -> String {
        fn dual_cidr(base: &mut String, cidr4: Option<u8>, cidr6: Option<u8>) {
            if let Some(c4) = cidr4 {
                base.push('/');
                base.push_str(&c4.to_string());
            }
            if let Some(c6) = cidr6 {
                base.push_str("//");
                base.push_str(&c6.to_string());
            }
        }

        match self {
            Mechanism::All => "all".to_string(),
            Mechanism::Include { domain } => format!("include:{domain}"),
            Mechanism::A {
                domain,
                cidr4,
                cidr6,
            }
            | Mechanism::Mx {
                domain,
                cidr4,
                cidr6,
            } => {
                let mut out = self.name().to_string();
                if let Some(d) = domain {
                    out.push(':');
                    out.push_str(d.as_str());
                }
                dual_cidr(&mut out, *cidr4, *cidr6);
                out
            }
            Mechanism::Ptr { domain } => match domain {
                Some(d) => format!("ptr:{d}"),
                None => "ptr".to_string(),
            },
            Mechanism::Ip4 { addr, prefix } => {
                if *prefix == 32 {
                    format!("ip4:{addr}")
                } else {
                    format!("ip4:{addr}/{prefix}")
                }
            }
            Mechanism::Ip6 { addr, prefix } => {
                if *prefix == 128 {
                    format!("ip6:{addr}")
                } else {
                    format!("ip6:{addr}/{prefix}")
                }
            }
            Mechanism::Exists { domain } => format!("exists:{domain}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub qualifier: Qualifier,
    /// True when the qualifier was written out in the source text.
    pub explicit_qualifier: bool,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modifier {
    pub name: String,
    pub value: MacroString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    Directive(Directive),
    Modifier(Modifier),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub kind: TermKind,
    pub span: Span,
}

impl Term {
    pub fn directive(&self) -> Option<&Directive> {
        match &self.kind {
            TermKind::Directive(d) => Some(d),
            TermKind::Modifier(_) => None,
        }
    }

    pub fn modifier(&self) -> Option<&Modifier> {
        match &self.kind {
            TermKind::Modifier(m) => Some(m),
            TermKind::Directive(_) => None,
        }
    }

    pub fn render(&self) -> String {
        match &self.kind {
            TermKind::Directive(d) => {
                if d.explicit_qualifier || d.qualifier != Qualifier::Pass {
                    format!("{}{}", d.qualifier.symbol(), d.mechanism.render())
                } else {
                    d.mechanism.render()
                }
            }
            TermKind::Modifier(m) => format!("{}={}", m.name, m.value),
        }
    }
}

/// A parsed SPF record: the version tag plus terms in source order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpfRecord {
    pub raw: String,
    pub terms: Vec<Term>,
}

impl SpfRecord {
    pub fn directives(&self) -> impl Iterator<Item = (usize, &Directive)> {
        self.terms
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.directive().map(|d| (i, d)))
    }

    pub fn modifier(&self, name: &str) -> Option<&Modifier> {
        self.terms
            .iter()
            .filter_map(|t| t.modifier())
            .find(|m| m.name.eq_ignore_ascii_case(name))
    }

    pub fn redirect(&self) -> Option<&Modifier> {
        self.modifier("redirect")
    }

    /// Canonical single-space-separated text form.
    pub fn render(&self) -> String {
        let mut out = String::from(VERSION_TAG);
        for term in &self.terms {
            out.push(' ');
            out.push_str(&term.render());
        }
        out
    }

    /// Structural term-list equality, ignoring spans and raw text.
    pub fn same_terms(&self, other: &SpfRecord) -> bool {
        self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(a, b)| a.kind == b.kind)
    }
}

/// Taxonomy of SPF syntax problems seen in published records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "subtype", rename_all = "snake_case")]
pub enum SyntaxErrorKind {
    /// `ipv4:` written instead of `ip4:`.
    MisspelledIp4,
    /// `ipv6:` written instead of `ip6:`.
    MisspelledIp6,
    /// Bare `ip:` used as a mechanism name.
    BareIpMechanism,
    /// A site-verification token concatenated into the SPF string.
    SiteVerificationConcat,
    /// More than one `v=spf1` tag in a single string.
    MultipleVersionTags,
    /// Whitespace between `:` (or `=`) and the argument.
    WhitespaceAfterColon,
    /// `ip4`/`ip6` with no address at all.
    InvalidIpNoAddress,
    /// Wrong number of octets (or otherwise malformed numeric address).
    InvalidIpWrongOctets,
    /// A domain name where an IP address is required.
    InvalidIpDomainArg,
    /// An IPv6 address in `ip4` or vice versa.
    InvalidIpWrongVersion,
    /// Unrecognized term, e.g. the `-al` / `-all;` typos.
    UnknownTerm,
    /// Terms after `all`; parsed but ignored during evaluation.
    TrailingGarbageAfterAll,
    Other {
        detail: String,
    },
}

impl SyntaxErrorKind {
    /// Stable key used in histograms and reports.
    pub fn subtype_name(&self) -> &'static str {
        match self {
            SyntaxErrorKind::MisspelledIp4 => "misspelled_ip4",
            SyntaxErrorKind::MisspelledIp6 => "misspelled_ip6",
            SyntaxErrorKind::BareIpMechanism => "bare_ip_mechanism",
            SyntaxErrorKind::SiteVerificationConcat => "site_verification_concat",
            SyntaxErrorKind::MultipleVersionTags => "multiple_version_tags",
            SyntaxErrorKind::WhitespaceAfterColon => "whitespace_after_colon",
            SyntaxErrorKind::InvalidIpNoAddress => "invalid_ip_no_address",
            SyntaxErrorKind::InvalidIpWrongOctets => "invalid_ip_wrong_octets",
            SyntaxErrorKind::InvalidIpDomainArg => "invalid_ip_domain_arg",
            SyntaxErrorKind::InvalidIpWrongVersion => "invalid_ip_wrong_version",
            SyntaxErrorKind::UnknownTerm => "unknown_term",
            SyntaxErrorKind::TrailingGarbageAfterAll => "trailing_garbage_after_all",
            SyntaxErrorKind::Other { .. } => "other",
        }
    }

    pub fn is_invalid_ip(&self) -> bool {
        matches!(
            self,
            SyntaxErrorKind::InvalidIpNoAddress
                | SyntaxErrorKind::InvalidIpWrongOctets
                | SyntaxErrorKind::InvalidIpDomainArg
                | SyntaxErrorKind::InvalidIpWrongVersion
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxError {
    #[serde(flatten)]
    pub kind: SyntaxErrorKind,
    pub span: Span,
    /// The offending source text, for reports.
    pub token: String,
}

impl SyntaxError {
    fn new(kind: SyntaxErrorKind, span: Span, raw: &str) -> Self {
        SyntaxError {
            kind,
            span,
            token: span.slice(raw).to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    Strict,
    Lenient,
}

/// Lenient parse output: a best-effort record plus everything wrong with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSpf {
    pub record: SpfRecord,
    /// Empty iff the record is fully valid.
    pub errors: Vec<SyntaxError>,
    /// Warning-only findings (terms after `all`).
    pub warnings: Vec<SyntaxError>,
}

impl ParsedSpf {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpfParseError {
    /// The payload does not start with the version tag; this is "no SPF
    /// record", not a syntax error.
    #[error("not an SPF record")]
    NotSpf,
    /// Strict-mode rejection with the classified findings.
    #[error("invalid SPF syntax ({} finding(s))", .0.len())]
    Syntax(Vec<SyntaxError>),
}

/// Outcome of inspecting the full TXT answer set of one name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SpfLookupOutcome {
    Found { raw: String },
    Missing,
    Multiple { count: usize },
}

/// Picks the SPF string out of a TXT answer set.
///
/// Exactly one string starting with the version tag is `Found`; two or more
/// are `Multiple`; none is `Missing`.
pub fn classify_txt_set(txt_records: &[String]) -> SpfLookupOutcome {
    let mut found: Vec<&String> = txt_records
        .iter()
        .filter(|r| starts_with_version_tag(r))
        .collect();
    match found.len() {
        0 => SpfLookupOutcome::Missing,
        1 => SpfLookupOutcome::Found {
            raw: found.remove(0).clone(),
        },
        n => SpfLookupOutcome::Multiple { count: n },
    }
}

/// True iff `raw` begins with `v=spf1` (case-insensitive) followed by
/// whitespace or end of string.
pub fn starts_with_version_tag(raw: &str) -> bool {
    let Some(head) = raw.get(..VERSION_TAG.len()) else {
        return false;
    };
    if !head.eq_ignore_ascii_case(VERSION_TAG) {
        return false;
    }
    raw[VERSION_TAG.len()..]
        .chars()
        .next()
        .is_none_or(|c| c.is_ascii_whitespace())
}

/// Flags angle-bracketed markup (`<script>`, `</b>`, ...) smuggled into a
/// TXT payload. Detection only; parsing is never altered.
pub fn detect_embedded_markup(raw: &str) -> bool {
    let bytes = raw.as_bytes();
    let mut i = 0;
    while let Some(off) = raw[i..].find('<') {
        let start = i + off;
        let mut j = start + 1;
        if j < bytes.len() && bytes[j] == b'/' {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_alphabetic()
            && raw[j..].contains('>') {
                return true;
            }
        i = start + 1;
    }
    false
}

/// Parses one SPF TXT payload.
///
/// Strict mode returns `Err(Syntax)` on any classified finding; lenient mode
/// always returns a [`ParsedSpf`] carrying the partial term list and the
/// findings. Both modes return `Err(NotSpf)` when the version tag is absent.
pub fn parse_spf(raw: &str, mode: ParseMode) -> Result<ParsedSpf, SpfParseError> {
    if !starts_with_version_tag(raw) {
        return Err(SpfParseError::NotSpf);
    }

    let mut parser = Parser::new(raw);
    parser.run();

    let parsed = ParsedSpf {
        record: SpfRecord {
            raw: raw.to_string(),
            terms: parser.terms,
        },
        errors: parser.errors,
        warnings: parser.warnings,
    };

    match mode {
        ParseMode::Lenient => Ok(parsed),
        ParseMode::Strict => {
            let strict_errors: Vec<SyntaxError> = parsed
                .errors
                .iter()
                .filter(|e| strict_rejects(&e.kind))
                .cloned()
                .collect();
            if strict_errors.is_empty() {
                Ok(parsed)
            } else {
                Err(SpfParseError::Syntax(strict_errors))
            }
        }
    }
}

/// The taxonomy entries that are lenient-only: grammatically they are
/// unknown modifiers, which RFC 7208 tells implementations to ignore.
fn strict_rejects(kind: &SyntaxErrorKind) -> bool {
    !matches!(
        kind,
        SyntaxErrorKind::SiteVerificationConcat | SyntaxErrorKind::MultipleVersionTags
    )
}

struct Parser<'a> {
    raw: &'a str,
    terms: Vec<Term>,
    errors: Vec<SyntaxError>,
    warnings: Vec<SyntaxError>,
    seen_all: bool,
    seen_redirect: bool,
    seen_exp: bool,
}

impl<'a> Parser<'a> {
    fn new(raw: &'a str) -> Self {
        Parser {
            raw,
            terms: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
            seen_all: false,
            seen_redirect: false,
            seen_exp: false,
        }
    }

    fn error(&mut self, kind: SyntaxErrorKind, span: Span) {
        self.errors.push(SyntaxError::new(kind, span, self.raw));
    }

    fn warn(&mut self, kind: SyntaxErrorKind, span: Span) {
        self.warnings.push(SyntaxError::new(kind, span, self.raw));
    }

    fn run(&mut self) {
        self.scan_extra_version_tags();
        self.scan_site_verification();

        let tokens = tokenize(self.raw);
        let mut idx = 1; // tokens[0] is the version tag
        while idx < tokens.len() {
            let tok = tokens[idx];
            idx += 1;

            if tok.text.eq_ignore_ascii_case(VERSION_TAG) {
                continue; // already reported by scan_extra_version_tags
            }
            if tok.text.contains(SITE_VERIFICATION_PATTERN) {
                continue; // already reported by scan_site_verification
            }

            // Empty-argument term followed by what looks like its orphaned
            // argument: the classic "ip4: 192.0.2.1" whitespace slip. The
            // same classification covers modifiers ("redirect= example.net").
            if (tok.text.ends_with(':') || tok.text.ends_with('=')) && tok.text.len() > 1 {
                if let Some(next) = tokens.get(idx) {
                    if !looks_like_term(next.text) {
                        self.error(
                            SyntaxErrorKind::WhitespaceAfterColon,
                            Span::new(tok.span.start, next.span.end),
                        );
                        idx += 1; // consume the orphaned argument
                        continue;
                    }
                }
            }

            self.parse_term(tok);
        }
    }

    fn scan_extra_version_tags(&mut self) {
        let lower = self.raw.to_ascii_lowercase();
        let mut from = VERSION_TAG.len();
        while let Some(off) = lower[from..].find(VERSION_TAG) {
            let start = from + off;
            self.error(
                SyntaxErrorKind::MultipleVersionTags,
                Span::new(start, start + VERSION_TAG.len()),
            );
            from = start + VERSION_TAG.len();
        }
    }

    fn scan_site_verification(&mut self) {
        let lower = self.raw.to_ascii_lowercase();
        let mut from = 0;
        while let Some(off) = lower[from..].find(SITE_VERIFICATION_PATTERN) {
            let start = from + off;
            self.error(
                SyntaxErrorKind::SiteVerificationConcat,
                Span::new(start, start + SITE_VERIFICATION_PATTERN.len()),
            );
            from = start + SITE_VERIFICATION_PATTERN.len();
        }
    }

    fn parse_term(&mut self, tok: Token<'a>) {
        let span = tok.span;
        let (qualifier, body) = split_qualifier(tok.text);

        // Modifier form: name=value with no qualifier allowed.
        if let Some((name, value)) = split_modifier(body) {
            if qualifier.is_some() {
                self.error(SyntaxErrorKind::UnknownTerm, span);
                return;
            }
            self.parse_modifier(name, value, span);
            return;
        }

        let (name, sep, arg) = split_mechanism(body);
        let explicit = qualifier.is_some();
        let qualifier = qualifier.unwrap_or(Qualifier::Pass);

        let mechanism = match name.to_ascii_lowercase().as_str() {
            "all" => {
                if sep.is_some() {
                    self.error(SyntaxErrorKind::UnknownTerm, span);
                    return;
                }
                Some(Mechanism::All)
            }
            "include" => {
                self.domain_mechanism(span, sep, arg, |d| Mechanism::Include { domain: d })
            }
            "exists" => self.domain_mechanism(span, sep, arg, |d| Mechanism::Exists { domain: d }),
            "a" => self.host_mechanism(span, sep, arg, |d, c4, c6| Mechanism::A {
                domain: d,
                cidr4: c4,
                cidr6: c6,
            }),
            "mx" => self.host_mechanism(span, sep, arg, |d, c4, c6| Mechanism::Mx {
                domain: d,
                cidr4: c4,
                cidr6: c6,
            }),
            "ptr" => match (sep, arg) {
                (None, _) => Some(Mechanism::Ptr { domain: None }),
                (Some(':'), Some(a)) if !a.is_empty() => match self.macro_arg(a, span) {
                    Some(d) => Some(Mechanism::Ptr { domain: Some(d) }),
                    None => return,
                },
                _ => {
                    self.error(
                        SyntaxErrorKind::Other {
                            detail: "missing argument after ':'".to_string(),
                        },
                        span,
                    );
                    return;
                }
            },
            "ip4" => match self.ip_mechanism(span, sep, arg, true) {
                Some(m) => Some(m),
                None => return,
            },
            "ip6" => match self.ip_mechanism(span, sep, arg, false) {
                Some(m) => Some(m),
                None => return,
            },
            "ipv4" => {
                self.error(SyntaxErrorKind::MisspelledIp4, span);
                return;
            }
            "ipv6" => {
                self.error(SyntaxErrorKind::MisspelledIp6, span);
                return;
            }
            "ip" => {
                self.error(SyntaxErrorKind::BareIpMechanism, span);
                return;
            }
            _ => {
                self.error(SyntaxErrorKind::UnknownTerm, span);
                return;
            }
        };

        let Some(mechanism) = mechanism else { return };

        if self.seen_all {
            self.warn(SyntaxErrorKind::TrailingGarbageAfterAll, span);
        }
        if matches!(mechanism, Mechanism::All) {
            self.seen_all = true;
        }

        self.terms.push(Term {
            kind: TermKind::Directive(Directive {
                qualifier,
                explicit_qualifier: explicit,
                mechanism,
            }),
            span,
        });
    }

    fn parse_modifier(&mut self, name: &str, value: &str, span: Span) {
        if !valid_modifier_name(name) {
            self.error(SyntaxErrorKind::UnknownTerm, span);
            return;
        }
        let value = MacroString::new(value);
        if !value.is_balanced() {
            self.error(
                SyntaxErrorKind::Other {
                    detail: "unbalanced macro escape".to_string(),
                },
                span,
            );
            return;
        }
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "redirect" if self.seen_redirect => {
                self.error(
                    SyntaxErrorKind::Other {
                        detail: "duplicate redirect modifier".to_string(),
                    },
                    span,
                );
                return;
            }
            "redirect" => self.seen_redirect = true,
            "exp" if self.seen_exp => {
                self.error(
                    SyntaxErrorKind::Other {
                        detail: "duplicate exp modifier".to_string(),
                    },
                    span,
                );
                return;
            }
            "exp" => self.seen_exp = true,
            _ => {}
        }

        if self.seen_all {
            self.warn(SyntaxErrorKind::TrailingGarbageAfterAll, span);
        }

        self.terms.push(Term {
            kind: TermKind::Modifier(Modifier { name: lower, value }),
            span,
        });
    }

    fn macro_arg(&mut self, arg: &str, span: Span) -> Option<MacroString> {
        let m = MacroString::new(arg);
        if m.is_balanced() {
            Some(m)
        } else {
            self.error(
                SyntaxErrorKind::Other {
                    detail: "unbalanced macro escape".to_string(),
                },
                span,
            );
            None
        }
    }

    fn domain_mechanism(
        &mut self,
        span: Span,
        sep: Option<char>,
        arg: Option<&str>,
        build: impl FnOnce(MacroString) -> Mechanism,
    ) -> Option<Mechanism> {
        match (sep, arg) {
            (Some(':'), Some(a)) if !a.is_empty() => self.macro_arg(a, span).map(build),
            _ => {
                self.error(
                    SyntaxErrorKind::Other {
                        detail: "missing argument after ':'".to_string(),
                    },
                    span,
                );
                None
            }
        }
    }

    fn host_mechanism(
        &mut self,
        span: Span,
        sep: Option<char>,
        arg: Option<&str>,
        build: impl FnOnce(Option<MacroString>, Option<u8>, Option<u8>) -> Mechanism,
    ) -> Option<Mechanism> {
        let (domain_part, cidr_part) = match (sep, arg) {
            (None, _) => (None, None),
            // "a/24" — CIDR directly on the current domain.
            (Some('/'), Some(rest)) => (None, Some(rest)),
            (Some(':'), Some(a)) if !a.is_empty() => match a.find('/') {
                Some(i) => (Some(&a[..i]), Some(&a[i + 1..])),
                None => (Some(a), None),
            },
            _ => {
                self.error(
                    SyntaxErrorKind::Other {
                        detail: "missing argument after ':'".to_string(),
                    },
                    span,
                );
                return None;
            }
        };

        let domain = match domain_part {
            Some("") => {
                self.error(
                    SyntaxErrorKind::Other {
                        detail: "empty domain argument".to_string(),
                    },
                    span,
                );
                return None;
            }
            Some(d) => {
                let m = self.macro_arg(d, span)?;
                Some(m)
            },
            None => None,
        };

        let (cidr4, cidr6) = match cidr_part {
            None => (None, None),
            Some(c) => match parse_dual_cidr(c) {
                Some(pair) => pair,
                None => {
                    self.error(
                        SyntaxErrorKind::Other {
                            detail: format!("invalid CIDR suffix '/{c}'"),
                        },
                        span,
                    );
                    return None;
                }
            },
        };

        Some(build(domain, cidr4, cidr6))
    }

    fn ip_mechanism(
        &mut self,
        span: Span,
        sep: Option<char>,
        arg: Option<&str>,
        is_v4: bool,
    ) -> Option<Mechanism> {
        let arg = match (sep, arg) {
            (Some(':'), Some(a)) if !a.is_empty() => a,
            _ => {
                // "ip4" bare or "ip4:" with nothing after — no IP at all.
                self.error(SyntaxErrorKind::InvalidIpNoAddress, span);
                return None;
            }
        };

        let (addr_part, prefix_part) = match arg.split_once('/') {
            Some((a, p)) => (a, Some(p)),
            None => (arg, None),
        };

        let max_prefix = if is_v4 { 32 } else { 128 };
        let prefix = match prefix_part {
            None => max_prefix,
            Some(p) => match p.parse::<u8>() {
                Ok(n) if n <= max_prefix && !p.is_empty() => n,
                _ => {
                    self.error(
                        SyntaxErrorKind::Other {
                            detail: format!("invalid CIDR prefix '/{p}'"),
                        },
                        span,
                    );
                    return None;
                }
            },
        };

        if is_v4 {
            match addr_part.parse::<Ipv4Addr>() {
                Ok(addr) => Some(Mechanism::Ip4 { addr, prefix }),
                Err(_) => {
                    self.error(classify_bad_ip(addr_part, true), span);
                    None
                }
            }
        } else {
            match addr_part.parse::<Ipv6Addr>() {
                Ok(addr) => Some(Mechanism::Ip6 { addr, prefix }),
                Err(_) => {
                    self.error(classify_bad_ip(addr_part, false), span);
                    None
                }
            }
        }
    }
}

const SITE_VERIFICATION_PATTERN: &str = "-site-verification=";

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    span: Span,
}

fn tokenize(raw: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in raw.char_indices() {
        if c.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &raw[s..i],
                    span: Span::new(s, i),
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &raw[s..],
            span: Span::new(s, raw.len()),
        });
    }
    tokens
}

fn split_qualifier(tok: &str) -> (Option<Qualifier>, &str) {
    let mut chars = tok.chars();
    match chars.next().and_then(Qualifier::from_symbol) {
        Some(q) => (Some(q), chars.as_str()),
        None => (None, tok),
    }
}

/// Splits `name=value` modifiers. Mechanism arguments use `:`/`/`, so a
/// `=` appearing before either separator marks the modifier form.
fn split_modifier(body: &str) -> Option<(&str, &str)> {
    let eq = body.find('=')?;
    if body[..eq].contains(':') || body[..eq].contains('/') {
        return None;
    }
    Some((&body[..eq], &body[eq + 1..]))
}

fn split_mechanism(body: &str) -> (&str, Option<char>, Option<&str>) {
    match body.find([':', '/']) {
        Some(i) => {
            let sep = body[i..].chars().next().unwrap();
            (&body[..i], Some(sep), Some(&body[i + 1..]))
        }
        None => (body, None, None),
    }
}

/// Heuristic used to distinguish an orphaned argument ("192.0.2.1" after
/// "ip4:") from the next real term.
fn looks_like_term(tok: &str) -> bool {
    let (_, body) = split_qualifier(tok);
    if let Some((name, _)) = split_modifier(body) {
        return valid_modifier_name(name);
    }
    let (name, _, _) = split_mechanism(body);
    matches!(
        name.to_ascii_lowercase().as_str(),
        "all" | "include" | "a" | "mx" | "ptr" | "ip4" | "ip6" | "exists" | "ipv4" | "ipv6" | "ip"
    )
}

fn valid_modifier_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Parses the `/n`, `//n` or `/n//m` dual-CIDR suffix (leading `/` already
/// stripped, so the input is `n`, `/m` or `n//m`).
fn parse_dual_cidr(s: &str) -> Option<(Option<u8>, Option<u8>)> {
    let (v4_part, v6_part) = match s.find('/') {
        Some(i) => {
            let rest = &s[i + 1..];
            // "n//m" arrives here as "n" + "/m"; "//m" as "" + "/m".
            let v6 = rest.strip_prefix('/').unwrap_or(rest);
            (&s[..i], Some(v6))
        }
        None => (s, None),
    };

    let cidr4 = if v4_part.is_empty() {
        None
    } else {
        let n: u8 = v4_part.parse().ok()?;
        if n > 32 {
            return None;
        }
        Some(n)
    };
    let cidr6 = match v6_part {
        None => None,
        Some(p) => {
            let n: u8 = p.parse().ok()?;
            if n > 128 {
                return None;
            }
            Some(n)
        }
    };
    if cidr4.is_none() && cidr6.is_none() {
        return None;
    }
    Some((cidr4, cidr6))
}

fn classify_bad_ip(addr: &str, is_v4: bool) -> SyntaxErrorKind {
    if addr.is_empty() {
        return SyntaxErrorKind::InvalidIpNoAddress;
    }
    if is_v4 && addr.parse::<Ipv6Addr>().is_ok() {
        return SyntaxErrorKind::InvalidIpWrongVersion;
    }
    if !is_v4 && addr.parse::<Ipv4Addr>().is_ok() {
        return SyntaxErrorKind::InvalidIpWrongVersion;
    }
    if addr.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return SyntaxErrorKind::InvalidIpWrongOctets;
    }
    if addr.contains(':') {
        return SyntaxErrorKind::InvalidIpWrongOctets;
    }
    if addr
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_'))
    {
        return SyntaxErrorKind::InvalidIpDomainArg;
    }
    SyntaxErrorKind::Other {
        detail: format!("unparseable address '{addr}'"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lenient(raw: &str) -> ParsedSpf {
        parse_spf(raw, ParseMode::Lenient).expect("starts with version tag")
    }

    fn error_kinds(parsed: &ParsedSpf) -> Vec<&SyntaxErrorKind> {
        parsed.errors.iter().map(|e| &e.kind).collect()
    }

    #[test]
    fn parses_the_primer_example() {
        let parsed =
            parse_spf("v=spf1 +mx a:puffin.example.com/28 -all", ParseMode::Strict).unwrap();
        assert!(parsed.is_valid());
        let dirs: Vec<_> = parsed.record.directives().collect();
        assert_eq!(dirs.len(), 3);

        assert_eq!(dirs[0].1.qualifier, Qualifier::Pass);
        assert!(dirs[0].1.explicit_qualifier);
        assert!(matches!(dirs[0].1.mechanism, Mechanism::Mx { .. }));

        assert_eq!(dirs[1].1.qualifier, Qualifier::Pass);
        assert!(!dirs[1].1.explicit_qualifier);
        match &dirs[1].1.mechanism {
            Mechanism::A {
                domain,
                cidr4,
                cidr6,
            } => {
                assert_eq!(domain.as_ref().unwrap().as_str(), "puffin.example.com");
                assert_eq!(*cidr4, Some(28));
                assert_eq!(*cidr6, None);
            }
            other => panic!("expected a mechanism, got {other:?}"),
        }

        assert_eq!(dirs[2].1.qualifier, Qualifier::Fail);
        assert!(matches!(dirs[2].1.mechanism, Mechanism::All));
    }

    #[test]
    fn minimal_deny_all() {
        let parsed = parse_spf("v=spf1 -all", ParseMode::Strict).unwrap();
        let dirs: Vec<_> = parsed.record.directives().collect();
        assert_eq!(dirs.len(), 1);
        assert_eq!(dirs[0].1.qualifier, Qualifier::Fail);
        assert!(matches!(dirs[0].1.mechanism, Mechanism::All));
    }

    #[test]
    fn not_spf_without_version_tag() {
        assert_eq!(
            parse_spf("google-site-verification=abc", ParseMode::Lenient),
            Err(SpfParseError::NotSpf)
        );
        assert_eq!(
            parse_spf("v=spf10 -all", ParseMode::Lenient),
            Err(SpfParseError::NotSpf)
        );
    }

    #[test]
    fn version_tag_is_case_insensitive() {
        assert!(parse_spf("V=SPF1 -all", ParseMode::Strict).is_ok());
    }

    #[test]
    fn misspelled_ip4() {
        let parsed = lenient("v=spf1 ipv4:192.0.2.1 -all");
        assert_eq!(error_kinds(&parsed), vec![&SyntaxErrorKind::MisspelledIp4]);
        // The deny-all still parses for downstream analysis.
        assert_eq!(parsed.record.directives().count(), 1);
    }

    #[test]
    fn misspelled_ip6_and_bare_ip() {
        let parsed = lenient("v=spf1 ipv6:2001:db8::1 ip:192.0.2.1 -all");
        assert_eq!(
            error_kinds(&parsed),
            vec![
                &SyntaxErrorKind::MisspelledIp6,
                &SyntaxErrorKind::BareIpMechanism
            ]
        );
    }

    #[test]
    fn whitespace_after_colon() {
        let parsed = lenient("v=spf1 ip4: 192.0.2.1 -all");
        assert_eq!(
            error_kinds(&parsed),
            vec![&SyntaxErrorKind::WhitespaceAfterColon]
        );
        let span = parsed.errors[0].span;
        assert_eq!(span.slice(&parsed.record.raw), "ip4: 192.0.2.1");
    }

    #[test]
    fn whitespace_after_equals_same_subtype() {
        let parsed = lenient("v=spf1 redirect= example.net");
        assert_eq!(
            error_kinds(&parsed),
            vec![&SyntaxErrorKind::WhitespaceAfterColon]
        );
    }

    #[test]
    fn empty_ip_arg_followed_by_term_is_no_address() {
        let parsed = lenient("v=spf1 ip4: -all");
        assert_eq!(
            error_kinds(&parsed),
            vec![&SyntaxErrorKind::InvalidIpNoAddress]
        );
    }

    #[test]
    fn invalid_ip_variants() {
        for (raw, want) in [
            ("v=spf1 ip4 -all", SyntaxErrorKind::InvalidIpNoAddress),
            (
                "v=spf1 ip4:192.0.2 -all",
                SyntaxErrorKind::InvalidIpWrongOctets,
            ),
            (
                "v=spf1 ip4:192.0.2.1.7 -all",
                SyntaxErrorKind::InvalidIpWrongOctets,
            ),
            (
                "v=spf1 ip4:300.0.2.1 -all",
                SyntaxErrorKind::InvalidIpWrongOctets,
            ),
            (
                "v=spf1 ip4:mail.example.com -all",
                SyntaxErrorKind::InvalidIpDomainArg,
            ),
            (
                "v=spf1 ip4:2001:db8::1 -all",
                SyntaxErrorKind::InvalidIpWrongVersion,
            ),
            (
                "v=spf1 ip6:192.0.2.1 -all",
                SyntaxErrorKind::InvalidIpWrongVersion,
            ),
            (
                "v=spf1 ip6:example.org -all",
                SyntaxErrorKind::InvalidIpDomainArg,
            ),
        ] {
            let parsed = lenient(raw);
            assert_eq!(error_kinds(&parsed), vec![&want], "record {raw:?}");
        }
    }

    #[test]
    fn site_verification_concat() {
        let parsed = lenient("v=spf1 mx -all google-site-verification=abc123");
        assert_eq!(
            error_kinds(&parsed),
            vec![&SyntaxErrorKind::SiteVerificationConcat]
        );
    }

    #[test]
    fn multiple_version_tags() {
        let parsed = lenient("v=spf1 mx v=spf1 a -all");
        assert_eq!(
            error_kinds(&parsed),
            vec![&SyntaxErrorKind::MultipleVersionTags]
        );
    }

    #[test]
    fn unknown_term_typos() {
        for raw in ["v=spf1 mx -al", "v=spf1 mx -all;"] {
            let parsed = lenient(raw);
            assert_eq!(error_kinds(&parsed), vec![&SyntaxErrorKind::UnknownTerm]);
        }
    }

    #[test]
    fn terms_after_all_warn_but_parse() {
        let parsed = lenient("v=spf1 -all mx");
        assert!(parsed.is_valid());
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(
            parsed.warnings[0].kind,
            SyntaxErrorKind::TrailingGarbageAfterAll
        );
        assert_eq!(parsed.record.terms.len(), 2);
    }

    #[test]
    fn dual_cidr_accepted() {
        let parsed = parse_spf(
            "v=spf1 a:host.test/24//64 mx/24 a//64 -all",
            ParseMode::Strict,
        )
        .unwrap();
        let dirs: Vec<_> = parsed.record.directives().collect();
        match &dirs[0].1.mechanism {
            Mechanism::A { cidr4, cidr6, .. } => {
                assert_eq!((*cidr4, *cidr6), (Some(24), Some(64)));
            }
            other => panic!("unexpected {other:?}"),
        }
        match &dirs[1].1.mechanism {
            Mechanism::Mx { cidr4, cidr6, .. } => {
                assert_eq!((*cidr4, *cidr6), (Some(24), None));
            }
            other => panic!("unexpected {other:?}"),
        }
        match &dirs[2].1.mechanism {
            Mechanism::A { cidr4, cidr6, .. } => {
                assert_eq!((*cidr4, *cidr6), (None, Some(64)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ip_default_prefixes() {
        let parsed = parse_spf(
            "v=spf1 ip4:192.0.2.1 ip6:2001:db8::1 -all",
            ParseMode::Strict,
        )
        .unwrap();
        let dirs: Vec<_> = parsed.record.directives().collect();
        assert!(matches!(
            dirs[0].1.mechanism,
            Mechanism::Ip4 { prefix: 32, .. }
        ));
        assert!(matches!(
            dirs[1].1.mechanism,
            Mechanism::Ip6 { prefix: 128, .. }
        ));
    }

    #[test]
    fn render_normalizes_whitespace() {
        let parsed = lenient("v=spf1  mx   -all");
        assert_eq!(parsed.record.render(), "v=spf1 mx -all");
    }

    #[test]
    fn render_primer_example_roundtrips_to_itself() {
        let raw = "v=spf1 +mx a:puffin.example.com/28 -all";
        let parsed = lenient(raw);
        assert_eq!(parsed.record.render(), raw);
    }

    #[test]
    fn render_ip4_with_prefix() {
        let term = Term {
            kind: TermKind::Directive(Directive {
                qualifier: Qualifier::Pass,
                explicit_qualifier: false,
                mechanism: Mechanism::Ip4 {
                    addr: "192.0.2.0".parse().unwrap(),
                    prefix: 24,
                },
            }),
            span: Span::new(0, 0),
        };
        assert_eq!(term.render(), "ip4:192.0.2.0/24");
    }

    #[test]
    fn classify_txt_set_cases() {
        assert_eq!(
            classify_txt_set(&["google-site-verification=abc".to_string()]),
            SpfLookupOutcome::Missing
        );
        assert_eq!(
            classify_txt_set(&["v=spf1 -all".to_string(), "v=spf1 +all".to_string()]),
            SpfLookupOutcome::Multiple { count: 2 }
        );
        assert_eq!(
            classify_txt_set(&["v=spf1 mx -all".to_string(), "other=x".to_string()]),
            SpfLookupOutcome::Found {
                raw: "v=spf1 mx -all".to_string()
            }
        );
    }

    #[test]
    fn markup_detection() {
        assert!(detect_embedded_markup(
            "v=spf1 xss=<script>alert('SPF')</script> ~all"
        ));
        assert!(detect_embedded_markup("v=spf1 include=<b>x</b> -all"));
        assert!(!detect_embedded_markup("v=spf1 -all"));
        assert!(!detect_embedded_markup("v=spf1 a:a<b.test -all"));
    }

    #[test]
    fn spans_slice_offending_tokens() {
        let raw = "v=spf1 ipv4:192.0.2.1 -all";
        let parsed = lenient(raw);
        assert_eq!(parsed.errors[0].span.slice(raw), "ipv4:192.0.2.1");
        assert_eq!(parsed.errors[0].token, "ipv4:192.0.2.1");
    }

    #[test]
    fn duplicate_redirect_rejected() {
        let parsed = lenient("v=spf1 redirect=a.test redirect=b.test");
        assert_eq!(parsed.errors.len(), 1);
        assert!(matches!(
            parsed.errors[0].kind,
            SyntaxErrorKind::Other { .. }
        ));
    }

    #[test]
    fn unknown_modifier_is_rfc_valid() {
        let parsed = parse_spf("v=spf1 mx unknown=thing -all", ParseMode::Strict).unwrap();
        assert!(parsed.is_valid());
        assert_eq!(
            parsed.record.modifier("unknown").unwrap().value.as_str(),
            "thing"
        );
    }

    #[test]
    fn qualifier_on_modifier_is_unknown_term() {
        let parsed = lenient("v=spf1 -redirect=a.test");
        assert_eq!(error_kinds(&parsed), vec![&SyntaxErrorKind::UnknownTerm]);
    }
}
