//! Report emission (JSONL, JSON, CSV tables) and per-domain remediation
//! text.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use crate::corpus::{CorpusStats, DomainAudit};
use crate::eval::{ErrorClass, InvalidIpKind, RecordNotFoundCause};
use crate::parser::{SyntaxError, SyntaxErrorKind};
use crate::policy::HUGE_CIDR_MAX_PREFIX;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Decode {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Jsonl,
    Json,
    CsvTables,
}

/// One audit per line, in canonical (domain-sorted) order.
pub fn write_audits_jsonl<W: Write>(audits: &[DomainAudit], mut out: W) -> io::Result<()> {
    let mut sorted: Vec<&DomainAudit> = audits.iter().collect();
    sorted.sort_by(|a, b| a.domain.cmp(&b.domain));
    for audit in sorted {
        serde_json::to_writer(&mut out, audit)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_audits_jsonl<R: BufRead>(
    reader: R,
    path: &Path,
) -> Result<Vec<DomainAudit>, ReportError> {
    let mut audits = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let audit = serde_json::from_str(&line).map_err(|source| ReportError::Decode {
            path: path.to_path_buf(),
            line: idx + 1,
            source,
        })?;
        audits.push(audit);
    }
    Ok(audits)
}

pub fn write_stats_json<W: Write>(stats: &CorpusStats, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, stats)?;
    out.write_all(b"\n")
}

/// Emits the requested report files under `out`.
///
/// * `jsonl`: `<out>` is the audits file.
/// * `json`: `<out>` is the stats document.
/// * `csv-tables`: `<out>` is a directory receiving `large_cidr.csv` and
///   `top_includes.csv`.
///
/// Returns the paths written.
pub fn emit_report(
    stats: &CorpusStats,
    audits: &[DomainAudit],
    format: ReportFormat,
    out: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    match format {
        ReportFormat::Jsonl => {
            let file = std::fs::File::create(out).map_err(io_err(out))?;
            write_audits_jsonl(audits, io::BufWriter::new(file)).map_err(io_err(out))?;
            Ok(vec![out.to_path_buf()])
        }
        ReportFormat::Json => {
            let file = std::fs::File::create(out).map_err(io_err(out))?;
            write_stats_json(stats, io::BufWriter::new(file)).map_err(io_err(out))?;
            Ok(vec![out.to_path_buf()])
        }
        ReportFormat::CsvTables => {
            std::fs::create_dir_all(out).map_err(io_err(out))?;
            let large = out.join("large_cidr.csv");
            std::fs::write(&large, large_cidr_csv(stats)).map_err(io_err(&large))?;
            let top = out.join("top_includes.csv");
            std::fs::write(&top, top_includes_csv(stats)).map_err(io_err(&top))?;
            Ok(vec![large, top])
        }
    }
}

/// Two provenance columns over prefixes /0../16.
pub fn large_cidr_csv(stats: &CorpusStats) -> String {
    let mut out = String::from("cidr,direct,include\n");
    for prefix in 0..=HUGE_CIDR_MAX_PREFIX {
        let row = stats
            .large_cidr_table
            .get(&prefix)
            .copied()
            .unwrap_or_default();
        let _ = writeln!(out, "/{prefix},{},{}", row.direct, row.via_include);
    }
    out
}

pub fn top_includes_csv(stats: &CorpusStats) -> String {
    let mut out = String::from("include,used_by,allowed_ips\n");
    for entry in &stats.top_includes {
        let _ = writeln!(
            out,
            "{},{},{}",
            entry.include, entry.used_by, entry.allowed_ips
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("audit has no findings")]
pub struct NoFindings;

/// Renders deterministic remediation text for an audit with findings.
///
/// Each error class gets a fixed template quoting the offending token and a
/// concrete fix; permissiveness flags append configuration advice. Clean
/// audits are an error so callers never mail empty reports.
pub fn remediation_text(audit: &DomainAudit) -> Result<String, NoFindings> {
    let mut sections: Vec<String> = Vec::new();

    for error in &audit.errors {
        match error {
            ErrorClass::SyntaxError { findings } => {
                for finding in findings {
                    sections.push(syntax_advice(finding));
                }
            }
            ErrorClass::InvalidIp { cause } => sections.push(invalid_ip_advice(*cause, audit)),
            ErrorClass::TooManyLookups => sections.push(
                "The record triggers more DNS lookups than the limit of 10 that evaluators \
                 enforce; checks will return permerror. Flatten nested includes or replace \
                 them with explicit ip4 networks until at most 10 DNS-causing terms remain."
                    .to_string(),
            ),
            ErrorClass::TooManyVoidLookups => sections.push(
                "More than two DNS lookups during evaluation return no data or NXDOMAIN, \
                 which evaluators treat as permerror. Remove terms that reference names \
                 without address records."
                    .to_string(),
            ),
            ErrorClass::IncludeLoop { depth } => sections.push(format!(
                "The include chain refers back to itself (at nesting depth {depth}); \
                 evaluation cannot terminate and returns permerror. Remove the circular \
                 include."
            )),
            ErrorClass::RedirectLoop => sections.push(
                "The redirect chain returns to a domain already being evaluated; checks \
                 return permerror. Point the redirect at a record that terminates."
                    .to_string(),
            ),
            ErrorClass::RecordNotFound { cause } => sections.push(record_not_found_advice(*cause)),
        }
    }

    let flags = &audit.flags;
    if flags.no_restrictive_all {
        sections.push(
            "The policy has no restrictive final term, so unmatched senders evaluate to \
             neutral and gain no protection. End the record with -all (or ~all during \
             rollout)."
                .to_string(),
        );
    }
    if flags.plus_all {
        sections.push(
            "The record ends in a pass-qualified all, authorizing every host on the \
             internet to send for this domain. Replace it with -all."
                .to_string(),
        );
    }
    if !flags.huge_cidr_direct.is_empty() || !flags.huge_cidr_via_include.is_empty() {
        sections.push(
            "The policy authorizes very large networks (/16 or wider). Authorize only \
             the hosts that actually send mail for this domain."
                .to_string(),
        );
    }
    if flags.over_100k_ips {
        sections.push(
            "More than 100,000 IP addresses may send mail for this domain, which makes \
             sender spoofing from shared infrastructure practical. Reduce the policy to \
             the provider's dedicated outbound ranges."
                .to_string(),
        );
    }
    if flags.ptr_used {
        sections.push(
            "The ptr mechanism is deprecated: it is slow, unreliable and causes high DNS \
             load. Replace it with ip4 or a mechanisms."
                .to_string(),
        );
    }
    if flags.deprecated_spf_rrt {
        sections.push(
            "The domain still publishes the deprecated SPF record type (99). Serve the \
             policy in a TXT record only."
                .to_string(),
        );
    }
    if flags.markup_suspicious {
        sections.push(
            "The record embeds angle-bracketed markup; tools rendering SPF records in a \
             browser may execute it. Remove the markup."
                .to_string(),
        );
    }

    if sections.is_empty() {
        return Err(NoFindings);
    }

    let mut out = format!("Findings for {}:\n", audit.domain);
    for (i, section) in sections.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, section);
    }
    Ok(out)
}

fn syntax_advice(finding: &SyntaxError) -> String {
    let token = &finding.token;
    match &finding.kind {
        SyntaxErrorKind::MisspelledIp4 => format!(
            "`{token}` uses the mechanism name ipv4:, which evaluators do not recognize; \
             the correct name is ip4:."
        ),
        SyntaxErrorKind::MisspelledIp6 => {
            format!("`{token}` uses the mechanism name ipv6:; the correct name is ip6:.")
        }
        SyntaxErrorKind::BareIpMechanism => {
            format!("`{token}` uses ip: as a mechanism name; use ip4: for IPv4 or ip6: for IPv6.")
        }
        SyntaxErrorKind::SiteVerificationConcat => format!(
            "`{token}` looks like a site-verification token concatenated into the SPF \
             string. Publish it as its own TXT record."
        ),
        SyntaxErrorKind::MultipleVersionTags => format!(
            "`{token}` is a second v=spf1 tag inside one record, usually from combining \
             two recommendations. Merge the terms into a single record with one tag."
        ),
        SyntaxErrorKind::WhitespaceAfterColon => format!(
            "`{token}` has whitespace between the separator and its argument; the \
             argument must follow immediately."
        ),
        SyntaxErrorKind::UnknownTerm => format!(
            "`{token}` is not a recognized mechanism or modifier and makes the record \
             invalid. Remove or correct it (a truncated -all is a common cause)."
        ),
        SyntaxErrorKind::TrailingGarbageAfterAll => {
            format!("`{token}` appears after the all term and is ignored by evaluators. Remove it.")
        }
        SyntaxErrorKind::Other { detail } => format!("`{token}`: {detail}."),
        kind => format!("`{token}`: {}.", kind.subtype_name()),
    }
}

fn invalid_ip_advice(cause: InvalidIpKind, audit: &DomainAudit) -> String {
    let token = audit
        .spf
        .as_ref()
        .map(|s| s.raw.as_str())
        .unwrap_or_default();
    let problem = match cause {
        InvalidIpKind::NoAddress => "an ip mechanism is missing its address",
        InvalidIpKind::WrongOctets => "an ip address has the wrong number of octets",
        InvalidIpKind::DomainArg => "an ip mechanism holds a domain name instead of an address",
        InvalidIpKind::WrongVersion => "an ip mechanism holds an address of the other IP version",
    };
    format!(
        "In `{token}`, {problem}; evaluators return permerror for the record. Correct \
         the address (use a:<host> to authorize by hostname)."
    )
}

fn record_not_found_advice(cause: RecordNotFoundCause) -> String {
    match cause {
        RecordNotFoundCause::SpfMissing => {
            "A referenced domain publishes no SPF record, so evaluation returns permerror. \
             Remove the reference or have the target publish a record."
                .to_string()
        }
        RecordNotFoundCause::NotExisting => {
            "A referenced domain does not exist (NXDOMAIN). If the name is unregistered an \
             attacker could claim it and control your policy; remove the reference."
                .to_string()
        }
        RecordNotFoundCause::MultipleRecords => {
            "More than one SPF record is published at one name, which evaluators reject. \
             Merge them into a single record."
                .to_string()
        }
        RecordNotFoundCause::EmptyAnswer => {
            "A referenced name answers with no TXT data. Point the term at a name that \
             publishes an SPF record."
                .to_string()
        }
        RecordNotFoundCause::DnsError => {
            "A referenced name failed to resolve (timeout or server failure) during the \
             scan. Verify the authoritative servers answer reliably."
                .to_string()
        }
        RecordNotFoundCause::LabelTooLong => {
            "A referenced name contains a DNS label longer than 63 octets and can never \
             resolve. Fix the name."
                .to_string()
        }
        RecordNotFoundCause::NameTooLong => {
            "A referenced name exceeds 255 octets and can never resolve. Fix the name.".to_string()
        }
        RecordNotFoundCause::DecodeError => {
            "A referenced TXT record is not valid UTF-8 and cannot be parsed. Re-publish \
             it as plain ASCII."
                .to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DomainAudit, SpfInfo};
    use crate::dmarc::DmarcStatus;
    use crate::parser::Span;
    use crate::policy::PermissivenessFlags;

    fn base_audit(domain: &str) -> DomainAudit {
        DomainAudit {
            schema: crate::SCHEMA_VERSION.to_string(),
            domain: domain.to_string(),
            rank: None,
            mx_present: true,
            spf: Some(SpfInfo {
                raw: "v=spf1 -all".to_string(),
                valid: true,
            }),
            spf_lookup_error: None,
            dns_failed: false,
            errors: Vec::new(),
            warnings: Vec::new(),
            expansion: None,
            flags: PermissivenessFlags::default(),
            dmarc: DmarcStatus::default(),
            deny_all_only: true,
        }
    }

    #[test]
    fn clean_audit_has_no_findings() {
        assert_eq!(remediation_text(&base_audit("clean.test")), Err(NoFindings));
    }

    #[test]
    fn misspelled_ip4_quotes_token_and_suggests_fix() {
        let mut audit = base_audit("typo.test");
        audit.errors.push(ErrorClass::SyntaxError {
            findings: vec![SyntaxError {
                kind: SyntaxErrorKind::MisspelledIp4,
                span: Span::new(7, 21),
                token: "ipv4:192.0.2.1".to_string(),
            }],
        });
        let text = remediation_text(&audit).unwrap();
        assert!(text.contains("ipv4:192.0.2.1"));
        assert!(text.contains("ip4:"));
    }

    #[test]
    fn lookup_limit_cites_ten() {
        let mut audit = base_audit("deep.test");
        audit.errors.push(ErrorClass::TooManyLookups);
        let text = remediation_text(&audit).unwrap();
        assert!(text.contains("10"));
    }

    #[test]
    fn remediation_is_deterministic() {
        let mut audit = base_audit("flagged.test");
        audit.flags.no_restrictive_all = true;
        audit.flags.over_100k_ips = true;
        assert_eq!(remediation_text(&audit), remediation_text(&audit));
    }

    #[test]
    fn jsonl_roundtrip_is_identity() {
        let audit = base_audit("round.test");
        let mut buf = Vec::new();
        write_audits_jsonl(std::slice::from_ref(&audit), &mut buf).unwrap();
        let parsed = read_audits_jsonl(std::io::Cursor::new(buf), Path::new("mem")).unwrap();
        assert_eq!(parsed, vec![audit]);
    }

    #[test]
    fn csv_headers_match_table_shapes() {
        let stats = CorpusStats::default();
        assert!(large_cidr_csv(&stats).starts_with("cidr,direct,include\n"));
        assert!(top_includes_csv(&stats).starts_with("include,used_by,allowed_ips\n"));
        // one row per prefix 0..=16 plus header
        assert_eq!(large_cidr_csv(&stats).lines().count(), 18);
    }
}
