//! Human-readable rendering for the terminal; `--json` bypasses all of it.

use spf_audit::api::ParseResponse;
use spf_audit::corpus::DomainAudit;
use spf_audit::eval::{CheckOutcome, SpfResult};
use spf_audit::parser::ParsedSpf;
use spf_audit::policy::ExpansionReport;

pub fn result_word(result: SpfResult) -> &'static str {
    match result {
        SpfResult::Pass => "pass",
        SpfResult::Fail => "fail",
        SpfResult::SoftFail => "softfail",
        SpfResult::Neutral => "neutral",
        SpfResult::None => "none",
        SpfResult::TempError => "temperror",
        SpfResult::PermError => "permerror",
    }
}

pub fn print_check(domain: &str, outcome: &CheckOutcome) {
    match &outcome.matched {
        Some(matched) => {
            let term = outcome
                .trace
                .visited
                .iter()
                .rev()
                .find(|v| v.domain == matched.domain)
                .map(|v| v.term.as_str())
                .unwrap_or("?");
            println!(
                "{}: {} via {} (term {} of {})",
                domain,
                result_word(outcome.result),
                term,
                matched.term_index,
                matched.domain
            );
        }
        None => println!("{}: {}", domain, result_word(outcome.result)),
    }
    if let Some(error) = &outcome.trace.error {
        println!("error: {}", error.name());
    }
    println!(
        "lookups: {} (void: {})",
        outcome.trace.lookups_used, outcome.trace.void_lookups_used
    );
    for (i, visited) in outcome.trace.visited.iter().enumerate() {
        println!("  {:>2}. {} {}", i + 1, visited.domain, visited.term);
    }
    for warning in &outcome.trace.warnings {
        println!("warning: {warning}");
    }
}

pub fn print_parsed(parsed: &ParsedSpf) {
    println!("{}", parsed.record.render());
    for term in &parsed.record.terms {
        println!("  term: {}", term.render());
    }
    for error in &parsed.errors {
        println!("error: {} at `{}`", error.kind.subtype_name(), error.token);
    }
    for warning in &parsed.warnings {
        println!(
            "warning: {} at `{}`",
            warning.kind.subtype_name(),
            warning.token
        );
    }
}

pub fn print_parse_response(response: &ParseResponse) {
    if response.not_spf {
        println!("not an SPF record");
        return;
    }
    if let Some(rendered) = &response.rendered {
        println!("{rendered}");
    }
    for error in &response.errors {
        println!("error: {} at `{}`", error.kind.subtype_name(), error.token);
    }
    for warning in &response.warnings {
        println!(
            "warning: {} at `{}`",
            warning.kind.subtype_name(),
            warning.token
        );
    }
}

pub fn print_audit(audit: &DomainAudit) {
    println!("domain: {}", audit.domain);
    println!("mx: {}", audit.mx_present);
    match &audit.spf {
        Some(spf) => {
            println!("spf: {}", spf.raw);
            println!("valid: {}", spf.valid);
        }
        None => match &audit.spf_lookup_error {
            Some(cause) => println!("spf: absent ({})", cause.name()),
            None => println!("spf: absent"),
        },
    }
    if audit.dns_failed {
        println!("note: transient DNS failure; excluded from error statistics");
    }
    for error in &audit.errors {
        println!("error: {}", error.name());
    }
    if let Some(expansion) = &audit.expansion {
        println!(
            "authorized IPv4 addresses: {} (include depth {}, {} top-level includes{})",
            expansion.ipv4_count,
            expansion.include_depth_max,
            expansion.top_level_includes,
            if expansion.truncated {
                ", truncated"
            } else {
                ""
            }
        );
    }
    let flags = &audit.flags;
    for (set, label) in [
        (flags.no_restrictive_all, "no restrictive all"),
        (flags.plus_all, "pass-qualified all"),
        (flags.over_100k_ips, "over 100000 addresses"),
        (flags.ptr_used, "deprecated ptr mechanism"),
        (flags.deprecated_spf_rrt, "deprecated SPF record type"),
        (flags.abuse_modifiers_present, "abuse-reporting modifiers"),
        (flags.markup_suspicious, "embedded markup"),
    ] {
        if set {
            println!("flag: {label}");
        }
    }
    if !flags.huge_cidr_direct.is_empty() {
        println!("flag: large direct ranges {:?}", flags.huge_cidr_direct);
    }
    if !flags.huge_cidr_via_include.is_empty() {
        println!(
            "flag: large included ranges {:?}",
            flags.huge_cidr_via_include
        );
    }
    println!(
        "dmarc: {}{}",
        if audit.dmarc.present {
            "present"
        } else {
            "absent"
        },
        audit
            .dmarc
            .policy
            .map(|p| format!(" (p={p:?})").to_lowercase())
            .unwrap_or_default()
    );
    if audit.deny_all_only {
        println!("policy: deny-all only");
    }
}

pub fn print_expansion(report: &ExpansionReport) {
    println!("domain: {}", report.domain);
    println!("authorized IPv4 addresses: {}", report.ipset.count());
    println!(
        "includes: {} top-level, max depth {}",
        report.top_level_includes, report.include_depth_max
    );
    if report.truncated {
        println!(
            "truncated: {}",
            report.truncated_reason.as_deref().unwrap_or("yes")
        );
    }
    if report.lookups_used > 0 {
        println!("lookups used: {}", report.lookups_used);
    }
    for contribution in &report.contributions {
        println!(
            "  {} {} via {}{}",
            contribution.cidr,
            contribution.origin,
            contribution.term,
            if contribution.via_include {
                " (included)"
            } else {
                ""
            }
        );
    }
    for unexpandable in &report.unexpandable {
        println!(
            "  unexpandable: {} in {}",
            unexpandable.term, unexpandable.origin
        );
    }
    for cidr in &report.ip6_cidrs {
        println!("  ip6 (not counted): {cidr}");
    }
}
