//! Permissiveness scoring of one domain's policy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::fetch_and_classify;
use crate::parser::{detect_embedded_markup, Mechanism, ParsedSpf, Qualifier, TermKind};
use crate::resolver::{DnsAnswer, DnsQuery, Resolver, RrType};

use super::expand::{ContributionKind, ExpansionReport, UnexpandableReason};

/// Prefixes at or below this are "large IP ranges".
pub const HUGE_CIDR_MAX_PREFIX: u8 = 16;
/// Address-count threshold for an overly permissive policy.
pub const PERMISSIVE_IP_THRESHOLD: u64 = 100_000;

const ABUSE_REPORTING_MODIFIERS: [&str; 3] = ["ra", "rp", "rr"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissivenessFlags {
    /// Neither `-all` nor `~all`, directly or at the end of a redirect
    /// chain: evaluation just runs off the end of the record.
    pub no_restrictive_all: bool,
    /// A Pass-qualified `all` authorizes every sender.
    pub plus_all: bool,
    /// Prefixes ≤ /16 contributed by the domain's own ip4/a/mx terms.
    pub huge_cidr_direct: Vec<u8>,
    /// Prefixes ≤ /16 reached through includes.
    pub huge_cidr_via_include: Vec<u8>,
    /// More than 100,000 addresses authorized in total.
    pub over_100k_ips: bool,
    /// The deprecated `ptr` mechanism appears somewhere in the policy.
    pub ptr_used: bool,
    /// The domain still publishes the deprecated SPF record type.
    pub deprecated_spf_rrt: bool,
    /// Abuse-reporting modifiers (`ra`, `rp`, `rr`) present.
    pub abuse_modifiers_present: bool,
    /// Angle-bracketed markup smuggled into the record.
    pub markup_suspicious: bool,
}

/// Scores one audited domain. The redirect chain is followed (cycle-safe)
/// to find the policy's effective `all` disposition; everything else comes
/// from the lenient parse and the expansion report.
pub async fn permissiveness_flags(
    domain: &str,
    parsed: &ParsedSpf,
    expansion: &ExpansionReport,
    resolver: &dyn Resolver,
) -> PermissivenessFlags {
    let mut flags = PermissivenessFlags::default();

    let terminal = effective_all_policy(parsed, resolver).await;
    flags.no_restrictive_all = !terminal.restrictive;
    flags.plus_all = terminal.plus_all;

    for c in &expansion.contributions {
        if c.kind == ContributionKind::All || c.cidr.prefix > HUGE_CIDR_MAX_PREFIX {
            continue;
        }
        if c.via_include {
            flags.huge_cidr_via_include.push(c.cidr.prefix);
        } else {
            flags.huge_cidr_direct.push(c.cidr.prefix);
        }
    }
    flags.huge_cidr_direct.sort_unstable();
    flags.huge_cidr_via_include.sort_unstable();

    flags.over_100k_ips = expansion.ipset.count() > PERMISSIVE_IP_THRESHOLD;

    flags.ptr_used = has_ptr(parsed)
        || expansion
            .unexpandable
            .iter()
            .any(|u| matches!(u.reason, UnexpandableReason::PtrMechanism));

    flags.abuse_modifiers_present = parsed.record.terms.iter().any(|t| {
        t.modifier()
            .is_some_and(|m| ABUSE_REPORTING_MODIFIERS.contains(&m.name.as_str()))
    });

    flags.markup_suspicious = detect_embedded_markup(&parsed.record.raw);

    let spf_rrt = resolver.resolve(&DnsQuery::new(domain, RrType::Spf)).await;
    flags.deprecated_spf_rrt = matches!(spf_rrt, DnsAnswer::Records(ref r) if !r.is_empty());

    flags
}

fn has_ptr(parsed: &ParsedSpf) -> bool {
    parsed
        .record
        .terms
        .iter()
        .any(|t| matches!(&t.kind, TermKind::Directive(d) if matches!(d.mechanism, Mechanism::Ptr { .. })))
}

struct AllPolicy {
    restrictive: bool,
    plus_all: bool,
}

/// Walks the redirect chain and reports how the policy ultimately treats
/// unmatched senders.
async fn effective_all_policy(parsed: &ParsedSpf, resolver: &dyn Resolver) -> AllPolicy {
    let mut current = parsed.clone();
    let mut seen = vec![];
    loop {
        let mut redirect_target: Option<String> = None;
        for term in &current.record.terms {
            match &term.kind {
                TermKind::Directive(d) => {
                    if let Mechanism::All = d.mechanism {
                        return AllPolicy {
                            restrictive: matches!(
                                d.qualifier,
                                Qualifier::Fail | Qualifier::SoftFail
                            ),
                            plus_all: d.qualifier == Qualifier::Pass,
                        };
                    }
                }
                TermKind::Modifier(m) if m.name == "redirect" && !m.value.is_dynamic() => {
                    redirect_target = Some(crate::resolver::normalize_name(m.value.as_str()));
                    break; // statements after a redirect are ignored
                }
                TermKind::Modifier(_) => {}
            }
        }

        let Some(target) = redirect_target else {
            return AllPolicy {
                restrictive: false,
                plus_all: false,
            };
        };
        if seen.contains(&target) {
            return AllPolicy {
                restrictive: false,
                plus_all: false,
            };
        }
        seen.push(target.clone());
        match fetch_and_classify(&target, resolver).await {
            Ok(next) => current = next,
            Err(_) => {
                return AllPolicy {
                    restrictive: false,
                    plus_all: false,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LargeCidrRow {
    pub direct: u64,
    pub via_include: u64,
}

/// Buckets large-range contributions (prefix ≤ /16) by prefix and
/// provenance — the two-column "large IP ranges" table.
pub fn flag_large_cidrs(expansion: &ExpansionReport) -> BTreeMap<u8, LargeCidrRow> {
    let mut table = BTreeMap::new();
    for c in &expansion.contributions {
        if c.kind == ContributionKind::All || c.cidr.prefix > HUGE_CIDR_MAX_PREFIX {
            continue;
        }
        let row: &mut LargeCidrRow = table.entry(c.cidr.prefix).or_default();
        if c.via_include {
            row.via_include += 1;
        } else {
            row.direct += 1;
        }
    }
    table
}
