//! Policy analysis: exact authorized-IP expansion, permissiveness scoring,
//! include-graph construction and reverse spoofability queries.

mod expand;
mod flags;
mod graph;

pub use expand::{
    Contribution, ContributionKind, EdgeKind, Expander, ExpansionLimits, ExpansionReport,
    IncludeEdge, UnexpandableReason, UnexpandableTerm,
};
pub use flags::{
    flag_large_cidrs, permissiveness_flags, LargeCidrRow, PermissivenessFlags,
    HUGE_CIDR_MAX_PREFIX, PERMISSIVE_IP_THRESHOLD,
};
pub use graph::{
    build_include_graph, subnet_size_distribution, top_level_include_histogram, IncludeGraph,
};

use std::net::IpAddr;

use crate::eval::{check_host, SessionInput, SpfResult};
use crate::resolver::Resolver;

/// Exact cardinality of a canonical set; alias kept next to the policy API.
pub fn count_ips(set: &crate::ipset::IpSet) -> u64 {
    set.count()
}

/// Domains whose policy yields Pass for `client_ip`, sorted by name.
///
/// This is the reverse spoofability query: every returned domain authorizes
/// the address, every other corpus domain does not.
pub async fn spoofable_domains(
    client_ip: IpAddr,
    domains: &[String],
    resolver: &dyn Resolver,
) -> Vec<String> {
    let mut spoofable = Vec::new();
    for domain in domains {
        let input = match SessionInput::new(client_ip, &format!("postmaster@{domain}")) {
            Ok(input) => input,
            Err(_) => continue,
        };
        let outcome = check_host(&input, domain, resolver).await;
        if outcome.result == SpfResult::Pass {
            spoofable.push(domain.clone());
        }
    }
    spoofable.sort();
    spoofable.dedup();
    spoofable
}
