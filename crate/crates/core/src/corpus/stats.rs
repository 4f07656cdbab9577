//! Corpus-level aggregation: a pure fold over audits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::eval::ErrorClass;
use crate::policy::LargeCidrRow;

use super::scan::DomainAudit;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusTotals {
    pub scanned: u64,
    pub with_mx: u64,
    pub with_spf: u64,
    pub with_dmarc: u64,
    /// Domains that publish both SPF and MX records.
    pub with_spf_and_mx: u64,
    /// Domains that publish SPF but no MX record.
    pub spf_without_mx: u64,
    /// Deny-all-only policies (`v=spf1 -all` / `v=spf1 ~all`) without MX.
    pub deny_all_without_mx: u64,
    /// Domains whose top-level resolution failed transiently; excluded
    /// from the error histogram.
    pub dns_failures: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Adoption {
    pub mx: f64,
    pub spf: f64,
    pub dmarc: f64,
    /// SPF adoption among domains that have an MX record.
    pub spf_of_mx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub ip_count: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopInclude {
    pub include: String,
    pub used_by: u64,
    pub allowed_ips: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub schema: String,
    pub totals: CorpusTotals,
    pub adoption: Adoption,
    /// Error class → number of domains with at least one error of that
    /// class (a domain counts once per class).
    pub error_histogram: BTreeMap<String, u64>,
    pub record_not_found_breakdown: BTreeMap<String, u64>,
    pub syntax_breakdown: BTreeMap<String, u64>,
    pub invalid_ip_breakdown: BTreeMap<String, u64>,
    /// Empirical CDF of authorized IPv4 counts over expanded domains.
    pub cdf_points: Vec<CdfPoint>,
    pub top_includes: Vec<TopInclude>,
    /// Number of top-level includes → number of domains.
    pub top_level_include_histogram: BTreeMap<u32, u64>,
    /// CIDR prefix → contributions originating inside includes.
    pub subnet_size_histogram: BTreeMap<u8, u64>,
    /// Prefix ≤ /16 → contribution counts split by provenance.
    pub large_cidr_table: BTreeMap<u8, LargeCidrRow>,
}

pub const TOP_INCLUDES_LIMIT: usize = 20;

/// Aggregates a complete audit stream into corpus statistics.
pub fn aggregate(audits: &[DomainAudit]) -> CorpusStats {
    let mut stats = CorpusStats {
        schema: crate::SCHEMA_VERSION.to_string(),
        ..CorpusStats::default()
    };

    let mut ip_counts: Vec<u64> = Vec::new();
    let mut include_usage: BTreeMap<String, u64> = BTreeMap::new();
    let mut include_allowed: BTreeMap<String, u64> = BTreeMap::new();

    for audit in audits {
        stats.totals.scanned += 1;
        if audit.mx_present {
            stats.totals.with_mx += 1;
        }
        if audit.dmarc.present {
            stats.totals.with_dmarc += 1;
        }
        if audit.dns_failed {
            stats.totals.dns_failures += 1;
            continue;
        }
        let has_spf = audit.spf.is_some();
        if has_spf {
            stats.totals.with_spf += 1;
            if audit.mx_present {
                stats.totals.with_spf_and_mx += 1;
            } else {
                stats.totals.spf_without_mx += 1;
                if audit.deny_all_only {
                    stats.totals.deny_all_without_mx += 1;
                }
            }
        }

        let mut classes_seen: BTreeSet<&'static str> = BTreeSet::new();
        for error in &audit.errors {
            if classes_seen.insert(error.name()) {
                *stats
                    .error_histogram
                    .entry(error.name().to_string())
                    .or_insert(0) += 1;
            }
            match error {
                ErrorClass::RecordNotFound { cause } => {
                    *stats
                        .record_not_found_breakdown
                        .entry(cause.name().to_string())
                        .or_insert(0) += 1;
                }
                ErrorClass::InvalidIp { cause } => {
                    *stats
                        .invalid_ip_breakdown
                        .entry(cause.name().to_string())
                        .or_insert(0) += 1;
                }
                ErrorClass::SyntaxError { findings } => {
                    let mut subtypes: BTreeSet<&'static str> = BTreeSet::new();
                    for finding in findings {
                        subtypes.insert(finding.kind.subtype_name());
                    }
                    for subtype in subtypes {
                        *stats
                            .syntax_breakdown
                            .entry(subtype.to_string())
                            .or_insert(0) += 1;
                    }
                }
                _ => {}
            }
        }

        if let Some(expansion) = &audit.expansion {
            ip_counts.push(expansion.ipv4_count);
            *stats
                .top_level_include_histogram
                .entry(expansion.top_level_includes)
                .or_insert(0) += 1;
            for (prefix, count) in &expansion.include_prefix_histogram {
                *stats.subnet_size_histogram.entry(*prefix).or_insert(0) += count;
            }
            for (included, allowed) in &expansion.traversed_includes {
                *include_usage.entry(included.clone()).or_insert(0) += 1;
                include_allowed.insert(included.clone(), *allowed);
            }
        }

        for prefix in &audit.flags.huge_cidr_direct {
            stats.large_cidr_table.entry(*prefix).or_default().direct += 1;
        }
        for prefix in &audit.flags.huge_cidr_via_include {
            stats
                .large_cidr_table
                .entry(*prefix)
                .or_default()
                .via_include += 1;
        }
    }

    if stats.totals.scanned > 0 {
        let scanned = stats.totals.scanned as f64;
        stats.adoption.mx = stats.totals.with_mx as f64 / scanned;
        stats.adoption.spf = stats.totals.with_spf as f64 / scanned;
        stats.adoption.dmarc = stats.totals.with_dmarc as f64 / scanned;
        if stats.totals.with_mx > 0 {
            stats.adoption.spf_of_mx =
                stats.totals.with_spf_and_mx as f64 / stats.totals.with_mx as f64;
        }
    }

    stats.cdf_points = empirical_cdf(&mut ip_counts);

    let mut ranked: Vec<TopInclude> = include_usage
        .into_iter()
        .map(|(include, used_by)| TopInclude {
            allowed_ips: include_allowed.get(&include).copied().unwrap_or(0),
            include,
            used_by,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.used_by
            .cmp(&a.used_by)
            .then_with(|| a.include.cmp(&b.include))
    });
    ranked.truncate(TOP_INCLUDES_LIMIT);
    stats.top_includes = ranked;

    stats
}

/// Sorted (value, cumulative fraction) points; one point per distinct
/// value, non-decreasing fractions ending at 1.0.
fn empirical_cdf(values: &mut [u64]) -> Vec<CdfPoint> {
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_unstable();
    let total = values.len() as f64;
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, value) in values.iter().enumerate() {
        let fraction = (i + 1) as f64 / total;
        match points.last_mut() {
            Some(last) if last.ip_count == *value => last.fraction = fraction,
            _ => points.push(CdfPoint {
                ip_count: *value,
                fraction,
            }),
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_is_all_zeroes() {
        let stats = aggregate(&[]);
        assert_eq!(stats.totals.scanned, 0);
        assert!(stats.cdf_points.is_empty());
        assert!(stats.error_histogram.is_empty());
    }

    #[test]
    fn cdf_quartiles() {
        let mut values = vec![1u64, 16, 256, 1 << 20];
        let points = empirical_cdf(&mut values);
        assert_eq!(points.len(), 4);
        assert_eq!(
            points[0],
            CdfPoint {
                ip_count: 1,
                fraction: 0.25
            }
        );
        assert_eq!(
            points[1],
            CdfPoint {
                ip_count: 16,
                fraction: 0.5
            }
        );
        assert_eq!(
            points[2],
            CdfPoint {
                ip_count: 256,
                fraction: 0.75
            }
        );
        assert_eq!(
            points[3],
            CdfPoint {
                ip_count: 1 << 20,
                fraction: 1.0
            }
        );
    }

    #[test]
    fn cdf_merges_duplicate_values() {
        let mut values = vec![8u64, 8, 8, 64];
        let points = empirical_cdf(&mut values);
        assert_eq!(points.len(), 2);
        assert_eq!(
            points[0],
            CdfPoint {
                ip_count: 8,
                fraction: 0.75
            }
        );
        assert_eq!(points[1].fraction, 1.0);
        assert!(points.windows(2).all(|w| w[0].fraction <= w[1].fraction));
    }
}
