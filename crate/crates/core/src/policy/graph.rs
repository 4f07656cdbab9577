//! Include-graph construction over a corpus of expansion reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::expand::{ExpansionReport, IncludeEdge};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncludeGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<IncludeEdge>,
    /// For each included domain, how many distinct audited domains reach it
    /// through at least one include edge (not edge multiplicity).
    pub usage: BTreeMap<String, u64>,
    /// Exact address count of each included domain's own expansion.
    pub allowed_ips: BTreeMap<String, u64>,
}

impl IncludeGraph {
    /// Included domains ranked by usage descending, ties by name.
    pub fn top_includes(&self, n: usize) -> Vec<(String, u64, u64)> {
        let mut ranked: Vec<(String, u64, u64)> = self
            .usage
            .iter()
            .map(|(domain, used_by)| {
                let allowed = self.allowed_ips.get(domain).copied().unwrap_or(0);
                (domain.clone(), *used_by, allowed)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(n);
        ranked
    }
}

/// Histogram of include terms lexically present in each audited domain's
/// own record; redirect targets' includes do not count at the top level.
pub fn top_level_include_histogram<'a, I>(reports: I) -> BTreeMap<u32, u64>
where
    I: IntoIterator<Item = &'a ExpansionReport>,
{
    let mut histogram = BTreeMap::new();
    for report in reports {
        *histogram.entry(report.top_level_includes).or_insert(0) += 1;
    }
    histogram
}

/// Prefix histogram over contributions that originate inside included
/// records; direct terms and pass-all contributions are excluded.
pub fn subnet_size_distribution<'a, I>(reports: I) -> BTreeMap<u8, u64>
where
    I: IntoIterator<Item = &'a ExpansionReport>,
{
    let mut histogram = BTreeMap::new();
    for report in reports {
        for c in &report.contributions {
            if c.via_include && c.kind != super::expand::ContributionKind::All {
                *histogram.entry(c.cidr.prefix).or_insert(0) += 1;
            }
        }
    }
    histogram
}

/// Folds expansion reports into one include graph.
pub fn build_include_graph<'a, I>(reports: I) -> IncludeGraph
where
    I: IntoIterator<Item = &'a ExpansionReport>,
{
    let mut graph = IncludeGraph::default();
    for report in reports {
        graph.nodes.insert(report.domain.clone());
        for edge in &report.edges {
            graph.nodes.insert(edge.from.clone());
            graph.nodes.insert(edge.to.clone());
            graph.edges.insert(edge.clone());
        }
        // One audited domain counts once per traversed include, however
        // many paths lead there.
        for (included, allowed) in &report.traversed_includes {
            *graph.usage.entry(included.clone()).or_insert(0) += 1;
            graph.allowed_ips.insert(included.clone(), *allowed);
        }
    }
    graph
}
