//! Recursive expansion of a policy into its authorized IPv4 set.
//!
//! Expansion follows include/redirect edges, resolves `a`/`mx` targets and
//! accumulates every address contribution with its provenance. Failures
//! never abort: loops, depth limits and unresolvable terms reduce to
//! `truncated`/`unexpandable` annotations so corpus scans always complete.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::eval::{fetch_and_classify, RecordNotFoundCause, MAX_DNS_LOOKUPS};
use crate::ipset::{Cidr4, IpSet};
use crate::parser::{Mechanism, Qualifier, Term, TermKind};
use crate::resolver::{DnsAnswer, DnsQuery, RecordData, Resolver, RrType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionKind {
    Ip4,
    A,
    Mx,
    All,
}

/// One CIDR added to the authorized set, with its source term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    /// Rendered source term.
    pub term: String,
    /// Domain whose record contains the term.
    pub origin: String,
    pub cidr: Cidr4,
    pub kind: ContributionKind,
    /// True when the term was reached through at least one include edge.
    pub via_include: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Include,
    Redirect,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IncludeEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UnexpandableReason {
    /// `exists` is session-dependent and cannot be expanded statically.
    ExistsMechanism,
    /// `ptr` depends on the sending host's reverse zone.
    PtrMechanism,
    /// The argument carries macros and varies per session.
    MacroArgument,
    /// The referenced record could not be fetched.
    TargetNotFound { cause: RecordNotFoundCause },
    /// The term did not parse.
    InvalidTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnexpandableTerm {
    pub origin: String,
    pub term: String,
    #[serde(flatten)]
    pub reason: UnexpandableReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionLimits {
    /// Maximum include/redirect chain length.
    pub max_depth: u32,
    /// Enforce the evaluation-time 10-lookup budget. Off by default so
    /// per-include totals reflect the full published policy rather than
    /// what a budgeted evaluation could visit.
    pub honor_lookup_budget: bool,
}

impl Default for ExpansionLimits {
    fn default() -> Self {
        ExpansionLimits {
            max_depth: 20,
            honor_lookup_budget: false,
        }
    }
}

/// Everything the expansion learned about one domain's policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub domain: String,
    /// Canonical union of all IPv4 contributions.
    pub ipset: IpSet,
    /// IPv6 contributions, recorded but excluded from IPv4 statistics.
    pub ip6_cidrs: BTreeSet<String>,
    pub contributions: Vec<Contribution>,
    pub unexpandable: Vec<UnexpandableTerm>,
    /// Include terms lexically present in this domain's own record.
    pub top_level_includes: u32,
    /// Longest chain of include edges traversed.
    pub include_depth_max: u32,
    pub truncated: bool,
    pub truncated_reason: Option<String>,
    /// Include/redirect edges of the reachable policy graph.
    pub edges: BTreeSet<IncludeEdge>,
    /// Every include target traversed, with the exact address count of its
    /// own expansion.
    pub traversed_includes: BTreeMap<String, u64>,
    /// Counted terms consumed; meaningful when the budget is honored.
    pub lookups_used: u32,
}

impl ExpansionReport {
    fn empty(domain: &str) -> Self {
        ExpansionReport {
            domain: domain.to_string(),
            ipset: IpSet::new(),
            ip6_cidrs: BTreeSet::new(),
            contributions: Vec::new(),
            unexpandable: Vec::new(),
            top_level_includes: 0,
            include_depth_max: 0,
            truncated: false,
            truncated_reason: None,
            edges: BTreeSet::new(),
            traversed_includes: BTreeMap::new(),
            lookups_used: 0,
        }
    }

    fn truncate(&mut self, reason: &str) {
        self.truncated = true;
        if self.truncated_reason.is_none() {
            self.truncated_reason = Some(reason.to_string());
        }
    }
}

struct BudgetState {
    remaining: u32,
}

/// Expands domains into authorized-IP reports, memoizing loop-free
/// per-domain results so shared includes are analyzed once.
pub struct Expander<R> {
    resolver: R,
    memo: Mutex<HashMap<String, Arc<ExpansionReport>>>,
}

impl<R: Resolver> Expander<R> {
    pub fn new(resolver: R) -> Self {
        Expander {
            resolver,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn resolver(&self) -> &R {
        &self.resolver
    }

    pub async fn expand(&self, domain: &str, limits: &ExpansionLimits) -> ExpansionReport {
        let domain = crate::resolver::normalize_name(domain);
        let mut budget = limits.honor_lookup_budget.then_some(BudgetState {
            remaining: MAX_DNS_LOOKUPS,
        });
        let mut visiting = vec![domain.clone()];
        let (report, _tainted) = self.walk(domain, limits, &mut visiting, &mut budget).await;
        let mut report = (*report).clone();
        if let Some(budget) = &budget {
            report.lookups_used = MAX_DNS_LOOKUPS - budget.remaining;
        }
        report
    }

    /// Expands one domain; `tainted` marks results involved in a cycle,
    /// which are path-dependent and therefore never memoized.
    fn walk<'a>(
        &'a self,
        domain: String,
        limits: &'a ExpansionLimits,
        visiting: &'a mut Vec<String>,
        budget: &'a mut Option<BudgetState>,
    ) -> std::pin::Pin<
        Box<dyn std::future::Future<Output = (Arc<ExpansionReport>, bool)> + Send + 'a>,
    > {
        Box::pin(async move {
            if budget.is_none() {
                if let Some(hit) = self.memo.lock().get(&domain) {
                    return (hit.clone(), false);
                }
            }

            let mut report = ExpansionReport::empty(&domain);
            let mut tainted = false;

            let parsed = match fetch_and_classify(&domain, &self.resolver).await {
                Ok(parsed) => parsed,
                Err(cause) => {
                    // Nothing to expand; the caller annotates its own term.
                    let _ = cause;
                    return (Arc::new(report), false);
                }
            };

            report.top_level_includes = parsed
                .record
                .terms
                .iter()
                .filter(|t| {
                    matches!(
                        &t.kind,
                        TermKind::Directive(d) if matches!(d.mechanism, Mechanism::Include { .. })
                    )
                })
                .count() as u32;

            for term in &parsed.record.terms {
                if !self.charge(budget, term, &mut report) {
                    break;
                }
                match &term.kind {
                    TermKind::Directive(d) => {
                        tainted |= self
                            .expand_mechanism(
                                term,
                                d.qualifier,
                                &d.mechanism,
                                limits,
                                visiting,
                                budget,
                                &mut report,
                            )
                            .await;
                    }
                    TermKind::Modifier(m) if m.name == "redirect" => {
                        tainted |= self
                            .follow_redirect(
                                term,
                                m.value.as_str(),
                                limits,
                                visiting,
                                budget,
                                &mut report,
                            )
                            .await;
                        break; // statements after a redirect are ignored
                    }
                    TermKind::Modifier(_) => {}
                }
            }

            let report = Arc::new(report);
            if budget.is_none() && !tainted {
                self.memo.lock().insert(domain.clone(), report.clone());
            }
            (report, tainted)
        })
    }

    /// Returns false when the lookup budget is exhausted and the walk of
    /// this record must stop.
    fn charge(
        &self,
        budget: &mut Option<BudgetState>,
        term: &Term,
        report: &mut ExpansionReport,
    ) -> bool {
        let Some(state) = budget else { return true };
        if !crate::eval::term_causes_lookup(&term.kind) {
            return true;
        }
        if state.remaining == 0 {
            report.truncate("lookup budget exhausted");
            return false;
        }
        state.remaining -= 1;
        true
    }

    #[allow(clippy::too_many_arguments)]
    async fn expand_mechanism(
        &self,
        term: &Term,
        qualifier: Qualifier,
        mechanism: &Mechanism,
        limits: &ExpansionLimits,
        visiting: &mut Vec<String>,
        budget: &mut Option<BudgetState>,
        report: &mut ExpansionReport,
    ) -> bool {
        let origin = report.domain.clone();
        let rendered = term.render();
        match mechanism {
            Mechanism::All => {
                // Only a Pass-qualified `all` authorizes addresses.
                if qualifier == Qualifier::Pass {
                    let cidr = Cidr4::new([0, 0, 0, 0].into(), 0);
                    report.ipset.insert_cidr(cidr);
                    report.contributions.push(Contribution {
                        term: rendered,
                        origin,
                        cidr,
                        kind: ContributionKind::All,
                        via_include: false,
                    });
                }
                false
            }
            Mechanism::Ip4 { addr, prefix } => {
                let cidr = Cidr4::new(*addr, *prefix);
                report.ipset.insert_cidr(cidr);
                report.contributions.push(Contribution {
                    term: rendered,
                    origin,
                    cidr,
                    kind: ContributionKind::Ip4,
                    via_include: false,
                });
                false
            }
            Mechanism::Ip6 { addr, prefix } => {
                report.ip6_cidrs.insert(format!("{addr}/{prefix}"));
                false
            }
            Mechanism::A {
                domain: target,
                cidr4,
                ..
            } => {
                self.expand_hosts(
                    target.as_ref().map(|m| m.as_str()),
                    *cidr4,
                    ContributionKind::A,
                    &rendered,
                    report,
                )
                .await;
                false
            }
            Mechanism::Mx {
                domain: target,
                cidr4,
                ..
            } => {
                let Some(name) =
                    self.static_target(target.as_ref().map(|m| m.as_str()), &rendered, report)
                else {
                    return false;
                };
                let answer = self
                    .resolver
                    .resolve(&DnsQuery::new(&name, RrType::Mx))
                    .await;
                if let DnsAnswer::Records(records) = answer {
                    let mut hosts: Vec<(u16, String)> = records
                        .iter()
                        .filter_map(|r| match r {
                            RecordData::Mx {
                                preference,
                                exchange,
                            } => Some((*preference, exchange.clone())),
                            _ => None,
                        })
                        .collect();
                    hosts.sort();
                    for (_, host) in hosts {
                        self.add_a_records(&host, *cidr4, ContributionKind::Mx, &rendered, report)
                            .await;
                    }
                }
                false
            }
            Mechanism::Ptr { .. } => {
                report.unexpandable.push(UnexpandableTerm {
                    origin,
                    term: rendered,
                    reason: UnexpandableReason::PtrMechanism,
                });
                false
            }
            Mechanism::Exists { .. } => {
                report.unexpandable.push(UnexpandableTerm {
                    origin,
                    term: rendered,
                    reason: UnexpandableReason::ExistsMechanism,
                });
                false
            }
            Mechanism::Include { domain: target } => {
                if target.is_dynamic() {
                    report.unexpandable.push(UnexpandableTerm {
                        origin,
                        term: rendered,
                        reason: UnexpandableReason::MacroArgument,
                    });
                    return false;
                }
                let name = crate::resolver::normalize_name(target.as_str());
                self.descend(
                    name,
                    EdgeKind::Include,
                    &rendered,
                    limits,
                    visiting,
                    budget,
                    report,
                )
                .await
            }
        }
    }

    async fn follow_redirect(
        &self,
        term: &Term,
        target: &str,
        limits: &ExpansionLimits,
        visiting: &mut Vec<String>,
        budget: &mut Option<BudgetState>,
        report: &mut ExpansionReport,
    ) -> bool {
        let rendered = term.render();
        if target.contains('%') {
            report.unexpandable.push(UnexpandableTerm {
                origin: report.domain.clone(),
                term: rendered,
                reason: UnexpandableReason::MacroArgument,
            });
            return false;
        }
        let name = crate::resolver::normalize_name(target);
        self.descend(
            name,
            EdgeKind::Redirect,
            &rendered,
            limits,
            visiting,
            budget,
            report,
        )
        .await
    }

    /// Recurses into an include or redirect target and merges its report.
    #[allow(clippy::too_many_arguments)]
    async fn descend(
        &self,
        name: String,
        kind: EdgeKind,
        rendered: &str,
        limits: &ExpansionLimits,
        visiting: &mut Vec<String>,
        budget: &mut Option<BudgetState>,
        report: &mut ExpansionReport,
    ) -> bool {
        report.edges.insert(IncludeEdge {
            from: report.domain.clone(),
            to: name.clone(),
            kind,
        });

        if visiting.contains(&name) {
            report.truncate(&format!("{} loop involving {name}", kind_label(kind)));
            return true; // cycle: this result is path-dependent
        }
        if visiting.len() as u32 >= limits.max_depth {
            report.truncate("max chain depth reached");
            return true;
        }

        // Target fetch problems annotate rather than abort.
        if let Err(cause) = fetch_and_classify(&name, &self.resolver).await {
            report.unexpandable.push(UnexpandableTerm {
                origin: report.domain.clone(),
                term: rendered.to_string(),
                reason: UnexpandableReason::TargetNotFound { cause },
            });
            return false;
        }

        visiting.push(name.clone());
        let (child, tainted) = self.walk(name.clone(), limits, visiting, budget).await;
        visiting.pop();

        let via_include = kind == EdgeKind::Include;
        for c in &child.contributions {
            let mut c = c.clone();
            c.via_include = c.via_include || via_include;
            report.contributions.push(c);
        }
        report.ipset.union_with(&child.ipset);
        report.ip6_cidrs.extend(child.ip6_cidrs.iter().cloned());
        report
            .unexpandable
            .extend(child.unexpandable.iter().cloned());
        report.edges.extend(child.edges.iter().cloned());
        for (d, count) in &child.traversed_includes {
            report.traversed_includes.insert(d.clone(), *count);
        }
        if via_include {
            report
                .traversed_includes
                .insert(name.clone(), child.ipset.count());
            report.include_depth_max = report.include_depth_max.max(1 + child.include_depth_max);
        } else {
            report.include_depth_max = report.include_depth_max.max(child.include_depth_max);
        }
        if child.truncated {
            report.truncate(
                child
                    .truncated_reason
                    .as_deref()
                    .unwrap_or("truncated in included record"),
            );
        }
        tainted
    }

    /// Resolves the A records of a target and adds them under the term's
    /// v4 CIDR suffix (default /32).
    async fn expand_hosts(
        &self,
        target: Option<&str>,
        cidr4: Option<u8>,
        kind: ContributionKind,
        rendered: &str,
        report: &mut ExpansionReport,
    ) {
        let Some(name) = self.static_target(target, rendered, report) else {
            return;
        };
        self.add_a_records(&name, cidr4, kind, rendered, report)
            .await;
    }

    /// A missing target argument means the current domain; a macro-bearing
    /// one is unexpandable.
    fn static_target(
        &self,
        target: Option<&str>,
        rendered: &str,
        report: &mut ExpansionReport,
    ) -> Option<String> {
        match target {
            None => Some(report.domain.clone()),
            Some(t) if t.contains('%') => {
                report.unexpandable.push(UnexpandableTerm {
                    origin: report.domain.clone(),
                    term: rendered.to_string(),
                    reason: UnexpandableReason::MacroArgument,
                });
                None
            }
            Some(t) => Some(crate::resolver::normalize_name(t)),
        }
    }

    async fn add_a_records(
        &self,
        name: &str,
        cidr4: Option<u8>,
        kind: ContributionKind,
        rendered: &str,
        report: &mut ExpansionReport,
    ) {
        let answer = self.resolver.resolve(&DnsQuery::new(name, RrType::A)).await;
        let DnsAnswer::Records(records) = answer else {
            return;
        };
        let prefix = cidr4.unwrap_or(32).min(32);
        for record in records {
            if let RecordData::A(addr) = record {
                let cidr = Cidr4::new(addr, prefix);
                report.ipset.insert_cidr(cidr);
                report.contributions.push(Contribution {
                    term: rendered.to_string(),
                    origin: report.domain.clone(),
                    cidr,
                    kind,
                    via_include: false,
                });
            }
        }
    }
}

fn kind_label(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::Include => "include",
        EdgeKind::Redirect => "redirect",
    }
}
