//! Minimal DMARC presence and policy detection.

use serde::{Deserialize, Serialize};

use crate::resolver::{DnsAnswer, DnsQuery, Resolver, RrType};

pub const DMARC_VERSION_TAG: &str = "v=DMARC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmarcPolicy {
    None,
    Quarantine,
    Reject,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmarcStatus {
    pub present: bool,
    pub policy: Option<DmarcPolicy>,
    pub raw: Option<String>,
    pub warnings: Vec<String>,
}

/// Queries TXT at `_dmarc.<domain>` and extracts the `p=` tag.
///
/// Exactly one record starting with `v=DMARC1` counts as present; several
/// DMARC strings make the policy undiscoverable and mark the domain absent
/// with a warning. Resolver trouble is an annotation, never an error.
pub async fn fetch_dmarc(domain: &str, resolver: &dyn Resolver) -> DmarcStatus {
    let name = format!("_dmarc.{domain}");
    let answer = resolver.resolve(&DnsQuery::new(&name, RrType::Txt)).await;

    let mut status = DmarcStatus::default();
    let records = match &answer {
        DnsAnswer::Records(_) => answer.txt_strings(),
        DnsAnswer::NxDomain | DnsAnswer::Empty => return status,
        other => {
            status.warnings.push(format!("dns error: {other:?}"));
            return status;
        }
    };

    let dmarc: Vec<&String> = records
        .iter()
        .filter(|r| {
            r.get(..DMARC_VERSION_TAG.len())
                .is_some_and(|head| head.eq_ignore_ascii_case(DMARC_VERSION_TAG))
        })
        .collect();

    match dmarc.len() {
        0 => status,
        1 => {
            status.present = true;
            status.raw = Some(dmarc[0].clone());
            match extract_policy(dmarc[0]) {
                PolicyTag::Valid(policy) => status.policy = Some(policy),
                PolicyTag::Invalid(value) => {
                    status
                        .warnings
                        .push(format!("unrecognized p= value '{value}'"));
                }
                PolicyTag::Missing => {
                    status.warnings.push("missing p= tag".to_string());
                }
            }
            status
        }
        n => {
            status
                .warnings
                .push(format!("{n} DMARC records published; treating as absent"));
            status
        }
    }
}

enum PolicyTag {
    Valid(DmarcPolicy),
    Invalid(String),
    Missing,
}

fn extract_policy(raw: &str) -> PolicyTag {
    for part in raw.split(';') {
        let part = part.trim();
        let Some((tag, value)) = part.split_once('=') else {
            continue;
        };
        if !tag.trim().eq_ignore_ascii_case("p") {
            continue;
        }
        return match value.trim().to_ascii_lowercase().as_str() {
            "none" => PolicyTag::Valid(DmarcPolicy::None),
            "quarantine" => PolicyTag::Valid(DmarcPolicy::Quarantine),
            "reject" => PolicyTag::Valid(DmarcPolicy::Reject),
            other => PolicyTag::Invalid(other.to_string()),
        };
    }
    PolicyTag::Missing
}
