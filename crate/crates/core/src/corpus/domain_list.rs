//! Domain list loading: ranked Tranco-style CSV or plain name-per-line.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub rank: Option<u32>,
    pub domain: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListFormat {
    /// `rank,domain` lines.
    TrancoCsv,
    /// One domain per line; `#` comments allowed.
    Plain,
}

#[derive(Debug, thiserror::Error)]
pub enum ListParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("failed to read domain list: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads and deduplicates a domain list. Duplicates merge keeping the best
/// (lowest) rank; entries come back ordered by rank, then input order.
pub fn load_domain_list<R: BufRead>(
    reader: R,
    format: ListFormat,
) -> Result<Vec<DomainEntry>, ListParseError> {
    let mut entries: Vec<DomainEntry> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }

        let entry = match format {
            ListFormat::TrancoCsv => {
                let (rank, domain) =
                    trimmed
                        .split_once(',')
                        .ok_or_else(|| ListParseError::Malformed {
                            line: lineno,
                            message: "expected `rank,domain`".to_string(),
                        })?;
                let rank: u32 = rank.trim().parse().map_err(|e| ListParseError::Malformed {
                    line: lineno,
                    message: format!("bad rank: {e}"),
                })?;
                DomainEntry {
                    rank: Some(rank),
                    domain: crate::resolver::normalize_name(domain.trim()),
                }
            }
            ListFormat::Plain => DomainEntry {
                rank: None,
                domain: crate::resolver::normalize_name(trimmed),
            },
        };

        if entry.domain.is_empty() {
            return Err(ListParseError::Malformed {
                line: lineno,
                message: "empty domain".to_string(),
            });
        }

        match seen.get(&entry.domain) {
            Some(&pos) => {
                let existing = &mut entries[pos];
                if entry.rank.is_some() && (existing.rank.is_none() || entry.rank < existing.rank) {
                    existing.rank = entry.rank;
                }
            }
            None => {
                seen.insert(entry.domain.clone(), entries.len());
                entries.push(entry);
            }
        }
    }

    // Rank order first, unranked entries after in input order.
    let mut indexed: Vec<(usize, DomainEntry)> = entries.into_iter().enumerate().collect();
    indexed.sort_by(|(ia, a), (ib, b)| match (a.rank, b.rank) {
        (Some(ra), Some(rb)) => ra.cmp(&rb).then(ia.cmp(ib)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ia.cmp(ib),
    });
    Ok(indexed.into_iter().map(|(_, e)| e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn tranco_lines() {
        let list = load_domain_list(
            Cursor::new("1,example.com\n2,example.org\n"),
            ListFormat::TrancoCsv,
        )
        .unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].domain, "example.com");
        assert_eq!(list[0].rank, Some(1));
    }

    #[test]
    fn duplicates_keep_lowest_rank() {
        let list = load_domain_list(
            Cursor::new("5,dup.test\n7,other.test\n9,dup.test\n"),
            ListFormat::TrancoCsv,
        )
        .unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(
            list[0],
            DomainEntry {
                rank: Some(5),
                domain: "dup.test".to_string()
            }
        );
    }

    #[test]
    fn lowest_rank_wins_regardless_of_order() {
        let list = load_domain_list(
            Cursor::new("9,dup.test\n5,dup.test\n"),
            ListFormat::TrancoCsv,
        )
        .unwrap();
        assert_eq!(list[0].rank, Some(5));
    }

    #[test]
    fn plain_format() {
        let list = load_domain_list(
            Cursor::new("# corpus\nExample.COM\nexample.org\nexample.com\n"),
            ListFormat::Plain,
        )
        .unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].domain, "example.com");
        assert_eq!(list[0].rank, None);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let err = load_domain_list(
            Cursor::new("1,ok.test\nnot-a-rank,x\n"),
            ListFormat::TrancoCsv,
        )
        .unwrap_err();
        match err {
            ListParseError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
