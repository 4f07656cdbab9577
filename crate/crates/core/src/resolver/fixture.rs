//! Deterministic zone fixtures: every other module is testable offline.

use std::collections::HashMap;
use std::io::BufRead;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::path::Path;

use async_trait::async_trait;

use super::{name_length_error, normalize_name, DnsAnswer, DnsQuery, RecordData, Resolver, RrType};

/// An in-memory zone: a map from (name, rrtype) to a canned answer, plus
/// name-level injected failures and a default for unlisted names.
#[derive(Debug, Clone, Default)]
pub struct ZoneFixture {
    entries: HashMap<(String, RrType), DnsAnswer>,
    name_errors: HashMap<String, DnsAnswer>,
    default: Option<DnsAnswer>,
}

impl ZoneFixture {
    pub fn new() -> Self {
        ZoneFixture::default()
    }

    /// Overrides the answer for unlisted names (NXDOMAIN by default).
    pub fn with_default(mut self, answer: DnsAnswer) -> Self {
        self.default = Some(answer);
        self
    }

    pub fn with_txt(self, name: &str, payload: &str) -> Self {
        self.with_record(name, RrType::Txt, RecordData::Txt(payload.to_string()))
    }

    pub fn with_a(self, name: &str, addr: Ipv4Addr) -> Self {
        self.with_record(name, RrType::A, RecordData::A(addr))
    }

    pub fn with_aaaa(self, name: &str, addr: Ipv6Addr) -> Self {
        self.with_record(name, RrType::Aaaa, RecordData::Aaaa(addr))
    }

    pub fn with_mx(self, name: &str, preference: u16, exchange: &str) -> Self {
        self.with_record(
            name,
            RrType::Mx,
            RecordData::Mx {
                preference,
                exchange: normalize_name(exchange),
            },
        )
    }

    pub fn with_ptr(self, name: &str, target: &str) -> Self {
        self.with_record(name, RrType::Ptr, RecordData::Ptr(normalize_name(target)))
    }

    pub fn with_spf_rrt(self, name: &str, payload: &str) -> Self {
        self.with_record(name, RrType::Spf, RecordData::Txt(payload.to_string()))
    }

    pub fn with_record(mut self, name: &str, rrtype: RrType, data: RecordData) -> Self {
        self.push_record(name, rrtype, data);
        self
    }

    pub fn with_error(mut self, name: &str, answer: DnsAnswer) -> Self {
        self.name_errors.insert(normalize_name(name), answer);
        self
    }

    /// Appends a record; repeated inserts for one key grow the answer set.
    pub fn push_record(&mut self, name: &str, rrtype: RrType, data: RecordData) {
        let key = (normalize_name(name), rrtype);
        match self
            .entries
            .entry(key)
            .or_insert_with(|| DnsAnswer::Records(Vec::new()))
        {
            DnsAnswer::Records(records) => records.push(data),
            other => *other = DnsAnswer::Records(vec![data]),
        }
    }

    pub fn push_error(&mut self, name: &str, answer: DnsAnswer) {
        self.name_errors.insert(normalize_name(name), answer);
    }

    /// True when the fixture has an explicit entry for this query; overlay
    /// mode uses this to decide whether to fall through to a live resolver.
    pub fn covers(&self, query: &DnsQuery) -> bool {
        self.entries
            .contains_key(&(query.name.clone(), query.rrtype))
            || self.name_errors.contains_key(&query.name)
    }

    pub fn lookup(&self, query: &DnsQuery) -> DnsAnswer {
        if let Some(bad) = name_length_error(&query.name) {
            return bad;
        }
        if let Some(answer) = self.entries.get(&(query.name.clone(), query.rrtype)) {
            return answer.clone();
        }
        if let Some(answer) = self.name_errors.get(&query.name) {
            return answer.clone();
        }
        self.default.clone().unwrap_or(DnsAnswer::NxDomain)
    }
}

#[async_trait]
impl Resolver for ZoneFixture {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        self.lookup(query)
    }
}

/// Fixture consulted first, live resolver for anything it does not cover.
pub struct OverlayResolver<R> {
    fixture: ZoneFixture,
    fallback: R,
}

impl<R: Resolver> OverlayResolver<R> {
    pub fn new(fixture: ZoneFixture, fallback: R) -> Self {
        OverlayResolver { fixture, fallback }
    }
}

#[async_trait]
impl<R: Resolver> Resolver for OverlayResolver<R> {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        if self.fixture.covers(query) {
            self.fixture.lookup(query)
        } else {
            self.fallback.resolve(query).await
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ZoneParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("failed to read zone fixture: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the line-oriented fixture format:
///
/// ```text
/// # comment
/// a.test   TXT   "v=spf1 -all"
/// m.test   MX    10 mail.test
/// h.test   A     192.0.2.1
/// h6.test  AAAA  2001:db8::1
/// p.test   PTR   host.test
/// s.test   SPF   "v=spf1 -all"
/// b.test   ERROR NXDOMAIN
/// ```
///
/// TXT/SPF values are double-quoted with `\"` and `\\` escapes; duplicate
/// keys append to the answer set. `ERROR` accepts NXDOMAIN, EMPTY, TIMEOUT,
/// SERVFAIL and DECODE.
pub fn load_zone_fixture<R: BufRead>(reader: R) -> Result<ZoneFixture, ZoneParseError> {
    let mut zone = ZoneFixture::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }

        let malformed = |message: String| ZoneParseError::Malformed {
            line: lineno,
            message,
        };

        let (name, rest) = trimmed
            .split_once(char::is_whitespace)
            .ok_or_else(|| malformed("expected `<name> <RRTYPE> <value>`".to_string()))?;
        let rest = rest.trim_start();
        let (rrtype_str, value) = match rest.split_once(char::is_whitespace) {
            Some((t, v)) => (t, v.trim_start()),
            None => (rest, ""),
        };

        if rrtype_str.eq_ignore_ascii_case("ERROR") {
            let answer = match value.to_ascii_uppercase().as_str() {
                "NXDOMAIN" => DnsAnswer::NxDomain,
                "EMPTY" => DnsAnswer::Empty,
                "TIMEOUT" => DnsAnswer::Timeout,
                "SERVFAIL" => DnsAnswer::ServFail,
                "DECODE" => DnsAnswer::DecodeError,
                other => return Err(malformed(format!("unknown error kind '{other}'"))),
            };
            zone.push_error(name, answer);
            continue;
        }

        let rrtype = RrType::from_str_ci(rrtype_str)
            .ok_or_else(|| malformed(format!("unknown record type '{rrtype_str}'")))?;

        let data = match rrtype {
            RrType::Txt | RrType::Spf => {
                RecordData::Txt(parse_quoted(value).map_err(|m| malformed(m.to_string()))?)
            }
            RrType::A => RecordData::A(
                value
                    .parse::<Ipv4Addr>()
                    .map_err(|e| malformed(format!("bad A value: {e}")))?,
            ),
            RrType::Aaaa => RecordData::Aaaa(
                value
                    .parse::<Ipv6Addr>()
                    .map_err(|e| malformed(format!("bad AAAA value: {e}")))?,
            ),
            RrType::Mx => {
                let (pref, host) = value
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| malformed("expected `<pref> <host>`".to_string()))?;
                RecordData::Mx {
                    preference: pref
                        .parse()
                        .map_err(|e| malformed(format!("bad MX preference: {e}")))?,
                    exchange: normalize_name(host.trim()),
                }
            }
            RrType::Ptr => RecordData::Ptr(normalize_name(value)),
        };
        zone.push_record(name, rrtype, data);
    }
    Ok(zone)
}

pub fn load_zone_fixture_file(path: &Path) -> Result<ZoneFixture, ZoneParseError> {
    let file = std::fs::File::open(path)?;
    load_zone_fixture(std::io::BufReader::new(file))
}

fn parse_quoted(value: &str) -> Result<String, &'static str> {
    let inner = value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .ok_or("expected double-quoted value")?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                _ => return Err("bad escape in quoted value"),
            }
        } else if c == '"' {
            return Err("unescaped quote inside value");
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[tokio::test]
    async fn fixture_lookup_and_default() {
        let zone = ZoneFixture::new().with_txt("a.test", "v=spf1 -all");
        let answer = zone.resolve(&DnsQuery::new("a.test", RrType::Txt)).await;
        assert_eq!(
            answer,
            DnsAnswer::Records(vec![RecordData::Txt("v=spf1 -all".to_string())])
        );
        let missing = zone.resolve(&DnsQuery::new("nx.test", RrType::Txt)).await;
        assert_eq!(missing, DnsAnswer::NxDomain);
    }

    #[tokio::test]
    async fn oversized_labels_are_answers_not_panics() {
        let zone = ZoneFixture::new();
        let long_label = format!("{}.test", "a".repeat(64));
        let answer = zone.resolve(&DnsQuery::new(&long_label, RrType::Txt)).await;
        assert_eq!(answer, DnsAnswer::LabelTooLong);

        let long_name = std::iter::repeat_n("label", 60)
            .collect::<Vec<_>>()
            .join(".");
        let answer = zone.resolve(&DnsQuery::new(&long_name, RrType::Txt)).await;
        assert_eq!(answer, DnsAnswer::NameTooLong);
    }

    #[test]
    fn name_normalization() {
        let q = DnsQuery::new("ExAmple.COM.", RrType::A);
        assert_eq!(q.name, "example.com");
    }

    #[test]
    fn loads_the_documented_format() {
        let text = r#"
# corpus fixture
a.test TXT "v=spf1 -all"
a.test TXT "other=1"
b.test ERROR NXDOMAIN
m.test MX 10 mail.test
h.test A 192.0.2.1
h6.test AAAA 2001:db8::1
q.test TXT "say \"hi\" \\ there"
"#;
        let zone = load_zone_fixture(Cursor::new(text)).unwrap();
        match zone.lookup(&DnsQuery::new("a.test", RrType::Txt)) {
            DnsAnswer::Records(r) => assert_eq!(r.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            zone.lookup(&DnsQuery::new("b.test", RrType::Txt)),
            DnsAnswer::NxDomain
        );
        assert_eq!(
            zone.lookup(&DnsQuery::new("m.test", RrType::Mx)),
            DnsAnswer::Records(vec![RecordData::Mx {
                preference: 10,
                exchange: "mail.test".to_string()
            }])
        );
        match zone.lookup(&DnsQuery::new("q.test", RrType::Txt)) {
            DnsAnswer::Records(r) => {
                assert_eq!(r, vec![RecordData::Txt(r#"say "hi" \ there"#.to_string())])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let text = "a.test TXT \"ok\"\nbroken line\n";
        let err = load_zone_fixture(Cursor::new(text)).unwrap_err();
        match err {
            ZoneParseError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[tokio::test]
    async fn overlay_prefers_fixture_entries() {
        let fixture = ZoneFixture::new().with_txt("pinned.test", "v=spf1 -all");
        let fallback = ZoneFixture::new()
            .with_txt("pinned.test", "v=spf1 +all")
            .with_txt("other.test", "v=spf1 mx");
        let overlay = OverlayResolver::new(fixture, fallback);

        let pinned = overlay
            .resolve(&DnsQuery::new("pinned.test", RrType::Txt))
            .await;
        assert_eq!(pinned.txt_strings(), vec!["v=spf1 -all".to_string()]);
        let other = overlay
            .resolve(&DnsQuery::new("other.test", RrType::Txt))
            .await;
        assert_eq!(other.txt_strings(), vec!["v=spf1 mx".to_string()]);
    }
}
