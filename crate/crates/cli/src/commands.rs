use std::io::{BufRead, Read};
use std::net::IpAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use spf_audit::api::{
    AuditRequest, CheckRequest, ExpandRequest, ParseRequest, ScanRequest, SpoofableRequest,
    StatsRequest,
};
use spf_audit::corpus::{
    self, aggregate, load_domain_list, DomainAudit, DomainEntry, ListFormat, ListParseError,
    ScanOptions,
};
use spf_audit::eval::{check_host, SessionInput, SpfResult};
use spf_audit::parser::{parse_spf, ParseMode, SpfParseError};
use spf_audit::policy::{spoofable_domains, Expander, ExpansionLimits};
use spf_audit::report::{
    emit_report, read_audits_jsonl, remediation_text, write_audits_jsonl, write_stats_json,
    NoFindings, ReportError, ReportFormat,
};
use spf_audit::resolver::{
    build_resolver, CachingResolver, RateLimitedResolver, Resolver, ResolverSource,
    ResolverSourceError,
};
use spf_audit_client::SpfAuditClient;

use crate::output;
use crate::{CliError, Command, CommonOpts};

pub async fn run(common: CommonOpts, command: Command) -> Result<u8, CliError> {
    if common.server.is_some() && common.zone.is_some() {
        return Err(CliError::usage(
            "--zone applies to in-process mode; a server owns its own resolution source",
        ));
    }

    match command {
        Command::Check { domain, ip, sender } => cmd_check(&common, &domain, &ip, sender).await,
        Command::Parse { raw } => cmd_parse(&common, raw).await,
        Command::Audit {
            domain,
            remediation,
        } => cmd_audit(&common, &domain, remediation).await,
        Command::Expand { domain, max_depth } => cmd_expand(&common, &domain, max_depth).await,
        Command::Scan {
            list,
            out,
            format,
            list_format,
        } => cmd_scan(&common, &list, &out, &format, &list_format).await,
        Command::Stats {
            audits,
            out,
            format,
        } => cmd_stats(&common, &audits, &out, &format).await,
        Command::Spoofable { ip, corpus } => cmd_spoofable(&common, &ip, &corpus).await,
    }
}

fn map_source_error(err: ResolverSourceError) -> CliError {
    match err {
        ResolverSourceError::NoSource | ResolverSourceError::ConflictingSources => {
            CliError::usage(err.to_string())
        }
        ResolverSourceError::Zone(spf_audit::resolver::ZoneParseError::Io(io)) => {
            CliError::io(format!("zone fixture: {io}"))
        }
        ResolverSourceError::Zone(parse) => CliError::data(parse.to_string()),
        ResolverSourceError::Live(msg) => CliError::data(msg),
    }
}

fn base_resolver(common: &CommonOpts) -> Result<Arc<dyn Resolver>, CliError> {
    build_resolver(&ResolverSource {
        zone: common.zone.clone(),
        endpoint: common.resolver,
        overlay: common.overlay,
        timeout: Some(Duration::from_secs(common.timeout)),
    })
    .map_err(map_source_error)
}

/// Cache and rate-limit decorators for one-shot commands; `scan` layers
/// its own.
fn decorated_resolver(common: &CommonOpts) -> Result<Arc<dyn Resolver>, CliError> {
    let base = base_resolver(common)?;
    let limited: Arc<dyn Resolver> = match common.qps {
        Some(qps) if qps > 0.0 => Arc::new(RateLimitedResolver::new(base, qps)),
        Some(_) => return Err(CliError::usage("--qps must be positive")),
        None => base,
    };
    Ok(Arc::new(CachingResolver::new(limited, common.cache)))
}

fn parse_ip(ip: &str) -> Result<IpAddr, CliError> {
    ip.parse()
        .map_err(|_| CliError::usage(format!("'{ip}' is not an IP address")))
}

fn client(common: &CommonOpts) -> SpfAuditClient {
    SpfAuditClient::new(common.server.clone().unwrap_or_default())
}

fn remote_err(err: spf_audit_client::ClientError) -> CliError {
    CliError::data(err.to_string())
}

pub fn exit_code(result: SpfResult) -> u8 {
    match result {
        SpfResult::Pass => 0,
        SpfResult::Fail | SpfResult::SoftFail => 1,
        SpfResult::Neutral | SpfResult::None => 2,
        SpfResult::TempError => 3,
        SpfResult::PermError => 4,
    }
}

async fn cmd_check(
    common: &CommonOpts,
    domain: &str,
    ip: &str,
    sender: Option<String>,
) -> Result<u8, CliError> {
    let ip = parse_ip(ip)?;
    let sender = sender.unwrap_or_else(|| format!("postmaster@{domain}"));

    let outcome = if common.server.is_some() {
        client(common)
            .check(&CheckRequest {
                ip,
                domain: domain.to_string(),
                sender: Some(sender),
            })
            .await
            .map_err(remote_err)?
    } else {
        let resolver = decorated_resolver(common)?;
        let input = SessionInput::new(ip, &sender).map_err(|e| CliError::usage(e.to_string()))?;
        check_host(&input, domain, &resolver).await
    };

    if common.json {
        println!("{}", to_json(&outcome)?);
    } else {
        output::print_check(domain, &outcome);
    }
    Ok(exit_code(outcome.result))
}

async fn cmd_parse(common: &CommonOpts, raw: Option<String>) -> Result<u8, CliError> {
    let raw = match raw {
        Some(raw) => raw,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::io(format!("stdin: {e}")))?;
            buf.trim_end_matches(['\r', '\n']).to_string()
        }
    };

    if common.server.is_some() {
        let response = client(common)
            .parse(&ParseRequest {
                raw,
                strict: common.strict,
            })
            .await
            .map_err(remote_err)?;
        if common.json {
            println!("{}", to_json(&response)?);
        } else {
            output::print_parse_response(&response);
        }
        return Ok(if response.not_spf || (common.strict && !response.valid) {
            crate::EXIT_DATA
        } else {
            0
        });
    }

    let mode = if common.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    match parse_spf(&raw, mode) {
        Ok(parsed) => {
            if common.json {
                println!("{}", to_json(&parsed)?);
            } else {
                output::print_parsed(&parsed);
            }
            Ok(0)
        }
        Err(SpfParseError::NotSpf) => Err(CliError::data(
            "input does not start with the v=spf1 version tag",
        )),
        Err(SpfParseError::Syntax(errors)) => {
            if common.json {
                println!("{}", to_json(&errors)?);
            } else {
                for err in &errors {
                    println!("error: {} at `{}`", err.kind.subtype_name(), err.token);
                }
            }
            Err(CliError::data("record rejected by strict parsing"))
        }
    }
}

async fn cmd_audit(common: &CommonOpts, domain: &str, remediation: bool) -> Result<u8, CliError> {
    let audit = if common.server.is_some() {
        client(common)
            .audit(&AuditRequest {
                domain: domain.to_string(),
            })
            .await
            .map_err(remote_err)?
    } else {
        let resolver = decorated_resolver(common)?;
        let entry = DomainEntry {
            rank: None,
            domain: domain.to_string(),
        };
        corpus::audit_domain(&entry, resolver).await
    };

    if common.json {
        println!("{}", to_json(&audit)?);
    } else {
        output::print_audit(&audit);
    }

    if remediation {
        match remediation_text(&audit) {
            Ok(text) => println!("\n{text}"),
            Err(NoFindings) => println!("\nno findings"),
        }
    }
    Ok(0)
}

async fn cmd_expand(common: &CommonOpts, domain: &str, max_depth: u32) -> Result<u8, CliError> {
    let report = if common.server.is_some() {
        client(common)
            .expand(&ExpandRequest {
                domain: domain.to_string(),
                honor_lookup_budget: common.honor_budget,
                max_depth: Some(max_depth),
            })
            .await
            .map_err(remote_err)?
    } else {
        let resolver = decorated_resolver(common)?;
        let limits = ExpansionLimits {
            max_depth,
            honor_lookup_budget: common.honor_budget,
        };
        Expander::new(resolver).expand(domain, &limits).await
    };

    if common.json {
        println!("{}", to_json(&report)?);
    } else {
        output::print_expansion(&report);
    }
    Ok(0)
}

fn detect_list_format(path: &Path, requested: &str) -> Result<ListFormat, CliError> {
    match requested {
        "tranco" => return Ok(ListFormat::TrancoCsv),
        "plain" => return Ok(ListFormat::Plain),
        _ => {}
    }
    let file =
        std::fs::File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        return Ok(if trimmed.contains(',') {
            ListFormat::TrancoCsv
        } else {
            ListFormat::Plain
        });
    }
    Ok(ListFormat::Plain)
}

fn load_entries(path: &Path, format: ListFormat) -> Result<Vec<DomainEntry>, CliError> {
    let file =
        std::fs::File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    load_domain_list(std::io::BufReader::new(file), format).map_err(|err| match err {
        ListParseError::Io(io) => CliError::io(format!("{}: {io}", path.display())),
        malformed => CliError::data(format!("{}: {malformed}", path.display())),
    })
}

async fn cmd_scan(
    common: &CommonOpts,
    list: &Path,
    out: &Path,
    format: &str,
    list_format: &str,
) -> Result<u8, CliError> {
    let entries = load_entries(list, detect_list_format(list, list_format)?)?;

    let (audits, dns_cache, record_cache) = if common.server.is_some() {
        let response = client(common)
            .scan(&ScanRequest {
                domains: entries,
                concurrency: Some(common.concurrency),
                qps: common.qps,
                cache_capacity: Some(common.cache),
                honor_lookup_budget: common.honor_budget,
            })
            .await
            .map_err(remote_err)?;
        (
            response.report.audits,
            response.report.dns_cache,
            response.report.record_cache,
        )
    } else {
        let resolver = base_resolver(common)?;
        let options = ScanOptions {
            concurrency: common.concurrency,
            qps: common.qps,
            cache_capacity: common.cache,
            expansion: ExpansionLimits {
                honor_lookup_budget: common.honor_budget,
                ..ExpansionLimits::default()
            },
            record_cache: true,
        };
        let report = corpus::scan(&entries, resolver, &options).await;
        (report.audits, report.dns_cache, report.record_cache)
    };

    eprintln!(
        "scanned {} domains (dns cache {}/{} hit, record cache {} hit)",
        audits.len(),
        dns_cache.hits,
        dns_cache.hits + dns_cache.misses,
        record_cache.hits,
    );

    write_scan_output(&audits, out, format)
}

fn write_scan_output(audits: &[DomainAudit], out: &Path, format: &str) -> Result<u8, CliError> {
    match format {
        "jsonl" => {
            if out == Path::new("-") {
                write_audits_jsonl(audits, std::io::stdout().lock())
                    .map_err(|e| CliError::io(e.to_string()))?;
            } else {
                let stats = aggregate(audits);
                emit_report(&stats, audits, ReportFormat::Jsonl, out).map_err(map_report_error)?;
            }
        }
        "json" => {
            let stats = aggregate(audits);
            if out == Path::new("-") {
                write_stats_json(&stats, std::io::stdout().lock())
                    .map_err(|e| CliError::io(e.to_string()))?;
            } else {
                emit_report(&stats, audits, ReportFormat::Json, out).map_err(map_report_error)?;
            }
        }
        "csv" => {
            if out == Path::new("-") {
                return Err(CliError::usage("--format csv needs --out <directory>"));
            }
            let stats = aggregate(audits);
            let written = emit_report(&stats, audits, ReportFormat::CsvTables, out)
                .map_err(map_report_error)?;
            for path in written {
                eprintln!("wrote {}", path.display());
            }
        }
        other => return Err(CliError::usage(format!("unknown format '{other}'"))),
    }
    Ok(0)
}

fn map_report_error(err: ReportError) -> CliError {
    match err {
        ReportError::Io { .. } => CliError::io(err.to_string()),
        ReportError::Decode { .. } => CliError::data(err.to_string()),
    }
}

async fn cmd_stats(
    common: &CommonOpts,
    audits_path: &Path,
    out: &Path,
    format: &str,
) -> Result<u8, CliError> {
    let file = std::fs::File::open(audits_path)
        .map_err(|e| CliError::io(format!("{}: {e}", audits_path.display())))?;
    let audits =
        read_audits_jsonl(std::io::BufReader::new(file), audits_path).map_err(map_report_error)?;

    let stats = if common.server.is_some() {
        client(common)
            .stats(&StatsRequest {
                audits: audits.clone(),
            })
            .await
            .map_err(remote_err)?
    } else {
        aggregate(&audits)
    };

    match format {
        "json" => {
            if out == Path::new("-") {
                write_stats_json(&stats, std::io::stdout().lock())
                    .map_err(|e| CliError::io(e.to_string()))?;
            } else {
                emit_report(&stats, &audits, ReportFormat::Json, out).map_err(map_report_error)?;
            }
        }
        "csv" => {
            if out == Path::new("-") {
                return Err(CliError::usage("--format csv needs --out <directory>"));
            }
            emit_report(&stats, &audits, ReportFormat::CsvTables, out).map_err(map_report_error)?;
        }
        other => return Err(CliError::usage(format!("unknown format '{other}'"))),
    }
    Ok(0)
}

async fn cmd_spoofable(common: &CommonOpts, ip: &str, corpus_path: &Path) -> Result<u8, CliError> {
    let ip = parse_ip(ip)?;
    let domains = corpus_domains(corpus_path)?;

    let spoofable = if common.server.is_some() {
        client(common)
            .spoofable(&SpoofableRequest { ip, domains })
            .await
            .map_err(remote_err)?
            .domains
    } else {
        let resolver = decorated_resolver(common)?;
        spoofable_domains(ip, &domains, &resolver).await
    };

    if common.json {
        println!("{}", to_json(&spoofable)?);
    } else {
        for domain in &spoofable {
            println!("{domain}");
        }
    }
    Ok(0)
}

/// A corpus file is either an audits.jsonl or a plain domain list.
fn corpus_domains(path: &Path) -> Result<Vec<String>, CliError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let first = content
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));

    if first.is_some_and(|l| l.starts_with('{')) {
        let audits =
            read_audits_jsonl(std::io::Cursor::new(content), path).map_err(map_report_error)?;
        return Ok(audits.into_iter().map(|a| a.domain).collect());
    }

    let mut domains: Vec<String> = Vec::new();
    for line in content.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        // Tolerate ranked lists here too.
        let domain = trimmed.rsplit(',').next().unwrap_or(trimmed).trim();
        domains.push(domain.to_ascii_lowercase());
    }
    Ok(domains)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))
}
