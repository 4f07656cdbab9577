//! Request handlers.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;

use spf_audit::api::*;
use spf_audit::corpus::{self, DomainEntry, ScanOptions};
use spf_audit::eval::{check_host, CheckOutcome, SessionInput};
use spf_audit::parser::{parse_spf, ParseMode, SpfParseError};
use spf_audit::policy::{spoofable_domains, Expander, ExpansionLimits, ExpansionReport};
use spf_audit::report::remediation_text;

use crate::AppState;

type ApiError = (StatusCode, Json<ErrorBody>);

fn bad_request(message: impl Into<String>) -> ApiError {
    (
        StatusCode::BAD_REQUEST,
        Json(ErrorBody {
            error: message.into(),
        }),
    )
}

pub async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".to_string(),
        schema: spf_audit::SCHEMA_VERSION.to_string(),
    })
}

pub async fn parse(Json(req): Json<ParseRequest>) -> Json<ParseResponse> {
    let mode = if req.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let response = match parse_spf(&req.raw, mode) {
        Ok(parsed) => ParseResponse {
            not_spf: false,
            rendered: Some(parsed.record.render()),
            terms: parsed.record.terms.clone(),
            valid: parsed.is_valid(),
            errors: parsed.errors,
            warnings: parsed.warnings,
        },
        Err(SpfParseError::NotSpf) => ParseResponse {
            not_spf: true,
            rendered: None,
            terms: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
            valid: false,
        },
        Err(SpfParseError::Syntax(errors)) => ParseResponse {
            not_spf: false,
            rendered: None,
            terms: Vec::new(),
            errors,
            warnings: Vec::new(),
            valid: false,
        },
    };
    Json(response)
}

pub async fn check(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CheckRequest>,
) -> Result<Json<CheckOutcome>, ApiError> {
    let sender = req
        .sender
        .unwrap_or_else(|| format!("postmaster@{}", req.domain));
    let input = SessionInput::new(req.ip, &sender).map_err(|e| bad_request(e.to_string()))?;
    Ok(Json(check_host(&input, &req.domain, &state.resolver).await))
}

pub async fn audit(
    State(state): State<Arc<AppState>>,
    Json(req): Json<AuditRequest>,
) -> Json<corpus::DomainAudit> {
    let entry = DomainEntry {
        rank: None,
        domain: req.domain,
    };
    Json(corpus::audit_domain(&entry, state.resolver.clone()).await)
}

pub async fn expand(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ExpandRequest>,
) -> Json<ExpansionReport> {
    let limits = ExpansionLimits {
        honor_lookup_budget: req.honor_lookup_budget,
        max_depth: req
            .max_depth
            .unwrap_or(ExpansionLimits::default().max_depth),
    };
    let expander = Expander::new(state.resolver.clone());
    Json(expander.expand(&req.domain, &limits).await)
}

pub async fn spoofable(
    State(state): State<Arc<AppState>>,
    Json(req): Json<SpoofableRequest>,
) -> Json<SpoofableResponse> {
    let domains = spoofable_domains(req.ip, &req.domains, &state.resolver).await;
    Json(SpoofableResponse {
        ip: req.ip,
        domains,
    })
}

pub async fn scan(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ScanRequest>,
) -> Json<ScanResponse> {
    let defaults = ScanOptions::default();
    let options = ScanOptions {
        concurrency: req.concurrency.unwrap_or(defaults.concurrency),
        // The service resolver is already rate limited and cached; only a
        // stricter per-request rate is layered on top.
        qps: req.qps,
        cache_capacity: req.cache_capacity.unwrap_or(defaults.cache_capacity),
        expansion: ExpansionLimits {
            honor_lookup_budget: req.honor_lookup_budget,
            ..ExpansionLimits::default()
        },
        record_cache: true,
    };
    let report = corpus::scan(&req.domains, state.resolver.clone(), &options).await;
    let stats = corpus::aggregate(&report.audits);
    Json(ScanResponse { report, stats })
}

pub async fn stats(Json(req): Json<StatsRequest>) -> Json<corpus::CorpusStats> {
    Json(corpus::aggregate(&req.audits))
}

pub async fn remediation(
    State(state): State<Arc<AppState>>,
    Json(req): Json<RemediationRequest>,
) -> Json<RemediationResponse> {
    let entry = DomainEntry {
        rank: None,
        domain: req.domain,
    };
    let audit = corpus::audit_domain(&entry, state.resolver.clone()).await;
    let remediation = remediation_text(&audit).ok();
    Json(RemediationResponse { audit, remediation })
}
