//! Thin HTTP client for the audit service.

use serde::de::DeserializeOwned;
use serde::Serialize;

use spf_audit::api::*;
use spf_audit::corpus::{CorpusStats, DomainAudit};
use spf_audit::eval::CheckOutcome;
use spf_audit::policy::ExpansionReport;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("service returned {status}: {message}")]
    Api {
        status: reqwest::StatusCode,
        message: String,
    },
}

pub struct SpfAuditClient {
    base_url: String,
    http: reqwest::Client,
}

impl SpfAuditClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        SpfAuditClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ClientError> {
        let response = self
            .http
            .post(format!("{}{path}", self.base_url))
            .json(body)
            .send()
            .await?;
        let status = response.status();
        if !status.is_success() {
            let message = match response.json::<ErrorBody>().await {
                Ok(body) => body.error,
                Err(_) => status.to_string(),
            };
            return Err(ClientError::Api { status, message });
        }
        Ok(response.json().await?)
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        let response = self
            .http
            .get(format!("{}/healthz", self.base_url))
            .send()
            .await?;
        Ok(response.error_for_status()?.json().await?)
    }

    pub async fn parse(&self, req: &ParseRequest) -> Result<ParseResponse, ClientError> {
        self.post("/v1/parse", req).await
    }

    pub async fn check(&self, req: &CheckRequest) -> Result<CheckOutcome, ClientError> {
        self.post("/v1/check", req).await
    }

    pub async fn audit(&self, req: &AuditRequest) -> Result<DomainAudit, ClientError> {
        self.post("/v1/audit", req).await
    }

    pub async fn expand(&self, req: &ExpandRequest) -> Result<ExpansionReport, ClientError> {
        self.post("/v1/expand", req).await
    }

    pub async fn spoofable(
        &self,
        req: &SpoofableRequest,
    ) -> Result<SpoofableResponse, ClientError> {
        self.post("/v1/spoofable", req).await
    }

    pub async fn scan(&self, req: &ScanRequest) -> Result<ScanResponse, ClientError> {
        self.post("/v1/scan", req).await
    }

    pub async fn stats(&self, req: &StatsRequest) -> Result<CorpusStats, ClientError> {
        self.post("/v1/stats", req).await
    }

    pub async fn remediation(
        &self,
        req: &RemediationRequest,
    ) -> Result<RemediationResponse, ClientError> {
        self.post("/v1/remediation", req).await
    }
}
