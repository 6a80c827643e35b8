//! Blocking HTTP client for the REST API.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use faultfabric::mapper::TopologyGraph;
use faultfabric::orchestrator::{CampaignId, CampaignStatus, HandleId, InjectionHandle, PlanDocument, ReportBundle};

use crate::api::{ConfigFaultRequest, Created, ErrorBody, InjectRequest};
use faultfabric::fabric::resources::ResourceKind;

pub const URL_ENV: &str = "FAULTFABRIC_URL";
pub const DEFAULT_URL: &str = "http://127.0.0.1:8080";

#[derive(Debug)]
pub enum ClientError {
    /// The server answered with an error status.
    Api { status: u16, code: String, message: String },
    /// The server could not be reached or sent garbage.
    Transport(String),
}

impl std::fmt::Display for ClientError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClientError::Api { status, code, message } => write!(f, "{code} ({status}): {message}"),
            ClientError::Transport(m) => write!(f, "transport error: {m}"),
        }
    }
}

impl std::error::Error for ClientError {}

pub type ClientResult<T> = Result<T, ClientError>;

pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Client {
            base: base.trim_end_matches('/').to_owned(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish<T: DeserializeOwned>(result: Result<ureq::Response, ureq::Error>) -> ClientResult<T> {
        match result {
            Ok(resp) => resp.into_json().map_err(|e| ClientError::Transport(e.to_string())),
            Err(ureq::Error::Status(status, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                let (code, message) = match serde_json::from_str::<ErrorBody>(&text) {
                    Ok(b) => (b.error, b.message),
                    Err(_) => ("http_error".to_owned(), text),
                };
                Err(ClientError::Api { status, code, message })
            }
            Err(e) => Err(ClientError::Transport(e.to_string())),
        }
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> ClientResult<T> {
        Self::finish(self.agent.get(&self.url(path)).call())
    }

    fn delete<T: DeserializeOwned>(&self, path: &str) -> ClientResult<T> {
        Self::finish(self.agent.delete(&self.url(path)).call())
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> ClientResult<T> {
        Self::finish(self.agent.post(&self.url(path)).send_json(body))
    }

    pub fn topology(&self, tenant: &str) -> ClientResult<TopologyGraph> {
        Self::finish(self.agent.get(&self.url("/topology")).query("tenant", tenant).call())
    }

    pub fn inject(&self, kind: ResourceKind, req: &InjectRequest) -> ClientResult<InjectionHandle> {
        self.post(&format!("/inject/{kind}"), req)
    }

    pub fn config_fault(&self, req: &ConfigFaultRequest) -> ClientResult<InjectionHandle> {
        self.post("/inject/config", req)
    }

    pub fn injection(&self, id: HandleId) -> ClientResult<InjectionHandle> {
        self.get(&format!("/injections/{id}"))
    }

    pub fn clear(&self, id: HandleId) -> ClientResult<InjectionHandle> {
        self.delete(&format!("/injections/{id}"))
    }

    pub fn start_campaign(&self, plan: &PlanDocument) -> ClientResult<CampaignId> {
        self.post::<_, Created>("/campaigns", plan).map(|c| c.id)
    }

    pub fn campaign(&self, id: CampaignId) -> ClientResult<CampaignStatus> {
        self.get(&format!("/campaigns/{id}"))
    }

    pub fn stop_campaign(&self, id: CampaignId) -> ClientResult<CampaignStatus> {
        self.delete(&format!("/campaigns/{id}"))
    }

    pub fn report(&self, id: CampaignId) -> ClientResult<ReportBundle> {
        self.get(&format!("/campaigns/{id}/report"))
    }
}
