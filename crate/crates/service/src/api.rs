//! REST surface over a shared orchestrator.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use faultfabric::fabric::resources::ResourceKind;
use faultfabric::orchestrator::{CampaignId, HandleId, OrchestratorError, PlanDocument};
use faultfabric::{FaultSpec, Orchestrator, ResourceId, TenantId};

pub type Shared = Arc<Mutex<Orchestrator>>;

/// Error body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: code.into(),
                message: message.into(),
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        use OrchestratorError as E;
        let (status, code) = match &e {
            E::UnknownTenant(_) => (StatusCode::NOT_FOUND, "unknown_tenant"),
            E::UnknownResource { .. } => (StatusCode::NOT_FOUND, "unknown_resource"),
            E::UnknownHandle(_) => (StatusCode::NOT_FOUND, "unknown_injection"),
            E::UnknownCampaign(_) => (StatusCode::NOT_FOUND, "unknown_campaign"),
            E::NotOwner { .. } => (StatusCode::FORBIDDEN, "not_owner"),
            E::ItemBusy(_) => (StatusCode::CONFLICT, "item_busy"),
            E::HandleFinished(_) => (StatusCode::CONFLICT, "injection_finished"),
            E::CampaignAlreadyRunning { .. } => (StatusCode::CONFLICT, "campaign_already_running"),
            E::AlreadyFinished(_) => (StatusCode::CONFLICT, "already_finished"),
            E::NotTerminated(_) => (StatusCode::CONFLICT, "not_terminated"),
            E::InvalidSpec(_) => (StatusCode::BAD_REQUEST, "invalid_spec"),
            E::NoItems { .. } => (StatusCode::BAD_REQUEST, "no_items"),
            E::PlanInvalid(_) => (StatusCode::BAD_REQUEST, "plan_invalid"),
            E::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn lock(state: &Shared) -> MutexGuard<'_, Orchestrator> {
    // A panic inside the orchestrator is a bug; keep serving reads anyway.
    state.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Deserialize)]
pub struct TenantQuery {
    pub tenant: Option<String>,
}

/// Body of `POST /inject/{kind}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectRequest {
    pub tenant_id: TenantId,
    pub id: ResourceId,
    #[serde(flatten)]
    pub spec: FaultSpec,
}

/// Body of `POST /inject/config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFaultRequest {
    pub tenant_id: TenantId,
    pub kind: ResourceKind,
    pub id: ResourceId,
    pub outage_ms: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
}

async fn topology(State(s): State<Shared>, Query(q): Query<TenantQuery>) -> ApiResult<Response> {
    let tenant = q
        .tenant
        .ok_or_else(|| ApiError::bad_request("missing `tenant` query parameter"))?;
    let graph = lock(&s).get_network_topology(&TenantId::new(tenant))?;
    Ok(Json(graph).into_response())
}

async fn inject(
    State(s): State<Shared>,
    Path(kind): Path<String>,
    body: Result<Json<InjectRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let kind: ResourceKind = kind
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::NOT_FOUND, "unknown_kind", e))?;
    if !kind.is_injectable() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_kind",
            format!("{kind} is not injectable"),
        ));
    }
    let Json(req) = body?;
    let handle = lock(&s).inject_resource(&req.tenant_id, kind, &req.id, req.spec)?;
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

async fn inject_config(
    State(s): State<Shared>,
    body: Result<Json<ConfigFaultRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let handle = lock(&s).inject_config_fault(&req.tenant_id, req.kind, &req.id, req.outage_ms)?;
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

async fn get_injection(State(s): State<Shared>, Path(id): Path<HandleId>) -> ApiResult<Response> {
    let o = lock(&s);
    let handle = o.handle(id).ok_or(OrchestratorError::UnknownHandle(id))?;
    Ok(Json(handle).into_response())
}

async fn clear_injection(State(s): State<Shared>, Path(id): Path<HandleId>) -> ApiResult<Response> {
    let handle = lock(&s).clear_injection(id)?;
    Ok(Json(handle).into_response())
}

async fn start_campaign(
    State(s): State<Shared>,
    body: Result<Json<PlanDocument>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(doc) = body?;
    let id = lock(&s).start_tests(&doc.tenant_id, doc.plan)?;
    Ok((StatusCode::CREATED, Json(Created { id })).into_response())
}

async fn campaign_status(State(s): State<Shared>, Path(id): Path<CampaignId>) -> ApiResult<Response> {
    Ok(Json(lock(&s).status_tests(id)?).into_response())
}

async fn stop_campaign(State(s): State<Shared>, Path(id): Path<CampaignId>) -> ApiResult<Response> {
    let mut o = lock(&s);
    o.stop_tests(id)?;
    Ok(Json(o.status_tests(id)?).into_response())
}

async fn campaign_report(State(s): State<Shared>, Path(id): Path<CampaignId>) -> ApiResult<Response> {
    Ok(Json(lock(&s).report(id)?).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/topology", get(topology))
        .route("/inject/config", post(inject_config))
        .route("/inject/{kind}", post(inject))
        .route("/injections/{id}", get(get_injection).delete(clear_injection))
        .route("/campaigns", post(start_campaign))
        .route("/campaigns/{id}", get(campaign_status).delete(stop_campaign))
        .route("/campaigns/{id}/report", get(campaign_report))
        .fallback(not_found)
        .with_state(state)
}
