use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::get;
use axum::{Json, Router};

use super::{DeviceStatus, JobRecord, JobSubmission, QpuService, RejectCode, ResultsBody, ServiceError, SubmitResponse};
use crate::http::{ApiError, USER_HEADER};

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e.code {
            RejectCode::NotFound => StatusCode::NOT_FOUND,
            RejectCode::QueueFull => StatusCode::SERVICE_UNAVAILABLE,
            RejectCode::NotCancellable => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code.as_str(), e.message)
    }
}

/// Routes:
///
/// - `POST /v1/jobs` submit a circuit
/// - `GET /v1/jobs/{id}` full job record
/// - `GET /v1/jobs/{id}/results` state plus histogram
/// - `DELETE /v1/jobs/{id}` cancel a queued job
/// - `GET /v1/admin/status` device status
pub fn router(service: QpuService) -> Router {
    Router::new()
        .route("/v1/jobs", axum::routing::post(submit))
        .route("/v1/jobs/{id}", get(get_job).delete(cancel))
        .route("/v1/jobs/{id}/results", get(results))
        .route("/v1/admin/status", get(status))
        .with_state(service)
}

fn owner(headers: &HeaderMap) -> String {
    headers
        .get(USER_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|s| !s.is_empty())
        .unwrap_or("anonymous")
        .to_string()
}

async fn submit(
    State(svc): State<QpuService>,
    headers: HeaderMap,
    Json(body): Json<JobSubmission>,
) -> Result<(StatusCode, Json<SubmitResponse>), ApiError> {
    let id = svc.submit_job(body.to_spec(), body.seed, &owner(&headers))?;
    let state = svc.get_job(&id)?.state;
    Ok((StatusCode::ACCEPTED, Json(SubmitResponse { job_id: id, state })))
}

async fn get_job(State(svc): State<QpuService>, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    Ok(Json(svc.get_job(&id)?))
}

async fn results(State(svc): State<QpuService>, Path(id): Path<String>) -> Result<Json<ResultsBody>, ApiError> {
    let rec = svc.get_job(&id)?;
    Ok(Json(ResultsBody { job_id: rec.job_id, state: rec.state, histogram: rec.result, error: rec.error }))
}

async fn cancel(State(svc): State<QpuService>, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    Ok(Json(svc.cancel_job(&id)?))
}

async fn status(State(svc): State<QpuService>) -> Json<DeviceStatus> {
    Json(svc.get_status())
}
