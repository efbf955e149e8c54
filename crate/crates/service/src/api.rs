//! HTTP routes over [`App`].

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use uuid::Uuid;

use crate::app::{App, FitRequest, RegisterJudge, SubmitJudgement};
use crate::domain::StudyDefinition;
use crate::error::{ServiceError, ServiceResult};

pub fn router(app: App) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/studies", post(create_study).get(list_studies))
        .route("/studies/{id}", get(get_study))
        .route("/studies/{id}/wards", get(wards))
        .route("/studies/{id}/judges", post(register_judge))
        .route("/studies/{id}/judges/{jid}", get(get_judge))
        .route("/studies/{id}/judges/{jid}/next-pair", get(next_pair))
        .route("/studies/{id}/judges/{jid}/judgements", post(record_judgement))
        .route("/studies/{id}/export", get(export))
        .route("/studies/{id}/fits", post(start_fit))
        .route("/studies/{id}/results", get(results))
        .with_state(app)
}

/// Runs a blocking operation (anything that fsyncs) off the async workers.
async fn blocking<T, F>(f: F) -> ServiceResult<T>
where
    F: FnOnce() -> ServiceResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

async fn health(State(app): State<App>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "studies": app.list_studies().len() }))
}

async fn create_study(State(app): State<App>, Json(definition): Json<StudyDefinition>) -> ServiceResult<Response> {
    let (info, created) = blocking(move || app.create_study(definition)).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(info)).into_response())
}

async fn list_studies(State(app): State<App>) -> impl IntoResponse {
    Json(app.list_studies())
}

async fn get_study(State(app): State<App>, Path(id): Path<Uuid>) -> ServiceResult<impl IntoResponse> {
    Ok(Json(app.study_info(id)?))
}

async fn wards(State(app): State<App>, Path(id): Path<Uuid>) -> ServiceResult<impl IntoResponse> {
    Ok(Json(app.wards(id)?))
}

async fn register_judge(
    State(app): State<App>,
    Path(id): Path<Uuid>,
    Json(request): Json<RegisterJudge>,
) -> ServiceResult<impl IntoResponse> {
    let judge = blocking(move || app.register_judge(id, request)).await?;
    Ok((StatusCode::CREATED, Json(judge)))
}

async fn get_judge(State(app): State<App>, Path((id, jid)): Path<(Uuid, Uuid)>) -> ServiceResult<impl IntoResponse> {
    Ok(Json(app.judge(id, jid)?))
}

async fn next_pair(State(app): State<App>, Path((id, jid)): Path<(Uuid, Uuid)>) -> ServiceResult<impl IntoResponse> {
    Ok(Json(app.next_pair(id, jid)?))
}

async fn record_judgement(
    State(app): State<App>,
    Path((id, jid)): Path<(Uuid, Uuid)>,
    Json(request): Json<SubmitJudgement>,
) -> ServiceResult<Response> {
    let ack = blocking(move || app.record_judgement(id, jid, request)).await?;
    let status = if ack.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ack)).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn export(
    State(app): State<App>,
    Path(id): Path<Uuid>,
    Query(query): Query<ExportQuery>,
) -> ServiceResult<Response> {
    match query.format.as_deref().unwrap_or("json") {
        "json" => Ok(Json(app.export(id)?).into_response()),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], app.export_csv(id)?).into_response()),
        other => Err(ServiceError::Validation(format!("unknown export format `{other}`"))),
    }
}

async fn start_fit(
    State(app): State<App>,
    Path(id): Path<Uuid>,
    body: Option<Json<FitRequest>>,
) -> ServiceResult<impl IntoResponse> {
    let request = body.map(|Json(r)| r).unwrap_or_default();
    let (record, job) = blocking(move || app.start_fit(id, request)).await?;
    tokio::task::spawn_blocking(move || job.run());
    Ok((StatusCode::ACCEPTED, Json(record)))
}

async fn results(State(app): State<App>, Path(id): Path<Uuid>) -> ServiceResult<impl IntoResponse> {
    Ok(Json(app.results(id)?))
}
