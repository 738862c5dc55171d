//! HTTP routes under `/v1`. Bodies are JSON except the JSONL ingest and
//! record endpoints and the CSV report variants.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use marginalia_core::export::{
    agreement_csv, consistency_csv, export_annotated, export_records, render_page,
};
use marginalia_core::lint::{lint_rubric_with, LintWarning};
use marginalia_core::model::{
    Assignment, AssignmentId, CommentId, Essay, EssayId, ReviewerId, Rubric, RubricId, RunId,
    Verdict,
};
use marginalia_core::pipeline::{FailedComment, FeedbackComment};
use marginalia_core::records::Corpus;
use marginalia_core::review::{
    ActionKind, EffectiveState, Rater, ReviewAction, RunRecord, RunStatus, Store,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::ops::{ingest, IngestSummary};
use crate::runner::{start_run, RunRequest};
use crate::state::AppState;

pub const REVIEWER_HEADER: &str = "x-reviewer-id";

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/ingest", post(ingest_jsonl))
        .route("/rubrics", get(list_rubrics).post(create_rubric))
        .route("/rubrics/lint", post(lint_only))
        .route("/rubrics/{id}", get(get_rubric))
        .route("/assignments", get(list_assignments).post(create_assignment))
        .route("/assignments/{id}", get(get_assignment))
        .route("/essays", get(list_essays).post(create_essay))
        .route("/essays/{id}", get(get_essay))
        .route("/essays/{id}/comments", get(essay_comments))
        .route("/essays/{id}/export", get(export_essay))
        .route("/runs", get(list_runs).post(create_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/records", get(run_records))
        .route("/comments/{id}", get(get_comment))
        .route("/comments/{id}/actions", get(comment_actions))
        .route("/actions", post(post_action))
        .route("/reports/agreement", get(agreement_report))
        .route("/reports/consistency", get(consistency_report));
    let app = Router::new().nest("/v1", v1);
    let app = match &state.config.static_dir {
        Some(dir) => app.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => app.fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
        }),
    };
    app.with_state(state)
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), "bad_request", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

// ---- ingestion ----

async fn ingest_jsonl(State(state): Shared, body: String) -> ApiResult<(StatusCode, Json<IngestSummary>)> {
    let corpus = Corpus::parse(&body)
        .map_err(|e| ApiError::bad_request(e.to_string()).with_field(format!("line {}", e.line)))?;
    let summary = ingest(&mut state.write(), corpus)?;
    Ok((StatusCode::CREATED, Json(summary)))
}

#[derive(Serialize)]
struct Created<T> {
    #[serde(flatten)]
    item: T,
    warnings: Vec<LintWarning>,
}

async fn create_rubric(
    State(state): Shared,
    body: Result<Json<Rubric>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created<Rubric>>)> {
    let Json(rubric) = body?;
    let warnings = state.write().put_rubric(rubric.clone())?;
    Ok((StatusCode::CREATED, Json(Created { item: rubric, warnings })))
}

#[derive(Serialize)]
struct LintOnly {
    warnings: Vec<LintWarning>,
}

/// Lints without storing, for editing a rubric before it is saved.
async fn lint_only(State(state): Shared, body: Result<Json<Rubric>, JsonRejection>) -> ApiResult<Json<LintOnly>> {
    let Json(rubric) = body?;
    Ok(Json(LintOnly {
        warnings: lint_rubric_with(&rubric, &state.config.lint),
    }))
}

async fn list_rubrics(State(state): Shared) -> Json<Vec<Rubric>> {
    Json(state.read().rubrics().cloned().collect())
}

async fn get_rubric(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<Rubric>> {
    let store = state.read();
    let r = store
        .rubric(&RubricId::from(id.as_str()))
        .ok_or_else(|| ApiError::not_found("rubric", &id))?;
    Ok(Json(r.clone()))
}

async fn create_assignment(
    State(state): Shared,
    body: Result<Json<Assignment>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created<Assignment>>)> {
    let Json(assignment) = body?;
    let mut store = state.write();
    store.put_assignment(assignment.clone())?;
    // the rubrics were linted when stored; repeat their warnings here so the
    // caller sees the whole assignment at once
    let warnings = store
        .rubrics_for(&assignment.id)?
        .iter()
        .flat_map(|r| lint_rubric_with(r, &state.config.lint))
        .collect();
    Ok((StatusCode::CREATED, Json(Created { item: assignment, warnings })))
}

async fn list_assignments(State(state): Shared) -> Json<Vec<Assignment>> {
    Json(state.read().assignments().cloned().collect())
}

async fn get_assignment(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<Assignment>> {
    let store = state.read();
    let a = store
        .assignment(&AssignmentId::from(id.as_str()))
        .ok_or_else(|| ApiError::not_found("assignment", &id))?;
    Ok(Json(a.clone()))
}

#[derive(Serialize)]
struct EssayView {
    #[serde(flatten)]
    essay: Essay,
    sentences: Vec<(usize, usize)>,
}

impl From<&Essay> for EssayView {
    fn from(e: &Essay) -> Self {
        Self {
            sentences: e.sentences().iter().map(|s| (s.start, s.end)).collect(),
            essay: e.clone(),
        }
    }
}

async fn create_essay(
    State(state): Shared,
    body: Result<Json<Essay>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<EssayView>)> {
    let Json(essay) = body?;
    let view = EssayView::from(&essay);
    state.write().put_essay(essay)?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Deserialize)]
struct EssayFilter {
    assignment_id: Option<AssignmentId>,
}

async fn list_essays(
    State(state): Shared,
    query: Result<Query<EssayFilter>, QueryRejection>,
) -> ApiResult<Json<Vec<Essay>>> {
    let Query(filter) = query?;
    let store = state.read();
    let essays = store
        .essays()
        .filter(|e| filter.assignment_id.as_ref().is_none_or(|a| &e.assignment_id == a))
        .cloned()
        .collect();
    Ok(Json(essays))
}

async fn get_essay(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<EssayView>> {
    let store = state.read();
    let e = store
        .essay(&EssayId::from(id.as_str()))
        .ok_or_else(|| ApiError::not_found("essay", &id))?;
    Ok(Json(e.into()))
}

// ---- runs ----

#[derive(Serialize)]
struct Accepted {
    run_id: RunId,
    status: RunStatus,
}

async fn create_run(
    State(state): Shared,
    body: Result<Json<RunRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Accepted>)> {
    let Json(request) = body?;
    let run_id = start_run(&state, request)?;
    Ok((
        StatusCode::ACCEPTED,
        Json(Accepted {
            run_id,
            status: RunStatus::Queued,
        }),
    ))
}

#[derive(Serialize)]
struct RunView {
    #[serde(flatten)]
    record: RunRecord,
    comment_count: usize,
    failure_count: usize,
    failures: Vec<FailedComment>,
}

fn run_view(store: &Store, record: &RunRecord) -> RunView {
    let failures = store.failures_for_run(&record.run_id).to_vec();
    RunView {
        comment_count: store.comments_for_run(&record.run_id).len(),
        failure_count: failures.len(),
        failures,
        record: record.clone(),
    }
}

#[derive(Deserialize)]
struct RunFilter {
    assignment_id: Option<AssignmentId>,
}

async fn list_runs(
    State(state): Shared,
    query: Result<Query<RunFilter>, QueryRejection>,
) -> ApiResult<Json<Vec<RunView>>> {
    let Query(filter) = query?;
    let store = state.read();
    let runs = store
        .runs()
        .filter(|r| filter.assignment_id.as_ref().is_none_or(|a| &r.assignment_id == a))
        .map(|r| run_view(&store, r))
        .collect();
    Ok(Json(runs))
}

async fn get_run(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<RunView>> {
    let store = state.read();
    let record = store
        .run(&RunId::from(id.as_str()))
        .ok_or_else(|| ApiError::not_found("run", &id))?;
    Ok(Json(run_view(&store, record)))
}

async fn run_records(State(state): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let store = state.read();
    let run_id = RunId::from(id.as_str());
    if store.run(&run_id).is_none() {
        return Err(ApiError::not_found("run", &id));
    }
    let body = export_records(&store.comments_for_run(&run_id), store.failures_for_run(&run_id));
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

// ---- comments and review ----

#[derive(Serialize)]
struct CommentView {
    #[serde(flatten)]
    comment: FeedbackComment,
    /// Current state per reviewer.
    reviews: Vec<EffectiveState>,
    /// State after the most recent action by anyone.
    latest: Option<EffectiveState>,
}

fn comment_view(store: &Store, c: &FeedbackComment) -> CommentView {
    CommentView {
        reviews: store.effective_states(&c.id).into_iter().cloned().collect(),
        latest: store.latest_state(&c.id).cloned(),
        comment: c.clone(),
    }
}

#[derive(Deserialize)]
struct RunSelector {
    run_id: Option<RunId>,
}

#[derive(Serialize)]
struct EssayComments {
    essay_id: EssayId,
    comments: Vec<CommentView>,
}

async fn essay_comments(
    State(state): Shared,
    Path(id): Path<String>,
    query: Result<Query<RunSelector>, QueryRejection>,
) -> ApiResult<Json<EssayComments>> {
    let Query(sel) = query?;
    let store = state.read();
    let essay_id = EssayId::from(id.as_str());
    if store.essay(&essay_id).is_none() {
        return Err(ApiError::not_found("essay", &id));
    }
    let comments = store
        .essay_comments(&essay_id, sel.run_id.as_ref())
        .into_iter()
        .map(|c| comment_view(&store, c))
        .collect();
    Ok(Json(EssayComments { essay_id, comments }))
}

async fn get_comment(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<CommentView>> {
    let store = state.read();
    let c = store
        .comment(&CommentId::from(id.as_str()))
        .ok_or_else(|| ApiError::not_found("comment", &id))?;
    Ok(Json(comment_view(&store, c)))
}

async fn comment_actions(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<Vec<ReviewAction>>> {
    let store = state.read();
    let comment_id = CommentId::from(id.as_str());
    if store.comment(&comment_id).is_none() {
        return Err(ApiError::not_found("comment", &id));
    }
    let actions = store
        .actions()
        .iter()
        .filter(|a| a.comment_id == comment_id)
        .cloned()
        .collect();
    Ok(Json(actions))
}

#[derive(Debug, Deserialize)]
struct ActionRequest {
    comment_id: CommentId,
    action: ActionKind,
    #[serde(default)]
    final_text: Option<String>,
    #[serde(default)]
    final_verdict: Option<Verdict>,
}

#[derive(Serialize)]
struct ActionRecorded {
    action_id: String,
    /// True when an identical disposition was already in effect.
    duplicate: bool,
    state: Option<EffectiveState>,
}

fn reviewer(headers: &HeaderMap) -> ApiResult<ReviewerId> {
    let missing = || {
        ApiError::bad_request("missing X-Reviewer-Id header").with_field("X-Reviewer-Id")
    };
    let value = headers.get(REVIEWER_HEADER).ok_or_else(missing)?;
    let value = value.to_str().map_err(|_| missing())?.trim();
    if value.is_empty() {
        return Err(missing());
    }
    Ok(ReviewerId::from(value))
}

async fn post_action(
    State(state): Shared,
    headers: HeaderMap,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ActionRecorded>)> {
    let who = reviewer(&headers)?;
    let Json(req) = body?;
    let mut action = ReviewAction::new(req.comment_id.clone(), who.clone(), req.action);
    action.final_text = req.final_text;
    action.final_verdict = req.final_verdict;

    let mut store = state.write();
    let before = store.actions().len();
    let action_id = store.record_action(action)?;
    let duplicate = store.actions().len() == before;
    let state = store.effective(&req.comment_id, &who).cloned();
    let status = if duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ActionRecorded { action_id, duplicate, state })))
}

// ---- reports and export ----

#[derive(Debug, Default, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Deserialize)]
struct AgreementQuery {
    assignment_id: AssignmentId,
    #[serde(default = "ai_rater")]
    rater_a: String,
    rater_b: String,
    #[serde(default)]
    format: ReportFormat,
}

fn ai_rater() -> String {
    "AI".into()
}

fn csv_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

async fn agreement_report(
    State(state): Shared,
    query: Result<Query<AgreementQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let report = state
        .read()
        .agreement(&q.assignment_id, Rater::parse(&q.rater_a), Rater::parse(&q.rater_b))?;
    Ok(match q.format {
        ReportFormat::Json => Json(report).into_response(),
        ReportFormat::Csv => csv_response(agreement_csv(&report)),
    })
}

#[derive(Deserialize)]
struct ConsistencyQuery {
    assignment_id: AssignmentId,
    reviewer_id: ReviewerId,
    #[serde(default)]
    format: ReportFormat,
}

async fn consistency_report(
    State(state): Shared,
    query: Result<Query<ConsistencyQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let report = state.read().consistency(&q.reviewer_id, &q.assignment_id)?;
    Ok(match q.format {
        ReportFormat::Json => Json(report).into_response(),
        ReportFormat::Csv => csv_response(consistency_csv(&report)),
    })
}

#[derive(Debug, Default, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ExportFormat {
    #[default]
    Json,
    Html,
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: ExportFormat,
    run_id: Option<RunId>,
}

async fn export_essay(
    State(state): Shared,
    Path(id): Path<String>,
    query: Result<Query<ExportQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let store = state.read();
    let essay = store
        .essay(&EssayId::from(id.as_str()))
        .ok_or_else(|| ApiError::not_found("essay", &id))?;
    let comments = store.essay_comments(&essay.id, q.run_id.as_ref());
    let rubrics = store.rubrics_for(&essay.assignment_id)?;
    let doc = export_annotated(essay, &comments, store.actions(), &rubrics);
    Ok(match q.format {
        ExportFormat::Json => Json(doc).into_response(),
        ExportFormat::Html => {
            let title = format!("{} ({})", essay.id, essay.author_alias);
            Html(render_page(&doc, &title)).into_response()
        }
    })
}
