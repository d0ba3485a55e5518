use crate::engine::{ArticleDetail, ExampleComment, Feed, TopicEntry};
use crate::state::{AppState, NewSession, OpinionAck, SessionView};
use crate::store::Session;
use crate::GatewayError;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hearhere_core::feed::{RatioLevel, ReadEvent, ReadKind, SortOrder};
use hearhere_core::opinion_map::OpinionMap;
use hearhere_core::study::{
    ec_questions, Demographics, Phase, StudyReport, SurveyRecord, LIKERT_ANCHORS,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use tower_http::services::ServeDir;

/// Header carrying the session token.
pub const SESSION_HEADER: &str = "x-session-id";

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
    pub fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }
    pub fn unauthorized(m: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, m)
    }
    pub fn not_found(m: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, m)
    }
    pub fn conflict(m: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, m)
    }
    pub fn unprocessable(m: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, m)
    }
    pub fn internal(m: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, m)
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        Self::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Params = Query<BTreeMap<String, String>>;

/// Malformed JSON is a 400; well-formed JSON of the wrong shape is a 422.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        if e.is_data() {
            ApiError::unprocessable(e.to_string())
        } else {
            ApiError::bad_request(e.to_string())
        }
    })
}

fn param<'a>(q: &'a BTreeMap<String, String>, name: &str) -> Result<&'a str, ApiError> {
    q.get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad_request(format!("missing query parameter {name}")))
}

fn session(state: &AppState, headers: &HeaderMap) -> Result<Session, ApiError> {
    let token = headers
        .get(SESSION_HEADER)
        .ok_or_else(|| ApiError::unauthorized(format!("missing {SESSION_HEADER} header")))?
        .to_str()
        .map_err(|_| ApiError::unauthorized("session header is not ASCII"))?;
    state.participant(token)
}

fn optional_session(state: &AppState, headers: &HeaderMap) -> Result<Option<Session>, ApiError> {
    if headers.contains_key(SESSION_HEADER) {
        session(state, headers).map(Some)
    } else {
        Ok(None)
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session).get(get_session))
        .route("/api/topics", get(topics))
        .route("/api/feed", get(feed))
        .route("/api/article/{id}", get(article))
        .route("/api/read", post(read_event))
        .route("/api/examples", get(examples))
        .route("/api/opinion", post(opinion))
        .route("/api/map", get(map))
        .route("/api/questions/{phase}", get(questions))
        .route("/api/survey/{phase}", post(survey))
        .route("/api/report", get(report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
) -> Result<(StatusCode, Json<NewSession>), ApiError> {
    Ok((StatusCode::CREATED, Json(state.create_session()?)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
) -> ApiResult<SessionView> {
    let s = session(&state, &headers)?;
    Ok(Json(state.session_view(&s)))
}

async fn topics(State(state): State<Arc<AppState>>) -> Json<Vec<TopicEntry>> {
    Json(state.engine().topics().to_vec())
}

async fn feed(State(state): State<Arc<AppState>>, Query(q): Params) -> ApiResult<Feed> {
    let topic = param(&q, "topic")?;
    let raw = param(&q, "ratio")?;
    let ratio = raw
        .parse::<u8>()
        .ok()
        .and_then(|r| RatioLevel::new(r).ok())
        .ok_or_else(|| ApiError::bad_request(format!("ratio must be 1..5, got {raw}")))?;
    let order = match q.get("order").map(String::as_str) {
        None | Some("desc") => SortOrder::Desc,
        Some("asc") => SortOrder::Asc,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "order must be asc or desc, got {other}"
            )))
        }
    };
    state
        .engine()
        .feed(topic, ratio, order)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown topic {topic}")))
}

async fn article(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<ArticleDetail> {
    let s = session(&state, &headers)?;
    let detail = state
        .engine()
        .detail(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown article {id}")))?;
    state.record_read(&s.id, &id, ReadKind::ArticleOpen)?;
    Ok(Json(detail))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadRequest {
    article_id: String,
    kind: ReadKind,
}

async fn read_event(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Json<ReadEvent>), ApiError> {
    let s = session(&state, &headers)?;
    let req: ReadRequest = parse_body(&body)?;
    Ok((
        StatusCode::CREATED,
        Json(state.record_read(&s.id, &req.article_id, req.kind)?),
    ))
}

#[derive(Serialize)]
struct Examples<'a> {
    topic: &'a str,
    examples: &'a [ExampleComment],
}

async fn examples(
    State(state): State<Arc<AppState>>,
    Query(q): Params,
) -> Result<Response, ApiError> {
    let topic = param(&q, "topic")?;
    let examples = state
        .engine()
        .examples(topic)
        .ok_or_else(|| ApiError::not_found(format!("unknown topic {topic}")))?;
    Ok(Json(Examples { topic, examples }).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpinionRequest {
    topic: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    example_id: Option<String>,
}

async fn opinion(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<OpinionAck> {
    let s = session(&state, &headers)?;
    let req: OpinionRequest = parse_body(&body)?;
    Ok(Json(
        state
            .submit_opinion(&req.topic, &s.id, req.text, req.example_id)
            .await?,
    ))
}

async fn map(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Params,
) -> ApiResult<OpinionMap> {
    let s = optional_session(&state, &headers)?;
    let topic = param(&q, "topic")?;
    let map = state.map(topic, s.as_ref().map(|s| s.id.as_str())).await?;
    Ok(Json((*map).clone()))
}

fn phase(raw: &str) -> Result<Phase, ApiError> {
    match raw {
        "pre" => Ok(Phase::Pre),
        "post" => Ok(Phase::Post),
        other => Err(ApiError::not_found(format!("unknown survey phase {other}"))),
    }
}

#[derive(Serialize)]
struct Questions {
    phase: Phase,
    questions: [&'static str; 5],
    anchors: [&'static str; 2],
}

async fn questions(Path(raw): Path<String>) -> Result<Response, ApiError> {
    let phase = phase(&raw)?;
    Ok(Json(Questions {
        phase,
        questions: ec_questions(phase),
        anchors: [LIKERT_ANCHORS.0, LIKERT_ANCHORS.1],
    })
    .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurveyRequest {
    answers: [u8; 5],
    #[serde(default)]
    demographics: Option<Demographics>,
}

async fn survey(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(raw): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<SurveyRecord>), ApiError> {
    let phase = phase(&raw)?;
    let s = session(&state, &headers)?;
    let req: SurveyRequest = parse_body(&body)?;
    Ok((
        StatusCode::CREATED,
        Json(state.submit_survey(&s.id, phase, req.answers, req.demographics)?),
    ))
}

async fn report(State(state): State<Arc<AppState>>, Query(q): Params) -> ApiResult<StudyReport> {
    let alpha = match q.get("alpha") {
        None => 0.05,
        Some(raw) => raw
            .parse::<f64>()
            .map_err(|_| ApiError::bad_request(format!("alpha must be a number, got {raw}")))?,
    };
    Ok(Json(state.report(alpha)?))
}
