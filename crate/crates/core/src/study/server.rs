use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    Answer, Clock, EventLog, Session, SessionError, SessionPlan, SessionStatus, StudyBundle, StudyEvent, SusResponse,
    TaskResponse, TaskView, SUS_ITEMS,
};

/// Shared server state. Each session sits behind its own lock; the event
/// log serializes appends globally.
pub struct AppState {
    pub bundle: Arc<StudyBundle>,
    pub log: EventLog,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    tokens: Mutex<ChaCha8Rng>,
}

impl AppState {
    pub fn new(bundle: StudyBundle, log: EventLog, clock: Arc<dyn Clock>, seed: u64) -> Arc<Self> {
        Arc::new(Self {
            bundle: Arc::new(bundle),
            log,
            clock,
            sessions: Mutex::new(HashMap::new()),
            tokens: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    fn new_token(&self) -> String {
        let mut bytes = [0u8; 16];
        self.tokens.lock().unwrap().fill_bytes(&mut bytes);
        hex::encode(bytes)
    }

    fn session(&self, token: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.lock().unwrap().get(token).cloned().ok_or(ApiError::UnknownSession)
    }

    fn flush(&self, session: &mut Session) -> Result<(), ApiError> {
        for response in session.drain_unlogged() {
            self.log
                .append(&StudyEvent::Response { token: session.token.clone(), response })
                .map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        Ok(())
    }
}

enum ApiError {
    UnknownSession,
    BadRequest(String),
    Conflict(String),
    Session(SessionError),
    NotFound,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::UnknownSession => (StatusCode::NOT_FOUND, json!({"error": {"kind": "unknown_session"}, "message": "unknown session token"})),
            ApiError::NotFound => (StatusCode::NOT_FOUND, json!({"error": {"kind": "not_found"}, "message": "not found"})),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": {"kind": "bad_request"}, "message": m})),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({"error": {"kind": "conflict"}, "message": m})),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": {"kind": "internal"}, "message": m})),
            ApiError::Session(e) => {
                let status = match e {
                    SessionError::SessionExpired => StatusCode::GONE,
                    SessionError::UnknownRecord { .. } | SessionError::InvalidResponse { .. } | SessionError::Sus(_) => {
                        StatusCode::UNPROCESSABLE_ENTITY
                    }
                    _ => StatusCode::CONFLICT,
                };
                (status, json!({"error": e, "message": e.to_string()}))
            }
        };
        (status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

/// `POST /sessions` body: a participant listed in the bundle's plans, or an
/// explicit plan.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub participant_id: Option<String>,
    #[serde(default)]
    pub plan: Option<SessionPlan>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseBody {
    pub record_id: String,
    pub answer: Answer,
    #[serde(default)]
    pub difficulty: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyBody {
    pub items: Vec<u8>,
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum TaskReply {
    Task(Box<TaskView>),
    Survey,
    Finished,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let plan = match (body.plan, body.participant_id) {
        (Some(plan), _) => {
            // Run the same checks as a bundled plan.
            StudyBundle::new(
                st.bundle.dir.clone(),
                st.bundle.corpus.clone(),
                st.bundle.suggestions.values().cloned().collect(),
                vec![plan.clone()],
            )
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
            plan
        }
        (None, Some(pid)) => st
            .bundle
            .plan_for(&pid)
            .cloned()
            .ok_or_else(|| ApiError::BadRequest(format!("no plan for participant {pid}")))?,
        (None, None) => return Err(ApiError::BadRequest("participant_id or plan required".into())),
    };
    let token = st.new_token();
    {
        let mut sessions = st.sessions.lock().unwrap();
        let taken = sessions
            .values()
            .any(|s| s.lock().unwrap().plan.participant_id == plan.participant_id);
        if taken {
            return Err(ApiError::Conflict(format!("participant {} already has a session", plan.participant_id)));
        }
        st.log
            .append(&StudyEvent::SessionCreated { token: token.clone(), plan: plan.clone() })
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        sessions.insert(token.clone(), Arc::new(Mutex::new(Session::new(token.clone(), plan))));
    }
    Ok((StatusCode::CREATED, Json(json!({"token": token}))))
}

async fn get_task(State(st): State<Arc<AppState>>, Path(token): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let s = st.session(&token)?;
    let mut s = s.lock().unwrap();
    let now = st.clock.now();
    s.start(now);
    let status = s.status(now);
    st.flush(&mut s)?;
    let reply = match status {
        SessionStatus::Survey => TaskReply::Survey,
        SessionStatus::Finished => TaskReply::Finished,
        task => TaskReply::Task(Box::new(st.bundle.task_view(&task).ok_or_else(|| ApiError::Internal("record vanished".into()))?)),
    };
    Ok(Json(serde_json::to_value(reply).expect("serializes")))
}

async fn post_response(
    State(st): State<Arc<AppState>>,
    Path(token): Path<String>,
    Json(body): Json<ResponseBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let s = st.session(&token)?;
    let mut s = s.lock().unwrap();
    let now = st.clock.now();
    let result = s.submit(now, &body.record_id, body.answer, body.difficulty);
    // Skips recorded during the attempt are logged even when it fails.
    st.flush(&mut s)?;
    let accepted: TaskResponse = result?;
    let next = match s.status(now) {
        SessionStatus::Task { .. } => "task",
        SessionStatus::Survey => "survey",
        SessionStatus::Finished => "finished",
    };
    st.flush(&mut s)?;
    Ok(Json(json!({"accepted": accepted, "next": next})))
}

async fn get_survey(State(st): State<Arc<AppState>>, Path(token): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let s = st.session(&token)?;
    let mut s = s.lock().unwrap();
    let status = s.status(st.clock.now());
    st.flush(&mut s)?;
    Ok(Json(json!({
        "items": SUS_ITEMS,
        "scale": {"min": 1, "max": 5},
        "ready": !matches!(status, SessionStatus::Task { .. }),
        "submitted": s.survey(),
    })))
}

async fn post_survey(
    State(st): State<Arc<AppState>>,
    Path(token): Path<String>,
    Json(body): Json<SurveyBody>,
) -> Result<Json<SusResponse>, ApiError> {
    let s = st.session(&token)?;
    let mut s = s.lock().unwrap();
    let result = s.submit_survey(st.clock.now(), &body.items);
    st.flush(&mut s)?;
    let survey = result?;
    st.log
        .append(&StudyEvent::Survey { token: token.clone(), survey: survey.clone() })
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(survey))
}

async fn export(State(st): State<Arc<AppState>>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], st.log.export())
}

async fn ontology(State(st): State<Arc<AppState>>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let path = st.bundle.ontology_path(&file).ok_or(ApiError::NotFound)?;
    let bytes = tokio::fs::read(path).await.map_err(|e| ApiError::Internal(e.to_string()))?;
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("ttl") => "text/turtle",
        Some("owl" | "rdf" | "xml") => "application/rdf+xml",
        _ => "application/octet-stream",
    };
    let disposition = format!("attachment; filename=\"{file}\"");
    Ok(([(header::CONTENT_TYPE, mime.to_owned()), (header::CONTENT_DISPOSITION, disposition)], bytes).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{token}/task", get(get_task))
        .route("/sessions/{token}/response", post(post_response))
        .route("/sessions/{token}/survey", get(get_survey).post(post_survey))
        .route("/admin/export", get(export))
        .route("/ontologies/{file}", get(ontology))
        .with_state(state)
}

/// Serve the study API on `listener` until the task is cancelled.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
