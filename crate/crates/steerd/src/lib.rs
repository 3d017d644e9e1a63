//! HTTP/JSON service for watching and steering a running simulation.
//!
//! The server never touches grid data or the schedule directly. Status is
//! read from snapshots the run loop publishes at item boundaries, steering
//! goes through the parameter table's pending queue, control commands go
//! through [`RunControl`], and slices are requests the run loop answers at
//! its next checkpoint.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query as UrlQuery, Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use thornlet::ccl::RawValue;
use thornlet::flesh::{introspect, Database, ParameterTable, Query, SteerRejection, WarningLog};
use thornlet::runtime::{
    Command, ControlError, ControlState, RunControl, Simulation, SliceError, SliceSpec,
};
use tokio::sync::oneshot;
use tower_http::cors::CorsLayer;

/// Environment variable that, when set, enables bearer-token auth.
pub const TOKEN_ENV: &str = "THORNLET_TOKEN";

/// Everything the server shares with the run loop.
#[derive(Clone)]
pub struct SteerHandle {
    db: Database,
    control: Arc<RunControl>,
    log: WarningLog,
    params: Arc<RwLock<ParameterTable>>,
    token: Option<String>,
    slice_timeout: Duration,
}

impl SteerHandle {
    pub fn new(sim: &Simulation) -> Self {
        SteerHandle {
            db: sim.database(),
            control: sim.control(),
            log: sim.warnings(),
            params: sim.parameters(),
            token: None,
            slice_timeout: Duration::from_secs(10),
        }
    }

    /// Requires `Authorization: Bearer <token>` on every request.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token.filter(|t| !t.is_empty());
        self
    }

    /// How long a slice request waits for the run loop to answer.
    pub fn with_slice_timeout(mut self, timeout: Duration) -> Self {
        self.slice_timeout = timeout;
        self
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn truthy(v: Option<&String>) -> bool {
    v.is_some_and(|v| matches!(v.as_str(), "1" | "true" | "yes"))
}

async fn status(State(h): State<SteerHandle>) -> Response {
    let mut st = h.db.status.read().unwrap().clone();
    let state = h.control.state();
    if state != ControlState::Finished {
        st.state = state.name().to_string();
        st.waiting = h.control.waiting();
    }
    Json(st).into_response()
}

async fn thorns(State(h): State<SteerHandle>) -> Response {
    Json(introspect(&h.db, &Query::ListThorns)).into_response()
}

async fn schedule(State(h): State<SteerHandle>) -> Response {
    Json(introspect(&h.db, &Query::GetSchedule)).into_response()
}

async fn parameters(
    State(h): State<SteerHandle>,
    UrlQuery(q): UrlQuery<HashMap<String, String>>,
) -> Response {
    let query = Query::ListParameters {
        thorn: q.get("thorn").cloned(),
        steerable_only: truthy(q.get("steerable")),
    };
    Json(introspect(&h.db, &query)).into_response()
}

async fn vars(
    State(h): State<SteerHandle>,
    UrlQuery(q): UrlQuery<HashMap<String, String>>,
) -> Response {
    Json(introspect(
        &h.db,
        &Query::ListVariables {
            thorn: q.get("thorn").cloned(),
        },
    ))
    .into_response()
}

async fn warnings(
    State(h): State<SteerHandle>,
    UrlQuery(q): UrlQuery<HashMap<String, String>>,
) -> Response {
    let since = match q.get("since").map(|s| s.parse::<usize>()) {
        None => 0,
        Some(Ok(n)) => n,
        Some(Err(_)) => {
            return error(
                StatusCode::BAD_REQUEST,
                "since must be a non-negative integer",
            )
        }
    };
    let events = h.log.since(since);
    Json(json!({ "since": since, "next": since + events.len(), "warnings": events }))
        .into_response()
}

async fn steering(State(h): State<SteerHandle>) -> Response {
    let table = h.params.read().unwrap();
    let pending: Vec<_> = table.pending().cloned().collect();
    Json(json!({ "iteration": table.iteration(), "pending": pending, "history": table.history() }))
        .into_response()
}

#[derive(Deserialize)]
struct SteerBody {
    value: Value,
}

async fn steer(
    State(h): State<SteerHandle>,
    Path((thorn, name)): Path<(String, String)>,
    body: Result<Json<SteerBody>, JsonRejection>,
) -> Response {
    let Ok(Json(body)) = body else {
        return error(
            StatusCode::BAD_REQUEST,
            "body must be JSON of the form {\"value\": ...}",
        );
    };
    let Some(raw) = RawValue::from_json(&body.value) else {
        return error(
            StatusCode::BAD_REQUEST,
            "value must be a number, string or boolean",
        );
    };
    let result = h.params.write().unwrap().steer(&thorn, &name, &raw);
    match result {
        Ok(effective_at) => Json(json!({
            "parameter": format!("{thorn}::{name}"),
            "value": body.value,
            "effective_at": effective_at,
        }))
        .into_response(),
        Err(rejection) => {
            let status = match rejection {
                SteerRejection::UnknownParameter { .. } => StatusCode::NOT_FOUND,
                SteerRejection::NotSteerable { .. } => StatusCode::FORBIDDEN,
                SteerRejection::RangeViolation { .. } | SteerRejection::BadValue { .. } => {
                    StatusCode::BAD_REQUEST
                }
            };
            let mut body = serde_json::to_value(&rejection).unwrap_or_else(|_| json!({}));
            body["error"] = Value::String(rejection.to_string());
            (status, Json(body)).into_response()
        }
    }
}

#[derive(Deserialize)]
struct ControlBody {
    command: String,
}

async fn control(
    State(h): State<SteerHandle>,
    body: Result<Json<ControlBody>, JsonRejection>,
) -> Response {
    let Ok(Json(body)) = body else {
        return error(
            StatusCode::BAD_REQUEST,
            "body must be JSON of the form {\"command\": ...}",
        );
    };
    let command: Command = match body.command.parse() {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    match h.control.command(command) {
        Ok(state) => Json(json!({ "state": state.name() })).into_response(),
        Err(e @ (ControlError::NotPaused | ControlError::Finished)) => {
            error(StatusCode::CONFLICT, e.to_string())
        }
    }
}

/// Parses `timelevel`, `stride`, `i`/`j`/`k` and `fix=<dim>:<index>[,...]`.
fn slice_spec(variable: String, q: &HashMap<String, String>) -> Result<SliceSpec, String> {
    let num = |key: &str, default: usize| -> Result<usize, String> {
        q.get(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| format!("{key} must be a non-negative integer"))
        })
    };
    let mut fixed = Vec::new();
    for (d, key) in ["i", "j", "k"].iter().enumerate() {
        if q.contains_key(*key) {
            fixed.push((d, num(key, 0)?));
        }
    }
    if let Some(list) = q.get("fix") {
        for part in list.split(',').filter(|p| !p.is_empty()) {
            let (d, i) = part
                .split_once(':')
                .ok_or_else(|| format!("fix entry `{part}` must be <dim>:<index>"))?;
            let d = d
                .trim()
                .parse()
                .map_err(|_| format!("bad dimension in `{part}`"))?;
            let i = i
                .trim()
                .parse()
                .map_err(|_| format!("bad index in `{part}`"))?;
            fixed.push((d, i));
        }
    }
    Ok(SliceSpec {
        variable,
        timelevel: num("timelevel", 0)?,
        fixed,
        stride: num("stride", 1)?,
    })
}

async fn slice(
    State(h): State<SteerHandle>,
    Path(name): Path<String>,
    UrlQuery(q): UrlQuery<HashMap<String, String>>,
) -> Response {
    let spec = match slice_spec(name, &q) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let (control, timeout) = (h.control.clone(), h.slice_timeout);
    let result = tokio::task::spawn_blocking(move || control.request_slice(spec, timeout)).await;
    match result {
        Ok(Ok(slice)) => Json(slice).into_response(),
        Ok(Err(e)) => {
            let status = match e {
                SliceError::UnknownVariable(_) => StatusCode::NOT_FOUND,
                SliceError::BadIndex(_) => StatusCode::BAD_REQUEST,
                SliceError::NoStorage(_) => StatusCode::CONFLICT,
                SliceError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            };
            error(status, e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint")
}

async fn auth(State(h): State<SteerHandle>, req: Request<Body>, next: Next) -> Response {
    if let Some(token) = &h.token {
        if req.method() != Method::OPTIONS {
            let expected = format!("Bearer {token}");
            let given = req
                .headers()
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok());
            if given != Some(expected.as_str()) {
                return error(StatusCode::UNAUTHORIZED, "missing or wrong bearer token");
            }
        }
    }
    next.run(req).await
}

pub fn router(handle: SteerHandle) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/thorns", get(thorns))
        .route("/api/parameters", get(parameters))
        .route("/api/parameters/{thorn}/{name}", put(steer))
        .route("/api/steering", get(steering))
        .route("/api/schedule", get(schedule))
        .route("/api/warnings", get(warnings))
        .route("/api/vars", get(vars))
        .route("/api/vars/{name}/slice", get(slice))
        .route("/api/control", post(control))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(handle.clone(), auth))
        .layer(CorsLayer::permissive())
        .with_state(handle)
}

/// A server running on its own thread. Dropping it shuts it down.
pub struct Server {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background
/// thread. Bind errors are returned before anything runs.
pub fn serve(handle: SteerHandle, addr: &str) -> io::Result<Server> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?;
    let app = router(handle);
    let thread = std::thread::Builder::new()
        .name("steerd".into())
        .spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(listener) {
                    Ok(l) => l,
                    Err(e) => {
                        eprintln!("steerd: {e}");
                        return;
                    }
                };
                let stop = async {
                    let _ = rx.await;
                };
                if let Err(e) = axum::serve(listener, app)
                    .with_graceful_shutdown(stop)
                    .await
                {
                    eprintln!("steerd: {e}");
                }
            });
        })?;
    Ok(Server {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
