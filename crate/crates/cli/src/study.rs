use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::{Args, Subcommand};
use pdbench_core::study::{build_plan, read_log, report, resolve_events, StudyEngine, StudyError, StudyPlan, StudyReport};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::config::{layered, png_stems, to_json, write_file, Provenance};
use crate::error::{invalid, require, require_dir, require_file, runtime, CliError, Result};

pub const DEFAULT_RATERS: usize = 35;
pub const DEFAULT_PER_RATER: usize = 20;
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Subcommand, Debug)]
pub enum StudyCommand {
    /// Build a blinded rating plan.
    Plan(PlanArgs),
    /// Serve a plan over HTTP and log ratings.
    Serve(ServeArgs),
    /// Aggregate a rating log.
    Report(ReportArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanArgs {
    /// Stimulus tree `{method}/{image}.png`; methods and images are read from it.
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    /// Method names, comma separated (overrides --stimuli).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Image ids, comma separated (overrides --stimuli).
    #[arg(long, value_delimiter = ',')]
    pub images: Option<Vec<String>>,
    #[arg(long)]
    pub raters: Option<usize>,
    /// Images shown to each rater; every method is shown on each.
    #[arg(long)]
    pub per_rater: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(PlanArgs { stimuli, methods, images, raters, per_rater, out } paths { stimuli, out });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeArgs {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Append-only rating log; replayed on start.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Stimulus tree `{method}/{image}.png` served under /stimuli.
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<SocketAddr>,
}

layered!(ServeArgs { plan, log, stimuli, bind } paths { plan, log, stimuli });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportArgs {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(ReportArgs { plan, log, out } paths { plan, log, out });

#[derive(Serialize)]
struct PlanFile<'a> {
    #[serde(flatten)]
    plan: &'a StudyPlan,
    provenance: &'a Provenance,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: StudyReport,
}

/// Methods are the subdirectories of `dir`; images are the PNG stems every
/// method directory provides.
fn scan_stimuli(dir: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut methods = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(runtime)? {
        let path = entry.map_err(runtime)?.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                methods.push(name.to_string());
            }
        }
    }
    methods.sort();
    let Some(first) = methods.first() else {
        return Err(CliError::Runtime(format!("no method directories in {}", dir.display())));
    };
    let images = png_stems(&dir.join(first))?;
    for m in &methods[1..] {
        if png_stems(&dir.join(m))? != images {
            return Err(CliError::Runtime(format!(
                "method directories `{first}` and `{m}` hold different image sets"
            )));
        }
    }
    Ok((methods, images))
}

pub fn plan(args: PlanArgs, seed: u64) -> Result<()> {
    let out = require(args.out.clone(), "out")?;
    let (mut methods, mut images) = (Vec::new(), Vec::new());
    if let Some(dir) = &args.stimuli {
        require_dir(dir, "stimuli")?;
        (methods, images) = scan_stimuli(dir)?;
    }
    if let Some(m) = &args.methods {
        methods = m.clone();
    }
    if let Some(i) = &args.images {
        images = i.clone();
    }
    if methods.is_empty() || images.is_empty() {
        return Err(invalid("give --stimuli, or both --methods and --images"));
    }
    let raters = args.raters.unwrap_or(DEFAULT_RATERS);
    let per_rater = args.per_rater.unwrap_or(DEFAULT_PER_RATER);
    let plan = build_plan(&methods, &images, raters, per_rater, seed).map_err(|e| match e {
        StudyError::Infeasible(_) => invalid(e.to_string()),
        other => runtime(other),
    })?;
    let provenance = Provenance::new("study plan", &args, seed);
    write_file(&out, to_json(&PlanFile { plan: &plan, provenance: &provenance })?)?;
    eprintln!(
        "{} sessions x {} stimuli -> {}",
        plan.raters(),
        per_rater * methods.len(),
        out.display()
    );
    Ok(())
}

fn load_plan(path: &Path) -> Result<StudyPlan> {
    require_file(path, "plan")?;
    StudyPlan::load(path).map_err(runtime)
}

pub fn report_cmd(args: ReportArgs, seed: u64) -> Result<()> {
    let plan = load_plan(&require(args.plan.clone(), "plan")?)?;
    let log = require(args.log.clone(), "log")?;
    let events = resolve_events(&plan, &read_log(&log).map_err(runtime)?).map_err(runtime)?;
    let file = ReportFile {
        provenance: Provenance::new("study report", &args, seed),
        report: report(&events),
    };
    let text = to_json(&file)?;
    match &args.out {
        Some(out) => write_file(out, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn serve(args: ServeArgs, _seed: u64) -> Result<()> {
    let plan = load_plan(&require(args.plan.clone(), "plan")?)?;
    let log = require(args.log.clone(), "log")?;
    if let Some(dir) = &args.stimuli {
        require_dir(dir, "stimuli")?;
    }
    let bind = args.bind.unwrap_or_else(|| DEFAULT_BIND.parse().expect("valid default"));
    let engine = StudyEngine::with_log(plan, &log).map_err(runtime)?;
    let app = router(engine, args.stimuli.clone());
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(runtime)?;
        eprintln!("serving study on http://{}", listener.local_addr().map_err(runtime)?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}

struct AppState {
    engine: StudyEngine,
    stimuli: Option<PathBuf>,
}

/// HTTP API over a study engine.
pub fn router(engine: StudyEngine, stimuli: Option<PathBuf>) -> Router {
    let state = Arc::new(AppState { engine, stimuli });
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/ratings", post(rate))
        .route("/stimuli/{token}", get(stimulus))
        .route("/report", get(report_route))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn error_response(e: StudyError) -> Response {
    let status = match e {
        StudyError::UnknownSession(_) => StatusCode::NOT_FOUND,
        StudyError::NoFreeSession(_) | StudyError::Duplicate { .. } => StatusCode::CONFLICT,
        StudyError::InvalidScore(_) => StatusCode::UNPROCESSABLE_ENTITY,
        StudyError::TokenMismatch => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    (status, Json(json!({ "error": e.to_string() }))).into_response()
}

async fn create_session(State(st): State<Arc<AppState>>) -> Response {
    match st.engine.claim_session() {
        Ok(id) => (StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response(),
        Err(e) => error_response(e),
    }
}

async fn next_item(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match st.engine.next_item(&id) {
        Ok(item) => Json(item).into_response(),
        Err(e) => error_response(e),
    }
}

#[derive(Deserialize)]
struct RatingRequest {
    stimulus_token: String,
    score: i64,
}

async fn rate(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<RatingRequest>,
) -> Response {
    match st.engine.record_rating(&id, &req.stimulus_token, req.score) {
        Ok(ev) => (
            StatusCode::CREATED,
            Json(json!({
                "session_id": ev.session_id,
                "stimulus_index": ev.stimulus_index,
                "score": ev.score,
            })),
        )
            .into_response(),
        Err(e) => error_response(e),
    }
}

async fn stimulus(State(st): State<Arc<AppState>>, UrlPath(token): UrlPath<String>) -> Response {
    let not_found = || (StatusCode::NOT_FOUND, Json(json!({ "error": "unknown stimulus" }))).into_response();
    let (Some(dir), Some(s)) = (&st.stimuli, st.engine.resolve_token(&token)) else {
        return not_found();
    };
    let path = dir.join(&s.method).join(format!("{}.png", s.image_id));
    match tokio::fs::read(&path).await {
        Ok(bytes) => (
            [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "no-store")],
            Body::from(bytes),
        )
            .into_response(),
        Err(_) => not_found(),
    }
}

async fn report_route(State(st): State<Arc<AppState>>) -> Response {
    match st.engine.snapshot() {
        Ok(events) => Json(report(&events)).into_response(),
        Err(e) => error_response(e),
    }
}
