//! HTTP/JSON service over one case directory.
//!
//! Mutations are serialized through a single writer lock and committed
//! atomically (state saved, then published); reads see the last committed
//! case. A mutation may carry `If-Match: <seq>` naming the event sequence
//! number the client last saw; a mismatch is answered with 409.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/case` | | [`CaseSummary`] |
//! | GET | `/meshes/{id}` | | [`MeshPayload`] (`bone`, `orbit` or a plate id, plate frame) |
//! | GET | `/placements` | | map of plate id to placement |
//! | GET | `/placements/{id}` | | placement |
//! | PUT | `/placements/{id}` | [`TransformBody`] | [`MutationResponse`] with `live` |
//! | POST | `/placements/{id}/landmark-init` | | [`MutationResponse`] |
//! | POST | `/placements/{id}/stop-align` | | [`MutationResponse`] |
//! | POST | `/placements/{id}/pivot-rotate` | [`RotateBody`] | [`MutationResponse`] |
//! | POST | `/placements/{id}/nudge` | [`NudgeBody`] | [`MutationResponse`] |
//! | POST | `/placements/{id}/reset` | | [`MutationResponse`] |
//! | PUT | `/plates/{id}/curves/{name}` | [`CurveBody`] | [`MutationResponse`] |
//! | GET | `/fit/{id}` | | [`FitView`] |
//! | POST | `/fit` | | list of [`FitView`] for every plate |
//! | GET | `/ranking` | | `ranking.json` document; 409 until fits exist |
//! | GET | `/events` | | list of events |
//! | POST | `/export` | | [`ExportResponse`] |
//!
//! Every other GET path is a static asset (the bundled viewer page, or
//! files from `--static-dir`). Errors are `{"error": kind, "message": text}`
//! with 404 for unknown ids, 409 for conflicts and 422 for contract
//! violations.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use orbitfit_core::mesh::Transform;
use orbitfit_core::plate::{ranking_json, FitReport, LiveSummary, Placement};
use orbitfit_core::{Point3, RigidTransform};

use crate::case::Case;
use crate::config::Config;
use crate::error::SessionError;
use crate::events::{Action, SessionEvent};

/// Stop-point drift allowed by the pivot-lock check (mm).
pub const PIVOT_LOCK_TOLERANCE: f64 = 1e-6;

const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub config: Config,
    /// Default export root for `POST /export`.
    pub out_dir: PathBuf,
    pub actor: String,
    /// Save state and log after every mutation.
    pub persist: bool,
    /// Reject transforms that move the stop point of a pivoted placement.
    pub pivot_lock: bool,
    pub static_dir: Option<PathBuf>,
}

impl ServiceOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        ServiceOptions {
            config: Config::default(),
            out_dir: out_dir.into(),
            actor: "api".into(),
            persist: true,
            pivot_lock: false,
            static_dir: None,
        }
    }
}

struct AppState {
    committed: RwLock<Arc<Case>>,
    writer: Mutex<()>,
    /// Fit reports keyed by plate id, stamped with the event seq they were computed at.
    fits: Mutex<BTreeMap<String, (u64, Arc<FitReport>)>>,
    opts: ServiceOptions,
}

type Shared = Arc<AppState>;

pub struct ApiError(StatusCode, &'static str, String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match &e {
            SessionError::UnknownPlate(_) | SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            SessionError::RejectedTransform(_) => (StatusCode::UNPROCESSABLE_ENTITY, "rejected_transform"),
            e if e.is_io() => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "contract_violation"),
        };
        ApiError(status, kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": self.1, "message": self.2});
        (self.0, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct PlateSummary {
    pub id: String,
    pub vendor: String,
    pub size_class: String,
    pub stop_label: String,
    pub stop_point: [f64; 3],
    pub landmarks: BTreeMap<String, [f64; 3]>,
    pub curves: BTreeMap<String, Vec<[f64; 3]>>,
    pub vertex_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub orbit_stop: [f64; 3],
    pub orbit_landmarks: BTreeMap<String, [f64; 3]>,
    pub plates: Vec<PlateSummary>,
    pub meshes: Vec<String>,
    pub last_seq: u64,
    pub heatmap_range: [f64; 2],
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeshPayload {
    pub id: String,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Vec<[f64; 3]>,
}

/// Collision report as shown to users: percent as fixed two-decimal text.
#[derive(Debug, Serialize, Deserialize)]
pub struct CollisionView {
    pub collision_count: usize,
    pub total_points: usize,
    pub percent: String,
    pub message: String,
    pub collision_points: Vec<usize>,
    pub sampling_basis: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LiveView {
    pub plate_id: String,
    pub collision: CollisionView,
    pub curve_means: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MutationResponse {
    pub seq: u64,
    pub placement: Placement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub live: Option<LiveView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeView {
    pub curve: String,
    pub mean: f64,
    pub distances: Vec<f64>,
    pub sample_points: Vec<[f64; 3]>,
    pub projected_points: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitView {
    pub plate_id: String,
    pub seq: u64,
    pub plate_wide: Vec<f64>,
    pub edges: Vec<EdgeView>,
    pub overall_edge_mean: f64,
    pub collision: CollisionView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransformBody {
    /// Row-major 4×4 rigid transform, plate frame to patient space.
    pub matrix: [[f64; 4]; 4],
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RotateBody {
    pub axis: [f64; 3],
    /// Radians.
    pub angle: f64,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NudgeBody {
    pub delta: [f64; 3],
    #[serde(default)]
    pub move_pivot: bool,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurveBody {
    pub points: Vec<[f64; 3]>,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ActorBody {
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExportResponse {
    pub root: String,
    pub files: Vec<String>,
}

fn arr(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn collision_view(c: &orbitfit_core::plate::CollisionReport) -> CollisionView {
    CollisionView {
        collision_count: c.collision_count,
        total_points: c.total_points,
        percent: c.percent_text(),
        message: c.message(),
        collision_points: c.collision_points.clone(),
        sampling_basis: c.sampling_basis.clone(),
    }
}

fn live_view(s: &LiveSummary) -> LiveView {
    LiveView {
        plate_id: s.plate_id.clone(),
        collision: collision_view(&s.collision),
        curve_means: s.curve_means.iter().map(|(n, m)| (n.to_string(), *m)).collect(),
    }
}

fn fit_view(r: &FitReport, seq: u64) -> FitView {
    FitView {
        plate_id: r.plate_id.clone(),
        seq,
        plate_wide: r.plate_wide.clone(),
        edges: r
            .edge_reports
            .iter()
            .map(|e| EdgeView {
                curve: e.curve_name.to_string(),
                mean: e.mean,
                distances: e.point_distances.clone(),
                sample_points: e.sample_points.iter().map(arr).collect(),
                projected_points: e.projected_points.iter().map(arr).collect(),
            })
            .collect(),
        overall_edge_mean: r.overall_edge_mean,
        collision: collision_view(&r.collision),
    }
}

impl AppState {
    fn snapshot(&self) -> Arc<Case> {
        self.committed.read().expect("case lock").clone()
    }

    /// Runs `f` on a private copy of the case and publishes the result.
    fn mutate<T>(
        &self,
        headers: &HeaderMap,
        f: impl FnOnce(&mut Case) -> crate::error::Result<T>,
    ) -> Result<(T, Arc<Case>), ApiError> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.snapshot();
        if let Some(v) = headers.get(header::IF_MATCH) {
            let text = v.to_str().unwrap_or("").trim().trim_matches('"');
            let expected: u64 = text
                .parse()
                .map_err(|_| ApiError(StatusCode::BAD_REQUEST, "bad_request", format!("If-Match must be an event seq, got '{text}'")))?;
            if expected != current.last_seq() {
                return Err(SessionError::Conflict(format!(
                    "case is at seq {}, request expected {expected}",
                    current.last_seq()
                ))
                .into());
            }
        }
        let mut next = (*current).clone();
        let out = f(&mut next)?;
        if self.opts.persist {
            next.save()?;
        }
        let next = Arc::new(next);
        *self.committed.write().expect("case lock") = next.clone();
        Ok((out, next))
    }

    fn actor(&self, given: Option<String>) -> String {
        given.filter(|a| !a.is_empty()).unwrap_or_else(|| self.opts.actor.clone())
    }

    fn run_action(&self, headers: &HeaderMap, actor: Option<String>, action: Action) -> ApiResult<MutationResponse> {
        let actor = self.actor(actor);
        let id = action.plate_id().to_string();
        let (seq, case) = self.mutate(headers, |c| Ok(c.execute(&actor, action)?.seq))?;
        let placement = case.placement(&id).cloned().ok_or(SessionError::UnknownPlate(id))?;
        Ok(Json(MutationResponse { seq, placement, live: None }))
    }

    fn fit(&self, case: &Case, plate_id: &str) -> crate::error::Result<Arc<FitReport>> {
        let seq = case.last_seq();
        if let Some((s, r)) = self.fits.lock().expect("fit cache").get(plate_id) {
            if *s == seq {
                return Ok(r.clone());
            }
        }
        let r = Arc::new(case.fit_report(plate_id, &self.opts.config.fit)?);
        self.fits.lock().expect("fit cache").insert(plate_id.to_string(), (seq, r.clone()));
        Ok(r)
    }

    /// Cached reports for every plate at the current seq, or `None` if any is missing.
    fn cached_fits(&self, case: &Case) -> Option<Vec<FitReport>> {
        let cache = self.fits.lock().expect("fit cache");
        case.plates()
            .iter()
            .map(|p| match cache.get(p.id()) {
                Some((s, r)) if *s == case.last_seq() => Some((**r).clone()),
                _ => None,
            })
            .collect()
    }
}

async fn get_case(State(s): State<Shared>) -> ApiResult<CaseSummary> {
    let c = s.snapshot();
    let lm = |set: &orbitfit_core::LandmarkSet| set.entries().iter().map(|e| (e.label.clone(), arr(&e.position))).collect();
    Ok(Json(CaseSummary {
        case_id: c.case_id().to_string(),
        orbit_stop: arr(&c.orbit_stop()),
        orbit_landmarks: lm(c.orbit_landmarks()),
        plates: c
            .plates()
            .iter()
            .map(|p| PlateSummary {
                id: p.id().to_string(),
                vendor: p.vendor().to_string(),
                size_class: p.size_class().to_string(),
                stop_label: p.stop_label().to_string(),
                stop_point: arr(&p.stop_point()),
                landmarks: lm(p.landmarks()),
                curves: p.curves().iter().map(|c| (c.name().to_string(), c.points().iter().map(arr).collect())).collect(),
                vertex_count: p.mesh().vertex_count(),
            })
            .collect(),
        meshes: ["bone", "orbit"].iter().map(|s| s.to_string()).chain(c.plates().iter().map(|p| p.id().to_string())).collect(),
        last_seq: c.last_seq(),
        heatmap_range: [s.opts.config.heatmap.lo, s.opts.config.heatmap.hi],
        warnings: c.warnings().to_vec(),
    }))
}

async fn get_mesh(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<MeshPayload> {
    let c = s.snapshot();
    let mesh = match id.as_str() {
        "bone" => c.bone().mesh(),
        "orbit" => c.orbit().mesh(),
        other => c.plate(other).ok_or_else(|| SessionError::NotFound(format!("mesh '{other}'")))?.mesh(),
    };
    Ok(Json(MeshPayload {
        id,
        vertices: mesh.vertices().iter().map(arr).collect(),
        triangles: mesh.triangles().to_vec(),
        normals: mesh.vertex_normals().iter().map(|n| [n.x, n.y, n.z]).collect(),
    }))
}

async fn get_placements(State(s): State<Shared>) -> ApiResult<BTreeMap<String, Placement>> {
    Ok(Json(s.snapshot().placements().clone()))
}

async fn get_placement(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Placement> {
    let c = s.snapshot();
    Ok(Json(c.placement(&id).cloned().ok_or(SessionError::UnknownPlate(id))?))
}

async fn put_placement(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Json(body): Json<TransformBody>,
) -> ApiResult<MutationResponse> {
    let actor = s.actor(body.actor);
    let fit = s.opts.config.fit;
    let pivot_lock = s.opts.pivot_lock;
    let ((seq, live), case) = s.mutate(&headers, |c| {
        if pivot_lock {
            check_pivot_lock(c, &id, &body.matrix)?;
        }
        let live = c.set_plate_transform(&actor, &id, body.matrix, &fit)?;
        Ok((c.last_seq(), live))
    })?;
    let placement = case.placement(&id).cloned().ok_or(SessionError::UnknownPlate(id))?;
    Ok(Json(MutationResponse { seq, placement, live: Some(live_view(&live)) }))
}

fn check_pivot_lock(case: &Case, id: &str, matrix: &[[f64; 4]; 4]) -> crate::error::Result<()> {
    let Some(p) = case.placement(id) else { return Ok(()) };
    let (Some(pivot), Some(anchor)) = (p.pivot(), p.anchor()) else { return Ok(()) };
    let (t, _) = RigidTransform::from_rows_corrected(matrix, crate::case::MAX_ROTATION_DRIFT)
        .map_err(|e| SessionError::RejectedTransform(e.to_string()))?;
    let drift = (t.apply_point(&anchor) - pivot).norm();
    if drift > PIVOT_LOCK_TOLERANCE {
        return Err(SessionError::RejectedTransform(format!(
            "pivot lock: stop point moved {drift:.3e} mm (limit {PIVOT_LOCK_TOLERANCE:e})"
        )));
    }
    Ok(())
}

async fn post_landmark_init(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Option<Json<ActorBody>>,
) -> ApiResult<MutationResponse> {
    let actor = body.and_then(|b| b.0.actor);
    s.run_action(&headers, actor, Action::LandmarkInit { plate_id: id })
}

async fn post_stop_align(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Option<Json<ActorBody>>,
) -> ApiResult<MutationResponse> {
    let actor = body.and_then(|b| b.0.actor);
    s.run_action(&headers, actor, Action::StopAlign { plate_id: id })
}

async fn post_reset(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Option<Json<ActorBody>>,
) -> ApiResult<MutationResponse> {
    let actor = body.and_then(|b| b.0.actor);
    s.run_action(&headers, actor, Action::Reset { plate_id: id })
}

async fn post_pivot_rotate(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Json(body): Json<RotateBody>,
) -> ApiResult<MutationResponse> {
    s.run_action(&headers, body.actor, Action::PivotRotate { plate_id: id, axis: body.axis, angle: body.angle })
}

async fn post_nudge(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    Json(body): Json<NudgeBody>,
) -> ApiResult<MutationResponse> {
    s.run_action(
        &headers,
        body.actor,
        Action::Nudge { plate_id: id, delta: body.delta, move_pivot: body.move_pivot },
    )
}

async fn put_curve(
    State(s): State<Shared>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    headers: HeaderMap,
    Json(body): Json<CurveBody>,
) -> ApiResult<MutationResponse> {
    s.run_action(&headers, body.actor, Action::UpdateCurve { plate_id: id, curve: name, points: body.points })
}

async fn get_fit(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<FitView> {
    let c = s.snapshot();
    let r = s.fit(&c, &id)?;
    Ok(Json(fit_view(&r, c.last_seq())))
}

async fn post_fit(State(s): State<Shared>) -> ApiResult<Vec<FitView>> {
    let c = s.snapshot();
    let mut out = Vec::new();
    for p in c.plates() {
        out.push(fit_view(&*s.fit(&c, p.id())?, c.last_seq()));
    }
    Ok(Json(out))
}

async fn get_ranking(State(s): State<Shared>) -> Result<Response, ApiError> {
    let c = s.snapshot();
    let reports = s.cached_fits(&c).ok_or_else(|| {
        SessionError::Conflict("no current fit reports; compute fits first with POST /fit (or GET /fit/{plate_id} for every plate)".into())
    })?;
    let ranking = c.rank(&reports)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], ranking_json(c.case_id(), &ranking)).into_response())
}

async fn get_events(State(s): State<Shared>) -> ApiResult<Vec<SessionEvent>> {
    Ok(Json(s.snapshot().events().to_vec()))
}

async fn post_export(State(s): State<Shared>) -> ApiResult<ExportResponse> {
    let c = s.snapshot();
    let reports: Vec<FitReport> = c
        .plates()
        .iter()
        .map(|p| s.fit(&c, p.id()).map(|r| (*r).clone()))
        .collect::<crate::error::Result<_>>()?;
    let root = &s.opts.out_dir;
    let files = c.export(&reports, s.opts.config.heatmap, root)?;
    Ok(Json(ExportResponse {
        root: root.display().to_string(),
        files: files
            .iter()
            .map(|f| f.strip_prefix(root).unwrap_or(f).to_string_lossy().replace('\\', "/"))
            .collect(),
    }))
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

/// Builds the router for `case`.
pub fn router(case: Case, opts: ServiceOptions) -> Router {
    let static_dir = opts.static_dir.clone();
    let state = Arc::new(AppState {
        committed: RwLock::new(Arc::new(case)),
        writer: Mutex::new(()),
        fits: Mutex::new(BTreeMap::new()),
        opts,
    });
    let api = Router::new()
        .route("/case", get(get_case))
        .route("/meshes/{id}", get(get_mesh))
        .route("/placements", get(get_placements))
        .route("/placements/{id}", get(get_placement).put(put_placement))
        .route("/placements/{id}/landmark-init", post(post_landmark_init))
        .route("/placements/{id}/stop-align", post(post_stop_align))
        .route("/placements/{id}/pivot-rotate", post(post_pivot_rotate))
        .route("/placements/{id}/nudge", post(post_nudge))
        .route("/placements/{id}/reset", post(post_reset))
        .route("/plates/{id}/curves/{name}", put(put_curve))
        .route("/fit", post(post_fit))
        .route("/fit/{id}", get(get_fit))
        .route("/ranking", get(get_ranking))
        .route("/events", get(get_events))
        .route("/export", post(post_export))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(
            tower_http::services::ServeDir::new(&dir).append_index_html_on_directories(true),
        ),
        None => api.route("/", get(index)).route("/index.html", get(index)),
    }
}

/// Serves `case_dir` on `addr` until interrupted.
pub async fn serve(case_dir: &Path, addr: SocketAddr, opts: ServiceOptions) -> crate::error::Result<()> {
    let case = Case::open(case_dir)?;
    let app = router(case, opts);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| SessionError::io(case_dir, e))?;
    let local = listener.local_addr().map_err(|e| SessionError::io(case_dir, e))?;
    log::info!("serving {} on http://{local}", case_dir.display());
    eprintln!("listening on http://{local}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| SessionError::io(case_dir, e))
}
