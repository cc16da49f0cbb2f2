//! Route handlers. Long computations return a job (202) that clients poll
//! at `/jobs/{id}`; finished views are fetched from `/sessions/{id}/diagram`.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use chordcorr_core::ensemble::{gen_synthetic, load_ensemble, EnsembleStore, SyntheticSpec, VoxelRange};
use chordcorr_core::layout::{DiagramEdge, DiagramModel, EdgeStatus, Filters};
use chordcorr_core::pipeline::{dataset_fingerprint, refine_for_focus, view_key, ComputeConfig, ViewKind};
use chordcorr_core::sampling::{bench_strategies, summarize, Gaussian6Oracle, Strategy, StrategyConfig};

use crate::error::ApiError;
use crate::state::{AppState, Dataset, DatasetMeta, Job, JobStatus, JobView, Lookup, NavEntry, Session, SessionView};

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(open_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/context", post(compute_context))
        .route("/sessions/{id}/focus", post(refine_focus))
        .route("/sessions/{id}/back", post(navigate_back))
        .route("/sessions/{id}/matrix", post(compute_matrix))
        .route("/sessions/{id}/filters", post(set_filters))
        .route("/sessions/{id}/diagram", get(get_diagram))
        .route("/sessions/{id}/edges/{eid}", get(edge_detail))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/cancel", post(cancel_job))
        .route("/bench", post(run_bench))
        .route("/stats", get(|State(s): Shared| async move { Json(s.stats()) }))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

/// Parses a JSON body; an empty body yields the default value.
fn body_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenDataset {
    path: Option<String>,
    synthetic: Option<SyntheticSpec>,
    synthetic_toml: Option<String>,
    memory_budget: Option<u64>,
}

async fn open_dataset(State(state): Shared, raw: Bytes) -> ApiResult<Response> {
    let req: OpenDataset = body(&raw)?;
    let budget = req.memory_budget.unwrap_or(state.config.memory_budget);
    if budget == 0 {
        return Err(ApiError::bad_request("memory_budget must be positive"));
    }
    let sources = [req.path.is_some(), req.synthetic.is_some(), req.synthetic_toml.is_some()];
    if sources.iter().filter(|&&b| b).count() != 1 {
        return Err(ApiError::bad_request("give exactly one of path, synthetic, synthetic_toml"));
    }
    let (source, store, fingerprint) = tokio::task::spawn_blocking(move || {
        let (source, grid) = match req.path {
            Some(p) => {
                let g = load_ensemble(&p)?;
                (p, g)
            }
            None => {
                let spec = match req.synthetic {
                    Some(s) => s,
                    None => SyntheticSpec::from_toml(req.synthetic_toml.as_deref().unwrap_or_default())?,
                };
                ("synthetic".to_string(), gen_synthetic(&spec)?)
            }
        };
        let fingerprint = dataset_fingerprint(&grid);
        Ok::<_, ApiError>((source, EnsembleStore::new(grid), fingerprint))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let byte_size = store.grid().byte_size();
    let meta = DatasetMeta {
        id: state.fresh_id("d"),
        fingerprint,
        source,
        dims: store.grid().dims().as_array(),
        members: store.grid().members(),
        variables: store.grid().variables().to_vec(),
        byte_size,
        memory_budget: budget,
        fits_in_memory: byte_size <= budget,
        aggregate_level: store.aggregate_level_for_budget(budget),
        mean_tree_levels: store.max_level(),
    };
    state.add_dataset(Dataset { meta: meta.clone(), store });
    Ok((StatusCode::CREATED, Json(meta)).into_response())
}

async fn get_dataset(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<DatasetMeta>> {
    let ds = state.dataset(&id).ok_or_else(|| ApiError::not_found("dataset", &id))?;
    Ok(Json(ds.meta.clone()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    dataset: String,
    config: Option<ComputeConfig>,
}

/// Fills defaults that depend on the dataset and checks the variables.
fn prepare_config(state: &AppState, ds: &Dataset, config: Option<ComputeConfig>) -> ApiResult<ComputeConfig> {
    let mut config = config.unwrap_or_else(|| {
        let mut c = ComputeConfig::default();
        c.sampling.seed = state.config.default_seed;
        c
    });
    if config.variables.is_empty() {
        config.variables.push(ds.meta.variables[0].name.clone());
    }
    if config.variables.len() > 2 {
        return Err(ApiError::bad_request("at most two variables"));
    }
    for v in &config.variables {
        ds.store.grid().variable_index(v)?;
    }
    config.filters.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    config.sampling.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    config.level = config.level.max(ds.meta.aggregate_level);
    if config.level > ds.store.max_level() {
        return Err(ApiError::bad_request(format!("level {} beyond maximum {}", config.level, ds.store.max_level())));
    }
    Ok(config)
}

async fn create_session(State(state): Shared, raw: Bytes) -> ApiResult<Response> {
    let req: CreateSession = body(&raw)?;
    let ds = state.dataset(&req.dataset).ok_or_else(|| ApiError::not_found("dataset", &req.dataset))?;
    let config = prepare_config(&state, &ds, req.config)?;
    let s = Session { id: state.fresh_id("s"), dataset: ds.meta.id.clone(), config, stack: Vec::new() };
    let view = SessionView::from(&s);
    state.add_session(s);
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

fn session(state: &AppState, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
    state.session(id).ok_or_else(|| ApiError::not_found("session", id))
}

fn dataset_of(state: &AppState, s: &Session) -> ApiResult<Arc<Dataset>> {
    state.dataset(&s.dataset).ok_or_else(|| ApiError::not_found("dataset", &s.dataset))
}

async fn get_session(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let s = session(&state, &id)?;
    let g = s.lock().expect("session lock");
    Ok(Json(SessionView::from(&*g)))
}

#[derive(Debug, Serialize)]
struct JobAccepted {
    job: JobView,
    session: SessionView,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<String>,
}

fn job_response(job: &Job, s: &Session, errors: Vec<String>) -> Response {
    let view = job.view();
    let code = if view.status == JobStatus::Done { StatusCode::OK } else { StatusCode::ACCEPTED };
    (code, Json(JobAccepted { job: view, session: SessionView::from(s), errors })).into_response()
}

/// Starts (or joins) the computation for `kind` and pushes it.
fn push_view(state: &Arc<AppState>, ds: Arc<Dataset>, s: &mut Session, kind: ViewKind) -> Arc<Job> {
    let key = view_key(&ds.meta.fingerprint, &s.config, &kind);
    let job = state.start_view(ds, kind.clone(), s.config.clone());
    s.stack.push(NavEntry { kind, key, job: job.id.clone() });
    job
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextRequest {
    config: Option<ComputeConfig>,
}

async fn compute_context(State(state): Shared, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let req: ContextRequest = body_or_default(&raw)?;
    let s = session(&state, &id)?;
    let mut g = s.lock().expect("session lock");
    let ds = dataset_of(&state, &g)?;
    if req.config.is_some() {
        g.config = prepare_config(&state, &ds, req.config)?;
    }
    g.stack.clear();
    let job = push_view(&state, ds, &mut g, ViewKind::Context);
    Ok(job_response(&job, &g, Vec::new()))
}

/// The rendered diagram on top of the stack, or why there is none.
enum Current {
    Ready(DiagramModel),
    Pending(Arc<Job>),
}

fn current(state: &Arc<AppState>, s: &Session) -> ApiResult<Current> {
    let top = s.stack.last().ok_or_else(|| ApiError::not_ready("no diagram requested yet"))?;
    match state.lookup(&top.key) {
        Lookup::Ready(v) => Ok(Current::Ready(v.render(&s.config)?)),
        Lookup::Pending(j) => Ok(Current::Pending(j)),
        Lookup::Missing => {
            let msg = state
                .job(&top.job)
                .and_then(|j| j.view().error)
                .unwrap_or_else(|| "result unavailable".to_string());
            Err(ApiError::new(StatusCode::CONFLICT, "job_failed", msg))
        }
    }
}

fn ready_diagram(state: &Arc<AppState>, s: &Session) -> ApiResult<DiagramModel> {
    match current(state, s)? {
        Current::Ready(d) => Ok(d),
        Current::Pending(j) => Err(ApiError::not_ready(format!("job {} still running", j.id))),
    }
}

fn node_brick(d: &DiagramModel, node: usize) -> ApiResult<VoxelRange> {
    d.nodes.get(node).map(|n| n.brick).ok_or_else(|| ApiError::not_found("node", &node.to_string()))
}

/// Resolves an edge id against the current diagram. Ids from an earlier
/// diagram and ids hidden by the active filters are gone.
fn resolve_edge<'a>(d: &'a DiagramModel, unfiltered: impl FnOnce() -> ApiResult<DiagramModel>, eid: &str) -> ApiResult<&'a DiagramEdge> {
    if let Some(e) = d.edge(eid) {
        return Ok(e);
    }
    let prefix = eid.split('.').next().unwrap_or_default();
    if prefix != d.key {
        return Err(ApiError::gone(format!("edge {eid:?} belongs to a previous diagram")));
    }
    if unfiltered()?.edge(eid).is_some() {
        return Err(ApiError::gone(format!("edge {eid:?} is filtered out")));
    }
    Err(ApiError::not_found("edge", eid))
}

fn unfiltered_render(state: &Arc<AppState>, s: &Session) -> ApiResult<DiagramModel> {
    let mut plain = s.config.clone();
    plain.filters = Filters::default();
    let top = s.stack.last().ok_or_else(|| ApiError::not_ready("no diagram"))?;
    match state.lookup(&top.key) {
        Lookup::Ready(v) => Ok(v.render(&plain)?),
        _ => Err(ApiError::not_ready("diagram not computed")),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FocusRequest {
    edge: Option<String>,
    node: Option<usize>,
    bricks: Option<[VoxelRange; 2]>,
}

async fn refine_focus(State(state): Shared, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let req: FocusRequest = body(&raw)?;
    let s = session(&state, &id)?;
    let mut g = s.lock().expect("session lock");
    let ds = dataset_of(&state, &g)?;
    let [first, second] = match (&req.edge, req.node, req.bricks) {
        (Some(eid), None, None) => {
            let d = ready_diagram(&state, &g)?;
            let e = resolve_edge(&d, || unfiltered_render(&state, &g), eid)?;
            [node_brick(&d, e.a)?, node_brick(&d, e.b)?]
        }
        (None, Some(n), None) => {
            let b = node_brick(&ready_diagram(&state, &g)?, n)?;
            [b, b]
        }
        (None, None, Some(b)) => {
            let dims = ds.store.grid().dims().as_array();
            for r in &b {
                if (0..3).any(|a| r.lo[a] >= r.hi[a] || r.hi[a] > dims[a]) {
                    return Err(ApiError::out_of_range(format!("brick {r:?} outside grid {dims:?}")));
                }
            }
            b
        }
        _ => return Err(ApiError::bad_request("give exactly one of edge, node, bricks")),
    };
    // Refusing here rather than in the job gives a synchronous error.
    for b in [&first, &second] {
        refine_for_focus(b, g.config.focus_capacity)?;
    }
    let job = push_view(&state, ds, &mut g, ViewKind::Focus { first, second });
    Ok(job_response(&job, &g, Vec::new()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackRequest {
    #[serde(default = "one")]
    k: usize,
}

fn one() -> usize {
    1
}

async fn navigate_back(State(state): Shared, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let req: BackRequest = if raw.iter().all(u8::is_ascii_whitespace) { BackRequest { k: 1 } } else { body(&raw)? };
    let s = session(&state, &id)?;
    let mut g = s.lock().expect("session lock");
    let depth = g.depth();
    if req.k == 0 || req.k > depth {
        return Err(ApiError::out_of_range(format!("cannot go back {} levels from depth {depth}", req.k)));
    }
    let keep = g.stack.len() - req.k;
    g.stack.truncate(keep);
    let top = g.stack.last().cloned().expect("context entry remains");
    match state.lookup(&top.key) {
        Lookup::Ready(v) => {
            let mut resp = Json(v.render(&g.config)?).into_response();
            resp.headers_mut().insert("x-cache", HeaderValue::from_static("hit"));
            Ok(resp)
        }
        Lookup::Pending(j) => Ok(job_response(&j, &g, Vec::new())),
        Lookup::Missing => {
            // The revealed view failed earlier; compute it again.
            let ds = dataset_of(&state, &g)?;
            g.stack.pop();
            let job = push_view(&state, ds, &mut g, top.kind);
            Ok(job_response(&job, &g, Vec::new()))
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRequest {
    regions: Option<Vec<VoxelRange>>,
}

async fn compute_matrix(State(state): Shared, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let req: MatrixRequest = body_or_default(&raw)?;
    let s = session(&state, &id)?;
    let mut g = s.lock().expect("session lock");
    let ds = dataset_of(&state, &g)?;
    if g.config.variables.len() != 2 {
        // The matrix compares two variables; with one the chord view stays.
        let errors = vec!["matrix mode needs two variables; showing the chord diagram".to_string()];
        let job = match g.stack.last() {
            Some(top) => match state.job(&top.job) {
                Some(j) => j,
                None => return Err(ApiError::not_found("job", &top.job)),
            },
            None => push_view(&state, ds, &mut g, ViewKind::Context),
        };
        return Ok(job_response(&job, &g, errors));
    }
    let regions = match req.regions {
        Some(r) if !r.is_empty() => r,
        Some(_) => return Err(ApiError::bad_request("regions must not be empty")),
        None => ready_diagram(&state, &g)?.nodes.iter().map(|n| n.brick).collect(),
    };
    let job = push_view(&state, ds, &mut g, ViewKind::Matrix { regions });
    Ok(job_response(&job, &g, Vec::new()))
}

async fn set_filters(State(state): Shared, Path(id): Path<String>, raw: Bytes) -> ApiResult<Response> {
    let filters: Filters = body_or_default(&raw)?;
    filters.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let s = session(&state, &id)?;
    let mut g = s.lock().expect("session lock");
    g.config.filters = filters;
    Ok(Json(SessionView::from(&*g)).into_response())
}

async fn get_diagram(State(state): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let g = s.lock().expect("session lock");
    Ok(match current(&state, &g)? {
        Current::Ready(d) => Json(d).into_response(),
        Current::Pending(j) => job_response(&j, &g, Vec::new()),
    })
}

/// Hover record of one edge.
#[derive(Debug, Serialize)]
struct EdgeDetail {
    id: String,
    status: EdgeStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    job: Option<String>,
    value: Option<f64>,
    argmax: Option<[[usize; 3]; 2]>,
    samples_used: usize,
    strategy: Option<Strategy>,
    uncertainty: Option<f64>,
    variable_pair: Option<[usize; 2]>,
    /// Bounding boxes of the two bricks in grid coordinates.
    bricks: Option<[VoxelRange; 2]>,
}

async fn edge_detail(State(state): Shared, Path((id, eid)): Path<(String, String)>) -> ApiResult<Json<EdgeDetail>> {
    let s = session(&state, &id)?;
    let g = s.lock().expect("session lock");
    let top = g.stack.last().ok_or_else(|| ApiError::not_found("edge", &eid))?;
    match current(&state, &g)? {
        Current::Pending(j) => {
            if eid.split('.').next() != Some(top.key.as_str()) {
                return Err(ApiError::gone(format!("edge {eid:?} belongs to a previous diagram")));
            }
            Ok(Json(EdgeDetail {
                id: eid,
                status: EdgeStatus::Pending,
                job: Some(j.id.clone()),
                value: None,
                argmax: None,
                samples_used: 0,
                strategy: None,
                uncertainty: None,
                variable_pair: None,
                bricks: None,
            }))
        }
        Current::Ready(d) => {
            let e = resolve_edge(&d, || unfiltered_render(&state, &g), &eid)?;
            Ok(Json(EdgeDetail {
                id: e.id.clone(),
                status: e.status,
                job: None,
                value: e.value,
                argmax: e.argmax,
                samples_used: e.samples_used,
                strategy: e.strategy,
                uncertainty: e.uncertainty,
                variable_pair: Some(e.variable_pair),
                bricks: Some([node_brick(&d, e.a)?, node_brick(&d, e.b)?]),
            }))
        }
    }
}

async fn get_job(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<JobView>> {
    let job = state.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(job.view()))
}

async fn cancel_job(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<JobView>> {
    let job = state.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    job.cancel.store(true, std::sync::atomic::Ordering::Relaxed);
    Ok(Json(job.view()))
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchRequest {
    brick: [usize; 3],
    pairs: usize,
    runs: usize,
    strategies: Vec<Strategy>,
    budgets: Vec<usize>,
    sampling: StrategyConfig,
}

impl Default for BenchRequest {
    fn default() -> Self {
        Self {
            brick: [32, 32, 32],
            pairs: 50,
            runs: 10,
            strategies: Strategy::SAMPLED.to_vec(),
            budgets: vec![25, 50, 100],
            sampling: StrategyConfig::default(),
        }
    }
}

/// Convergence benchmark on random Gaussian objectives, as a job whose
/// output holds the per-strategy summary.
async fn run_bench(State(state): Shared, raw: Bytes) -> ApiResult<Response> {
    let req: BenchRequest = body_or_default(&raw)?;
    if req.pairs == 0 || req.runs == 0 || req.budgets.is_empty() || req.strategies.is_empty() {
        return Err(ApiError::bad_request("pairs, runs, budgets and strategies must be non-empty"));
    }
    if req.brick.contains(&0) {
        return Err(ApiError::bad_request("brick extents must be positive"));
    }
    req.sampling.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let job = state.start_task("benchmark", move |job| {
        let oracle = Gaussian6Oracle::new(req.brick, req.pairs, req.sampling.seed);
        let total = req.strategies.len() * req.budgets.len();
        let mut rows = Vec::new();
        for (i, (s, b)) in req.strategies.iter().flat_map(|s| req.budgets.iter().map(move |b| (s, b))).enumerate() {
            if job.is_cancelled() {
                return Err("computation cancelled".to_string());
            }
            rows.extend(bench_strategies(&oracle, &[*s], &[*b], req.runs, &req.sampling));
            job.advance(JobStatus::Running, (i + 1) as f64 / total as f64);
        }
        serde_json::to_value(summarize(&rows)).map_err(|e| e.to_string())
    });
    Ok((StatusCode::ACCEPTED, Json(job.view())).into_response())
}
