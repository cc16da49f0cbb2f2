//! Shared server state: datasets, sessions, jobs and the estimate cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use chordcorr_core::ensemble::{EnsembleStore, VariableMeta};
use chordcorr_core::pipeline::{
    estimate_context, estimate_focus, estimate_matrix, view_key, ComputeConfig, Control, ViewEstimates, ViewKind,
};

/// Server-wide settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Raw data above this size is analysed on a mean-tree level.
    pub memory_budget: u64,
    pub default_seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { memory_budget: 4 << 30, default_seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub id: String,
    /// Content digest; identical data gives identical diagram keys.
    pub fingerprint: String,
    pub source: String,
    pub dims: [usize; 3],
    pub members: usize,
    pub variables: Vec<VariableMeta>,
    pub byte_size: u64,
    pub memory_budget: u64,
    pub fits_in_memory: bool,
    /// Mean-tree level used for context computation (0 = raw).
    pub aggregate_level: usize,
    /// Deepest available mean-tree level.
    pub mean_tree_levels: usize,
}

pub struct Dataset {
    pub meta: DatasetMeta,
    pub store: EnsembleStore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub kind: String,
    pub status: JobStatus,
    pub progress: f64,
    /// Cache key of the result once done.
    pub result: Option<String>,
    pub error: Option<String>,
    /// True when served from the cache without computation.
    pub cached: bool,
    /// Inline result of jobs that produce no diagram (benchmarks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<serde_json::Value>,
}

pub struct Job {
    pub id: String,
    pub kind: &'static str,
    pub key: String,
    pub cancel: AtomicBool,
    inner: Mutex<JobInner>,
}

struct JobInner {
    status: JobStatus,
    progress: f64,
    error: Option<String>,
    cached: bool,
    output: Option<serde_json::Value>,
}

impl Job {
    fn new(id: String, kind: &'static str, key: String) -> Self {
        Self {
            id,
            kind,
            key,
            cancel: AtomicBool::new(false),
            inner: Mutex::new(JobInner { status: JobStatus::Queued, progress: 0.0, error: None, cached: false, output: None }),
        }
    }

    /// Progress never decreases; terminal states are final.
    pub fn advance(&self, status: JobStatus, progress: f64) {
        let mut g = self.inner.lock().expect("job lock");
        if matches!(g.status, JobStatus::Done | JobStatus::Failed) {
            return;
        }
        g.status = status;
        g.progress = g.progress.max(progress.clamp(0.0, 1.0));
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::Relaxed)
    }

    fn finish(&self, result: Result<(), String>) {
        let mut g = self.inner.lock().expect("job lock");
        match result {
            Ok(()) => {
                g.status = JobStatus::Done;
                g.progress = 1.0;
            }
            Err(e) => {
                g.status = JobStatus::Failed;
                g.error = Some(e);
            }
        }
    }

    pub fn status(&self) -> JobStatus {
        self.inner.lock().expect("job lock").status
    }

    pub fn view(&self) -> JobView {
        let g = self.inner.lock().expect("job lock");
        JobView {
            id: self.id.clone(),
            kind: self.kind.to_string(),
            status: g.status,
            progress: g.progress,
            result: (g.status == JobStatus::Done && !self.key.is_empty()).then(|| self.key.clone()),
            error: g.error.clone(),
            cached: g.cached,
            output: g.output.clone(),
        }
    }
}

/// One entry of a session's navigation stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavEntry {
    #[serde(flatten)]
    pub kind: ViewKind,
    pub key: String,
    pub job: String,
}

pub struct Session {
    pub id: String,
    pub dataset: String,
    pub config: ComputeConfig,
    pub stack: Vec<NavEntry>,
}

impl Session {
    /// Focus depth: 0 for the context view.
    pub fn depth(&self) -> usize {
        self.stack.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub dataset: String,
    pub config: ComputeConfig,
    pub depth: usize,
    pub stack: Vec<NavEntry>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        Self { id: s.id.clone(), dataset: s.dataset.clone(), config: s.config.clone(), depth: s.depth(), stack: s.stack.clone() }
    }
}

enum Slot {
    Ready(Arc<ViewEstimates>),
    InFlight(Arc<Job>),
}

pub enum Lookup {
    Ready(Arc<ViewEstimates>),
    Pending(Arc<Job>),
    Missing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub datasets: usize,
    pub sessions: usize,
    pub jobs: usize,
    pub cached_views: usize,
    /// Number of estimate computations actually run.
    pub computations: usize,
}

#[derive(Default)]
pub struct AppState {
    pub config: ServiceConfig,
    next_id: AtomicUsize,
    computations: AtomicUsize,
    datasets: Mutex<HashMap<String, Arc<Dataset>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    cache: Mutex<HashMap<String, Slot>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self { config, ..Self::default() }
    }

    pub fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1)
    }

    pub fn add_dataset(&self, ds: Dataset) -> Arc<Dataset> {
        let ds = Arc::new(ds);
        self.datasets.lock().expect("lock").insert(ds.meta.id.clone(), ds.clone());
        ds
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<Dataset>> {
        self.datasets.lock().expect("lock").get(id).cloned()
    }

    pub fn add_session(&self, s: Session) -> Arc<Mutex<Session>> {
        let id = s.id.clone();
        let s = Arc::new(Mutex::new(s));
        self.sessions.lock().expect("lock").insert(id, s.clone());
        s
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.lock().expect("lock").get(id).cloned()
    }

    pub fn job(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.lock().expect("lock").get(id).cloned()
    }

    pub fn lookup(&self, key: &str) -> Lookup {
        match self.cache.lock().expect("lock").get(key) {
            Some(Slot::Ready(v)) => Lookup::Ready(v.clone()),
            Some(Slot::InFlight(j)) => Lookup::Pending(j.clone()),
            None => Lookup::Missing,
        }
    }

    pub fn stats(&self) -> Stats {
        Stats {
            datasets: self.datasets.lock().expect("lock").len(),
            sessions: self.sessions.lock().expect("lock").len(),
            jobs: self.jobs.lock().expect("lock").len(),
            cached_views: self.cache.lock().expect("lock").values().filter(|s| matches!(s, Slot::Ready(_))).count(),
            computations: self.computations.load(Ordering::Relaxed),
        }
    }

    /// Runs `work` as a job without a cached diagram; its value becomes the
    /// job output.
    pub fn start_task<F>(self: &Arc<Self>, kind: &'static str, work: F) -> Arc<Job>
    where
        F: FnOnce(&Job) -> Result<serde_json::Value, String> + Send + 'static,
    {
        let job = Arc::new(Job::new(self.fresh_id("j"), kind, String::new()));
        self.jobs.lock().expect("lock").insert(job.id.clone(), job.clone());
        let state = self.clone();
        let job2 = job.clone();
        tokio::task::spawn_blocking(move || {
            job2.advance(JobStatus::Running, 0.0);
            state.computations.fetch_add(1, Ordering::Relaxed);
            match work(&job2) {
                Ok(v) => {
                    job2.inner.lock().expect("job lock").output = Some(v);
                    job2.finish(Ok(()));
                }
                Err(e) => job2.finish(Err(e)),
            }
        });
        job
    }

    /// Returns a job producing the estimates of `kind`. Cached results give
    /// an already finished job; an identical computation in flight is
    /// shared.
    pub fn start_view(self: &Arc<Self>, ds: Arc<Dataset>, kind: ViewKind, config: ComputeConfig) -> Arc<Job> {
        let key = view_key(&ds.meta.fingerprint, &config, &kind);
        let label = match kind {
            ViewKind::Context => "context",
            ViewKind::Focus { .. } => "focus",
            ViewKind::Matrix { .. } => "matrix",
        };
        let job = {
            let mut cache = self.cache.lock().expect("lock");
            match cache.get(&key) {
                Some(Slot::InFlight(j)) => return j.clone(),
                Some(Slot::Ready(_)) => {
                    let job = Arc::new(Job::new(self.fresh_id("j"), label, key));
                    job.inner.lock().expect("job lock").cached = true;
                    job.finish(Ok(()));
                    self.jobs.lock().expect("lock").insert(job.id.clone(), job.clone());
                    return job;
                }
                None => {
                    let job = Arc::new(Job::new(self.fresh_id("j"), label, key.clone()));
                    cache.insert(key, Slot::InFlight(job.clone()));
                    job
                }
            }
        };
        self.jobs.lock().expect("lock").insert(job.id.clone(), job.clone());
        let state = self.clone();
        let job2 = job.clone();
        tokio::task::spawn_blocking(move || state.run_view(ds, kind, config, job2));
        job
    }

    fn run_view(&self, ds: Arc<Dataset>, kind: ViewKind, config: ComputeConfig, job: Arc<Job>) {
        job.advance(JobStatus::Running, 0.0);
        self.computations.fetch_add(1, Ordering::Relaxed);
        let progress = |done: usize, total: usize| {
            job.advance(JobStatus::Running, if total == 0 { 1.0 } else { done as f64 / total as f64 });
        };
        let control = Control { progress: Some(&progress), cancel: Some(&job.cancel) };
        let id = &ds.meta.fingerprint;
        let result = match &kind {
            ViewKind::Context => estimate_context(&ds.store, id, &config, control),
            ViewKind::Focus { first, second } => estimate_focus(&ds.store, id, *first, *second, &config, control),
            ViewKind::Matrix { regions } => estimate_matrix(&ds.store, id, regions, &config, control),
        };
        let mut cache = self.cache.lock().expect("lock");
        match result {
            Ok(v) => {
                cache.insert(job.key.clone(), Slot::Ready(Arc::new(v)));
                drop(cache);
                job.finish(Ok(()));
            }
            Err(e) => {
                cache.remove(&job.key);
                drop(cache);
                job.finish(Err(e.to_string()));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_is_monotone_and_terminal_states_final() {
        let j = Job::new("j1".into(), "context", "k".into());
        j.advance(JobStatus::Running, 0.5);
        j.advance(JobStatus::Running, 0.2);
        assert_eq!(j.view().progress, 0.5);
        j.finish(Err("boom".into()));
        j.advance(JobStatus::Running, 0.9);
        let v = j.view();
        assert_eq!((v.status, v.progress, v.result), (JobStatus::Failed, 0.5, None));
    }

    #[test]
    fn done_job_reports_its_key() {
        let j = Job::new("j1".into(), "focus", "abc".into());
        j.finish(Ok(()));
        assert_eq!(j.view().result.as_deref(), Some("abc"));
        assert_eq!(j.view().progress, 1.0);
    }

    #[test]
    fn default_budget_is_four_gib() {
        assert_eq!(ServiceConfig::default().memory_budget, 4 * 1024 * 1024 * 1024);
    }
}
