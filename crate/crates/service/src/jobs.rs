//! Job table and background execution.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use exosquat_api::{ControllerSpec, JobKind, JobRequest, JobStatus, JobSummary};
use exosquat_core::check::run_checks;
use exosquat_core::runner::{self, Controller, Progress};

pub struct JobRecord {
    pub id: u64,
    pub kind: JobKind,
    pub label: String,
    pub out_dir: PathBuf,
    pub cancel: Arc<AtomicBool>,
    pub created_unix: u64,
    state: Mutex<JobState>,
}

#[derive(Default)]
struct JobState {
    status: Option<JobStatus>,
    progress: Option<Progress>,
    error: Option<String>,
    result: Option<serde_json::Value>,
    finished_unix: Option<u64>,
}

impl JobRecord {
    pub fn summary(&self) -> JobSummary {
        let state = self.state.lock().unwrap();
        JobSummary {
            id: self.id,
            kind: self.kind,
            label: self.label.clone(),
            status: state.status.unwrap_or(JobStatus::Queued),
            progress: state.progress.clone(),
            out_dir: self.out_dir.clone(),
            error: state.error.clone(),
            result: state.result.clone(),
            created_unix: self.created_unix,
            finished_unix: state.finished_unix,
        }
    }

    fn set_status(&self, status: JobStatus) {
        self.state.lock().unwrap().status = Some(status);
    }

    fn set_progress(&self, progress: Progress) {
        self.state.lock().unwrap().progress = Some(progress);
    }

    fn finish(&self, result: Result<serde_json::Value, String>, cancelled: bool) {
        let mut state = self.state.lock().unwrap();
        state.finished_unix = Some(now_unix());
        match result {
            Ok(value) => {
                state.result = Some(value);
                state.status = Some(JobStatus::Finished);
            }
            Err(error) => {
                state.status =
                    Some(if cancelled { JobStatus::Cancelled } else { JobStatus::Failed });
                state.error = Some(error);
            }
        }
    }
}

#[derive(Default)]
pub struct JobStore {
    jobs: Mutex<BTreeMap<u64, Arc<JobRecord>>>,
    next_id: AtomicU64,
}

impl JobStore {
    pub fn insert(&self, record: Arc<JobRecord>) {
        self.jobs.lock().unwrap().insert(record.id, record);
    }

    pub fn get(&self, id: u64) -> Option<Arc<JobRecord>> {
        self.jobs.lock().unwrap().get(&id).cloned()
    }

    pub fn list(&self) -> Vec<JobSummary> {
        self.jobs.lock().unwrap().values().map(|r| r.summary()).collect()
    }

    pub fn allocate_id(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::SeqCst) + 1
    }
}

pub struct ServiceState {
    pub jobs: JobStore,
    pub out_root: PathBuf,
}

impl ServiceState {
    pub fn new(out_root: PathBuf) -> Self {
        Self { jobs: JobStore::default(), out_root }
    }

    /// Register and start a job on the blocking pool.
    pub fn spawn_job(self: &Arc<Self>, request: JobRequest) -> u64 {
        let id = self.jobs.allocate_id();
        let out_dir = request
            .out_dir
            .clone()
            .unwrap_or_else(|| self.out_root.join(format!("job-{id:05}")));
        let record = Arc::new(JobRecord {
            id,
            kind: request.kind,
            label: if request.label.is_empty() {
                format!("{:?}", request.kind).to_lowercase()
            } else {
                request.label.clone()
            },
            out_dir: out_dir.clone(),
            cancel: Arc::new(AtomicBool::new(false)),
            created_unix: now_unix(),
            state: Mutex::new(JobState::default()),
        });
        self.jobs.insert(Arc::clone(&record));

        let worker_record = Arc::clone(&record);
        tokio::task::spawn_blocking(move || {
            worker_record.set_status(JobStatus::Running);
            let cancel = Arc::clone(&worker_record.cancel);
            let progress_record = Arc::clone(&worker_record);
            let mut progress = move |p: Progress| progress_record.set_progress(p);
            let outcome = run_job(&request, &out_dir, &cancel, &mut progress);
            let cancelled = cancel.load(Ordering::Relaxed);
            worker_record.finish(outcome, cancelled);
        });
        id
    }
}

fn run_job(
    request: &JobRequest,
    out_dir: &std::path::Path,
    cancel: &Arc<AtomicBool>,
    progress: &mut dyn FnMut(Progress),
) -> Result<serde_json::Value, String> {
    let controller = match &request.controller {
        ControllerSpec::Playback => Controller::Playback,
        ControllerSpec::Checkpoint { path } => Controller::Checkpoint(path.clone()),
    };
    match request.kind {
        JobKind::Train => runner::train_run(&request.config, out_dir, cancel, progress)
            .map(|s| serde_json::to_value(s).unwrap())
            .map_err(|e| e.to_string()),
        JobKind::Eval => runner::eval_run(&request.config, &controller, out_dir, progress)
            .map(|s| serde_json::to_value(s).unwrap())
            .map_err(|e| e.to_string()),
        JobKind::Sweep => runner::sweep_run(&request.config, &controller, out_dir, cancel, progress)
            .map(|s| serde_json::to_value(s).unwrap())
            .map_err(|e| e.to_string()),
        JobKind::Check => {
            std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
            let report = run_checks();
            std::fs::write(
                out_dir.join("check_report.json"),
                serde_json::to_string_pretty(&report).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            if report.all_passed {
                Ok(serde_json::to_value(report).unwrap())
            } else {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(format!("checks failed: {}", failed.join(", ")))
            }
        }
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
