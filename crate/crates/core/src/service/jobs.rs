use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::{ApiError, Output};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed,
}

/// What `GET /jobs/{id}` returns. PNG results are base64 in `result.image`.
#[derive(Clone, Debug, Serialize)]
pub struct JobSnapshot {
    pub job_id: u64,
    pub status: JobStatus,
    pub progress: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

/// Progress in [0, 1], stored as f64 bits.
#[derive(Clone, Default)]
pub struct Progress(Arc<AtomicU64>);

impl Progress {
    pub fn set(&self, p: f64) {
        self.0.store(p.clamp(0.0, 1.0).to_bits(), Ordering::Relaxed);
    }

    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }
}

struct Job {
    progress: Progress,
    outcome: Option<Result<serde_json::Value, serde_json::Value>>,
}

#[derive(Default)]
pub struct Jobs {
    next: AtomicU64,
    jobs: Mutex<HashMap<u64, Job>>,
}

impl Jobs {
    pub fn create(&self) -> (u64, Progress) {
        let id = self.next.fetch_add(1, Ordering::Relaxed) + 1;
        let progress = Progress::default();
        self.lock().insert(
            id,
            Job {
                progress: progress.clone(),
                outcome: None,
            },
        );
        (id, progress)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<u64, Job>> {
        self.jobs.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub(super) fn finish(&self, id: u64, result: Result<Output, ApiError>) {
        let outcome = match result {
            Ok(Output::Json(v)) => Ok(v),
            Ok(Output::Png { bytes, mediod }) => {
                use base64::Engine;
                let image = base64::engine::general_purpose::STANDARD.encode(bytes);
                Ok(serde_json::json!({ "image": image, "mediod_frame_id": mediod }))
            }
            Err(e) => Err(serde_json::json!({ "code": e.code, "message": e.message })),
        };
        if let Some(job) = self.lock().get_mut(&id) {
            if outcome.is_ok() {
                job.progress.set(1.0);
            }
            job.outcome = Some(outcome);
        }
    }

    pub fn snapshot(&self, id: u64) -> Option<JobSnapshot> {
        let jobs = self.lock();
        let job = jobs.get(&id)?;
        let (status, result, error) = match &job.outcome {
            None => (JobStatus::Running, None, None),
            Some(Ok(v)) => (JobStatus::Done, Some(v.clone()), None),
            Some(Err(e)) => (JobStatus::Failed, None, Some(e.clone())),
        };
        Some(JobSnapshot {
            job_id: id,
            status,
            progress: job.progress.get(),
            result,
            error,
        })
    }
}
