//! Asynchronous jobs: a store of records plus a bounded worker pool.

use std::collections::HashMap;
use std::future::Future;
use std::pin::Pin;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;

use atomflow_core::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    /// Allowed moves: queued -> running -> done | failed.
    pub fn can_move_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done) | (JobState::Running, JobState::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub endpoint: String,
    pub body: Value,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

pub type JobFuture = Pin<Box<dyn Future<Output = Result<Value, String>> + Send>>;
/// Executes one job given its endpoint and body.
pub type JobRunner = Arc<dyn Fn(String, Value) -> JobFuture + Send + Sync>;

pub struct JobQueue {
    store: Mutex<HashMap<String, JobRecord>>,
    tx: mpsc::UnboundedSender<String>,
    next_id: AtomicU64,
    running: AtomicUsize,
    peak_running: AtomicUsize,
    ttl: Duration,
    clock: Arc<dyn Clock>,
}

impl JobQueue {
    /// Spawns `workers` tasks on the current runtime. Must be called from
    /// within a Tokio runtime.
    pub fn start(workers: usize, ttl: Duration, clock: Arc<dyn Clock>, runner: JobRunner) -> Arc<Self> {
        let (tx, rx) = mpsc::unbounded_channel::<String>();
        let queue = Arc::new(Self {
            store: Mutex::new(HashMap::new()),
            tx,
            next_id: AtomicU64::new(1),
            running: AtomicUsize::new(0),
            peak_running: AtomicUsize::new(0),
            ttl,
            clock,
        });
        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        for _ in 0..workers.max(1) {
            let rx = Arc::clone(&rx);
            let weak = Arc::downgrade(&queue);
            let runner = Arc::clone(&runner);
            tokio::spawn(async move {
                loop {
                    let next = rx.lock().await.recv().await;
                    let (Some(id), Some(q)) = (next, weak.upgrade()) else { break };
                    q.run_one(&id, &runner).await;
                }
            });
        }
        queue
    }

    async fn run_one(&self, id: &str, runner: &JobRunner) {
        let Some((endpoint, body)) = self.transition(id, JobState::Running, None, None) else { return };
        let now_running = self.running.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_running.fetch_max(now_running, Ordering::SeqCst);
        let outcome = runner(endpoint, body).await;
        self.running.fetch_sub(1, Ordering::SeqCst);
        match outcome {
            Ok(v) => self.transition(id, JobState::Done, Some(v), None),
            Err(e) => self.transition(id, JobState::Failed, None, Some(e)),
        };
    }

    fn transition(&self, id: &str, next: JobState, result: Option<Value>, error: Option<String>) -> Option<(String, Value)> {
        let now = self.clock.now_ms();
        let mut store = self.store.lock().ok()?;
        let rec = store.get_mut(id)?;
        if !rec.state.can_move_to(next) {
            tracing::error!(job = id, from = ?rec.state, to = ?next, "illegal job transition");
            return None;
        }
        rec.state = next;
        rec.updated_ms = now;
        rec.result = result;
        rec.error = error;
        Some((rec.endpoint.clone(), rec.body.clone()))
    }

    fn purge(&self, store: &mut HashMap<String, JobRecord>) {
        let now = self.clock.now_ms();
        let ttl = self.ttl.as_millis() as u64;
        store.retain(|_, r| !(r.state.is_terminal() && now.saturating_sub(r.updated_ms) > ttl));
    }

    pub fn submit(&self, endpoint: impl Into<String>, body: Value) -> String {
        let now = self.clock.now_ms();
        let job_id = format!("job-{:08}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let rec = JobRecord {
            job_id: job_id.clone(),
            endpoint: endpoint.into(),
            body,
            state: JobState::Queued,
            result: None,
            error: None,
            created_ms: now,
            updated_ms: now,
        };
        if let Ok(mut store) = self.store.lock() {
            self.purge(&mut store);
            store.insert(job_id.clone(), rec);
        }
        let _ = self.tx.send(job_id.clone());
        job_id
    }

    /// Latest record, or `None` if unknown or purged after the TTL.
    pub fn get(&self, job_id: &str) -> Option<JobRecord> {
        let mut store = self.store.lock().ok()?;
        self.purge(&mut store);
        store.get(job_id).cloned()
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn running(&self) -> usize {
        self.running.load(Ordering::SeqCst)
    }

    /// Highest number of jobs observed running at once.
    pub fn peak_running(&self) -> usize {
        self.peak_running.load(Ordering::SeqCst)
    }
}
