use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use mrl_core::config::{EngineOverrides, RunConfig};
use mrl_core::sim::{derive_seed, RANDOM_POLICY_STREAM};
use mrl_core::store::{tally_mistakes, EventLog, EventPayload, EventSink};
use mrl_core::{
    CatalogKind, Engine, GroupAssignment, InteractionRecord, Outcome, Reinforcer, ReinforcerCatalog,
    SessionLogSummary, WeightVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::sink::MemorySink;

pub const LOG_FILE_NAME: &str = "service.jsonl";
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

/// Milliseconds since the Unix epoch, injectable for tests.
pub trait Clock: Send + Sync {
    fn now_millis(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_millis(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default, Clone)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(start_millis: u64) -> Self {
        Self(Arc::new(AtomicU64::new(start_millis)))
    }

    pub fn advance(&self, by: Duration) {
        self.0.fetch_add(by.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_millis(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub group: String,
    pub catalog: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Option<EngineOverrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub entries: Vec<Reinforcer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeRequest {
    #[serde(default = "default_state_tag")]
    pub state_tag: String,
}

fn default_state_tag() -> String {
    "GuidedResponse".to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinforcer_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRequest {
    pub reinforcer_id: usize,
    pub rectified: bool,
}

/// Empty for the random and unreinforced groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub interaction_count: u64,
    pub weights: Vec<f64>,
    pub entropy_series: Vec<f64>,
    pub total_regret: f64,
    pub preferred_reinforcer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogInfo {
    pub name: String,
    pub size: usize,
    pub entries: Vec<Reinforcer>,
}

struct LiveSession {
    group: GroupAssignment,
    catalog: ReinforcerCatalog,
    engine: Option<Engine>,
    policy_rng: ChaCha8Rng,
    pending: Option<usize>,
    pending_tag: String,
    mistake_tags: Vec<String>,
    records: Vec<InteractionRecord>,
    last_active: u64,
}

impl LiveSession {
    fn n(&self) -> usize {
        self.catalog.len()
    }

    fn weights(&self) -> WeightVector {
        match &self.engine {
            Some(engine) => engine.weights().clone(),
            None => WeightVector::uniform(self.n()),
        }
    }

    fn summary(&self) -> SessionLogSummary {
        SessionLogSummary {
            group: self.group,
            mistakes_per_phase: tally_mistakes(self.mistake_tags.iter().map(String::as_str)),
            records: self.records.clone(),
            identified_preference: self.engine.as_ref().map(Engine::preferred_reinforcer),
            true_preference: None,
        }
    }
}

pub type BoxedSink = Box<dyn EventSink + Send>;

/// Live coaching sessions behind a shared event log.
///
/// Requests for one session are serialised by that session's lock. The log
/// lock is always taken last.
pub struct TrainerService {
    sessions: RwLock<HashMap<String, Arc<Mutex<LiveSession>>>>,
    log: Mutex<EventLog<BoxedSink>>,
    next_id: AtomicU64,
    master_seed: u64,
    clock: Arc<dyn Clock>,
    idle_timeout_ms: u64,
}

impl TrainerService {
    pub fn new(log: EventLog<BoxedSink>, clock: Arc<dyn Clock>, master_seed: u64) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            log: Mutex::new(log),
            next_id: AtomicU64::new(1),
            master_seed,
            clock,
            idle_timeout_ms: DEFAULT_IDLE_TIMEOUT.as_millis() as u64,
        }
    }

    /// A service logging to memory; the returned handle reads the events.
    pub fn in_memory(clock: Arc<dyn Clock>, master_seed: u64) -> (Self, MemorySink) {
        let sink = MemorySink::default();
        let log = EventLog::new(Box::new(sink.clone()) as BoxedSink);
        (Self::new(log, clock, master_seed), sink)
    }

    /// A service appending to `dir/service.jsonl`, resuming any sessions
    /// already recorded there.
    pub fn with_log_dir(dir: &Path, clock: Arc<dyn Clock>, master_seed: u64) -> mrl_core::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let log = EventLog::open_file(dir.join(LOG_FILE_NAME))?.map_sink(|sink| Box::new(sink) as BoxedSink);
        Ok(Self::new(log, clock, master_seed))
    }

    pub fn with_idle_timeout(mut self, timeout: Duration) -> Self {
        self.idle_timeout_ms = timeout.as_millis() as u64;
        self
    }

    pub fn catalogs(&self) -> Vec<CatalogInfo> {
        CatalogKind::ALL
            .iter()
            .map(|kind| CatalogInfo {
                name: kind.name().to_owned(),
                size: kind.size(),
                entries: ReinforcerCatalog::from_kind(*kind).entries().to_vec(),
            })
            .collect()
    }

    pub fn create_session(&self, req: CreateSessionRequest) -> Result<CreateSessionResponse, ServiceError> {
        let group: GroupAssignment = req.group.parse().map_err(ServiceError::from)?;
        let kind: CatalogKind = req.catalog.parse().map_err(ServiceError::from)?;
        let catalog = ReinforcerCatalog::from_kind(kind);

        let mut log = self.log.lock().expect("log lock");
        let mut counter = self.next_id.fetch_add(1, Ordering::SeqCst);
        let mut session_id = format!("s{counter:06}");
        while log.contains(&session_id) {
            counter = self.next_id.fetch_add(1, Ordering::SeqCst);
            session_id = format!("s{counter:06}");
        }
        let seed = req.seed.unwrap_or_else(|| derive_seed(self.master_seed, &[counter]));
        let run = RunConfig { engine: req.config.unwrap_or_default(), ..RunConfig::default() };
        let config = run.engine_config(kind, Some(seed)).map_err(ServiceError::from)?;

        let now = self.clock.now_millis();
        log.append(
            &session_id,
            now,
            EventPayload::SessionStarted { config: config.clone(), catalog: catalog.clone(), group },
        )?;
        drop(log);

        let engine = match group {
            GroupAssignment::Learned => Some(Engine::new(config.clone())?),
            _ => None,
        };
        let session = LiveSession {
            group,
            engine,
            policy_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[RANDOM_POLICY_STREAM])),
            pending: None,
            pending_tag: String::new(),
            mistake_tags: Vec::new(),
            records: Vec::new(),
            last_active: now,
            catalog: catalog.clone(),
        };
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(session_id.clone(), Arc::new(Mutex::new(session)));
        tracing::debug!(%session_id, %group, catalog = %kind, "session created");
        Ok(CreateSessionResponse { session_id, entries: catalog.entries().to_vec() })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ServiceError> {
        let found = self.sessions.read().expect("sessions lock").get(id).cloned();
        let session = found.ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))?;
        let idle = {
            let s = session.lock().expect("session lock");
            self.clock.now_millis().saturating_sub(s.last_active) > self.idle_timeout_ms
        };
        if idle {
            self.end_session(id)?;
            return Err(ServiceError::NotFound(format!("session {id} expired")));
        }
        Ok(session)
    }

    fn append(&self, id: &str, payload: EventPayload) -> Result<(), ServiceError> {
        let now = self.clock.now_millis();
        self.log.lock().expect("log lock").append(id, now, payload)?;
        Ok(())
    }

    pub fn report_mistake(&self, id: &str, req: MistakeRequest) -> Result<MistakeResponse, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().expect("session lock");
        if let Some(pending) = s.pending {
            return Err(ServiceError::Conflict(format!(
                "reinforcer {pending} is still awaiting an outcome"
            )));
        }
        s.last_active = self.clock.now_millis();
        self.append(id, EventPayload::MistakeObserved { state_tag: req.state_tag.clone() })?;
        s.mistake_tags.push(req.state_tag.clone());

        let n = s.n();
        let chosen = match s.group {
            GroupAssignment::None => None,
            GroupAssignment::Random => Some(s.policy_rng.gen_range(0..n)),
            GroupAssignment::Learned => s.engine.as_mut().map(Engine::select_reinforcer),
        };
        let Some(rid) = chosen else {
            return Ok(MistakeResponse { reinforcer_id: None, message: None });
        };
        self.append(id, EventPayload::ReinforcerDispatched { id: rid })?;
        s.pending = Some(rid);
        s.pending_tag = req.state_tag;
        let message = s.catalog.get(rid).map(|r| r.message.clone());
        Ok(MistakeResponse { reinforcer_id: Some(rid), message })
    }

    pub fn report_outcome(&self, id: &str, req: OutcomeRequest) -> Result<OutcomeResponse, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().expect("session lock");
        let empty = OutcomeResponse { weights: None, entropy: None, regret: None };
        if s.group == GroupAssignment::None && s.pending.is_none() {
            s.last_active = self.clock.now_millis();
            return Ok(empty);
        }
        match s.pending {
            Some(p) if p == req.reinforcer_id => {}
            Some(p) => {
                return Err(ServiceError::Invalid(format!(
                    "outcome names reinforcer {} but {p} is pending",
                    req.reinforcer_id
                )))
            }
            None => return Err(ServiceError::Invalid("no reinforcer is pending".into())),
        }
        s.last_active = self.clock.now_millis();
        let tag = std::mem::take(&mut s.pending_tag);
        let outcome = Outcome { selected: req.reinforcer_id, success: req.rectified };
        let record = match s.engine.as_mut() {
            Some(engine) => engine.record_outcome(outcome, tag)?,
            None => {
                let uniform = WeightVector::uniform(s.n());
                InteractionRecord {
                    t: s.records.len() as u64 + 1,
                    state_tag: tag,
                    selected: outcome.selected,
                    success: outcome.success,
                    entropy_after: uniform.entropy(),
                    weights_after: uniform,
                    regret: 0.0,
                }
            }
        };
        self.append(id, EventPayload::OutcomeRecorded { record: record.clone() })?;
        s.pending = None;
        s.records.push(record.clone());
        if s.group != GroupAssignment::Learned {
            return Ok(empty);
        }
        Ok(OutcomeResponse {
            weights: Some(record.weights_after.into_inner()),
            entropy: Some(record.entropy_after),
            regret: Some(record.regret),
        })
    }

    pub fn metrics(&self, id: &str) -> Result<MetricsResponse, ServiceError> {
        let session = self.session(id)?;
        let s = session.lock().expect("session lock");
        let weights = s.weights();
        let mut entropy_series = vec![WeightVector::uniform(s.n()).entropy()];
        entropy_series.extend(s.records.iter().map(|r| r.entropy_after));
        Ok(MetricsResponse {
            interaction_count: s.records.len() as u64,
            preferred_reinforcer: weights.argmax(),
            weights: weights.into_inner(),
            entropy_series,
            total_regret: s.records.iter().map(|r| r.regret).sum(),
        })
    }

    /// Closes a session with a `SessionEnded` event and forgets it.
    pub fn end_session(&self, id: &str) -> Result<SessionLogSummary, ServiceError> {
        let removed = self.sessions.write().expect("sessions lock").remove(id);
        let session = removed.ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))?;
        let s = session.lock().expect("session lock");
        let summary = s.summary();
        self.append(id, EventPayload::SessionEnded { summary: summary.clone() })?;
        tracing::debug!(session_id = %id, "session ended");
        Ok(summary)
    }

    /// Ends every session idle for longer than the timeout.
    pub fn expire_idle(&self) -> Vec<String> {
        let now = self.clock.now_millis();
        let stale: Vec<String> = self
            .sessions
            .read()
            .expect("sessions lock")
            .iter()
            .filter(|(_, s)| now.saturating_sub(s.lock().expect("session lock").last_active) > self.idle_timeout_ms)
            .map(|(id, _)| id.clone())
            .collect();
        stale.into_iter().filter(|id| self.end_session(id).is_ok()).collect()
    }

    /// Ends every open session, e.g. at shutdown.
    pub fn end_all(&self) {
        let ids: Vec<String> = self.sessions.read().expect("sessions lock").keys().cloned().collect();
        for id in ids {
            let _ = self.end_session(&id);
        }
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }
}
