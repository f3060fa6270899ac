use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant};

use plantwatch::data::SampleRecord;
use plantwatch::pipeline::{Engine, EngineConfig, StepReport, TrainedSystem};
use tokio::sync::broadcast;

use crate::alarms::{AlarmBook, AlarmLog};
use crate::config::ServiceConfig;
use crate::schema::{
    AlarmStatus, Envelope, EventBody, FeedbackRequest, FeedbackResponse, SessionCommand, SessionState, SessionView,
    Speed, Telemetry, Verdict, EVENT, FEEDBACK,
};
use crate::ServiceError;

/// Everything needed to run a service without a config file.
pub struct ServiceParts {
    pub dataset: String,
    pub records: Vec<SampleRecord>,
    pub system: Option<TrainedSystem>,
    pub engine: EngineConfig,
    pub alarm_log: std::path::PathBuf,
    pub event_buffer: usize,
    pub speed: Speed,
}

#[derive(Debug, Default)]
pub struct Counters {
    pub records: AtomicU64,
    pub alarms: AtomicU64,
    pub feedback_true: AtomicU64,
    pub feedback_false: AtomicU64,
    pub adaptation_micros: AtomicU64,
    pub events: AtomicU64,
    pub gaps: AtomicU64,
}

struct Session {
    id: u64,
    state: SessionState,
    speed: Speed,
    cursor: usize,
    seek_to: Option<usize>,
    error: Option<String>,
}

struct Bus {
    seq: u64,
    backlog: VecDeque<Arc<Envelope>>,
    capacity: usize,
    tx: broadcast::Sender<Arc<Envelope>>,
}

pub(crate) struct Shared {
    dataset: String,
    records: Vec<SampleRecord>,
    engine: Mutex<Option<Engine>>,
    t_base: Vec<f64>,
    version: AtomicU64,
    session: Mutex<Session>,
    wake: Condvar,
    bus: Mutex<Bus>,
    alarms: Mutex<AlarmBook>,
    log: Mutex<AlarmLog>,
    pub(crate) counters: Counters,
}

/// Cheap handle to the running service; clones share state. The replay
/// thread stops once the last handle is dropped.
#[derive(Clone)]
pub struct Service {
    pub(crate) shared: Arc<Shared>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Service {
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let splits = cfg
            .dataset
            .load(std::path::Path::new("."))
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let system = match &cfg.model_dir {
            Some(dir) => Some(TrainedSystem::load(dir).map_err(|e| ServiceError::Config(e.to_string()))?),
            None => None,
        };
        Self::new(ServiceParts {
            dataset: splits.profile.name.clone(),
            records: splits.test,
            system,
            engine: cfg.engine,
            alarm_log: cfg.alarm_log.clone(),
            event_buffer: cfg.event_buffer,
            speed: cfg.speed,
        })
    }

    pub fn new(parts: ServiceParts) -> Result<Self, ServiceError> {
        if !parts.speed.is_valid() {
            return Err(ServiceError::Config("speed must be positive or \"max\"".into()));
        }
        let capacity = parts.event_buffer.max(1);
        let t_base = parts
            .system
            .as_ref()
            .map(|s| s.thresholds.iter().map(|t| t.t_base).collect())
            .unwrap_or_default();
        let engine = match parts.system {
            Some(s) => Some(Engine::new(s, parts.engine).map_err(|e| ServiceError::Config(e.to_string()))?),
            None => None,
        };
        let version = engine.as_ref().map_or(0, Engine::model_version);
        let (tx, _) = broadcast::channel(capacity);
        let shared = Arc::new(Shared {
            dataset: parts.dataset,
            records: parts.records,
            engine: Mutex::new(engine),
            t_base,
            version: AtomicU64::new(version),
            session: Mutex::new(Session {
                id: 1,
                state: SessionState::Idle,
                speed: parts.speed,
                cursor: 0,
                seek_to: None,
                error: None,
            }),
            wake: Condvar::new(),
            bus: Mutex::new(Bus {
                seq: 0,
                backlog: VecDeque::with_capacity(capacity),
                capacity,
                tx,
            }),
            alarms: Mutex::new(AlarmBook::default()),
            log: Mutex::new(AlarmLog::open(&parts.alarm_log)?),
            counters: Counters::default(),
        });
        let weak = Arc::downgrade(&shared);
        std::thread::Builder::new()
            .name("plantwatch-replay".into())
            .spawn(move || replay_loop(weak))
            .map_err(|e| ServiceError::Io(e.to_string()))?;
        Ok(Self { shared })
    }

    pub fn model_loaded(&self) -> bool {
        lock(&self.shared.engine).is_some()
    }

    pub fn model_version(&self) -> u64 {
        self.shared.version.load(Ordering::SeqCst)
    }

    pub fn session(&self) -> SessionView {
        self.shared.view(&lock(&self.shared.session))
    }

    pub fn counters(&self) -> &Counters {
        &self.shared.counters
    }

    pub fn sections(&self) -> usize {
        self.shared.t_base.len()
    }

    pub fn alarms(&self) -> Vec<crate::schema::Alarm> {
        lock(&self.shared.alarms).all().to_vec()
    }

    pub fn open_alarms(&self) -> usize {
        lock(&self.shared.alarms).open_count()
    }

    pub fn last_seq(&self) -> u64 {
        lock(&self.shared.bus).seq
    }

    pub fn adaptations(&self) -> Vec<plantwatch::adapt::AdaptReport> {
        lock(&self.shared.engine)
            .as_ref()
            .map(|e| e.adaptations().to_vec())
            .unwrap_or_default()
    }

    /// Buffered events after `after` plus a live receiver, taken atomically
    /// so nothing falls between them. The flag is set when `after` is older
    /// than the buffer.
    pub fn subscribe(&self, after: Option<u64>) -> (Vec<Arc<Envelope>>, bool, broadcast::Receiver<Arc<Envelope>>) {
        let bus = lock(&self.shared.bus);
        let rx = bus.tx.subscribe();
        let Some(after) = after else {
            return (Vec::new(), false, rx);
        };
        let first = bus.backlog.front().map_or(bus.seq + 1, |e| e.seq);
        let missed = after + 1 < first;
        let backlog = bus.backlog.iter().filter(|e| e.seq > after).cloned().collect();
        (backlog, missed, rx)
    }

    pub fn command(&self, cmd: SessionCommand) -> Result<SessionView, ServiceError> {
        let mut s = lock(&self.shared.session);
        match cmd {
            SessionCommand::Start { speed } => {
                if !self.model_loaded() {
                    return Err(ServiceError::State("no model is loaded".into()));
                }
                match s.state {
                    SessionState::Idle | SessionState::Paused => {}
                    SessionState::Running => return Err(ServiceError::State("session already running".into())),
                    SessionState::Finished => return Err(ServiceError::State("session finished".into())),
                }
                if let Some(sp) = speed {
                    check_speed(sp)?;
                    s.speed = sp;
                }
                s.state = SessionState::Running;
            }
            SessionCommand::Pause => {
                if s.state != SessionState::Running {
                    return Err(ServiceError::State("session is not running".into()));
                }
                s.state = SessionState::Paused;
            }
            SessionCommand::Speed { speed } => {
                check_speed(speed)?;
                s.speed = speed;
            }
            SessionCommand::Seek { to } => {
                if to < s.cursor {
                    return Err(ServiceError::State(format!(
                        "cannot seek back to {to}; cursor is at {}",
                        s.cursor
                    )));
                }
                if to > self.shared.records.len() {
                    return Err(ServiceError::BadRequest(format!(
                        "seek target {to} is past the {} records",
                        self.shared.records.len()
                    )));
                }
                s.seek_to = Some(to);
            }
        }
        let view = self.shared.view(&s);
        drop(s);
        self.shared.wake.notify_all();
        self.shared.emit(EventBody::Session { session: view.clone() });
        Ok(view)
    }

    /// Applies a verdict. Blocking: runs the tuning when the verdict is a
    /// false alarm.
    pub fn feedback(&self, id: u64, req: FeedbackRequest) -> Result<FeedbackResponse, ServiceError> {
        let sections = self.sections();
        match (&req.verdict, &req.flags) {
            (Verdict::FalseAlarm, None) => return Err(ServiceError::BadRequest("a false alarm needs flags".into())),
            (Verdict::FalseAlarm, Some(f)) if f.sections.len() != sections => {
                return Err(ServiceError::BadRequest(format!(
                    "flags list {} sections, the model has {sections}",
                    f.sections.len()
                )))
            }
            (Verdict::FalseAlarm, Some(f)) if !f.any() => {
                return Err(ServiceError::BadRequest("flags mark no source".into()))
            }
            (Verdict::TrueAnomaly, Some(_)) => {
                return Err(ServiceError::BadRequest("flags are only allowed on a false alarm".into()))
            }
            _ => {}
        }
        // Claim the alarm; a concurrent duplicate sees it resolving.
        let t = {
            let mut book = lock(&self.shared.alarms);
            let alarm = book.get_mut(id).ok_or(ServiceError::NotFound(format!("alarm {id}")))?;
            if alarm.status != AlarmStatus::Open {
                return Err(ServiceError::Conflict(format!("alarm {id} is already {:?}", alarm.status).to_lowercase()));
            }
            alarm.status = AlarmStatus::Resolving;
            alarm.t
        };
        let outcome = match (req.verdict, req.flags) {
            (Verdict::FalseAlarm, Some(flags)) => {
                let mut guard = lock(&self.shared.engine);
                match guard.as_mut() {
                    Some(engine) => engine
                        .feedback(t, &flags)
                        .map(|r| {
                            self.shared.version.store(engine.model_version(), Ordering::SeqCst);
                            Some(r)
                        })
                        .map_err(|e| e.to_string()),
                    None => Err("no model is loaded".to_string()),
                }
            }
            _ => Ok(None),
        };
        let mut book = lock(&self.shared.alarms);
        let alarm = book.get_mut(id).expect("claimed above");
        let adaptation = match outcome {
            Ok(a) => a,
            Err(e) => {
                alarm.status = AlarmStatus::Open;
                return Err(ServiceError::BadRequest(e));
            }
        };
        alarm.status = match req.verdict {
            Verdict::FalseAlarm => AlarmStatus::Dismissed,
            Verdict::TrueAnomaly => AlarmStatus::Confirmed,
        };
        drop(book);
        let c = &self.shared.counters;
        match req.verdict {
            Verdict::FalseAlarm => c.feedback_false.fetch_add(1, Ordering::Relaxed),
            Verdict::TrueAnomaly => c.feedback_true.fetch_add(1, Ordering::Relaxed),
        };
        if let Some(a) = &adaptation {
            c.adaptation_micros.fetch_add((a.wall_ms * 1e3) as u64, Ordering::Relaxed);
        }
        let response = FeedbackResponse {
            schema: FEEDBACK.into(),
            alarm_id: id,
            verdict: req.verdict,
            model_version: self.model_version(),
            adaptation,
        };
        let session = lock(&self.shared.session).id;
        lock(&self.shared.log).feedback(session, &response)?;
        self.shared.emit(EventBody::Feedback {
            alarm_id: id,
            verdict: response.verdict,
            adaptation: response.adaptation.clone(),
        });
        Ok(response)
    }
}

fn check_speed(s: Speed) -> Result<(), ServiceError> {
    if s.is_valid() {
        Ok(())
    } else {
        Err(ServiceError::BadRequest("speed must be positive or \"max\"".into()))
    }
}

impl Shared {
    fn view(&self, s: &Session) -> SessionView {
        SessionView {
            id: s.id,
            state: s.state,
            speed: s.speed,
            cursor: s.cursor,
            total: self.records.len(),
            dataset: self.dataset.clone(),
            error: s.error.clone(),
        }
    }

    fn emit(&self, body: EventBody) {
        let session = lock(&self.session).id;
        let mut bus = lock(&self.bus);
        bus.seq += 1;
        let env = Arc::new(Envelope {
            schema: EVENT.into(),
            seq: bus.seq,
            session,
            model_version: self.version.load(Ordering::SeqCst),
            body,
        });
        if bus.backlog.len() == bus.capacity {
            bus.backlog.pop_front();
        }
        bus.backlog.push_back(env.clone());
        // No subscribers is fine.
        let _ = bus.tx.send(env);
        self.counters.events.fetch_add(1, Ordering::Relaxed);
    }

    fn finish(&self, error: Option<String>) {
        let view = {
            let mut s = lock(&self.session);
            s.state = SessionState::Finished;
            s.error = error;
            self.view(&s)
        };
        self.emit(EventBody::Session { session: view });
    }

    /// Pushes record `t` and publishes what it produced.
    fn step(&self, t: usize, tele: &mut Option<Telemetry>) -> Result<(), ServiceError> {
        let (report, events): (StepReport, Vec<_>) = {
            let mut engine = lock(&self.engine);
            let engine = engine.as_mut().ok_or(ServiceError::State("no model is loaded".into()))?;
            let report = engine.push(&self.records[t]).map_err(|e| ServiceError::Engine(e.to_string()))?;
            let events = report
                .reported
                .iter()
                .map(|&r| (r, self.records[r].timestamp, engine.alarm(r).cloned()))
                .collect();
            (report, events)
        };
        self.counters.records.fetch_add(1, Ordering::Relaxed);
        self.version.store(report.model_version, Ordering::SeqCst);
        if report.interval_start {
            if let Some(done) = tele.take() {
                self.emit(EventBody::Telemetry(done));
            }
        }
        let cur = tele.get_or_insert_with(|| Telemetry {
            t_start: t,
            t_end: t,
            mse: Vec::new(),
            thresholds: Vec::new(),
            t_base: self.t_base.clone(),
            labels: Vec::new(),
            alarm_ids: Vec::new(),
        });
        cur.t_end = t;
        cur.mse.push(report.mse.iter().map(|v| v.is_finite().then_some(*v)).collect());
        cur.thresholds = report.thresholds.clone();
        cur.labels.push(u8::from(report.label));

        let session = lock(&self.session).id;
        for (r, ts, ev) in events {
            let opened = lock(&self.alarms).observe(r, ts, ev.as_ref(), report.model_version).cloned();
            if let Some(alarm) = opened {
                self.counters.alarms.fetch_add(1, Ordering::Relaxed);
                // Log before publishing so every streamed alarm is on disk.
                lock(&self.log).alarm(session, &alarm)?;
                cur.alarm_ids.push(alarm.id);
                self.emit(EventBody::Alarm { alarm });
            }
        }
        Ok(())
    }
}

enum Next {
    Wait,
    Step { t: usize, period: Option<f64> },
    Done,
    Stop,
}

fn replay_loop(weak: Weak<Shared>) {
    let mut tele: Option<Telemetry> = None;
    let mut deadline: Option<Instant> = None;
    loop {
        let Some(shared) = weak.upgrade() else { return };
        let next = {
            let s = lock(&shared.session);
            match s.state {
                SessionState::Running if s.cursor >= shared.records.len() => Next::Done,
                SessionState::Running => {
                    let fast = s.seek_to.is_some_and(|k| s.cursor < k);
                    Next::Step {
                        t: s.cursor,
                        period: if fast { None } else { s.speed.period() },
                    }
                }
                SessionState::Finished => Next::Stop,
                _ => Next::Wait,
            }
        };
        match next {
            Next::Stop => {
                let s = lock(&shared.session);
                let _ = shared.wake.wait_timeout(s, Duration::from_millis(200));
            }
            Next::Wait => {
                deadline = None;
                let s = lock(&shared.session);
                let _ = shared.wake.wait_timeout(s, Duration::from_millis(100));
            }
            Next::Done => {
                if let Some(done) = tele.take() {
                    shared.emit(EventBody::Telemetry(done));
                }
                shared.finish(None);
            }
            Next::Step { t, period } => {
                if let Some(p) = period {
                    let due = deadline.unwrap_or_else(Instant::now);
                    let now = Instant::now();
                    if due > now {
                        // Sleep on the condvar so a pause takes effect at once.
                        let s = lock(&shared.session);
                        let _ = shared.wake.wait_timeout(s, due - now);
                        continue;
                    }
                    deadline = Some(due.max(now - Duration::from_secs(1)) + Duration::from_secs_f64(p));
                } else {
                    deadline = None;
                }
                match shared.step(t, &mut tele) {
                    Ok(()) => {
                        let mut s = lock(&shared.session);
                        s.cursor = t + 1;
                        if s.seek_to.is_some_and(|k| s.cursor >= k) {
                            s.seek_to = None;
                        }
                    }
                    Err(e) => {
                        tracing::error!("replay stopped at t={t}: {e}");
                        shared.finish(Some(e.to_string()));
                    }
                }
            }
        }
    }
}
