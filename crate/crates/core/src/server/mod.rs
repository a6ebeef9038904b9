//! Report intake, distribution, administrative workflow, verification and
//! push delivery.
//!
//! All mutations go through [`AuditEvent`]s: an operation checks its
//! preconditions against the current state, appends the resulting events to
//! the log and folds them into the state with [`ServerState::apply`].
//! Replaying the log therefore rebuilds the exact live state.

pub mod api;
mod clock;
pub mod push;
pub mod state;
pub mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{Clock, ManualClock, SystemClock};
pub use push::{AlertSummary, PushMessage, MAX_PUSH_BYTES};
pub use state::{replay, replay_onto, ApplyError, AuditAction, AuditEvent, EventBody, Note, ReportEntry, ServerState};
use store::EventLog;

use crate::cap::{self, CapError, CapTime, MsgType};
use crate::config::Config;
use crate::domain::{
    is_valid_id, transition, Actor, ActorId, DisasterKind, DisasterReport, LifecycleState, Role, Severity,
    TransitionError, Violation,
};
use crate::geo::{AdminHierarchy, DEFAULT_NEIGHBOR_RADIUS_M};
use crate::ledger::{DuplicateVerification, Reliability, VerificationRecord, Weights};
use crate::routing::{notification_set, topics, ActorDirectory, Recipient, RoutingError};

/// Most messages a single poll returns.
pub const MAX_POLL_BATCH: usize = 1000;
const MAX_KEY_LEN: usize = 128;
const MAX_TOPIC_LEN: usize = 128;
const MAX_DOCUMENT_REF: usize = 256;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("validation failed: {}", join(.0))]
    ValidationFailed(Vec<Violation>),
    #[error("unknown report {0:?}")]
    UnknownReport(String),
    #[error("unknown actor {0}")]
    UnknownActor(ActorId),
    #[error("unknown subscriber {0}")]
    UnknownSubscriber(ActorId),
    #[error("{actor} ({role}) may not perform administrative actions")]
    Forbidden { actor: ActorId, role: Role },
    #[error(transparent)]
    IllegalTransition(#[from] TransitionError),
    #[error("cannot merge report {report:?} into {into:?}")]
    MergeCycle { report: String, into: String },
    #[error(transparent)]
    DuplicateVerification(#[from] DuplicateVerification),
    #[error("report {0:?} is closed")]
    ReportClosed(String),
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
    #[error("cursor {cursor} on {topic:?} is ahead of the latest seq {latest}")]
    CursorAhead { topic: String, cursor: u64, latest: u64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Cap(#[from] CapError),
    #[error("corrupt log at seq {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ServerError {
    /// Stable name used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServerError::ValidationFailed(_) => "ValidationFailed",
            ServerError::UnknownReport(_) => "UnknownReport",
            ServerError::UnknownActor(_) => "UnknownActor",
            ServerError::UnknownSubscriber(_) => "UnknownSubscriber",
            ServerError::Forbidden { .. } => "Forbidden",
            ServerError::IllegalTransition(_) => "IllegalTransition",
            ServerError::MergeCycle { .. } => "MergeCycle",
            ServerError::DuplicateVerification(_) => "DuplicateVerification",
            ServerError::ReportClosed(_) => "ReportClosed",
            ServerError::UnknownRegion(_) => "UnknownRegion",
            ServerError::CursorAhead { .. } => "CursorAhead",
            ServerError::InvalidRequest(_) => "InvalidRequest",
            ServerError::Cap(CapError::MalformedXml(_)) => "MalformedXml",
            ServerError::Cap(CapError::SchemaViolation { .. }) => "SchemaViolation",
            ServerError::Cap(_) => "InvalidCap",
            ServerError::CorruptLog { .. } => "CorruptLog",
            ServerError::Config(_) => "Config",
            ServerError::Io(_) => "Io",
        }
    }
}

impl From<RoutingError> for ServerError {
    fn from(e: RoutingError) -> Self {
        match e {
            RoutingError::UnknownRegion(r) => ServerError::UnknownRegion(r),
            other => ServerError::Config(other.to_string()),
        }
    }
}

impl From<ApplyError> for ServerError {
    fn from(e: ApplyError) -> Self {
        ServerError::CorruptLog {
            seq: e.seq,
            reason: e.reason,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub neighbor_radius_m: f64,
    pub weights: Weights,
    pub auto_threshold: f64,
    /// Write a snapshot every this many events (0 disables).
    pub snapshot_every: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            neighbor_radius_m: DEFAULT_NEIGHBOR_RADIUS_M,
            weights: Weights::default(),
            auto_threshold: 10.0,
            snapshot_every: 100,
        }
    }
}

impl Settings {
    pub fn from_config(config: &Config) -> Self {
        Self {
            neighbor_radius_m: config.neighbor_radius_m,
            weights: config.verification.weights(),
            auto_threshold: config.verification.auto_threshold,
            snapshot_every: config.snapshot_every,
        }
    }
}

/// Administrative actions on a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Action {
    Review,
    Assign {
        target: Recipient,
    },
    /// Merges this report into `other`. With `keep_older` the older of the
    /// two survives instead, whichever was named first.
    Merge {
        other: String,
        #[serde(default)]
        keep_older: bool,
    },
    Resolve,
    Update(ReportUpdate),
    AttachDocument {
        reference: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportUpdate {
    #[serde(default)]
    pub severity: Option<Severity>,
    #[serde(default)]
    pub description: Option<String>,
    /// Free text appended to the report's notes.
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub subscriber: ActorId,
    pub topics: BTreeSet<String>,
    /// Latest published seq per topic when the subscription was made.
    pub cursors: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportFilter {
    #[serde(default)]
    pub province: Option<String>,
    #[serde(default)]
    pub district: Option<String>,
    #[serde(default)]
    pub state: Option<LifecycleState>,
    #[serde(default)]
    pub kind: Option<DisasterKind>,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
}

impl ReportFilter {
    pub fn matches(&self, r: &DisasterReport) -> bool {
        self.province.as_ref().is_none_or(|p| &r.province_id == p)
            && self.district.as_ref().is_none_or(|d| &r.district_id == d)
            && self.state.is_none_or(|s| r.state == s)
            && self.kind.is_none_or(|k| r.kind == k)
            && self.bbox.is_none_or(|b| b.contains(r.location.lat, r.location.lon))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportView {
    pub report: DisasterReport,
    pub responsible: Option<Recipient>,
    pub topics: BTreeSet<String>,
    pub reliability: Reliability,
    pub auto_distribution_eligible: bool,
    pub admin_actions: u32,
    pub reporter_notified: bool,
    pub notes: Vec<Note>,
}

struct Inner {
    state: ServerState,
    events: Vec<AuditEvent>,
    subscriptions: HashMap<ActorId, BTreeSet<String>>,
    log: Option<EventLog>,
    snapshot: Option<PathBuf>,
}

type Pending = (ActorId, String, EventBody);

pub struct AlertServer {
    hierarchy: AdminHierarchy,
    directory: ActorDirectory,
    settings: Settings,
    clock: Arc<dyn Clock>,
    inner: Mutex<Inner>,
    published: Condvar,
}

impl AlertServer {
    /// An in-memory server on the system clock.
    pub fn new(hierarchy: AdminHierarchy, directory: ActorDirectory, settings: Settings) -> Self {
        Self::with_clock(hierarchy, directory, settings, Arc::new(SystemClock))
    }

    pub fn with_clock(
        hierarchy: AdminHierarchy,
        directory: ActorDirectory,
        settings: Settings,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self::from_parts(hierarchy, directory, settings, clock, ServerState::default(), Vec::new(), None, None)
    }

    /// A server persisted to `event_log`, recovering whatever is already
    /// there. The snapshot, when present, only shortens the replay.
    pub fn open(
        hierarchy: AdminHierarchy,
        directory: ActorDirectory,
        settings: Settings,
        clock: Arc<dyn Clock>,
        event_log: &Path,
        snapshot: Option<&Path>,
    ) -> Result<Self, ServerError> {
        let (log, events) = EventLog::open(event_log)?;
        let base = match snapshot {
            Some(path) => store::read_snapshot(path)?.unwrap_or_default(),
            None => ServerState::default(),
        };
        if base.last_seq > events.len() as u64 {
            return Err(ServerError::CorruptLog {
                seq: base.last_seq,
                reason: "snapshot is ahead of the event log".into(),
            });
        }
        let state = replay_onto(base, &events)?;
        Ok(Self::from_parts(
            hierarchy,
            directory,
            settings,
            clock,
            state,
            events,
            Some(log),
            snapshot.map(Path::to_path_buf),
        ))
    }

    pub fn from_config(config: &Config, clock: Arc<dyn Clock>) -> Result<Self, ServerError> {
        let hierarchy = AdminHierarchy::load(&config.regions).map_err(|e| ServerError::Config(e.to_string()))?;
        let directory = ActorDirectory::load(&config.directory).map_err(|e| ServerError::Config(e.to_string()))?;
        let settings = Settings::from_config(config);
        match &config.event_log {
            Some(log) => Self::open(hierarchy, directory, settings, clock, log, config.snapshot.as_deref()),
            None => Ok(Self::with_clock(hierarchy, directory, settings, clock)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        hierarchy: AdminHierarchy,
        directory: ActorDirectory,
        settings: Settings,
        clock: Arc<dyn Clock>,
        state: ServerState,
        events: Vec<AuditEvent>,
        log: Option<EventLog>,
        snapshot: Option<PathBuf>,
    ) -> Self {
        Self {
            hierarchy,
            directory,
            settings,
            clock,
            inner: Mutex::new(Inner {
                state,
                events,
                subscriptions: HashMap::new(),
                log,
                snapshot,
            }),
            published: Condvar::new(),
        }
    }

    pub fn hierarchy(&self) -> &AdminHierarchy {
        &self.hierarchy
    }

    pub fn directory(&self) -> &ActorDirectory {
        &self.directory
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn commit(&self, inner: &mut Inner, pending: Vec<Pending>) -> Result<(), ServerError> {
        for (actor, report_id, body) in pending {
            let event = AuditEvent {
                seq: inner.state.last_seq + 1,
                actor,
                report_id,
                timestamp: self.clock.now(),
                body,
            };
            if let Some(log) = inner.log.as_mut() {
                log.append(&event)?;
            }
            if let Err(e) = inner.state.apply(&event) {
                panic!("server built an event its own state rejects: {e}");
            }
            inner.events.push(event);
            let every = self.settings.snapshot_every;
            if let Some(path) = &inner.snapshot {
                if every > 0 && inner.state.last_seq % every == 0 {
                    store::write_snapshot(path, &inner.state)?;
                }
            }
        }
        self.published.notify_all();
        Ok(())
    }

    /// Appends the reporter notification when `report_id` has not had an
    /// administrative action yet.
    fn with_notify(inner: &Inner, actor: &ActorId, report_id: &str, body: EventBody) -> Vec<Pending> {
        let entry = &inner.state.reports[report_id];
        let mut pending = vec![(actor.clone(), report_id.to_string(), body)];
        if !entry.reporter_notified {
            let topic = topics::actor(&entry.report.reporter);
            pending.push((actor.clone(), report_id.to_string(), EventBody::Notify { topic }));
        }
        pending
    }

    fn distribution(&self, report: &DisasterReport) -> Result<Pending, ServerError> {
        let decision = notification_set(report, &self.hierarchy, &self.directory, self.settings.neighbor_radius_m)?;
        Ok((
            report.reporter.clone(),
            report.id.clone(),
            EventBody::Distribute {
                responsible: decision.responsible,
                notified: decision.notified,
                neighbor_villages: decision.neighbor_villages,
            },
        ))
    }

    /// Stores a report and distributes it at once. Repeating a submission
    /// with the same key returns the first id and changes nothing.
    ///
    /// The id, state and merge link of the incoming report are replaced;
    /// empty region fields are filled from the location.
    pub fn submit_report(&self, mut report: DisasterReport, idempotency_key: Option<&str>) -> Result<String, ServerError> {
        if let Some(key) = idempotency_key {
            if key.is_empty() || key.len() > MAX_KEY_LEN || key.chars().any(char::is_control) {
                return Err(ServerError::InvalidRequest(format!(
                    "idempotency key must be 1..={MAX_KEY_LEN} bytes without control characters"
                )));
            }
        }
        let mut inner = self.inner.lock();
        if let Some(id) = idempotency_key.and_then(|k| inner.state.idempotency.get(k)).cloned() {
            // A crash between the two events can leave the report undistributed.
            let entry = &inner.state.reports[&id];
            if entry.report.state == LifecycleState::Submitted {
                let pending = self.distribution(&entry.report)?;
                self.commit(&mut inner, vec![pending])?;
            }
            return Ok(id);
        }

        report.id = inner.state.next_report_id();
        report.state = LifecycleState::Submitted;
        report.merged_into = None;
        if report.province_id.is_empty() && report.district_id.is_empty() && report.kumban_id.is_none() {
            if let Ok(found) = self.hierarchy.locate(report.location) {
                report.province_id = found.province_id;
                report.district_id = found.district_id;
                report.kumban_id = found.kumban_id;
            }
        }
        crate::domain::validate_report(&report, &self.hierarchy).map_err(ServerError::ValidationFailed)?;
        let distribute = self.distribution(&report)?;
        let id = report.id.clone();
        let submit = (
            report.reporter.clone(),
            id.clone(),
            EventBody::Submit {
                report,
                idempotency_key: idempotency_key.map(str::to_string),
            },
        );
        self.commit(&mut inner, vec![submit, distribute])?;
        Ok(id)
    }

    fn known_actor(&self, id: &ActorId) -> Result<&Actor, ServerError> {
        self.directory.get(id).ok_or_else(|| ServerError::UnknownActor(id.clone()))
    }

    fn entry<'a>(inner: &'a Inner, report_id: &str) -> Result<&'a ReportEntry, ServerError> {
        inner
            .state
            .reports
            .get(report_id)
            .ok_or_else(|| ServerError::UnknownReport(report_id.to_string()))
    }

    /// Records a verification. The first one by an administrative office
    /// moves the report to Verified.
    pub fn verify(&self, report_id: &str, verifier: &ActorId, note: &str) -> Result<VerificationRecord, ServerError> {
        let actor = self.known_actor(verifier)?.clone();
        let mut inner = self.inner.lock();
        let entry = Self::entry(&inner, report_id)?;
        if entry.report.state.is_terminal() {
            return Err(ServerError::ReportClosed(report_id.to_string()));
        }
        if inner.state.ledger.has_verified(report_id, verifier) {
            return Err(DuplicateVerification {
                report_id: report_id.to_string(),
                verifier: verifier.clone(),
            }
            .into());
        }
        let state = match entry.report.state {
            LifecycleState::Distributed | LifecycleState::UnderReview if actor.role.is_administrative() => {
                LifecycleState::Verified
            }
            s => s,
        };
        let record = VerificationRecord {
            report_id: report_id.to_string(),
            verifier: verifier.clone(),
            verifier_role: actor.role,
            timestamp: self.clock.now(),
            note: note.to_string(),
        };
        let body = EventBody::Verify {
            record: record.clone(),
            state,
        };
        let pending = if actor.role.is_administrative() {
            Self::with_notify(&inner, verifier, report_id, body)
        } else {
            vec![(verifier.clone(), report_id.to_string(), body)]
        };
        self.commit(&mut inner, pending)?;
        Ok(record)
    }

    /// Runs an administrative action and returns the affected report (the
    /// merged-away one for merges).
    pub fn process_report(&self, report_id: &str, actor_id: &ActorId, action: Action) -> Result<DisasterReport, ServerError> {
        let actor = self.known_actor(actor_id)?;
        if !actor.role.is_administrative() {
            return Err(ServerError::Forbidden {
                actor: actor.id.clone(),
                role: actor.role,
            });
        }
        let mut inner = self.inner.lock();
        let entry = Self::entry(&inner, report_id)?;
        let closed = || ServerError::ReportClosed(report_id.to_string());
        let (target_id, body) = match action {
            Action::Review => {
                transition(&entry.report, LifecycleState::UnderReview)?;
                (report_id.to_string(), EventBody::Review)
            }
            Action::Resolve => {
                transition(&entry.report, LifecycleState::Resolved)?;
                (report_id.to_string(), EventBody::Resolve)
            }
            Action::Assign { target } => {
                if entry.report.state.is_terminal() {
                    return Err(closed());
                }
                self.check_recipient(&target)?;
                (report_id.to_string(), EventBody::Assign { target })
            }
            Action::Update(update) => {
                if entry.report.state.is_terminal() {
                    return Err(closed());
                }
                if update.severity.is_none() && update.description.is_none() && update.note.is_none() {
                    return Err(ServerError::InvalidRequest("empty update".into()));
                }
                if update.description.as_ref().is_some_and(|d| d.trim().is_empty()) {
                    return Err(ServerError::ValidationFailed(vec![Violation::EmptyDescription]));
                }
                if update.note.as_ref().is_some_and(|n| n.trim().is_empty()) {
                    return Err(ServerError::InvalidRequest("empty note".into()));
                }
                (
                    report_id.to_string(),
                    EventBody::Update {
                        severity: update.severity,
                        description: update.description,
                        note: update.note,
                    },
                )
            }
            Action::AttachDocument { reference } => {
                if entry.report.state.is_terminal() {
                    return Err(closed());
                }
                if reference.trim().is_empty()
                    || reference.len() > MAX_DOCUMENT_REF
                    || reference.chars().any(char::is_control)
                {
                    return Err(ServerError::InvalidRequest(format!(
                        "document reference must be 1..={MAX_DOCUMENT_REF} bytes without control characters"
                    )));
                }
                (report_id.to_string(), EventBody::AttachDocument { reference })
            }
            Action::Merge { other, keep_older } => self.plan_merge(&inner, report_id, &other, keep_older)?,
        };
        let pending = Self::with_notify(&inner, actor_id, &target_id, body);
        self.commit(&mut inner, pending)?;
        Ok(inner.state.reports[&target_id].report.clone())
    }

    fn check_recipient(&self, target: &Recipient) -> Result<(), ServerError> {
        match target {
            Recipient::Ministry => Ok(()),
            Recipient::ProvinceOffice(p) => match self.hierarchy.province(p) {
                Some(_) => Ok(()),
                None => Err(ServerError::UnknownRegion(p.clone())),
            },
            Recipient::DistrictOffice(d) => match self.hierarchy.district(d) {
                Some(_) => Ok(()),
                None => Err(ServerError::UnknownRegion(d.clone())),
            },
            Recipient::Ingo(a) => match self.directory.get(a) {
                Some(actor) if actor.role == Role::Ingo => Ok(()),
                _ => Err(ServerError::UnknownActor(a.clone())),
            },
        }
    }

    fn plan_merge(&self, inner: &Inner, report_id: &str, other: &str, keep_older: bool) -> Result<(String, EventBody), ServerError> {
        let this = Self::entry(inner, report_id)?;
        let that = Self::entry(inner, other)?;
        if report_id == other {
            return Err(ServerError::MergeCycle {
                report: report_id.into(),
                into: other.into(),
            });
        }
        let age = |e: &ReportEntry| (e.report.created_at, e.report.id.len(), e.report.id.clone());
        let (loser, winner) = if keep_older && age(that) > age(this) {
            (that, this)
        } else {
            (this, that)
        };
        let (loser_id, winner_id) = (loser.report.id.clone(), winner.report.id.clone());
        match winner.report.state {
            LifecycleState::Merged => {
                return Err(ServerError::MergeCycle {
                    report: loser_id,
                    into: winner_id,
                })
            }
            LifecycleState::Resolved => return Err(ServerError::ReportClosed(winner_id)),
            _ => {}
        }
        let mut probe = loser.report.clone();
        probe.merged_into = Some(winner_id.clone());
        transition(&probe, LifecycleState::Merged)?;
        let ledger = &inner.state.ledger;
        let copied = ledger
            .records_for(&loser_id)
            .filter(|r| !ledger.has_verified(&winner_id, &r.verifier))
            .map(|r| VerificationRecord {
                report_id: winner_id.clone(),
                ..r.clone()
            })
            .collect();
        Ok((
            loser_id,
            EventBody::Merge {
                into: winner_id,
                copied,
            },
        ))
    }

    pub fn reliability_score(&self, report_id: &str) -> Result<Reliability, ServerError> {
        let inner = self.inner.lock();
        Self::entry(&inner, report_id)?;
        Ok(inner.state.ledger.reliability(report_id, self.settings.weights))
    }

    /// Whether the score reaches `threshold`, or the configured threshold
    /// when none is given.
    pub fn auto_distribution_eligible(&self, report_id: &str, threshold: Option<f64>) -> Result<bool, ServerError> {
        let inner = self.inner.lock();
        Self::entry(&inner, report_id)?;
        Ok(inner.state.ledger.auto_distribution_eligible(
            report_id,
            self.settings.weights,
            threshold.unwrap_or(self.settings.auto_threshold),
        ))
    }

    /// Registers (or replaces) the topics `subscriber` polls. Subscriptions
    /// live in memory; clients re-subscribe after a server restart.
    pub fn subscribe(&self, subscriber: ActorId, topics: BTreeSet<String>) -> Result<Subscription, ServerError> {
        if !is_valid_id(subscriber.as_str()) {
            return Err(ServerError::InvalidRequest(format!("bad subscriber id {subscriber}")));
        }
        if topics.is_empty() {
            return Err(ServerError::InvalidRequest("no topics".into()));
        }
        if let Some(t) = topics
            .iter()
            .find(|t| t.is_empty() || t.len() > MAX_TOPIC_LEN || t.chars().any(char::is_control))
        {
            return Err(ServerError::InvalidRequest(format!("bad topic {t:?}")));
        }
        let mut inner = self.inner.lock();
        let cursors = topics.iter().map(|t| (t.clone(), inner.state.latest_seq(t))).collect();
        inner.subscriptions.insert(subscriber.clone(), topics.clone());
        Ok(Subscription {
            subscriber,
            topics,
            cursors,
        })
    }

    /// Messages on the subscriber's topics after the given cursors (missing
    /// cursors count as 0), in per-topic seq order. Waits up to `timeout`
    /// when there is nothing new and returns an empty list if nothing comes.
    pub fn poll(
        &self,
        subscriber: &ActorId,
        cursors: &BTreeMap<String, u64>,
        timeout: Duration,
    ) -> Result<Vec<PushMessage>, ServerError> {
        let deadline = Instant::now() + timeout;
        let mut inner = self.inner.lock();
        loop {
            let subscribed = inner
                .subscriptions
                .get(subscriber)
                .ok_or_else(|| ServerError::UnknownSubscriber(subscriber.clone()))?;
            let mut out = Vec::new();
            for topic in subscribed {
                let log = inner.state.topics.get(topic).map(Vec::as_slice).unwrap_or(&[]);
                let cursor = cursors.get(topic).copied().unwrap_or(0);
                if cursor > log.len() as u64 {
                    return Err(ServerError::CursorAhead {
                        topic: topic.clone(),
                        cursor,
                        latest: log.len() as u64,
                    });
                }
                let take = (log.len() - cursor as usize).min(MAX_POLL_BATCH - out.len());
                out.extend_from_slice(&log[cursor as usize..cursor as usize + take]);
            }
            if !out.is_empty() || Instant::now() >= deadline {
                return Ok(out);
            }
            self.published.wait_until(&mut inner, deadline);
        }
    }

    pub fn latest_seq(&self, topic: &str) -> u64 {
        self.inner.lock().state.latest_seq(topic)
    }

    pub fn topic_log(&self, topic: &str) -> Vec<PushMessage> {
        self.inner.lock().state.topics.get(topic).cloned().unwrap_or_default()
    }

    pub fn report(&self, report_id: &str) -> Result<DisasterReport, ServerError> {
        Ok(Self::entry(&self.inner.lock(), report_id)?.report.clone())
    }

    pub fn report_view(&self, report_id: &str) -> Result<ReportView, ServerError> {
        let inner = self.inner.lock();
        let entry = Self::entry(&inner, report_id)?;
        let ledger = &inner.state.ledger;
        Ok(ReportView {
            report: entry.report.clone(),
            responsible: entry.responsible.clone(),
            topics: entry.topics.clone(),
            reliability: ledger.reliability(report_id, self.settings.weights),
            auto_distribution_eligible: ledger.auto_distribution_eligible(
                report_id,
                self.settings.weights,
                self.settings.auto_threshold,
            ),
            admin_actions: entry.admin_actions,
            reporter_notified: entry.reporter_notified,
            notes: entry.notes.clone(),
        })
    }

    /// Reports matching `filter`, in id order.
    pub fn list_reports(&self, filter: &ReportFilter) -> Vec<DisasterReport> {
        let inner = self.inner.lock();
        let mut out: Vec<DisasterReport> = inner
            .state
            .reports
            .values()
            .map(|e| &e.report)
            .filter(|r| filter.matches(r))
            .cloned()
            .collect();
        out.sort_by(|a, b| (a.id.len(), &a.id).cmp(&(b.id.len(), &b.id)));
        out
    }

    pub fn report_count(&self) -> usize {
        self.inner.lock().state.reports.len()
    }

    pub fn actor(&self, id: &ActorId) -> Result<Actor, ServerError> {
        self.known_actor(id).cloned()
    }

    pub fn events(&self) -> Vec<AuditEvent> {
        self.inner.lock().events.clone()
    }

    pub fn state(&self) -> ServerState {
        self.inner.lock().state.clone()
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        self.inner.lock().state.snapshot_bytes()
    }

    /// CAP export. The sender defaults to the first ministry actor in the
    /// directory.
    pub fn export_cap(&self, report_id: &str, sender: Option<&ActorId>) -> Result<Vec<u8>, ServerError> {
        let sender = match sender {
            Some(id) => self.known_actor(id)?.clone(),
            None => self
                .directory
                .actors()
                .iter()
                .find(|a| a.role == Role::Ministry)
                .cloned()
                .unwrap_or_else(|| Actor {
                    id: ActorId::new("server"),
                    role: Role::Ministry,
                    unit_id: topics::MINISTRY.into(),
                    phone: String::new(),
                }),
        };
        let (report, msg_type) = {
            let inner = self.inner.lock();
            let entry = Self::entry(&inner, report_id)?;
            let msg_type = if entry.admin_actions == 0 { MsgType::Alert } else { MsgType::Update };
            (entry.report.clone(), msg_type)
        };
        let alert = cap::report_to_cap_at(&report, &sender, msg_type, CapTime::from_utc(self.clock.now()));
        Ok(cap::serialize_cap(&alert)?)
    }

    /// Imports a CAP alert as a new submission.
    pub fn import_cap(&self, xml: &[u8], idempotency_key: Option<&str>) -> Result<String, ServerError> {
        let alert = cap::parse_cap(xml)?;
        let report = cap::cap_to_report(&alert, &self.hierarchy)?;
        self.submit_report(report, idempotency_key)
    }
}
