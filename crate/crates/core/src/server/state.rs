//! Audit events and the state they fold into.
//!
//! Every mutation of the server is an [`AuditEvent`]; the live state is the
//! result of applying the events in order, and replaying a log produces the
//! same bytes from [`ServerState::snapshot_bytes`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::push::{AlertSummary, PushMessage};
use crate::domain::{transition, ActorId, DisasterReport, LifecycleState, Severity};
use crate::ledger::{VerificationLedger, VerificationRecord};
use crate::routing::{topics, Recipient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuditAction {
    Submit,
    Distribute,
    Review,
    Verify,
    Assign,
    Merge,
    Resolve,
    Update,
    AttachDocument,
    Notify,
}

impl fmt::Display for AuditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload")]
pub enum EventBody {
    Submit {
        report: DisasterReport,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
    },
    Distribute {
        responsible: Recipient,
        notified: BTreeSet<Recipient>,
        neighbor_villages: Vec<String>,
    },
    Review,
    Verify {
        record: VerificationRecord,
        /// Report state after the verification.
        state: LifecycleState,
    },
    Assign {
        target: Recipient,
    },
    Merge {
        into: String,
        /// Loser records copied onto the winner.
        copied: Vec<VerificationRecord>,
    },
    Resolve,
    Update {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        severity: Option<Severity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    AttachDocument {
        reference: String,
    },
    Notify {
        topic: String,
    },
}

impl EventBody {
    pub fn action(&self) -> AuditAction {
        match self {
            EventBody::Submit { .. } => AuditAction::Submit,
            EventBody::Distribute { .. } => AuditAction::Distribute,
            EventBody::Review => AuditAction::Review,
            EventBody::Verify { .. } => AuditAction::Verify,
            EventBody::Assign { .. } => AuditAction::Assign,
            EventBody::Merge { .. } => AuditAction::Merge,
            EventBody::Resolve => AuditAction::Resolve,
            EventBody::Update { .. } => AuditAction::Update,
            EventBody::AttachDocument { .. } => AuditAction::AttachDocument,
            EventBody::Notify { .. } => AuditAction::Notify,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub actor: ActorId,
    pub report_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

impl AuditEvent {
    pub fn action(&self) -> AuditAction {
        self.body.action()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub actor: ActorId,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub report: DisasterReport,
    /// Set once the report is distributed; changed by Assign.
    pub responsible: Option<Recipient>,
    /// Topics that receive updates about this report.
    pub topics: BTreeSet<String>,
    pub admin_actions: u32,
    pub reporter_notified: bool,
    /// Documents waiting for the next push.
    pub pending_documents: Vec<String>,
    pub notes: Vec<Note>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyError {
    pub seq: u64,
    pub reason: String,
}

impl fmt::Display for ApplyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.seq, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServerState {
    pub last_seq: u64,
    pub report_count: u64,
    pub reports: BTreeMap<String, ReportEntry>,
    pub idempotency: BTreeMap<String, String>,
    pub ledger: VerificationLedger,
    pub topics: BTreeMap<String, Vec<PushMessage>>,
}

impl ServerState {
    /// Canonical encoding; equal states give equal bytes.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state serializes")
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn next_report_id(&self) -> String {
        (self.report_count + 1).to_string()
    }

    pub fn latest_seq(&self, topic: &str) -> u64 {
        self.topics.get(topic).map_or(0, |log| log.len() as u64)
    }

    pub fn apply(&mut self, event: &AuditEvent) -> Result<(), ApplyError> {
        let fail = |reason: String| ApplyError { seq: event.seq, reason };
        if event.seq != self.last_seq + 1 {
            return Err(fail(format!("expected seq {}", self.last_seq + 1)));
        }
        if let EventBody::Submit { report, idempotency_key } = &event.body {
            if report.id != event.report_id || report.id != self.next_report_id() {
                return Err(fail(format!("unexpected report id {:?}", report.id)));
            }
            if report.state != LifecycleState::Submitted {
                return Err(fail("submitted report must be Submitted".into()));
            }
            if let Some(key) = idempotency_key {
                if self.idempotency.insert(key.clone(), report.id.clone()).is_some() {
                    return Err(fail(format!("idempotency key {key:?} reused")));
                }
            }
            self.report_count += 1;
            self.reports.insert(
                report.id.clone(),
                ReportEntry {
                    report: report.clone(),
                    responsible: None,
                    topics: BTreeSet::new(),
                    admin_actions: 0,
                    reporter_notified: false,
                    pending_documents: Vec::new(),
                    notes: Vec::new(),
                },
            );
            self.last_seq = event.seq;
            return Ok(());
        }

        let id = &event.report_id;
        let mut entry = self
            .reports
            .remove(id)
            .ok_or_else(|| fail(format!("unknown report {id:?}")))?;
        let result = self.apply_to_entry(event, &mut entry);
        self.reports.insert(id.clone(), entry);
        result.map_err(fail)?;
        self.last_seq = event.seq;
        Ok(())
    }

    fn apply_to_entry(&mut self, event: &AuditEvent, entry: &mut ReportEntry) -> Result<(), String> {
        let step = |report: &DisasterReport, to| transition(report, to).map_err(|e| e.to_string());
        let actor = &event.actor;
        // (topics, headline) of the push this event produces, if any.
        let push: Option<(Vec<String>, String)> = match &event.body {
            EventBody::Submit { .. } => unreachable!("handled by apply"),
            EventBody::Distribute {
                responsible,
                notified,
                neighbor_villages,
            } => {
                entry.report = step(&entry.report, LifecycleState::Distributed)?;
                entry.responsible = Some(responsible.clone());
                entry.topics = notified
                    .iter()
                    .map(Recipient::topic)
                    .chain(neighbor_villages.iter().map(|v| topics::village(v)))
                    .collect();
                let headline = format!("{}: {}", entry.report.kind, entry.report.description);
                Some((entry.topics.iter().cloned().collect(), headline))
            }
            EventBody::Review => {
                entry.report = step(&entry.report, LifecycleState::UnderReview)?;
                entry.admin_actions += 1;
                Some((entry.topics.iter().cloned().collect(), format!("under review by {actor}")))
            }
            EventBody::Verify { record, state } => {
                if record.report_id != entry.report.id {
                    return Err("verification for another report".into());
                }
                let before = entry.report.state;
                if *state != before {
                    let mut report = entry.report.clone();
                    if report.state == LifecycleState::Distributed {
                        report = step(&report, LifecycleState::UnderReview)?;
                    }
                    if report.state != *state {
                        report = step(&report, *state)?;
                    }
                    entry.report = report;
                }
                self.ledger.append(record.clone()).map_err(|e| e.to_string())?;
                if record.verifier_role.is_administrative() {
                    entry.admin_actions += 1;
                }
                (*state != before).then(|| (entry.topics.iter().cloned().collect(), format!("verified by {actor}")))
            }
            EventBody::Assign { target } => {
                if entry.report.state.is_terminal() {
                    return Err("assign on a closed report".into());
                }
                entry.responsible = Some(target.clone());
                entry.topics.insert(target.topic());
                entry.admin_actions += 1;
                Some((vec![target.topic()], format!("assigned to {target} by {actor}")))
            }
            EventBody::Merge { into, copied } => {
                if into == &entry.report.id {
                    return Err("merge into itself".into());
                }
                match self.reports.get(into) {
                    Some(w) if w.report.state != LifecycleState::Merged => {}
                    _ => return Err(format!("merge target {into:?} missing or merged")),
                }
                let mut report = entry.report.clone();
                report.merged_into = Some(into.clone());
                entry.report = step(&report, LifecycleState::Merged)?;
                for record in copied {
                    if &record.report_id != into {
                        return Err("copied record not for the merge target".into());
                    }
                    self.ledger.append(record.clone()).map_err(|e| e.to_string())?;
                }
                entry.admin_actions += 1;
                Some((entry.topics.iter().cloned().collect(), format!("merged into report {into}")))
            }
            EventBody::Resolve => {
                entry.report = step(&entry.report, LifecycleState::Resolved)?;
                entry.admin_actions += 1;
                Some((entry.topics.iter().cloned().collect(), format!("resolved by {actor}")))
            }
            EventBody::Update {
                severity,
                description,
                note,
            } => {
                if entry.report.state.is_terminal() {
                    return Err("update on a closed report".into());
                }
                if let Some(s) = severity {
                    entry.report.severity = *s;
                }
                if let Some(d) = description {
                    entry.report.description = d.clone();
                }
                if let Some(text) = note {
                    entry.notes.push(Note {
                        actor: actor.clone(),
                        timestamp: event.timestamp,
                        text: text.clone(),
                    });
                }
                entry.admin_actions += 1;
                let headline = note.clone().unwrap_or_else(|| entry.report.description.clone());
                Some((entry.topics.iter().cloned().collect(), format!("update: {headline}")))
            }
            EventBody::AttachDocument { reference } => {
                if entry.report.state.is_terminal() {
                    return Err("attachment on a closed report".into());
                }
                entry.report.attachments.push(reference.clone());
                entry.pending_documents.push(reference.clone());
                entry.admin_actions += 1;
                None
            }
            EventBody::Notify { topic } => {
                if entry.reporter_notified {
                    return Err("reporter already notified".into());
                }
                entry.reporter_notified = true;
                Some((vec![topic.clone()], format!("your report is being processed by {actor}")))
            }
        };

        if let Some((targets, headline)) = push {
            // Pending documents go out with every push, and stop being
            // pending once a push reached all of the report's topics.
            let documents = if targets.iter().eq(entry.topics.iter()) {
                std::mem::take(&mut entry.pending_documents)
            } else {
                entry.pending_documents.clone()
            };
            for topic in targets {
                let log = self.topics.entry(topic.clone()).or_default();
                let summary = AlertSummary::of(&entry.report, headline.clone(), documents.clone());
                log.push(PushMessage::bounded(topic, log.len() as u64 + 1, summary));
            }
        }
        Ok(())
    }
}

/// Folds a log into a state. The log must start at seq 1 and have no gaps.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a AuditEvent>) -> Result<ServerState, ApplyError> {
    replay_onto(ServerState::default(), events)
}

/// Applies the events after `state.last_seq`, skipping ones already folded in.
pub fn replay_onto<'a>(
    mut state: ServerState,
    events: impl IntoIterator<Item = &'a AuditEvent>,
) -> Result<ServerState, ApplyError> {
    for event in events {
        if event.seq <= state.last_seq {
            continue;
        }
        state.apply(event)?;
    }
    Ok(state)
}
