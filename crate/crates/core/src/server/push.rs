//! Compact alert summaries delivered on push topics.

use serde::{Deserialize, Serialize};

use crate::domain::{DisasterKind, DisasterReport, GeoPoint, LifecycleState, Severity};

/// Upper bound on an encoded [`PushMessage`].
pub const MAX_PUSH_BYTES: usize = 512;

const HEADLINE_CHARS: usize = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertSummary {
    pub report_id: String,
    pub kind: DisasterKind,
    pub severity: Severity,
    pub location: GeoPoint,
    pub state: LifecycleState,
    pub headline: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<String>,
}

impl AlertSummary {
    pub fn of(report: &DisasterReport, headline: String, documents: Vec<String>) -> Self {
        Self {
            report_id: report.id.clone(),
            kind: report.kind,
            severity: report.severity,
            location: report.location,
            state: report.state,
            headline,
            documents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushMessage {
    pub topic: String,
    /// Position in the topic's log, starting at 1.
    pub seq: u64,
    pub summary: AlertSummary,
}

impl PushMessage {
    /// Builds a message that fits [`MAX_PUSH_BYTES`]: the headline is cut
    /// first, then trailing documents are left out.
    pub fn bounded(topic: String, seq: u64, mut summary: AlertSummary) -> Self {
        if let Some((cut, _)) = summary.headline.char_indices().nth(HEADLINE_CHARS) {
            summary.headline.truncate(cut);
        }
        let mut msg = Self { topic, seq, summary };
        let mut len = msg.encoded_len();
        while len > MAX_PUSH_BYTES && !msg.summary.headline.is_empty() {
            let mut excess = len - MAX_PUSH_BYTES;
            while excess > 0 {
                match msg.summary.headline.pop() {
                    Some(c) => excess = excess.saturating_sub(c.len_utf8()),
                    None => break,
                }
            }
            len = msg.encoded_len();
        }
        while len > MAX_PUSH_BYTES && msg.summary.documents.pop().is_some() {
            len = msg.encoded_len();
        }
        msg
    }

    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("push message serializes")
    }

    pub fn encoded_len(&self) -> usize {
        self.encode().len()
    }
}
