//! JSON bodies of the HTTP API, shared by the server and its clients.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Action, BoundingBox, PushMessage, ReportFilter};
use crate::domain::{ActorId, DisasterKind, DisasterReport, LifecycleState};
use crate::ledger::Reliability;

/// Longest wait a poll request may ask for.
pub const MAX_POLL_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub report: DisasterReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub actor: ActorId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyRequest {
    pub verifier: ActorId,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    #[serde(flatten)]
    pub reliability: Reliability,
    pub threshold: f64,
    pub auto_distribution_eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscribeRequest {
    pub subscriber: ActorId,
    pub topics: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollRequest {
    pub subscriber: ActorId,
    #[serde(default)]
    pub cursors: BTreeMap<String, u64>,
    #[serde(default)]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollResponse {
    pub messages: Vec<PushMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

/// Query string of `GET /reports`. `bbox` is `min_lat,min_lon,max_lat,max_lon`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ListQuery {
    #[serde(default)]
    pub province: Option<String>,
    #[serde(default)]
    pub district: Option<String>,
    #[serde(default)]
    pub state: Option<LifecycleState>,
    #[serde(default)]
    pub kind: Option<DisasterKind>,
    #[serde(default)]
    pub bbox: Option<String>,
}

impl ListQuery {
    pub fn to_filter(&self) -> Result<ReportFilter, String> {
        let bbox = match &self.bbox {
            None => None,
            Some(text) => {
                let parts: Vec<f64> = text
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("bbox: {e}"))?;
                let [min_lat, min_lon, max_lat, max_lon] = parts[..] else {
                    return Err("bbox needs four numbers".into());
                };
                Some(BoundingBox {
                    min_lat,
                    min_lon,
                    max_lat,
                    max_lon,
                })
            }
        };
        Ok(ReportFilter {
            province: self.province.clone(),
            district: self.district.clone(),
            state: self.state,
            kind: self.kind,
            bbox,
        })
    }
}
