//! Append-only record of verification acts and the reliability score
//! derived from it.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActorId, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub report_id: String,
    pub verifier: ActorId,
    pub verifier_role: Role,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{verifier} already verified report {report_id}")]
pub struct DuplicateVerification {
    pub report_id: String,
    pub verifier: ActorId,
}

/// Score weights. The default counts an official stamp three times as much as
/// a crowd verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub official: f64,
    pub user: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { official: 3.0, user: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub official_count: u32,
    pub user_count: u32,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<VerificationRecord>", into = "Vec<VerificationRecord>")]
pub struct VerificationLedger {
    records: Vec<VerificationRecord>,
    by_report: BTreeMap<String, Vec<usize>>,
}

impl From<Vec<VerificationRecord>> for VerificationLedger {
    fn from(records: Vec<VerificationRecord>) -> Self {
        let mut by_report: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            by_report.entry(r.report_id.clone()).or_default().push(i);
        }
        Self { records, by_report }
    }
}

impl From<VerificationLedger> for Vec<VerificationRecord> {
    fn from(ledger: VerificationLedger) -> Self {
        ledger.records
    }
}

impl VerificationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: VerificationRecord) -> Result<&VerificationRecord, DuplicateVerification> {
        if self.has_verified(&record.report_id, &record.verifier) {
            return Err(DuplicateVerification {
                report_id: record.report_id,
                verifier: record.verifier,
            });
        }
        let index = self.records.len();
        self.by_report.entry(record.report_id.clone()).or_default().push(index);
        self.records.push(record);
        Ok(&self.records[index])
    }

    pub fn has_verified(&self, report_id: &str, verifier: &ActorId) -> bool {
        self.records_for(report_id).any(|r| &r.verifier == verifier)
    }

    pub fn records_for<'a>(&'a self, report_id: &str) -> impl Iterator<Item = &'a VerificationRecord> + 'a {
        self.by_report
            .get(report_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[VerificationRecord] {
        &self.records
    }

    /// Counts are recomputed from the stored records on every call.
    pub fn reliability(&self, report_id: &str, weights: Weights) -> Reliability {
        let (official_count, user_count) = self.records_for(report_id).fold((0u32, 0u32), |(o, u), r| {
            if r.verifier_role.is_official() {
                (o + 1, u)
            } else {
                (o, u + 1)
            }
        });
        Reliability {
            official_count,
            user_count,
            score: weights.official * f64::from(official_count) + weights.user * f64::from(user_count),
        }
    }

    /// Whether the report's score reaches `threshold` (inclusive).
    pub fn auto_distribution_eligible(&self, report_id: &str, weights: Weights, threshold: f64) -> bool {
        self.reliability(report_id, weights).score >= threshold
    }
}
