//! Submission over an unreliable link.

use std::time::Duration;

use thiserror::Error;

use disaster_core::domain::DisasterReport;
use disaster_core::server::api::SubmitRequest;

use crate::sleep::Sleeper;
use crate::transport::{Transport, TransportError};

pub const BACKOFF_BASE: Duration = Duration::from_millis(250);
pub const BACKOFF_CAP: Duration = Duration::from_secs(8);

/// Wait after the `attempt`-th failure (1-based): 250 ms doubling up to 8 s.
pub fn backoff(attempt: u32) -> Duration {
    let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
    BACKOFF_BASE.saturating_mul(factor).min(BACKOFF_CAP)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmitError {
    #[error("server unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: String },
    #[error("server rejected the report: {0}")]
    Rejected(TransportError),
    #[error("max_attempts must be at least 1")]
    NoAttempts,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submitted {
    pub id: String,
    pub attempts: u32,
}

/// Sends the report until the server answers, reusing `key` on every
/// attempt so that lost answers do not create duplicates. Rejections are not
/// retried.
pub fn submit_with_retry<T: Transport, S: Sleeper>(
    transport: &T,
    report: &DisasterReport,
    key: &str,
    max_attempts: u32,
    sleeper: &S,
) -> Result<Submitted, SubmitError> {
    if max_attempts == 0 {
        return Err(SubmitError::NoAttempts);
    }
    let request = SubmitRequest {
        report: report.clone(),
        idempotency_key: Some(key.to_string()),
    };
    let mut last = String::new();
    for attempt in 1..=max_attempts {
        match transport.submit(&request) {
            Ok(id) => return Ok(Submitted { id, attempts: attempt }),
            Err(TransportError::Unreachable(why)) => last = why,
            Err(rejected) => return Err(SubmitError::Rejected(rejected)),
        }
        if attempt < max_attempts {
            sleeper.sleep(backoff(attempt));
        }
    }
    Err(SubmitError::Unreachable {
        attempts: max_attempts,
        last,
    })
}
