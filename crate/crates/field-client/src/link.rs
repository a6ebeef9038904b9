//! A simulated weak network link.
//!
//! Each call may be dropped before it is sent (the server never sees it) or
//! after the server handled it (the answer is lost). Both look the same to
//! the caller.

use std::str::FromStr;
use std::time::Duration;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use disaster_core::domain::ActorId;
use disaster_core::ledger::VerificationRecord;
use disaster_core::server::api::{PollRequest, SubmitRequest, SubscribeRequest, VerifyRequest};
use disaster_core::server::{PushMessage, ReportView, Subscription};

use crate::sleep::Sleeper;
use crate::transport::{Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub drop_probability: f64,
    pub latency_ms: u64,
    pub jitter_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid link profile: {0}")]
pub struct ProfileError(String);

impl LinkProfile {
    pub const PERFECT: LinkProfile = LinkProfile {
        drop_probability: 0.0,
        latency_ms: 0,
        jitter_ms: 0,
    };

    pub fn new(drop_probability: f64, latency_ms: u64, jitter_ms: u64) -> Result<Self, ProfileError> {
        if !(0.0..=1.0).contains(&drop_probability) {
            return Err(ProfileError(format!("drop probability {drop_probability} not in [0, 1]")));
        }
        Ok(Self {
            drop_probability,
            latency_ms,
            jitter_ms,
        })
    }
}

impl Default for LinkProfile {
    fn default() -> Self {
        Self::PERFECT
    }
}

/// `drop:latency:jitter`, e.g. `0.3:120:40`.
impl FromStr for LinkProfile {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [drop, latency, jitter] = parts[..] else {
            return Err(ProfileError(format!("{s:?} is not drop:latency:jitter")));
        };
        let drop: f64 = drop.parse().map_err(|e| ProfileError(format!("drop: {e}")))?;
        let latency = latency.parse().map_err(|e| ProfileError(format!("latency: {e}")))?;
        let jitter = jitter.parse().map_err(|e| ProfileError(format!("jitter: {e}")))?;
        Self::new(drop, latency, jitter)
    }
}

pub struct LossyLink<T, S> {
    inner: T,
    profile: LinkProfile,
    rng: Mutex<ChaCha8Rng>,
    sleeper: S,
}

impl<T: Transport, S: Sleeper> LossyLink<T, S> {
    pub fn new(inner: T, profile: LinkProfile, seed: u64, sleeper: S) -> Self {
        Self {
            inner,
            profile,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            sleeper,
        }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    fn dropped(&self) -> bool {
        let p = self.profile.drop_probability;
        p > 0.0 && self.rng.lock().random_bool(p)
    }

    fn delay(&self) {
        let jitter = match self.profile.jitter_ms {
            0 => 0,
            j => self.rng.lock().random_range(0..=j),
        };
        let total = self.profile.latency_ms + jitter;
        if total > 0 {
            self.sleeper.sleep(Duration::from_millis(total));
        }
    }

    fn carry<R>(&self, call: impl FnOnce(&T) -> Result<R, TransportError>) -> Result<R, TransportError> {
        if self.dropped() {
            return Err(TransportError::Unreachable("request lost".into()));
        }
        self.delay();
        let result = call(&self.inner);
        if self.dropped() {
            return Err(TransportError::Unreachable("response lost".into()));
        }
        result
    }
}

impl<T: Transport, S: Sleeper> Transport for LossyLink<T, S> {
    fn submit(&self, request: &SubmitRequest) -> Result<String, TransportError> {
        self.carry(|t| t.submit(request))
    }
    fn report(&self, id: &str) -> Result<ReportView, TransportError> {
        self.carry(|t| t.report(id))
    }
    fn verify(&self, id: &str, request: &VerifyRequest) -> Result<VerificationRecord, TransportError> {
        self.carry(|t| t.verify(id, request))
    }
    fn export_cap(&self, id: &str, sender: Option<&ActorId>) -> Result<Vec<u8>, TransportError> {
        self.carry(|t| t.export_cap(id, sender))
    }
    fn subscribe(&self, request: &SubscribeRequest) -> Result<Subscription, TransportError> {
        self.carry(|t| t.subscribe(request))
    }
    fn poll(&self, request: &PollRequest) -> Result<Vec<PushMessage>, TransportError> {
        self.carry(|t| t.poll(request))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_profiles() {
        assert_eq!(
            "0.3:120:40".parse::<LinkProfile>().unwrap(),
            LinkProfile {
                drop_probability: 0.3,
                latency_ms: 120,
                jitter_ms: 40
            }
        );
        assert!("1.5:0:0".parse::<LinkProfile>().is_err());
        assert!("-0.1:0:0".parse::<LinkProfile>().is_err());
        assert!("0.1:0".parse::<LinkProfile>().is_err());
        assert!("0.1:x:0".parse::<LinkProfile>().is_err());
    }
}
