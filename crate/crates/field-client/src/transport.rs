//! How the client reaches the server: HTTP, or an in-process server for
//! tests and demos.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use disaster_core::domain::ActorId;
use disaster_core::ledger::VerificationRecord;
use disaster_core::server::api::{
    ErrorBody, PollRequest, PollResponse, SubmitRequest, SubmitResponse, SubscribeRequest, VerifyRequest,
};
use disaster_core::server::{AlertServer, PushMessage, ReportView, ServerError, Subscription};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// The request or its answer was lost; retrying may help.
    #[error("unreachable: {0}")]
    Unreachable(String),
    /// The server answered with an error.
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
}

impl TransportError {
    pub fn code(&self) -> Option<&str> {
        match self {
            TransportError::Rejected { code, .. } => Some(code),
            TransportError::Unreachable(_) => None,
        }
    }
}

impl From<ServerError> for TransportError {
    fn from(e: ServerError) -> Self {
        TransportError::Rejected {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

pub trait Transport {
    fn submit(&self, request: &SubmitRequest) -> Result<String, TransportError>;
    fn report(&self, id: &str) -> Result<ReportView, TransportError>;
    fn verify(&self, id: &str, request: &VerifyRequest) -> Result<VerificationRecord, TransportError>;
    fn export_cap(&self, id: &str, sender: Option<&ActorId>) -> Result<Vec<u8>, TransportError>;
    fn subscribe(&self, request: &SubscribeRequest) -> Result<Subscription, TransportError>;
    fn poll(&self, request: &PollRequest) -> Result<Vec<PushMessage>, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn submit(&self, request: &SubmitRequest) -> Result<String, TransportError> {
        (**self).submit(request)
    }
    fn report(&self, id: &str) -> Result<ReportView, TransportError> {
        (**self).report(id)
    }
    fn verify(&self, id: &str, request: &VerifyRequest) -> Result<VerificationRecord, TransportError> {
        (**self).verify(id, request)
    }
    fn export_cap(&self, id: &str, sender: Option<&ActorId>) -> Result<Vec<u8>, TransportError> {
        (**self).export_cap(id, sender)
    }
    fn subscribe(&self, request: &SubscribeRequest) -> Result<Subscription, TransportError> {
        (**self).subscribe(request)
    }
    fn poll(&self, request: &PollRequest) -> Result<Vec<PushMessage>, TransportError> {
        (**self).poll(request)
    }
}

/// Calls an [`AlertServer`] in the same process.
#[derive(Clone)]
pub struct LocalTransport {
    server: Arc<AlertServer>,
}

impl LocalTransport {
    pub fn new(server: Arc<AlertServer>) -> Self {
        Self { server }
    }
}

impl Transport for LocalTransport {
    fn submit(&self, request: &SubmitRequest) -> Result<String, TransportError> {
        Ok(self
            .server
            .submit_report(request.report.clone(), request.idempotency_key.as_deref())?)
    }

    fn report(&self, id: &str) -> Result<ReportView, TransportError> {
        Ok(self.server.report_view(id)?)
    }

    fn verify(&self, id: &str, request: &VerifyRequest) -> Result<VerificationRecord, TransportError> {
        Ok(self.server.verify(id, &request.verifier, &request.note)?)
    }

    fn export_cap(&self, id: &str, sender: Option<&ActorId>) -> Result<Vec<u8>, TransportError> {
        Ok(self.server.export_cap(id, sender)?)
    }

    fn subscribe(&self, request: &SubscribeRequest) -> Result<Subscription, TransportError> {
        Ok(self.server.subscribe(request.subscriber.clone(), request.topics.clone())?)
    }

    fn poll(&self, request: &PollRequest) -> Result<Vec<PushMessage>, TransportError> {
        Ok(self.server.poll(
            &request.subscriber,
            &request.cursors,
            Duration::from_millis(request.timeout_ms),
        )?)
    }
}

/// JSON over HTTP.
pub struct HttpTransport {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base_url: &str) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .timeout(None)
            .build()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        Ok(Self {
            base: base_url.trim_end_matches('/').to_string(),
            client,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn send(&self, request: reqwest::blocking::RequestBuilder) -> Result<reqwest::blocking::Response, TransportError> {
        let response = request.send().map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        if matches!(status.as_u16(), 502..=504) {
            return Err(TransportError::Unreachable(format!("HTTP {status}")));
        }
        let text = response.text().map_err(|e| TransportError::Unreachable(e.to_string()))?;
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => TransportError::Rejected {
                code: body.error,
                message: body.message,
            },
            Err(_) => TransportError::Rejected {
                code: format!("HTTP {}", status.as_u16()),
                message: text,
            },
        })
    }

    fn json<T: serde::de::DeserializeOwned>(response: reqwest::blocking::Response) -> Result<T, TransportError> {
        response.json().map_err(|e| TransportError::Unreachable(e.to_string()))
    }
}

fn segment(id: &str) -> String {
    // Report ids are server-assigned decimal numbers; anything else is
    // percent-encoded byte by byte.
    id.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

impl Transport for HttpTransport {
    fn submit(&self, request: &SubmitRequest) -> Result<String, TransportError> {
        let r = self.send(self.client.post(self.url("/reports")).json(request))?;
        Ok(Self::json::<SubmitResponse>(r)?.id)
    }

    fn report(&self, id: &str) -> Result<ReportView, TransportError> {
        Self::json(self.send(self.client.get(self.url(&format!("/reports/{}", segment(id)))))?)
    }

    fn verify(&self, id: &str, request: &VerifyRequest) -> Result<VerificationRecord, TransportError> {
        let url = self.url(&format!("/reports/{}/verify", segment(id)));
        Self::json(self.send(self.client.post(url).json(request))?)
    }

    fn export_cap(&self, id: &str, sender: Option<&ActorId>) -> Result<Vec<u8>, TransportError> {
        let mut url = self.url(&format!("/reports/{}/cap", segment(id)));
        if let Some(s) = sender {
            url.push_str(&format!("?sender={}", segment(s.as_str())));
        }
        let r = self.send(self.client.get(url))?;
        r.bytes()
            .map(|b| b.to_vec())
            .map_err(|e| TransportError::Unreachable(e.to_string()))
    }

    fn subscribe(&self, request: &SubscribeRequest) -> Result<Subscription, TransportError> {
        Self::json(self.send(self.client.post(self.url("/subscriptions")).json(request))?)
    }

    fn poll(&self, request: &PollRequest) -> Result<Vec<PushMessage>, TransportError> {
        let r = self.send(self.client.post(self.url("/poll")).json(request))?;
        Ok(Self::json::<PollResponse>(r)?.messages)
    }
}

/// Cursor map with every topic at zero.
pub fn zero_cursors(topics: &BTreeSet<String>) -> BTreeMap<String, u64> {
    topics.iter().map(|t| (t.clone(), 0)).collect()
}
