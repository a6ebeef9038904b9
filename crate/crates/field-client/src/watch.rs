//! Long-poll watching of push topics with cursors kept on disk, so a
//! restarted client continues where it stopped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use disaster_core::domain::ActorId;
use disaster_core::server::api::{PollRequest, SubscribeRequest};
use disaster_core::server::PushMessage;

use crate::retry::backoff;
use crate::sleep::Sleeper;
use crate::transport::{Transport, TransportError};

#[derive(Debug, Error)]
pub enum WatchError {
    #[error("cursor file {path}: {source}")]
    CursorIo { path: PathBuf, source: std::io::Error },
    #[error("cursor file {path} is corrupt: {source}")]
    CursorCorrupt { path: PathBuf, source: serde_json::Error },
    #[error("server rejected the watch: {0}")]
    Rejected(TransportError),
    #[error("no topics to watch")]
    NoTopics,
    #[error(transparent)]
    Output(#[from] std::io::Error),
}

/// Topic → last seq seen, as a JSON object.
#[derive(Debug, Clone)]
pub struct CursorFile {
    path: PathBuf,
}

impl CursorFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// An absent file is an empty map.
    pub fn load(&self) -> Result<BTreeMap<String, u64>, WatchError> {
        let bytes = match std::fs::read(&self.path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
            Err(source) => {
                return Err(WatchError::CursorIo {
                    path: self.path.clone(),
                    source,
                })
            }
        };
        serde_json::from_slice(&bytes).map_err(|source| WatchError::CursorCorrupt {
            path: self.path.clone(),
            source,
        })
    }

    pub fn store(&self, cursors: &BTreeMap<String, u64>) -> Result<(), WatchError> {
        let io = |source| WatchError::CursorIo {
            path: self.path.clone(),
            source,
        };
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = self.path.with_extension("tmp");
        let body = serde_json::to_vec_pretty(cursors).expect("cursor map serializes");
        std::fs::write(&tmp, body).map_err(io)?;
        std::fs::rename(&tmp, &self.path).map_err(io)
    }
}

/// One line per message.
pub fn format_message(m: &PushMessage) -> String {
    let s = &m.summary;
    let mut line = format!(
        "{} #{} report {} {} {} {} at {:.5},{:.5}: {}",
        m.topic, m.seq, s.report_id, s.kind, s.severity, s.state, s.location.lat, s.location.lon, s.headline
    );
    if !s.documents.is_empty() {
        line.push_str(&format!(" [documents: {}]", s.documents.join(", ")));
    }
    line
}

pub struct Watcher<T, S> {
    transport: T,
    sleeper: S,
    subscriber: ActorId,
    topics: BTreeSet<String>,
    cursors: BTreeMap<String, u64>,
    cursor_file: Option<CursorFile>,
    timeout_ms: u64,
    subscribed: bool,
    failures: u32,
}

impl<T: Transport, S: Sleeper> Watcher<T, S> {
    /// Cursors already in `cursor_file` are resumed from. Topics without a
    /// stored cursor start at the newest message when first subscribed.
    pub fn new(
        transport: T,
        sleeper: S,
        subscriber: ActorId,
        topics: BTreeSet<String>,
        cursor_file: Option<CursorFile>,
        timeout_ms: u64,
    ) -> Result<Self, WatchError> {
        if topics.is_empty() {
            return Err(WatchError::NoTopics);
        }
        let mut cursors = match &cursor_file {
            Some(f) => f.load()?,
            None => BTreeMap::new(),
        };
        cursors.retain(|t, _| topics.contains(t));
        Ok(Self {
            transport,
            sleeper,
            subscriber,
            topics,
            cursors,
            cursor_file,
            timeout_ms,
            subscribed: false,
            failures: 0,
        })
    }

    pub fn cursors(&self) -> &BTreeMap<String, u64> {
        &self.cursors
    }

    fn persist(&self) -> Result<(), WatchError> {
        match &self.cursor_file {
            Some(f) => f.store(&self.cursors),
            None => Ok(()),
        }
    }

    /// Waits after a lost request; returns no messages.
    fn lost(&mut self) -> Vec<PushMessage> {
        self.failures += 1;
        self.sleeper.sleep(backoff(self.failures));
        Vec::new()
    }

    fn subscribe(&mut self) -> Result<bool, WatchError> {
        let request = SubscribeRequest {
            subscriber: self.subscriber.clone(),
            topics: self.topics.clone(),
        };
        match self.transport.subscribe(&request) {
            Ok(sub) => {
                for (topic, latest) in sub.cursors {
                    self.cursors.entry(topic).or_insert(latest);
                }
                self.subscribed = true;
                self.persist()?;
                Ok(true)
            }
            Err(TransportError::Unreachable(_)) => Ok(false),
            Err(e) => Err(WatchError::Rejected(e)),
        }
    }

    /// One long poll. New messages are written to `out` in per-topic order
    /// and the cursors are saved before returning. Lost requests and a
    /// forgotten subscription are recovered from here and yield no messages.
    pub fn watch_once(&mut self, out: &mut impl Write) -> Result<Vec<PushMessage>, WatchError> {
        if !self.subscribed && !self.subscribe()? {
            return Ok(self.lost());
        }
        let request = PollRequest {
            subscriber: self.subscriber.clone(),
            cursors: self.cursors.clone(),
            timeout_ms: self.timeout_ms,
        };
        let messages = match self.transport.poll(&request) {
            Ok(m) => m,
            Err(TransportError::Unreachable(_)) => return Ok(self.lost()),
            Err(e) if e.code() == Some("UnknownSubscriber") => {
                self.subscribed = false;
                return Ok(Vec::new());
            }
            Err(e) => return Err(WatchError::Rejected(e)),
        };
        self.failures = 0;
        let mut fresh = Vec::with_capacity(messages.len());
        for m in messages {
            let cursor = self.cursors.entry(m.topic.clone()).or_insert(0);
            if m.seq <= *cursor {
                continue;
            }
            *cursor = m.seq;
            writeln!(out, "{}", format_message(&m))?;
            fresh.push(m);
        }
        if !fresh.is_empty() {
            self.persist()?;
        }
        Ok(fresh)
    }

    /// Polls until `stop` returns true after a round.
    pub fn run(&mut self, out: &mut impl Write, mut stop: impl FnMut(&[PushMessage]) -> bool) -> Result<(), WatchError> {
        loop {
            let batch = self.watch_once(out)?;
            out.flush()?;
            if stop(&batch) {
                return Ok(());
            }
        }
    }
}

/// Default long-poll wait.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(25);
