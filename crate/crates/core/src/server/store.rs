//! On-disk event log (one JSON record per line) and state snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::state::{AuditEvent, ServerState};
use super::ServerError;

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Opens (or creates) the log and returns the events already in it.
    ///
    /// A final line without a newline is a write that never completed; it is
    /// cut off. Any other undecodable line, or a seq gap, is `CorruptLog`.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<AuditEvent>), ServerError> {
        let path = path.as_ref().to_path_buf();
        let text = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let complete = match text.iter().rposition(|&b| b == b'\n') {
            Some(i) => i + 1,
            None => 0,
        };
        let events = parse_log(&text[..complete])?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).read(true).write(true).open(&path)?;
        if complete < text.len() {
            file.set_len(complete as u64)?;
            file.sync_data()?;
        }
        let mut log = Self { path, file };
        log.seek_end()?;
        Ok((log, events))
    }

    fn seek_end(&mut self) -> io::Result<()> {
        use std::io::Seek;
        self.file.seek(io::SeekFrom::End(0)).map(|_| ())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record and waits for it to reach the disk.
    pub fn append(&mut self, event: &AuditEvent) -> io::Result<()> {
        let mut line = serde_json::to_vec(event).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

/// Decodes a log and checks seqs run 1, 2, 3, ... without gaps.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<AuditEvent>, ServerError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ServerError::CorruptLog {
        seq: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    let mut events = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let expected = events.len() as u64 + 1;
        let event: AuditEvent = serde_json::from_str(line).map_err(|e| ServerError::CorruptLog {
            seq: expected,
            reason: format!("line {}: {e}", n + 1),
        })?;
        if event.seq != expected {
            return Err(ServerError::CorruptLog {
                seq: event.seq,
                reason: format!("expected seq {expected}"),
            });
        }
        events.push(event);
    }
    Ok(events)
}

/// Writes the snapshot next to its final path and renames it into place.
pub fn write_snapshot(path: &Path, state: &ServerState) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&state.snapshot_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn read_snapshot(path: &Path) -> Result<Option<ServerState>, ServerError> {
    match fs::read(path) {
        Ok(bytes) => ServerState::from_snapshot(&bytes)
            .map(Some)
            .map_err(|e| ServerError::CorruptLog {
                seq: 0,
                reason: format!("snapshot {}: {e}", path.display()),
            }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}
