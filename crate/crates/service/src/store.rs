//! Per-study persistence: an append-only NDJSON event log plus an optional
//! snapshot, under `<data_dir>/studies/<id>/`.
//!
//! Every append is flushed to disk before it returns. Compaction writes the
//! full state to `snapshot.json` (temp file, fsync, rename) and only then
//! empties the log, so a crash in between leaves log lines that replay skips
//! because their sequence numbers are covered by the snapshot.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::domain::{LogEvent, StudyState};
use crate::error::{ServiceError, ServiceResult};

pub const LOG_FILE: &str = "events.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const RESULTS_FILE: &str = "results.json";

/// The single writer of one study's log.
#[derive(Debug)]
pub struct StudyLog {
    dir: PathBuf,
    file: File,
    since_snapshot: usize,
    compact_every: usize,
}

impl StudyLog {
    /// Creates the study directory and writes the creation event.
    pub fn create(dir: &Path, state: &StudyState, compact_every: usize) -> ServiceResult<Self> {
        fs::create_dir_all(dir)?;
        let mut log = Self {
            dir: dir.to_path_buf(),
            file: open_append(&dir.join(LOG_FILE))?,
            since_snapshot: 0,
            compact_every,
        };
        log.append(&LogEvent::StudyCreated {
            seq: state.last_seq,
            study: state.study.clone(),
        })?;
        sync_dir(dir)?;
        Ok(log)
    }

    /// Replays a study directory: snapshot first, then every log line with a
    /// later sequence number. A final line without its newline is a write
    /// that was never acknowledged; it is dropped and the file trimmed.
    pub fn open(dir: &Path, compact_every: usize) -> ServiceResult<(StudyState, Self)> {
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let mut state: Option<StudyState> = if snapshot_path.exists() {
            Some(serde_json::from_reader(BufReader::new(File::open(&snapshot_path)?))?)
        } else {
            None
        };

        let log_path = dir.join(LOG_FILE);
        let mut good_len = 0u64;
        let mut replayed = 0;
        if log_path.exists() {
            let mut reader = BufReader::new(File::open(&log_path)?);
            let mut line = String::new();
            loop {
                line.clear();
                let read = reader.read_line(&mut line)?;
                if read == 0 {
                    break;
                }
                if !line.ends_with('\n') {
                    tracing::warn!(dir = %dir.display(), "dropping incomplete trailing log line");
                    break;
                }
                let entry: LogEvent = serde_json::from_str(line.trim_end())
                    .map_err(|e| ServiceError::Corrupt(format!("{}: {e}", log_path.display())))?;
                good_len += read as u64;
                match (&mut state, entry) {
                    (None, LogEvent::StudyCreated { seq, study }) => {
                        let mut fresh = StudyState::new(study);
                        fresh.last_seq = seq;
                        state = Some(fresh);
                    }
                    (None, _) => return Err(ServiceError::Corrupt("log does not start with the study".into())),
                    (Some(s), entry) if entry.seq() <= s.last_seq => continue,
                    (Some(s), entry) => {
                        s.apply(entry)?;
                        replayed += 1;
                    }
                }
            }
        }
        let state = state.ok_or_else(|| ServiceError::Corrupt(format!("{} holds no study", dir.display())))?;

        let file = open_append(&log_path)?;
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.sync_all()?;
        }
        Ok((
            state,
            Self {
                dir: dir.to_path_buf(),
                file,
                since_snapshot: replayed,
                compact_every,
            },
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one line and waits for it to reach the disk.
    pub fn append(&mut self, entry: &LogEvent) -> ServiceResult<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.since_snapshot += 1;
        Ok(())
    }

    /// Compacts once enough lines have accumulated since the last snapshot.
    pub fn maybe_compact(&mut self, state: &StudyState) -> ServiceResult<bool> {
        if self.compact_every == 0 || self.since_snapshot < self.compact_every {
            return Ok(false);
        }
        self.compact(state)?;
        Ok(true)
    }

    pub fn compact(&mut self, state: &StudyState) -> ServiceResult<()> {
        write_atomic(&self.dir.join(SNAPSHOT_FILE), state)?;
        let log_path = self.dir.join(LOG_FILE);
        let tmp = self.dir.join(format!("{LOG_FILE}.tmp"));
        File::create(&tmp)?.sync_all()?;
        fs::rename(&tmp, &log_path)?;
        sync_dir(&self.dir)?;
        self.file = open_append(&log_path)?;
        self.since_snapshot = 0;
        Ok(())
    }
}

/// Serialises `value` to `path` via a temp file, fsync and rename.
pub fn write_atomic<T: Serialize>(path: &Path, value: &T) -> ServiceResult<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        serde_json::to_writer(&mut f, value)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        sync_dir(parent)?;
    }
    Ok(())
}

fn open_append(path: &Path) -> std::io::Result<File> {
    OpenOptions::new().create(true).append(true).open(path)
}

fn sync_dir(dir: &Path) -> std::io::Result<()> {
    // Makes renames durable. Some platforms refuse to open a directory for
    // syncing; that is not an error worth failing a write over.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}
