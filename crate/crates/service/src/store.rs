//! File-backed session storage.
//!
//! ```text
//! <data_dir>/sessions/<session id>/events.jsonl   append-only event log
//!                                  snapshot.json  latest snapshot
//!                                  tokens.json    token digests
//! ```
//!
//! Every accepted event is appended and synced before the new state becomes
//! visible. On startup each session is rebuilt from its snapshot plus the
//! log; a damaged log tail leaves the session read-only until the
//! facilitator truncates it with [`SessionStore::recover`].

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use rand::rngs::OsRng;
use rand::RngCore;
use stakeweigh_core::ahp::QualityAttribute;
use stakeweigh_core::session::{
    decode_log, encode_record, EventOutcome, EventRecord, LogCorruption, ParticipantSpec,
    Pseudonym, Session, SessionConfig, SessionError, SessionEvent, SessionId, SessionSnapshot,
    Timestamp,
};
use stakeweigh_core::StakeholderId;

use crate::tokens::{Role, TokenTable};

const EVENTS_FILE: &str = "events.jsonl";
const SNAPSHOT_FILE: &str = "snapshot.json";
const TOKENS_FILE: &str = "tokens.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session")]
    UnknownSession,
    #[error("session is read-only after log damage at line {}: {}", .0.line, .0.reason)]
    ReadOnly(LogCorruption),
    #[error("session log is intact; nothing to recover")]
    NotDamaged,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
    #[error("cannot recover {dir}: {reason}")]
    Unrecoverable { dir: PathBuf, reason: String },
}

/// One hosted session and its files.
#[derive(Debug)]
pub struct Slot {
    dir: PathBuf,
    session: Session,
    tokens: TokenTable,
    damage: Option<LogCorruption>,
    log: File,
}

impl Slot {
    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn tokens(&self) -> &TokenTable {
        &self.tokens
    }

    /// Set while the log has an unreadable tail.
    pub fn damage(&self) -> Option<&LogCorruption> {
        self.damage.as_ref()
    }

    /// Records of this session's log, read back from disk.
    pub fn read_log(&self) -> io::Result<Vec<EventRecord>> {
        let bytes = fs::read(self.dir.join(EVENTS_FILE))?;
        Ok(decode_log(valid_utf8_prefix(&bytes)).records)
    }
}

#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    snapshot_every: u64,
    sessions: RwLock<HashMap<SessionId, Arc<RwLock<Slot>>>>,
}

impl SessionStore {
    /// Opens `data_dir`, rebuilding every session found there. Sessions
    /// that cannot be rebuilt at all are skipped with a warning.
    pub fn open(data_dir: impl Into<PathBuf>, snapshot_every: u64) -> Result<Self, StoreError> {
        let root = data_dir.into().join("sessions");
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(&root)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for dir in dirs {
            match recover_dir(&dir) {
                Ok(slot) => {
                    if let Some(damage) = &slot.damage {
                        tracing::warn!(
                            session = %slot.session.id(),
                            line = damage.line,
                            reason = %damage.reason,
                            "event log damaged; session is read-only"
                        );
                    }
                    sessions.insert(slot.session.id().clone(), Arc::new(RwLock::new(slot)));
                }
                Err(e) => tracing::warn!(error = %e, "skipping session directory"),
            }
        }
        tracing::info!(sessions = sessions.len(), "session store opened");
        Ok(Self {
            root,
            snapshot_every: snapshot_every.max(1),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        let mut ids: Vec<_> = self
            .sessions
            .read()
            .expect("store lock")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Creates and persists a new session. Returns its id and the
    /// facilitator token.
    pub fn create(
        &self,
        attributes: Vec<QualityAttribute>,
        participants: Vec<ParticipantSpec>,
        config: SessionConfig,
        at: Timestamp,
    ) -> Result<(SessionId, String), StoreError> {
        let mut id_bytes = [0u8; 16];
        OsRng.fill_bytes(&mut id_bytes);
        let id = SessionId::new(hex::encode(id_bytes));
        let record = EventRecord::new(
            1,
            at,
            SessionEvent::SessionCreated {
                session_id: id.clone(),
                attributes,
                participants,
                config,
                pseudonym_seed: OsRng.next_u64(),
            },
        );
        let session = Session::from_genesis(&record).map_err(|e| match e {
            stakeweigh_core::session::ReplayError::Rejected { source, .. } => {
                StoreError::Session(source)
            }
            other => StoreError::Unrecoverable {
                dir: PathBuf::new(),
                reason: other.to_string(),
            },
        })?;
        let (tokens, facilitator) = TokenTable::new();

        let dir = self.root.join(id.as_str());
        fs::create_dir(&dir)?;
        write_atomic(
            &dir.join(TOKENS_FILE),
            &serde_json::to_vec(&tokens).expect("tokens"),
        )?;
        let mut log = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(EVENTS_FILE))?;
        log.write_all(encode_record(&record).as_bytes())?;
        log.sync_all()?;
        sync_dir(&dir)?;
        sync_dir(&self.root)?;

        let slot = Slot {
            dir,
            session,
            tokens,
            damage: None,
            log,
        };
        self.sessions
            .write()
            .expect("store lock")
            .insert(id.clone(), Arc::new(RwLock::new(slot)));
        Ok((id, facilitator))
    }

    fn slot(&self, id: &SessionId) -> Result<Arc<RwLock<Slot>>, StoreError> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or(StoreError::UnknownSession)
    }

    /// Runs `f` against the current state under a shared lock.
    pub fn read<T>(&self, id: &SessionId, f: impl FnOnce(&Slot) -> T) -> Result<T, StoreError> {
        let slot = self.slot(id)?;
        let guard: RwLockReadGuard<'_, Slot> = slot.read().expect("session lock");
        Ok(f(&guard))
    }

    pub fn authenticate(&self, id: &SessionId, token: &str) -> Result<Option<Role>, StoreError> {
        self.read(id, |slot| slot.tokens.authenticate(token))
    }

    /// Issues a token for a participant, replacing any earlier one.
    pub fn issue_token(
        &self,
        id: &SessionId,
        stakeholder: &StakeholderId,
    ) -> Result<(String, Pseudonym), StoreError> {
        let slot = self.slot(id)?;
        let mut slot = slot.write().expect("session lock");
        let pseudonym = slot
            .session
            .pseudonym_of(stakeholder)
            .cloned()
            .ok_or(SessionError::UnknownStakeholder)?;
        let mut tokens = slot.tokens.clone();
        let token = tokens.issue(stakeholder.clone());
        write_atomic(
            &slot.dir.join(TOKENS_FILE),
            &serde_json::to_vec(&tokens).expect("tokens"),
        )?;
        slot.tokens = tokens;
        Ok((token, pseudonym))
    }

    /// Applies an event, persisting it before the new state is published.
    pub fn execute(
        &self,
        id: &SessionId,
        event: SessionEvent,
        at: Timestamp,
    ) -> Result<EventOutcome, StoreError> {
        let slot = self.slot(id)?;
        let mut guard: RwLockWriteGuard<'_, Slot> = slot.write().expect("session lock");
        let slot = &mut *guard;
        if let Some(damage) = &slot.damage {
            return Err(StoreError::ReadOnly(damage.clone()));
        }
        let mut next = slot.session.clone();
        let (outcome, record) = next.execute(event, at)?;
        let len = slot.log.metadata()?.len();
        let written = slot
            .log
            .write_all(encode_record(&record).as_bytes())
            .and_then(|()| slot.log.sync_data());
        if let Err(e) = written {
            let _ = slot.log.set_len(len);
            return Err(e.into());
        }
        slot.session = next;
        if record.seq % self.snapshot_every == 0 {
            let snapshot = slot.session.snapshot().to_json();
            if let Err(e) = write_atomic(&slot.dir.join(SNAPSHOT_FILE), snapshot.as_bytes()) {
                tracing::warn!(session = %id, error = %e, "snapshot failed");
            }
        }
        Ok(outcome)
    }

    /// Facilitator action after log damage: drops the unreadable tail and
    /// makes the session writable again.
    pub fn recover(&self, id: &SessionId) -> Result<u64, StoreError> {
        let slot = self.slot(id)?;
        let mut slot = slot.write().expect("session lock");
        let Some(damage) = slot.damage.clone() else {
            return Err(StoreError::NotDamaged);
        };
        slot.log.set_len(damage.offset as u64)?;
        slot.log.sync_all()?;
        let snapshot_path = slot.dir.join(SNAPSHOT_FILE);
        if let Some(snapshot) = read_snapshot(&snapshot_path) {
            if snapshot.session.last_seq() > slot.session.last_seq() {
                fs::remove_file(&snapshot_path)?;
            }
        }
        slot.damage = None;
        tracing::info!(session = %id, kept = slot.session.last_seq(), "log tail discarded");
        Ok(slot.session.last_seq())
    }
}

fn valid_utf8_prefix(bytes: &[u8]) -> &str {
    match std::str::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => std::str::from_utf8(&bytes[..e.valid_up_to()]).expect("valid prefix"),
    }
}

fn read_snapshot(path: &Path) -> Option<SessionSnapshot> {
    let text = fs::read_to_string(path).ok()?;
    SessionSnapshot::from_json(&text).ok()
}

fn recover_dir(dir: &Path) -> Result<Slot, StoreError> {
    let fail = |reason: String| StoreError::Unrecoverable {
        dir: dir.to_owned(),
        reason,
    };
    let tokens: TokenTable = serde_json::from_slice(
        &fs::read(dir.join(TOKENS_FILE)).map_err(|e| fail(format!("tokens: {e}")))?,
    )
    .map_err(|e| fail(format!("tokens: {e}")))?;

    let bytes = fs::read(dir.join(EVENTS_FILE)).map_err(|e| fail(format!("log: {e}")))?;
    let text = valid_utf8_prefix(&bytes);
    let decoded = decode_log(text);
    let mut damage = decoded.corruption.clone();
    if damage.is_none() && text.len() < bytes.len() {
        damage = Some(LogCorruption {
            line: decoded.records.len() + 1,
            offset: text.len(),
            reason: "invalid UTF-8".into(),
        });
    }
    let first = decoded
        .records
        .first()
        .ok_or_else(|| fail("no readable creation record".into()))?;

    let snapshot = read_snapshot(&dir.join(SNAPSHOT_FILE)).filter(|s| {
        s.session.last_seq() <= decoded.records.len() as u64
            && Some(s.session.id()) == genesis_id(first)
    });
    let mut session = match snapshot {
        Some(s) => s.session,
        None => Session::from_genesis(first).map_err(|e| fail(e.to_string()))?,
    };
    for (index, record) in decoded.records.iter().enumerate() {
        if record.seq <= session.last_seq() {
            continue;
        }
        if let Err(e) = session.apply_record(record) {
            damage = Some(LogCorruption {
                line: index + 1,
                offset: if index == 0 {
                    0
                } else {
                    decoded.ends[index - 1]
                },
                reason: e.to_string(),
            });
            break;
        }
    }

    let log = OpenOptions::new()
        .append(true)
        .open(dir.join(EVENTS_FILE))?;
    Ok(Slot {
        dir: dir.to_owned(),
        session,
        tokens,
        damage,
        log,
    })
}

fn genesis_id(record: &EventRecord) -> Option<&SessionId> {
    match &record.event {
        SessionEvent::SessionCreated { session_id, .. } => Some(session_id),
        _ => None,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        sync_dir(parent)?;
    }
    Ok(())
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    #[cfg(unix)]
    File::open(dir)?.sync_all()?;
    #[cfg(not(unix))]
    let _ = dir;
    Ok(())
}
