//! Event sourcing: every accepted operation becomes an [`EventRecord`],
//! stored one JSON object per line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Abstention, ParticipantSpec, Phase, Pseudonym, RationaleInput, Session, SessionConfig,
    SessionError, SessionId, Submission, Timestamp,
};
use crate::ahp::{ComparisonMatrix, QualityAttribute};
use crate::{AttributeId, StakeholderId};

pub const EVENT_SCHEMA: &str = "stakeweigh.session-event/1";
pub const SNAPSHOT_SCHEMA: &str = "stakeweigh.session-snapshot/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionCreated {
        session_id: SessionId,
        attributes: Vec<QualityAttribute>,
        participants: Vec<ParticipantSpec>,
        config: SessionConfig,
        pseudonym_seed: u64,
    },
    MatrixSubmitted {
        stakeholder: StakeholderId,
        matrix: ComparisonMatrix,
        #[serde(default)]
        abstentions: Vec<Abstention>,
    },
    RationalePosted {
        stakeholder: StakeholderId,
        rationale: RationaleInput,
    },
    PromptPublished {
        text: String,
        #[serde(default)]
        attributes: Vec<AttributeId>,
    },
    DelegationSet {
        delegator: StakeholderId,
        delegate: StakeholderId,
        from: Phase,
        until: Phase,
    },
    DelegationRevoked {
        delegator: StakeholderId,
    },
    RoundAdvanced {
        from: Phase,
        to: Phase,
    },
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionEvent::SessionCreated { .. } => "session_created",
            SessionEvent::MatrixSubmitted { .. } => "matrix_submitted",
            SessionEvent::RationalePosted { .. } => "rationale_posted",
            SessionEvent::PromptPublished { .. } => "prompt_published",
            SessionEvent::DelegationSet { .. } => "delegation_set",
            SessionEvent::DelegationRevoked { .. } => "delegation_revoked",
            SessionEvent::RoundAdvanced { .. } => "round_advanced",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub schema: String,
    pub seq: u64,
    pub at: Timestamp,
    pub event: SessionEvent,
}

impl EventRecord {
    pub fn new(seq: u64, at: Timestamp, event: SessionEvent) -> Self {
        Self {
            schema: EVENT_SCHEMA.to_owned(),
            seq,
            at,
            event,
        }
    }
}

/// What applying an event produced.
#[derive(Clone, Debug, PartialEq)]
pub enum EventOutcome {
    Created,
    Submitted(Box<Submission>),
    RationalePosted,
    PromptPublished(u32),
    DelegationSet,
    DelegationRevoked,
    Advanced(Phase),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("first event must create the session")]
    MissingCreation,
    #[error("session created twice")]
    DuplicateCreation,
    #[error("unsupported schema `{0}`")]
    Schema(String),
    #[error("expected event {expected}, found {found}")]
    Sequence { expected: u64, found: u64 },
    #[error("round advanced to {recorded} but replay reached {replayed}")]
    Divergence { recorded: Phase, replayed: Phase },
    #[error("event {seq} rejected: {source}")]
    Rejected { seq: u64, source: SessionError },
}

impl Session {
    /// Builds a session from its creation record.
    pub fn from_genesis(record: &EventRecord) -> Result<Self, ReplayError> {
        check_schema(record)?;
        if record.seq != 1 {
            return Err(ReplayError::Sequence {
                expected: 1,
                found: record.seq,
            });
        }
        let SessionEvent::SessionCreated {
            session_id,
            attributes,
            participants,
            config,
            pseudonym_seed,
        } = &record.event
        else {
            return Err(ReplayError::MissingCreation);
        };
        let mut session = Session::create(
            session_id.clone(),
            attributes.clone(),
            participants.clone(),
            config.clone(),
            *pseudonym_seed,
            record.at,
        )
        .map_err(|source| ReplayError::Rejected { seq: 1, source })?;
        session.set_last_seq(1);
        Ok(session)
    }

    /// Runs the operation an event describes. The session is unchanged on
    /// error.
    pub fn apply_event(
        &mut self,
        event: &SessionEvent,
        at: Timestamp,
    ) -> Result<EventOutcome, SessionError> {
        match event {
            SessionEvent::SessionCreated { .. } => Err(SessionError::WrongPhase {
                operation: "create",
                phase: self.phase(),
            }),
            SessionEvent::MatrixSubmitted {
                stakeholder,
                matrix,
                abstentions,
            } => self
                .submit_matrix(stakeholder, matrix.clone(), abstentions.clone(), at)
                .map(|s| EventOutcome::Submitted(Box::new(s))),
            SessionEvent::RationalePosted {
                stakeholder,
                rationale,
            } => self
                .post_rationale(stakeholder, rationale.clone(), at)
                .map(|()| EventOutcome::RationalePosted),
            SessionEvent::PromptPublished { text, attributes } => self
                .publish_prompt(text.clone(), attributes.clone())
                .map(EventOutcome::PromptPublished),
            SessionEvent::DelegationSet {
                delegator,
                delegate,
                from,
                until,
            } => self
                .delegate(delegator, delegate, *from, *until)
                .map(|()| EventOutcome::DelegationSet),
            SessionEvent::DelegationRevoked { delegator } => self
                .revoke_delegation(delegator)
                .map(|()| EventOutcome::DelegationRevoked),
            SessionEvent::RoundAdvanced { from, .. } => {
                if *from != self.phase() {
                    return Err(SessionError::IllegalTransition { from: self.phase() });
                }
                self.advance_round(at).map(EventOutcome::Advanced)
            }
        }
    }

    /// Applies the next record of this session's log.
    pub fn apply_record(&mut self, record: &EventRecord) -> Result<EventOutcome, ReplayError> {
        check_schema(record)?;
        let expected = self.last_seq() + 1;
        if record.seq != expected {
            return Err(ReplayError::Sequence {
                expected,
                found: record.seq,
            });
        }
        if matches!(record.event, SessionEvent::SessionCreated { .. }) {
            return Err(ReplayError::DuplicateCreation);
        }
        let outcome = self
            .apply_event(&record.event, record.at)
            .map_err(|source| ReplayError::Rejected {
                seq: record.seq,
                source,
            })?;
        if let (SessionEvent::RoundAdvanced { to, .. }, EventOutcome::Advanced(reached)) =
            (&record.event, &outcome)
        {
            if to != reached {
                return Err(ReplayError::Divergence {
                    recorded: *to,
                    replayed: *reached,
                });
            }
        }
        self.set_last_seq(record.seq);
        Ok(outcome)
    }

    /// Applies `event` as the next log entry and returns the record to
    /// persist. A round advance is recorded with the phase actually reached.
    pub fn execute(
        &mut self,
        event: SessionEvent,
        at: Timestamp,
    ) -> Result<(EventOutcome, EventRecord), SessionError> {
        let outcome = self.apply_event(&event, at)?;
        let event = match (event, &outcome) {
            (SessionEvent::RoundAdvanced { from, .. }, EventOutcome::Advanced(to)) => {
                SessionEvent::RoundAdvanced { from, to: *to }
            }
            (event, _) => event,
        };
        let seq = self.last_seq() + 1;
        self.set_last_seq(seq);
        Ok((outcome, EventRecord::new(seq, at, event)))
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            schema: SNAPSHOT_SCHEMA.to_owned(),
            session: self.clone(),
        }
    }
}

fn check_schema(record: &EventRecord) -> Result<(), ReplayError> {
    if record.schema != EVENT_SCHEMA {
        return Err(ReplayError::Schema(record.schema.clone()));
    }
    Ok(())
}

/// Rebuilds a session from a complete log.
pub fn replay(records: &[EventRecord]) -> Result<Session, ReplayError> {
    let (first, rest) = records.split_first().ok_or(ReplayError::Empty)?;
    let mut session = Session::from_genesis(first)?;
    for record in rest {
        session.apply_record(record)?;
    }
    Ok(session)
}

/// Rebuilds a session from a snapshot plus the log. Records already covered
/// by the snapshot are skipped.
pub fn replay_from(
    snapshot: &SessionSnapshot,
    records: &[EventRecord],
) -> Result<Session, ReplayError> {
    if snapshot.schema != SNAPSHOT_SCHEMA {
        return Err(ReplayError::Schema(snapshot.schema.clone()));
    }
    let mut session = snapshot.session.clone();
    let covered = session.last_seq();
    for record in records.iter().filter(|r| r.seq > covered) {
        session.apply_record(record)?;
    }
    Ok(session)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSnapshot {
    pub schema: String,
    pub session: Session,
}

impl SessionSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One line of the log, newline-terminated.
pub fn encode_record(record: &EventRecord) -> String {
    let mut line = serde_json::to_string(record).expect("event serializes");
    line.push('\n');
    line
}

/// Where a log stopped being readable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogCorruption {
    /// 1-based line number of the first unreadable line.
    pub line: usize,
    /// Byte offset where that line starts; everything before it is intact.
    pub offset: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedLog {
    pub records: Vec<EventRecord>,
    /// Byte offset just past each record's line.
    pub ends: Vec<usize>,
    pub corruption: Option<LogCorruption>,
}

/// Parses a JSON-lines log. Decoding stops at the first line that is not a
/// well-formed record with the next sequence number; a final line without
/// its newline counts as torn.
pub fn decode_log(text: &str) -> DecodedLog {
    let mut records: Vec<EventRecord> = Vec::new();
    let mut ends = Vec::new();
    let mut offset = 0;
    for (index, raw) in text.split_inclusive('\n').enumerate() {
        let fail = |reason: String| LogCorruption {
            line: index + 1,
            offset,
            reason,
        };
        let Some(line) = raw.strip_suffix('\n') else {
            return DecodedLog {
                records,
                ends,
                corruption: Some(fail("unterminated final line".into())),
            };
        };
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            offset += raw.len();
            continue;
        }
        let record: EventRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                return DecodedLog {
                    records,
                    ends,
                    corruption: Some(fail(e.to_string())),
                }
            }
        };
        let expected = records.last().map_or(1, |r| r.seq + 1);
        if record.seq != expected {
            return DecodedLog {
                records,
                ends,
                corruption: Some(fail(format!(
                    "expected sequence {expected}, found {}",
                    record.seq
                ))),
            };
        }
        records.push(record);
        offset += raw.len();
        ends.push(offset);
    }
    DecodedLog {
        records,
        ends,
        corruption: None,
    }
}

/// A session together with its log, kept in memory. Every operation is
/// recorded only if it succeeds.
#[derive(Clone, Debug)]
pub struct JournaledSession {
    session: Session,
    records: Vec<EventRecord>,
}

impl JournaledSession {
    pub fn create(
        session_id: SessionId,
        attributes: Vec<QualityAttribute>,
        participants: Vec<ParticipantSpec>,
        config: SessionConfig,
        pseudonym_seed: u64,
        at: Timestamp,
    ) -> Result<Self, SessionError> {
        let record = EventRecord::new(
            1,
            at,
            SessionEvent::SessionCreated {
                session_id,
                attributes,
                participants,
                config,
                pseudonym_seed,
            },
        );
        let session = Session::from_genesis(&record).map_err(|e| match e {
            ReplayError::Rejected { source, .. } => source,
            other => unreachable!("genesis record is well-formed: {other}"),
        })?;
        Ok(Self {
            session,
            records: vec![record],
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn into_parts(self) -> (Session, Vec<EventRecord>) {
        (self.session, self.records)
    }

    /// Applies `event` and records it on success. A round advance is
    /// recorded with the phase actually reached.
    pub fn execute(
        &mut self,
        event: SessionEvent,
        at: Timestamp,
    ) -> Result<EventOutcome, SessionError> {
        let (outcome, record) = self.session.execute(event, at)?;
        self.records.push(record);
        Ok(outcome)
    }

    pub fn advance(&mut self, at: Timestamp) -> Result<Phase, SessionError> {
        let from = self.session.phase();
        match self.execute(SessionEvent::RoundAdvanced { from, to: from }, at)? {
            EventOutcome::Advanced(p) => Ok(p),
            _ => unreachable!(),
        }
    }

    pub fn encode(&self) -> String {
        self.records.iter().map(encode_record).collect()
    }
}

/// An event as shown in the stakeholder-facing audit log: identities are
/// replaced by pseudonyms and participant weights are withheld.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub kind: String,
    pub actor: Option<Pseudonym>,
    pub detail: serde_json::Value,
}

impl Session {
    /// Pseudonymized view of a record from this session's log.
    pub fn audit_record(&self, record: &EventRecord) -> AuditRecord {
        let name = |id: &StakeholderId| {
            self.pseudonym_of(id)
                .cloned()
                .unwrap_or_else(|| Pseudonym("unknown participant".into()))
        };
        let (actor, detail) = match &record.event {
            SessionEvent::SessionCreated {
                session_id,
                attributes,
                config,
                ..
            } => {
                let mut pseudonyms: Vec<&Pseudonym> =
                    self.participants().iter().map(|p| &p.pseudonym).collect();
                pseudonyms.sort();
                (
                    None,
                    serde_json::json!({
                        "session_id": session_id,
                        "attributes": attributes,
                        "participants": pseudonyms,
                        "config": config,
                    }),
                )
            }
            SessionEvent::MatrixSubmitted {
                stakeholder,
                matrix,
                abstentions,
            } => (
                Some(name(stakeholder)),
                serde_json::json!({ "matrix": matrix, "abstentions": abstentions }),
            ),
            SessionEvent::RationalePosted {
                stakeholder,
                rationale,
            } => (Some(name(stakeholder)), serde_json::json!(rationale)),
            SessionEvent::PromptPublished { text, attributes } => (
                None,
                serde_json::json!({ "text": text, "attributes": attributes }),
            ),
            SessionEvent::DelegationSet {
                delegator,
                delegate,
                from,
                until,
            } => (
                Some(name(delegator)),
                serde_json::json!({ "delegate": name(delegate), "from": from, "until": until }),
            ),
            SessionEvent::DelegationRevoked { delegator } => {
                (Some(name(delegator)), serde_json::json!({}))
            }
            SessionEvent::RoundAdvanced { from, to } => {
                (None, serde_json::json!({ "from": from, "to": to }))
            }
        };
        AuditRecord {
            seq: record.seq,
            at: record.at,
            kind: record.event.kind().to_owned(),
            actor,
            detail,
        }
    }
}
