//! The negotiation workflow as a state machine.
//!
//! ```text
//! Elicitation ──(agreement)──────────────────────────────┐
//!      │                                                  ▼
//!      └─(no agreement)─▶ Round1 ─▶ Round2 ─▶ Round3 ─▶ Aggregation ─▶ Closed
//! ```
//!
//! Stakeholders submit judgment matrices; inconsistent matrices are rejected
//! with a [`ConsistencyReport`] so the stakeholder can refine them. When the
//! facilitator advances out of elicitation the agreement gate decides whether
//! negotiation is needed. Negotiation runs three rounds: open-ended answers,
//! revision with anonymized feedback, and a final revision where a
//! stakeholder may instead declare dissent. Entering aggregation computes the
//! weighted mean of individual priorities and closes the session.
//!
//! Every mutation is expressed as a [`SessionEvent`]; replaying the recorded
//! events rebuilds the session exactly.

mod event;
mod feedback;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{
    consistency, principal_eigen, AhpError, ComparisonMatrix, ConsistencyOptions,
    ConsistencyReport, QualityAttribute, DEFAULT_CR_LIMIT, DEFAULT_TRIPLE_THRESHOLD,
};
use crate::consensus::{
    aggregate_aip, concordance_of_any, ranking_from_scores, AbstentionKind, ConcordanceReport,
    ConsensusError, Ranking, StakeholderWeight, DEFAULT_AGREEMENT_THRESHOLD, DEFAULT_TIE_EPSILON,
};
use crate::utility::{
    build_utility, PreferenceFunction, UtilityError, UtilityFunction, UtilityMode,
};
use crate::{AttributeId, PriorityVector, StakeholderId};

pub use event::{
    decode_log, encode_record, replay, replay_from, AuditRecord, DecodedLog, EventOutcome,
    EventRecord, JournaledSession, LogCorruption, ReplayError, SessionEvent, SessionSnapshot,
    EVENT_SCHEMA, SNAPSHOT_SCHEMA,
};
pub use feedback::{AttributeDistribution, ConflictSide, ConflictView, FeedbackBundle};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Public label standing in for a stakeholder, e.g. "Participant C".
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pseudonym(String);

impl Pseudonym {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Caller-supplied time in milliseconds since the Unix epoch.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Elicitation,
    Round1,
    Round2,
    Round3,
    Aggregation,
    Closed,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Elicitation,
        Phase::Round1,
        Phase::Round2,
        Phase::Round3,
        Phase::Aggregation,
        Phase::Closed,
    ];

    /// Phases in which matrices are submitted or revised.
    pub fn accepts_submissions(self) -> bool {
        matches!(self, Phase::Elicitation | Phase::Round2 | Phase::Round3)
    }

    pub fn is_negotiation(self) -> bool {
        matches!(self, Phase::Round1 | Phase::Round2 | Phase::Round3)
    }

    /// Phases a participant can be active (or delegating) in.
    pub fn is_open(self) -> bool {
        self <= Phase::Round3
    }

    fn previous_round(self) -> Option<Phase> {
        match self {
            Phase::Round2 => Some(Phase::Round1),
            Phase::Round3 => Some(Phase::Round2),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Elicitation => "elicitation",
            Phase::Round1 => "round1",
            Phase::Round2 => "round2",
            Phase::Round3 => "round3",
            Phase::Aggregation => "aggregation",
            Phase::Closed => "closed",
        };
        f.write_str(s)
    }
}

/// Whether `from → to` is an edge of the workflow.
pub fn is_legal_transition(from: Phase, to: Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (Elicitation, Round1)
            | (Elicitation, Aggregation)
            | (Round1, Round2)
            | (Round2, Round3)
            | (Round3, Aggregation)
            | (Aggregation, Closed)
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Must not exceed 0.10.
    pub cr_limit: f64,
    pub agreement_threshold: f64,
    pub triple_threshold: f64,
    pub tie_epsilon: f64,
    pub utility_mode: UtilityMode,
    /// Attributes without an entry use the identity preference.
    pub preferences: BTreeMap<AttributeId, PreferenceFunction>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            cr_limit: DEFAULT_CR_LIMIT,
            agreement_threshold: DEFAULT_AGREEMENT_THRESHOLD,
            triple_threshold: DEFAULT_TRIPLE_THRESHOLD,
            tie_epsilon: DEFAULT_TIE_EPSILON,
            utility_mode: UtilityMode::default(),
            preferences: BTreeMap::new(),
        }
    }
}

impl SessionConfig {
    pub fn consistency_options(&self) -> ConsistencyOptions {
        ConsistencyOptions {
            triple_threshold: self.triple_threshold,
            cr_limit: self.cr_limit,
            random_index: None,
        }
    }

    fn validate(&self, attributes: &[QualityAttribute]) -> Result<(), SessionError> {
        let bad = |msg: String| Err(SessionError::InvalidConfig(msg));
        if !(self.cr_limit > 0.0 && self.cr_limit <= DEFAULT_CR_LIMIT) {
            return bad(format!("cr_limit {} outside (0, 0.10]", self.cr_limit));
        }
        if !(self.agreement_threshold > 0.0 && self.agreement_threshold <= 1.0) {
            return bad(format!(
                "agreement_threshold {} outside (0, 1]",
                self.agreement_threshold
            ));
        }
        if !(self.triple_threshold >= 1.0 && self.triple_threshold.is_finite()) {
            return bad(format!(
                "triple_threshold {} below 1",
                self.triple_threshold
            ));
        }
        if !(self.tie_epsilon >= 0.0 && self.tie_epsilon.is_finite()) {
            return bad(format!("tie_epsilon {} negative", self.tie_epsilon));
        }
        for (id, pf) in &self.preferences {
            let Some(attribute) = attributes.iter().find(|a| &a.id == id) else {
                return bad(format!("preference for unknown attribute `{id}`"));
            };
            if let PreferenceFunction::Sigmoid {
                insufficient,
                good_enough,
            } = *pf
            {
                PreferenceFunction::sigmoid(insufficient, good_enough, attribute.direction)
                    .map_err(SessionError::Utility)?;
                if self.utility_mode == UtilityMode::RawLinear {
                    return Err(SessionError::Utility(UtilityError::SigmoidInRawLinear(
                        id.clone(),
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSpec {
    pub id: StakeholderId,
    pub weight: f64,
}

impl ParticipantSpec {
    pub fn new(id: impl Into<StakeholderId>, weight: f64) -> Self {
        Self {
            id: id.into(),
            weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: StakeholderId,
    pub pseudonym: Pseudonym,
    /// As given at creation; normalized on use.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Abstention {
    pub attribute: AttributeId,
    pub kind: AbstentionKind,
}

impl Abstention {
    pub fn dont_know(attribute: impl Into<AttributeId>) -> Self {
        Self {
            attribute: attribute.into(),
            kind: AbstentionKind::DontKnow,
        }
    }

    pub fn dont_care(attribute: impl Into<AttributeId>) -> Self {
        Self {
            attribute: attribute.into(),
            kind: AbstentionKind::DontCare,
        }
    }
}

/// An accepted matrix. Abstained attributes are not part of `matrix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub stakeholder: StakeholderId,
    pub matrix: ComparisonMatrix,
    pub priorities: PriorityVector,
    pub consistency: ConsistencyReport,
    pub abstentions: Vec<Abstention>,
    pub submitted_at: Timestamp,
    pub round: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleKind {
    Answer,
    Comment,
    Dissent,
    AttributeSuggestion,
}

/// What a stakeholder sends when posting a rationale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationaleInput {
    pub kind: RationaleKind,
    pub body: String,
    #[serde(default)]
    pub attributes: Vec<AttributeId>,
    #[serde(default)]
    pub prompt_id: Option<u32>,
    #[serde(default)]
    pub suggestion: Option<QualityAttribute>,
}

impl RationaleInput {
    pub fn new(kind: RationaleKind, body: impl Into<String>) -> Self {
        Self {
            kind,
            body: body.into(),
            attributes: Vec::new(),
            prompt_id: None,
            suggestion: None,
        }
    }

    pub fn about(mut self, attributes: &[&str]) -> Self {
        self.attributes = attributes.iter().map(|&a| a.into()).collect();
        self
    }

    pub fn answering(mut self, prompt_id: u32) -> Self {
        self.prompt_id = Some(prompt_id);
        self
    }

    pub fn suggesting(mut self, attribute: QualityAttribute) -> Self {
        self.suggestion = Some(attribute);
        self
    }
}

/// A stored rationale. Only the author's pseudonym is kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub author: Pseudonym,
    pub round: Phase,
    pub kind: RationaleKind,
    pub attributes: Vec<AttributeId>,
    pub prompt: Option<String>,
    pub body: String,
    pub suggestion: Option<QualityAttribute>,
    pub posted_at: Timestamp,
}

/// Facilitator-authored open question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: u32,
    pub round: Phase,
    pub text: String,
    pub attributes: Vec<AttributeId>,
}

/// Proxy vote: while the current phase lies in `from..=until`, `delegate`
/// acts for `delegator`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delegation {
    pub delegator: StakeholderId,
    pub delegate: StakeholderId,
    pub from: Phase,
    pub until: Phase,
}

impl Delegation {
    pub fn covers(&self, phase: Phase) -> bool {
        self.from <= phase && phase <= self.until
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissentRecord {
    pub author: Pseudonym,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub priorities: PriorityVector,
    pub utility: UtilityFunction,
    pub dissent: Vec<DissentRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub from: Phase,
    pub to: Phase,
    pub at: Timestamp,
    pub concordance: Option<ConcordanceReport>,
}

/// Pseudonymous participation summary, safe to show to anyone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipationEntry {
    pub pseudonym: Pseudonym,
    pub active: bool,
    pub submitted: bool,
    pub answered: bool,
    pub dissented: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("`{operation}` is not allowed in phase {phase}")]
    WrongPhase {
        operation: &'static str,
        phase: Phase,
    },
    #[error("session is closed")]
    Closed,
    #[error("unknown stakeholder")]
    UnknownStakeholder,
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(AttributeId),
    #[error("duplicate attribute `{0}`")]
    DuplicateAttribute(AttributeId),
    #[error("duplicate participant `{0}`")]
    DuplicateParticipant(StakeholderId),
    #[error("a session needs at least 2 attributes, got {0}")]
    TooFewAttributes(usize),
    #[error("a session needs at least one participant")]
    NoParticipants,
    #[error("participant weight must be positive and finite")]
    InvalidWeight,
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("stakeholder is delegating and cannot act in this phase")]
    Delegating,
    #[error("invalid delegation: {0}")]
    InvalidDelegation(String),
    #[error("delegation would create a cycle")]
    DelegationCycle,
    #[error("no delegation to revoke")]
    NoDelegation,
    #[error("matrix is inconsistent (CR = {:.3})", .0.cr)]
    Inconsistent(Box<ConsistencyReport>),
    #[error(transparent)]
    Matrix(#[from] AhpError),
    #[error("matrix attributes do not match the session attributes minus abstentions")]
    MatrixAttributeMismatch,
    #[error("abstentions leave {0} attributes; at least 2 are needed")]
    TooFewRemainingAttributes(usize),
    #[error("attribute `{0}` abstained twice")]
    DuplicateAbstention(AttributeId),
    #[error("round incomplete; waiting for {}", .0.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(", "))]
    IncompleteRound(Vec<Pseudonym>),
    #[error("illegal transition from {from}")]
    IllegalTransition { from: Phase },
    #[error("dissent may only be declared in round 3")]
    DissentOutsideRound3,
    #[error("stakeholder has already declared dissent")]
    AlreadyDissented,
    #[error("no accepted submission yet")]
    NoSubmission,
    #[error("invalid rationale: {0}")]
    InvalidRationale(String),
    #[error("unknown prompt {0}")]
    UnknownPrompt(u32),
    #[error(transparent)]
    Aggregation(#[from] ConsensusError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

/// One negotiation among a fixed set of stakeholders over a fixed attribute
/// set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    id: SessionId,
    attributes: Vec<QualityAttribute>,
    participants: Vec<Participant>,
    phase: Phase,
    config: SessionConfig,
    submissions: BTreeMap<Phase, BTreeMap<StakeholderId, Submission>>,
    rationales: Vec<Rationale>,
    prompts: Vec<Prompt>,
    delegations: Vec<Delegation>,
    dissenters: BTreeSet<StakeholderId>,
    history: Vec<PhaseChange>,
    result: Option<SessionResult>,
    created_at: Timestamp,
    /// Sequence number of the last applied event.
    last_seq: u64,
}

impl Session {
    /// Starts a session in elicitation. Pseudonyms are shuffled with
    /// `pseudonym_seed` so their order reveals nothing about the order of
    /// `participants`.
    pub fn create(
        id: SessionId,
        attributes: Vec<QualityAttribute>,
        participants: Vec<ParticipantSpec>,
        config: SessionConfig,
        pseudonym_seed: u64,
        at: Timestamp,
    ) -> Result<Self, SessionError> {
        if attributes.len() < 2 {
            return Err(SessionError::TooFewAttributes(attributes.len()));
        }
        if attributes.len() > crate::ahp::MAX_ORDER {
            return Err(SessionError::Matrix(AhpError::OrderTooLarge(
                attributes.len(),
            )));
        }
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(&a.id) {
                return Err(SessionError::DuplicateAttribute(a.id.clone()));
            }
            if a.name.trim().is_empty() {
                return Err(SessionError::InvalidAttribute(format!(
                    "attribute `{}` has an empty name",
                    a.id
                )));
            }
        }
        if participants.is_empty() {
            return Err(SessionError::NoParticipants);
        }
        let mut seen = HashSet::new();
        for p in &participants {
            if !seen.insert(&p.id) {
                return Err(SessionError::DuplicateParticipant(p.id.clone()));
            }
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(SessionError::InvalidWeight);
            }
        }
        config.validate(&attributes)?;

        let mut labels: Vec<String> = (0..participants.len()).map(pseudonym_label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(pseudonym_seed));
        let participants = participants
            .into_iter()
            .zip(labels)
            .map(|(spec, label)| Participant {
                id: spec.id,
                pseudonym: Pseudonym(label),
                weight: spec.weight,
            })
            .collect();

        Ok(Self {
            id,
            attributes,
            participants,
            phase: Phase::Elicitation,
            config,
            submissions: BTreeMap::new(),
            rationales: Vec::new(),
            prompts: Vec::new(),
            delegations: Vec::new(),
            dissenters: BTreeSet::new(),
            history: Vec::new(),
            result: None,
            created_at: at,
            last_seq: 0,
        })
    }

    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn attributes(&self) -> &[QualityAttribute] {
        &self.attributes
    }

    pub fn attribute_ids(&self) -> Vec<AttributeId> {
        self.attributes.iter().map(|a| a.id.clone()).collect()
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn history(&self) -> &[PhaseChange] {
        &self.history
    }

    pub fn result(&self) -> Option<&SessionResult> {
        self.result.as_ref()
    }

    pub fn rationales(&self) -> &[Rationale] {
        &self.rationales
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    pub fn delegations(&self) -> &[Delegation] {
        &self.delegations
    }

    pub fn created_at(&self) -> Timestamp {
        self.created_at
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Attribute suggestions waiting for the facilitator. They never change
    /// this session's attribute set.
    pub fn suggestion_queue(&self) -> impl Iterator<Item = &Rationale> {
        self.rationales
            .iter()
            .filter(|r| r.kind == RationaleKind::AttributeSuggestion)
    }

    /// Submissions accepted in `phase`, keyed by stakeholder.
    pub fn submissions_in(&self, phase: Phase) -> impl Iterator<Item = &Submission> {
        self.submissions
            .get(&phase)
            .into_iter()
            .flat_map(|m| m.values())
    }

    /// Every accepted submission across phases.
    pub fn all_submissions(&self) -> impl Iterator<Item = &Submission> {
        self.submissions.values().flat_map(|m| m.values())
    }

    pub fn participant(&self, id: &StakeholderId) -> Option<&Participant> {
        self.participants.iter().find(|p| &p.id == id)
    }

    pub fn pseudonym_of(&self, id: &StakeholderId) -> Option<&Pseudonym> {
        self.participant(id).map(|p| &p.pseudonym)
    }

    pub fn stakeholder_by_pseudonym(&self, pseudonym: &str) -> Option<&StakeholderId> {
        self.participants
            .iter()
            .find(|p| p.pseudonym.as_str() == pseudonym)
            .map(|p| &p.id)
    }

    pub fn has_dissented(&self, id: &StakeholderId) -> bool {
        self.dissenters.contains(id)
    }

    /// The delegation of `id` in force during `phase`, if any.
    pub fn delegation_of(&self, id: &StakeholderId, phase: Phase) -> Option<&Delegation> {
        self.delegations
            .iter()
            .find(|d| &d.delegator == id && d.covers(phase))
    }

    /// Participants not delegating in `phase`.
    pub fn active_participants(&self, phase: Phase) -> impl Iterator<Item = &Participant> {
        self.participants
            .iter()
            .filter(move |p| self.delegation_of(&p.id, phase).is_none())
    }

    pub fn is_active(&self, id: &StakeholderId) -> bool {
        self.participant(id).is_some() && self.delegation_of(id, self.phase).is_none()
    }

    /// The stakeholder's latest accepted submission up to the current phase.
    pub fn effective_submission(&self, id: &StakeholderId) -> Option<&Submission> {
        self.submissions
            .range(..=self.phase)
            .rev()
            .find_map(|(_, by_stakeholder)| by_stakeholder.get(id))
    }

    pub fn current_submission(&self, id: &StakeholderId) -> Option<&Submission> {
        self.submissions.get(&self.phase).and_then(|m| m.get(id))
    }

    pub fn participation(&self) -> Vec<ParticipationEntry> {
        let mut entries: Vec<ParticipationEntry> = self
            .participants
            .iter()
            .map(|p| ParticipationEntry {
                pseudonym: p.pseudonym.clone(),
                active: self.delegation_of(&p.id, self.phase).is_none(),
                submitted: self.current_submission(&p.id).is_some(),
                answered: self.has_answered(&p.pseudonym, self.phase),
                dissented: self.dissenters.contains(&p.id),
            })
            .collect();
        entries.sort_by(|a, b| a.pseudonym.cmp(&b.pseudonym));
        entries
    }

    fn has_answered(&self, pseudonym: &Pseudonym, phase: Phase) -> bool {
        self.rationales
            .iter()
            .any(|r| &r.author == pseudonym && r.round == phase && r.kind == RationaleKind::Answer)
    }

    fn require_open(&self, operation: &'static str) -> Result<(), SessionError> {
        match self.phase {
            Phase::Closed | Phase::Aggregation => Err(SessionError::Closed),
            _ => {
                let _ = operation;
                Ok(())
            }
        }
    }

    fn require_participant(&self, id: &StakeholderId) -> Result<&Participant, SessionError> {
        self.participant(id).ok_or(SessionError::UnknownStakeholder)
    }

    fn require_active(&self, id: &StakeholderId) -> Result<&Participant, SessionError> {
        let p = self.require_participant(id)?;
        if self.delegation_of(id, self.phase).is_some() {
            return Err(SessionError::Delegating);
        }
        Ok(p)
    }

    /// Validates and stores a matrix. `matrix` may cover every session
    /// attribute (abstained ones are then dropped) or exactly the attributes
    /// not abstained. Inconsistent matrices are rejected with their report.
    /// Resubmitting an identical matrix leaves the stored submission as is.
    pub fn submit_matrix(
        &mut self,
        stakeholder: &StakeholderId,
        matrix: ComparisonMatrix,
        abstentions: Vec<Abstention>,
        at: Timestamp,
    ) -> Result<Submission, SessionError> {
        self.require_open("submit_matrix")?;
        if !self.phase.accepts_submissions() {
            return Err(SessionError::WrongPhase {
                operation: "submit_matrix",
                phase: self.phase,
            });
        }
        self.require_active(stakeholder)?;
        if self.dissenters.contains(stakeholder) {
            return Err(SessionError::AlreadyDissented);
        }

        let all = self.attribute_ids();
        let mut abstained = Vec::new();
        for a in &abstentions {
            if !all.contains(&a.attribute) {
                return Err(SessionError::UnknownAttribute(a.attribute.clone()));
            }
            if abstained.contains(&a.attribute) {
                return Err(SessionError::DuplicateAbstention(a.attribute.clone()));
            }
            abstained.push(a.attribute.clone());
        }
        let remaining: Vec<&AttributeId> = all.iter().filter(|a| !abstained.contains(a)).collect();
        if remaining.len() < 2 {
            return Err(SessionError::TooFewRemainingAttributes(remaining.len()));
        }

        let covered: HashSet<&AttributeId> = matrix.attributes().iter().collect();
        let matrix = if covered.len() == all.len() && all.iter().all(|a| covered.contains(a)) {
            if abstained.is_empty() {
                matrix
            } else {
                matrix.without(&abstained)?
            }
        } else if covered.len() == remaining.len() && remaining.iter().all(|a| covered.contains(a))
        {
            matrix
        } else {
            return Err(SessionError::MatrixAttributeMismatch);
        };

        let report = consistency(&matrix, &self.config.consistency_options())?;
        if !report.consistent {
            return Err(SessionError::Inconsistent(Box::new(report)));
        }
        if let Some(existing) = self.current_submission(stakeholder) {
            if existing.matrix == matrix && existing.abstentions == abstentions {
                return Ok(existing.clone());
            }
        }
        let (_, priorities) = principal_eigen(&matrix)?;
        let submission = Submission {
            stakeholder: stakeholder.clone(),
            matrix,
            priorities,
            consistency: report,
            abstentions,
            submitted_at: at,
            round: self.phase,
        };
        self.submissions
            .entry(self.phase)
            .or_default()
            .insert(stakeholder.clone(), submission.clone());
        Ok(submission)
    }

    /// Ranking derived from a submission; abstained attributes go last.
    pub fn ranking_of(&self, submission: &Submission) -> Ranking {
        let ids = self.attribute_ids();
        let scores: Vec<Option<f64>> = ids.iter().map(|id| submission.priorities.get(id)).collect();
        ranking_from_scores(&ids, &scores, self.config.tie_epsilon)
    }

    /// Effective rankings of the participants active now, in participant
    /// order. Participants without any submission are skipped.
    pub(crate) fn active_rankings(&self) -> Vec<(&Participant, Ranking)> {
        self.active_participants(self.phase)
            .filter_map(|p| {
                self.effective_submission(&p.id)
                    .map(|s| (p, self.ranking_of(s)))
            })
            .collect()
    }

    /// Concordance of the active participants' current rankings.
    ///
    /// In submission phases every active participant must have submitted in
    /// this phase (round-3 dissenters count with their latest submission);
    /// elsewhere the latest submission is used.
    pub fn check_agreement_gate(&self) -> Result<ConcordanceReport, SessionError> {
        if self.phase >= Phase::Aggregation {
            return Err(SessionError::Closed);
        }
        let mut missing = Vec::new();
        for p in self.active_participants(self.phase) {
            let has = if self.phase.accepts_submissions() && !self.dissenters.contains(&p.id) {
                self.current_submission(&p.id).is_some()
            } else {
                self.effective_submission(&p.id).is_some()
            };
            if !has {
                missing.push(p.pseudonym.clone());
            }
        }
        if !missing.is_empty() {
            missing.sort();
            return Err(SessionError::IncompleteRound(missing));
        }
        self.concordance_now()
    }

    fn concordance_now(&self) -> Result<ConcordanceReport, SessionError> {
        let rankings: Vec<Ranking> = self.active_rankings().into_iter().map(|(_, r)| r).collect();
        Ok(concordance_of_any(
            &rankings,
            self.config.agreement_threshold,
        )?)
    }

    /// Publishes an open-ended question for the current (or, during
    /// elicitation, the first) negotiation round.
    pub fn publish_prompt(
        &mut self,
        text: String,
        attributes: Vec<AttributeId>,
    ) -> Result<u32, SessionError> {
        self.require_open("publish_prompt")?;
        if text.trim().is_empty() {
            return Err(SessionError::InvalidRationale(
                "prompt text is empty".into(),
            ));
        }
        self.check_attribute_refs(&attributes)?;
        let id = self.prompts.len() as u32 + 1;
        self.prompts.push(Prompt {
            id,
            round: self.phase.max(Phase::Round1),
            text,
            attributes,
        });
        Ok(id)
    }

    fn check_attribute_refs(&self, attributes: &[AttributeId]) -> Result<(), SessionError> {
        for a in attributes {
            if !self.attributes.iter().any(|qa| &qa.id == a) {
                return Err(SessionError::UnknownAttribute(a.clone()));
            }
        }
        Ok(())
    }

    /// Stores a rationale under the author's pseudonym.
    pub fn post_rationale(
        &mut self,
        stakeholder: &StakeholderId,
        input: RationaleInput,
        at: Timestamp,
    ) -> Result<(), SessionError> {
        self.require_open("post_rationale")?;
        if !self.phase.is_negotiation() {
            if input.kind == RationaleKind::Dissent {
                return Err(SessionError::DissentOutsideRound3);
            }
            return Err(SessionError::WrongPhase {
                operation: "post_rationale",
                phase: self.phase,
            });
        }
        let author = self.require_active(stakeholder)?.pseudonym.clone();
        if input.body.trim().is_empty() {
            return Err(SessionError::InvalidRationale("body is empty".into()));
        }
        self.check_attribute_refs(&input.attributes)?;
        let prompt = match input.prompt_id {
            Some(id) => Some(
                self.prompts
                    .iter()
                    .find(|p| p.id == id)
                    .ok_or(SessionError::UnknownPrompt(id))?
                    .text
                    .clone(),
            ),
            None => None,
        };
        match (input.kind, &input.suggestion) {
            (RationaleKind::AttributeSuggestion, None) => {
                return Err(SessionError::InvalidRationale(
                    "attribute suggestion without an attribute".into(),
                ))
            }
            (RationaleKind::AttributeSuggestion, Some(qa)) if qa.name.trim().is_empty() => {
                return Err(SessionError::InvalidRationale(
                    "suggested attribute has an empty name".into(),
                ))
            }
            (RationaleKind::AttributeSuggestion, Some(_)) => {}
            (_, Some(_)) => {
                return Err(SessionError::InvalidRationale(
                    "only attribute suggestions carry an attribute".into(),
                ))
            }
            (_, None) => {}
        }
        if input.kind == RationaleKind::Dissent {
            if self.phase != Phase::Round3 {
                return Err(SessionError::DissentOutsideRound3);
            }
            if self.dissenters.contains(stakeholder) {
                return Err(SessionError::AlreadyDissented);
            }
            if self.effective_submission(stakeholder).is_none() {
                return Err(SessionError::NoSubmission);
            }
            self.dissenters.insert(stakeholder.clone());
        }
        self.rationales.push(Rationale {
            author,
            round: self.phase,
            kind: input.kind,
            attributes: input.attributes,
            prompt,
            body: input.body,
            suggestion: input.suggestion,
            posted_at: at,
        });
        Ok(())
    }

    /// Lets `delegate` vote for `delegator` during `from..=until`. Replaces
    /// any earlier delegation by the same delegator.
    pub fn delegate(
        &mut self,
        delegator: &StakeholderId,
        delegate: &StakeholderId,
        from: Phase,
        until: Phase,
    ) -> Result<(), SessionError> {
        self.require_open("delegate")?;
        self.require_participant(delegator)?;
        self.require_participant(delegate)?;
        if delegator == delegate {
            return Err(SessionError::InvalidDelegation(
                "cannot delegate to oneself".into(),
            ));
        }
        if !(from.is_open() && until.is_open() && from <= until) {
            return Err(SessionError::InvalidDelegation(format!(
                "scope {from}..={until} is not a range of open phases"
            )));
        }
        if from < self.phase {
            return Err(SessionError::InvalidDelegation(format!(
                "scope starts before the current phase {}",
                self.phase
            )));
        }
        if self.dissenters.contains(delegator) {
            return Err(SessionError::AlreadyDissented);
        }
        let proposed = Delegation {
            delegator: delegator.clone(),
            delegate: delegate.clone(),
            from,
            until,
        };
        let mut next: Vec<Delegation> = self
            .delegations
            .iter()
            .filter(|d| &d.delegator != delegator)
            .cloned()
            .collect();
        next.push(proposed);
        for phase in Phase::ALL.into_iter().filter(|p| p.is_open()) {
            if has_cycle(&next, phase) {
                return Err(SessionError::DelegationCycle);
            }
        }
        self.delegations = next;
        Ok(())
    }

    pub fn revoke_delegation(&mut self, delegator: &StakeholderId) -> Result<(), SessionError> {
        self.require_open("revoke_delegation")?;
        self.require_participant(delegator)?;
        let before = self.delegations.len();
        self.delegations.retain(|d| &d.delegator != delegator);
        if self.delegations.len() == before {
            return Err(SessionError::NoDelegation);
        }
        Ok(())
    }

    /// Who still owes input before the facilitator can advance.
    pub fn missing_inputs(&self) -> Vec<Pseudonym> {
        let mut missing: Vec<Pseudonym> = self
            .active_participants(self.phase)
            .filter(|p| match self.phase {
                Phase::Elicitation | Phase::Round2 => self.current_submission(&p.id).is_none(),
                Phase::Round1 => !self.has_answered(&p.pseudonym, Phase::Round1),
                Phase::Round3 => {
                    self.current_submission(&p.id).is_none() && !self.dissenters.contains(&p.id)
                }
                Phase::Aggregation | Phase::Closed => false,
            })
            .map(|p| p.pseudonym.clone())
            .collect();
        missing.sort();
        missing
    }

    /// Facilitator action: moves to the next phase once the current one is
    /// complete. Leaving elicitation consults the agreement gate; entering
    /// aggregation finalizes and closes the session. Nothing changes when an
    /// error is returned.
    pub fn advance_round(&mut self, at: Timestamp) -> Result<Phase, SessionError> {
        let from = self.phase;
        if from >= Phase::Aggregation {
            return Err(SessionError::IllegalTransition { from });
        }
        let missing = self.missing_inputs();
        if !missing.is_empty() {
            return Err(SessionError::IncompleteRound(missing));
        }
        let gate = if from.accepts_submissions() {
            Some(self.check_agreement_gate()?)
        } else {
            None
        };
        let to = match from {
            Phase::Elicitation if gate.as_ref().is_some_and(|g| g.agreed) => Phase::Aggregation,
            Phase::Elicitation => Phase::Round1,
            Phase::Round1 => Phase::Round2,
            Phase::Round2 => Phase::Round3,
            Phase::Round3 => Phase::Aggregation,
            Phase::Aggregation | Phase::Closed => unreachable!("checked above"),
        };
        debug_assert!(is_legal_transition(from, to));

        if to == Phase::Aggregation {
            let result = self.finalize_session()?;
            self.history.push(PhaseChange {
                from,
                to,
                at,
                concordance: gate,
            });
            self.history.push(PhaseChange {
                from: Phase::Aggregation,
                to: Phase::Closed,
                at,
                concordance: None,
            });
            self.result = Some(result);
            self.phase = Phase::Closed;
        } else {
            self.history.push(PhaseChange {
                from,
                to,
                at,
                concordance: gate,
            });
            self.phase = to;
        }
        Ok(self.phase)
    }

    /// Aggregates the active participants' latest submissions (dissenters
    /// included) into final priorities and a utility function. Delegators'
    /// weights flow to the end of their delegation chain.
    pub fn finalize_session(&self) -> Result<SessionResult, SessionError> {
        let phase = self.phase;
        let mut weights: HashMap<StakeholderId, f64> = HashMap::new();
        for p in &self.participants {
            let end = self.resolve_delegate(&p.id, phase);
            *weights.entry(end).or_default() += p.weight;
        }
        let mut vectors = Vec::new();
        let mut abstentions = Vec::new();
        let mut stakeholder_weights = Vec::new();
        for p in self.active_participants(phase) {
            let Some(sub) = self.effective_submission(&p.id) else {
                continue;
            };
            vectors.push((p.id.clone(), sub.priorities.clone()));
            abstentions.extend(
                sub.abstentions
                    .iter()
                    .map(|a| (p.id.clone(), a.attribute.clone())),
            );
            stakeholder_weights.push(StakeholderWeight {
                stakeholder_id: p.id.clone(),
                weight: weights.get(&p.id).copied().unwrap_or(p.weight),
            });
        }
        if vectors.is_empty() {
            return Err(SessionError::NoSubmission);
        }
        let aggregate = aggregate_aip(&vectors, &stakeholder_weights, &abstentions)?;
        let ids = self.attribute_ids();
        let values = ids
            .iter()
            .map(|id| {
                aggregate.get(id).ok_or_else(|| {
                    SessionError::Aggregation(ConsensusError::AllAbstained(id.clone()))
                })
            })
            .collect::<Result<Vec<f64>, SessionError>>()?;
        let priorities = PriorityVector::from_parts_unchecked(ids.clone(), values);

        let preferences: BTreeMap<AttributeId, PreferenceFunction> = ids
            .iter()
            .map(|id| {
                let pf = self
                    .config
                    .preferences
                    .get(id)
                    .copied()
                    .unwrap_or(PreferenceFunction::IdentityLinear);
                (id.clone(), pf)
            })
            .collect();
        let utility = build_utility(&priorities, &preferences, self.config.utility_mode)?;

        let dissent = self
            .rationales
            .iter()
            .filter(|r| r.kind == RationaleKind::Dissent)
            .map(|r| DissentRecord {
                author: r.author.clone(),
                body: r.body.clone(),
            })
            .collect();
        Ok(SessionResult {
            priorities,
            utility,
            dissent,
        })
    }

    fn resolve_delegate(&self, id: &StakeholderId, phase: Phase) -> StakeholderId {
        let mut current = id.clone();
        // Chains are acyclic, so this visits each participant at most once.
        for _ in 0..=self.participants.len() {
            match self.delegation_of(&current, phase) {
                Some(d) => current = d.delegate.clone(),
                None => break,
            }
        }
        current
    }

    pub(crate) fn set_last_seq(&mut self, seq: u64) {
        self.last_seq = seq;
    }
}

fn has_cycle(delegations: &[Delegation], phase: Phase) -> bool {
    let edges: HashMap<&StakeholderId, &StakeholderId> = delegations
        .iter()
        .filter(|d| d.covers(phase))
        .map(|d| (&d.delegator, &d.delegate))
        .collect();
    for start in edges.keys() {
        let mut seen = HashSet::new();
        let mut node = *start;
        while let Some(next) = edges.get(node) {
            if !seen.insert(node) {
                return true;
            }
            node = next;
        }
    }
    false
}

/// "Participant A" … "Participant Z", "Participant AA", …
fn pseudonym_label(index: usize) -> String {
    let mut n = index + 1;
    let mut letters = Vec::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        letters.push(b'A' + rem as u8);
        n = (n - 1) / 26;
    }
    letters.reverse();
    format!("Participant {}", String::from_utf8(letters).expect("ascii"))
}
