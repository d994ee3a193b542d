//! Random operation sequences against the session state machine.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use stakeweigh_core::ahp::QualityAttribute;
use stakeweigh_core::consensus::AbstentionKind;
use stakeweigh_core::session::{
    decode_log, is_legal_transition, replay, Abstention, JournaledSession, ParticipantSpec, Phase,
    RationaleInput, RationaleKind, Session, SessionConfig, SessionEvent, SessionId, Timestamp,
};
use stakeweigh_core::{AttributeId, ComparisonMatrix, StakeholderId};

use crate::oracle;

#[derive(Debug, Default)]
pub struct WalkStats {
    pub sequences: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub closed: u64,
    pub feedback_payloads: u64,
    pub max_phase: Option<Phase>,
    pub violations: Vec<String>,
}

fn stakeholder_id(i: usize) -> StakeholderId {
    StakeholderId::new(format!("acct-{i}-q7z"))
}

fn matrix<R: Rng>(rng: &mut R, attrs: &[AttributeId]) -> ComparisonMatrix {
    let n = attrs.len();
    if rng.gen_bool(0.6) {
        let w: Vec<u64> = (0..n).map(|_| *[1u64, 3, 9].choose(rng).unwrap()).collect();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| Ratio::new(w[i], w[j])).collect())
            .collect();
        ComparisonMatrix::from_rows(attrs.to_vec(), rows).unwrap()
    } else {
        let (m, _) = oracle::random_reciprocal(rng, n);
        let rows = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j)).collect())
            .collect();
        ComparisonMatrix::from_rows(attrs.to_vec(), rows).unwrap()
    }
}

fn event<R: Rng>(rng: &mut R, session: &Session, people: usize) -> SessionEvent {
    let attrs = session.attribute_ids();
    // One index past the roster exercises unknown stakeholders.
    let who = stakeholder_id(rng.gen_range(0..=people));
    match rng.gen_range(0..20) {
        0..=5 => {
            if attrs.len() > 2 && rng.gen_bool(0.15) {
                let skip = rng.gen_range(0..attrs.len());
                let kind = *[AbstentionKind::DontKnow, AbstentionKind::DontCare]
                    .choose(rng)
                    .unwrap();
                let rest: Vec<AttributeId> = attrs
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, a)| a.clone())
                    .collect();
                SessionEvent::MatrixSubmitted {
                    stakeholder: who,
                    matrix: matrix(rng, &rest),
                    abstentions: vec![Abstention {
                        attribute: attrs[skip].clone(),
                        kind,
                    }],
                }
            } else {
                SessionEvent::MatrixSubmitted {
                    stakeholder: who,
                    matrix: matrix(rng, &attrs),
                    abstentions: Vec::new(),
                }
            }
        }
        6..=10 => {
            let kind = *[
                RationaleKind::Answer,
                RationaleKind::Answer,
                RationaleKind::Comment,
                RationaleKind::Dissent,
                RationaleKind::AttributeSuggestion,
            ]
            .choose(rng)
            .unwrap();
            let mut input = RationaleInput::new(kind, "from the last field trial");
            if kind == RationaleKind::AttributeSuggestion {
                input = input.suggesting(QualityAttribute::new("noise", "Noise"));
            }
            if rng.gen_bool(0.25) {
                input.prompt_id = Some(rng.gen_range(1..=3));
            }
            SessionEvent::RationalePosted {
                stakeholder: who,
                rationale: input,
            }
        }
        11 => SessionEvent::PromptPublished {
            text: "What would change your ranking?".into(),
            attributes: vec![attrs.choose(rng).unwrap().clone()],
        },
        12 | 13 => SessionEvent::DelegationSet {
            delegator: who,
            delegate: stakeholder_id(rng.gen_range(0..people)),
            from: *Phase::ALL.choose(rng).unwrap(),
            until: *Phase::ALL.choose(rng).unwrap(),
        },
        14 => SessionEvent::DelegationRevoked { delegator: who },
        _ => SessionEvent::RoundAdvanced {
            from: session.phase(),
            to: *Phase::ALL.choose(rng).unwrap(),
        },
    }
}

fn inspect(session: &Session, people: usize, stats: &mut WalkStats, context: &str) {
    for change in session.history() {
        if !is_legal_transition(change.from, change.to) {
            stats.violations.push(format!(
                "{context}: illegal transition {:?} -> {:?}",
                change.from, change.to
            ));
        }
    }
    if let Some(last) = session.history().last() {
        if last.to != session.phase() {
            stats
                .violations
                .push(format!("{context}: phase disagrees with history"));
        }
    }
    for sub in session.all_submissions() {
        if sub.consistency.cr.is_nan() || sub.consistency.cr > 0.10 || !sub.consistency.consistent {
            stats.violations.push(format!(
                "{context}: accepted submission with CR {}",
                sub.consistency.cr
            ));
        }
    }
    if session.phase() == Phase::Closed && session.result().is_none() {
        stats
            .violations
            .push(format!("{context}: closed without result"));
    }
    for i in 0..people {
        let Ok(bundle) = session.feedback_bundle(&stakeholder_id(i)) else {
            continue;
        };
        stats.feedback_payloads += 1;
        let json = serde_json::to_string(&bundle).unwrap();
        for j in 0..people {
            if json.contains(stakeholder_id(j).as_str()) {
                stats.violations.push(format!(
                    "{context}: feedback for participant {i} names participant {j}"
                ));
            }
        }
    }
}

/// Runs one sequence of `steps` random operations.
pub fn walk(seed: u64, steps: usize, stats: &mut WalkStats) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let people = rng.gen_range(1..=5);
    let n = rng.gen_range(2..=5);
    let attributes: Vec<QualityAttribute> = (0..n)
        .map(|i| QualityAttribute::new(format!("qa{i}"), format!("Attribute {i}")))
        .collect();
    let participants = (0..people)
        .map(|i| ParticipantSpec::new(stakeholder_id(i), rng.gen_range(0.25..4.0)))
        .collect();
    let config = SessionConfig {
        agreement_threshold: rng.gen_range(0.5..=1.0),
        ..SessionConfig::default()
    };
    let mut journal = JournaledSession::create(
        SessionId::new(format!("walk-{seed}")),
        attributes,
        participants,
        config,
        rng.gen(),
        Timestamp(1_000),
    )
    .expect("valid session");
    stats.sequences += 1;

    for step in 0..steps {
        let ev = event(&mut rng, journal.session(), people);
        let before = journal.session().clone();
        match journal.execute(ev, Timestamp(1_000 + step as u64)) {
            Ok(_) => stats.accepted += 1,
            Err(_) => {
                stats.rejected += 1;
                if journal.session() != &before {
                    stats.violations.push(format!(
                        "seed {seed} step {step}: rejected operation changed state"
                    ));
                }
            }
        }
        inspect(
            journal.session(),
            people,
            stats,
            &format!("seed {seed} step {step}"),
        );
    }

    let phase = journal.session().phase();
    stats.max_phase = Some(stats.max_phase.map_or(phase, |p| p.max(phase)));
    stats.closed += (phase == Phase::Closed) as u64;

    let decoded = decode_log(&journal.encode());
    if decoded.corruption.is_some() {
        stats
            .violations
            .push(format!("seed {seed}: own log does not decode"));
        return;
    }
    match replay(&decoded.records) {
        Ok(replayed) => {
            let original = journal.session();
            let same_bits = replayed.snapshot().to_json() == original.snapshot().to_json();
            if &replayed != original || !same_bits {
                stats
                    .violations
                    .push(format!("seed {seed}: replay differs from live state"));
            }
        }
        Err(e) => stats
            .violations
            .push(format!("seed {seed}: replay failed: {e}")),
    }
}
