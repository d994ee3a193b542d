mod common;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stakeweigh_core::ahp::QualityAttribute;
use stakeweigh_core::consensus::AbstentionKind;
use stakeweigh_core::session::{
    decode_log, is_legal_transition, replay, Abstention, JournaledSession, ParticipantSpec, Phase,
    RationaleInput, RationaleKind, Session, SessionConfig, SessionEvent, SessionId, Timestamp,
};
use stakeweigh_core::{AttributeId, ComparisonMatrix, StakeholderId};

const SEQUENCES: u64 = 10_000;
const STEPS: usize = 60;

fn stakeholder(i: usize) -> StakeholderId {
    StakeholderId::new(format!("stakeholder-{i}-x9q"))
}

fn consistent_matrix<R: Rng>(rng: &mut R, attrs: &[AttributeId]) -> ComparisonMatrix {
    let w: Vec<u64> = attrs
        .iter()
        .map(|_| *[1u64, 2, 4, 8].choose(rng).unwrap())
        .collect();
    let rows = w
        .iter()
        .map(|&a| w.iter().map(|&b| Ratio::new(a, b)).collect())
        .collect();
    ComparisonMatrix::from_rows(attrs.to_vec(), rows).unwrap()
}

fn random_event<R: Rng>(rng: &mut R, session: &Session, people: usize) -> SessionEvent {
    let attrs = session.attribute_ids();
    let who = stakeholder(rng.gen_range(0..people + 1));
    match rng.gen_range(0..100) {
        0..=29 => {
            let mut abstentions = Vec::new();
            if rng.gen_bool(0.2) {
                let a = attrs.choose(rng).unwrap().clone();
                let kind = if rng.gen() {
                    AbstentionKind::DontKnow
                } else {
                    AbstentionKind::DontCare
                };
                abstentions.push(Abstention { attribute: a, kind });
            }
            let matrix = if rng.gen_bool(0.7) {
                consistent_matrix(rng, &attrs)
            } else {
                common::random_reciprocal(rng, attrs.len())
            };
            let matrix = ComparisonMatrix::from_rows(
                attrs.clone(),
                (0..attrs.len())
                    .map(|i| (0..attrs.len()).map(|j| matrix.get(i, j)).collect())
                    .collect(),
            )
            .unwrap();
            SessionEvent::MatrixSubmitted {
                stakeholder: who,
                matrix,
                abstentions,
            }
        }
        30..=54 => {
            let kind = *[
                RationaleKind::Answer,
                RationaleKind::Answer,
                RationaleKind::Comment,
                RationaleKind::Dissent,
                RationaleKind::AttributeSuggestion,
            ]
            .choose(rng)
            .unwrap();
            let mut input = RationaleInput::new(kind, "because of field experience");
            if kind == RationaleKind::AttributeSuggestion {
                input =
                    input.suggesting(QualityAttribute::new("maintainability", "Maintainability"));
            }
            if rng.gen_bool(0.3) {
                input.attributes = vec![attrs.choose(rng).unwrap().clone()];
            }
            if rng.gen_bool(0.2) {
                input.prompt_id = Some(rng.gen_range(1..4));
            }
            SessionEvent::RationalePosted {
                stakeholder: who,
                rationale: input,
            }
        }
        55..=59 => SessionEvent::PromptPublished {
            text: "In which situations is this attribute critical?".into(),
            attributes: vec![attrs.choose(rng).unwrap().clone()],
        },
        60..=66 => {
            let from = *Phase::ALL.choose(rng).unwrap();
            let until = *Phase::ALL.choose(rng).unwrap();
            SessionEvent::DelegationSet {
                delegator: who,
                delegate: stakeholder(rng.gen_range(0..people)),
                from,
                until,
            }
        }
        67..=70 => SessionEvent::DelegationRevoked { delegator: who },
        _ => SessionEvent::RoundAdvanced {
            from: session.phase(),
            to: session.phase(),
        },
    }
}

fn check_invariants(session: &Session, people: usize) {
    for change in session.history() {
        assert!(
            is_legal_transition(change.from, change.to),
            "{:?} -> {:?}",
            change.from,
            change.to
        );
    }
    for sub in session.all_submissions() {
        assert!(sub.consistency.consistent && sub.consistency.cr <= 0.10);
    }
    if session.phase() == Phase::Closed {
        assert!(session.result().is_some());
    }
    for i in 0..people {
        if let Ok(bundle) = session.feedback_bundle(&stakeholder(i)) {
            let json = serde_json::to_string(&bundle).unwrap();
            for j in 0..people {
                assert!(!json.contains(stakeholder(j).as_str()), "{json}");
            }
        }
    }
}

#[test]
fn random_operation_sequences_stay_sound() {
    let mut closed = 0;
    let mut max_phase = Phase::Elicitation;
    for seed in 0..SEQUENCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let people = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=4);
        let attributes = (0..n)
            .map(|i| QualityAttribute::new(format!("q{i}"), format!("Quality {i}")))
            .collect();
        let mut journal = JournaledSession::create(
            SessionId::new(format!("fuzz-{seed}")),
            attributes,
            (0..people)
                .map(|i| ParticipantSpec::new(stakeholder(i), rng.gen_range(0.5..3.0)))
                .collect(),
            SessionConfig::default(),
            rng.gen(),
            Timestamp(0),
        )
        .unwrap();
        for step in 0..STEPS {
            let event = random_event(&mut rng, journal.session(), people);
            let before = journal.session().clone();
            if journal.execute(event, Timestamp(step as u64 + 1)).is_err() {
                assert_eq!(journal.session(), &before, "failed operation changed state");
            }
            check_invariants(journal.session(), people);
        }
        max_phase = max_phase.max(journal.session().phase());
        if journal.session().phase() == Phase::Closed {
            closed += 1;
        }

        let decoded = decode_log(&journal.encode());
        assert!(decoded.corruption.is_none());
        let replayed = replay(&decoded.records).unwrap();
        assert_eq!(&replayed, journal.session());
        if let (Some(a), Some(b)) = (replayed.result(), journal.session().result()) {
            for (x, y) in a.priorities.values().iter().zip(b.priorities.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        if seed % 50 == 0 {
            for len in 1..=decoded.records.len() {
                let prefix = replay(&decoded.records[..len]).unwrap();
                check_invariants(&prefix, people);
            }
        }
    }
    assert_eq!(max_phase, Phase::Closed);
    assert!(closed > SEQUENCES / 10, "only {closed} sessions closed");
}
