use serde::{Deserialize, Serialize};

use super::{Phase, Prompt, Pseudonym, Rationale, Session, SessionError};
use crate::consensus::{ranking_conflicts, ConcordanceReport};
use crate::{AttributeId, StakeholderId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictSide {
    First,
    Second,
}

/// A disputed attribute pair, with the camps named by pseudonym.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictView {
    pub first: AttributeId,
    pub second: AttributeId,
    pub first_preferred_by: Vec<Pseudonym>,
    pub second_preferred_by: Vec<Pseudonym>,
    /// Which camp the viewer is in, if they have a ranking.
    pub own_position: Option<ConflictSide>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeDistribution {
    pub attribute: AttributeId,
    /// Participants with a priority for this attribute.
    pub count: usize,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

/// Anonymized group state shown to one participant between rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub viewer: Pseudonym,
    pub round: Phase,
    pub rationales: Vec<Rationale>,
    pub prompts: Vec<Prompt>,
    pub concordance: Option<ConcordanceReport>,
    pub conflicts: Vec<ConflictView>,
    pub distribution: Vec<AttributeDistribution>,
}

impl Session {
    /// Feedback for `stakeholder` in round 2 or 3: the previous round's
    /// rationales, this round's prompts, current concordance, conflicts and
    /// the spread of priorities per attribute.
    pub fn feedback_bundle(
        &self,
        stakeholder: &StakeholderId,
    ) -> Result<FeedbackBundle, SessionError> {
        let Some(previous) = self.phase().previous_round() else {
            return Err(SessionError::WrongPhase {
                operation: "feedback_bundle",
                phase: self.phase(),
            });
        };
        let viewer = self.require_active(stakeholder)?.pseudonym.clone();

        let rationales = self
            .rationales()
            .iter()
            .filter(|r| r.round == previous)
            .cloned()
            .collect();
        let prompts = self
            .prompts()
            .iter()
            .filter(|p| p.round == self.phase())
            .cloned()
            .collect();

        let rankings = self.active_rankings();
        let concordance = if rankings.is_empty() {
            None
        } else {
            Some(self.concordance_now()?)
        };

        let labelled: Vec<(Pseudonym, _)> = rankings
            .iter()
            .map(|(p, r)| (p.pseudonym.clone(), r.clone()))
            .collect();
        let conflicts = if labelled.len() < 2 {
            Vec::new()
        } else {
            ranking_conflicts(&labelled)?
                .into_iter()
                .map(|c| {
                    let own_position = if c.first_preferred_by.contains(&viewer) {
                        Some(ConflictSide::First)
                    } else if c.second_preferred_by.contains(&viewer) {
                        Some(ConflictSide::Second)
                    } else {
                        None
                    };
                    let mut first_preferred_by = c.first_preferred_by;
                    let mut second_preferred_by = c.second_preferred_by;
                    first_preferred_by.sort();
                    second_preferred_by.sort();
                    ConflictView {
                        first: c.first,
                        second: c.second,
                        first_preferred_by,
                        second_preferred_by,
                        own_position,
                    }
                })
                .collect()
        };

        let distribution = self
            .attributes()
            .iter()
            .map(|a| {
                let mut values: Vec<f64> = self
                    .active_participants(self.phase())
                    .filter_map(|p| self.effective_submission(&p.id))
                    .filter_map(|s| s.priorities.get(&a.id))
                    .collect();
                values.sort_by(f64::total_cmp);
                AttributeDistribution {
                    attribute: a.id.clone(),
                    count: values.len(),
                    min: values.first().copied(),
                    median: median(&values),
                    max: values.last().copied(),
                }
            })
            .collect();

        Ok(FeedbackBundle {
            viewer,
            round: self.phase(),
            rationales,
            prompts,
            concordance,
            conflicts,
            distribution,
        })
    }
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}
