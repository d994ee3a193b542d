//! Agreement statistics across stakeholders and aggregation of their
//! priorities.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{AttributeId, PriorityVector, StakeholderId};

/// Default concordance level at which stakeholders count as agreeing.
pub const DEFAULT_AGREEMENT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("ranks {0:?} are not a permutation of 1..=n")]
    NotAPermutation(Vec<u32>),
    #[error("{ids} attribute ids but {ranks} ranks")]
    LengthMismatch { ids: usize, ranks: usize },
    #[error("at least 2 rankings are required, got {0}")]
    TooFewRankings(usize),
    #[error("rankings are over different attribute lists")]
    MismatchedAttributes,
    #[error("agreement threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("nothing to aggregate")]
    Empty,
    #[error("stakeholder `{0}` appears more than once")]
    DuplicateStakeholder(StakeholderId),
    #[error("stakeholder `{0}` has no weight")]
    MissingWeight(StakeholderId),
    #[error("weight of stakeholder `{0}` must be positive and finite")]
    InvalidWeight(StakeholderId),
    #[error(
        "priorities of `{stakeholder}` do not cover the attribute set minus their abstentions"
    )]
    CoverageMismatch { stakeholder: StakeholderId },
    #[error("every stakeholder abstained on `{0}`")]
    AllAbstained(AttributeId),
}

/// Why a stakeholder gave no judgment on an attribute. Both are treated the
/// same when aggregating.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstentionKind {
    DontKnow,
    DontCare,
}

/// A strict ranking: `ranks[i]` is the rank of `attribute_ids[i]`, 1 being
/// the most important.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRanking")]
pub struct Ranking {
    attribute_ids: Vec<AttributeId>,
    ranks: Vec<u32>,
}

#[derive(Deserialize)]
struct RawRanking {
    attribute_ids: Vec<AttributeId>,
    ranks: Vec<u32>,
}

impl TryFrom<RawRanking> for Ranking {
    type Error = ConsensusError;

    fn try_from(raw: RawRanking) -> Result<Self, ConsensusError> {
        Self::new(raw.attribute_ids, raw.ranks)
    }
}

impl Ranking {
    pub fn new(attribute_ids: Vec<AttributeId>, ranks: Vec<u32>) -> Result<Self, ConsensusError> {
        if attribute_ids.len() != ranks.len() {
            return Err(ConsensusError::LengthMismatch {
                ids: attribute_ids.len(),
                ranks: ranks.len(),
            });
        }
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in &ranks {
            let idx = (r as usize).wrapping_sub(1);
            if idx >= n || seen[idx] {
                return Err(ConsensusError::NotAPermutation(ranks));
            }
            seen[idx] = true;
        }
        let unique: HashSet<&AttributeId> = attribute_ids.iter().collect();
        if unique.len() != n {
            return Err(ConsensusError::MismatchedAttributes);
        }
        Ok(Self {
            attribute_ids,
            ranks,
        })
    }

    pub fn attribute_ids(&self) -> &[AttributeId] {
        &self.attribute_ids
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Ranks attributes by descending priority.
///
/// Priorities within `tie_epsilon` of their neighbour in sorted order form a
/// tie group (ties chain), and each group is ordered by declaration order,
/// earlier-declared attributes getting the better rank.
pub fn ranking_from_priorities(priorities: &PriorityVector, tie_epsilon: f64) -> Ranking {
    let scores: Vec<Option<f64>> = priorities.values().iter().copied().map(Some).collect();
    ranking_from_scores(priorities.attribute_ids(), &scores, tie_epsilon)
}

/// Like [`ranking_from_priorities`] but attributes without a score are
/// placed last, in declaration order.
pub fn ranking_from_scores(
    attribute_ids: &[AttributeId],
    scores: &[Option<f64>],
    tie_epsilon: f64,
) -> Ranking {
    debug_assert_eq!(attribute_ids.len(), scores.len());
    let mut scored: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut order = Vec::with_capacity(scores.len());
    let mut group: Vec<usize> = Vec::new();
    let mut prev: Option<f64> = None;
    for (idx, value) in scored {
        if let Some(p) = prev {
            if p - value > tie_epsilon {
                group.sort_unstable();
                order.append(&mut group);
            }
        }
        group.push(idx);
        prev = Some(value);
    }
    group.sort_unstable();
    order.append(&mut group);
    order.extend(
        scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| i),
    );

    let mut ranks = vec![0u32; scores.len()];
    for (position, idx) in order.into_iter().enumerate() {
        ranks[idx] = position as u32 + 1;
    }
    Ranking {
        attribute_ids: attribute_ids.to_vec(),
        ranks,
    }
}

/// Kendall's coefficient of concordance over `k` rankings of `n` attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    pub k: usize,
    pub n: usize,
    pub w_coefficient: f64,
    /// Sum of squared deviations of the rank sums from their mean.
    pub s: f64,
    pub rank_sums: Vec<u64>,
    pub mean_rank_sum: f64,
    pub agreed: bool,
    pub threshold: f64,
}

/// `W = 12 S / (k^2 (n^3 - n))` over at least two rankings.
pub fn concordance(
    rankings: &[Ranking],
    threshold: f64,
) -> Result<ConcordanceReport, ConsensusError> {
    if rankings.len() < 2 {
        return Err(ConsensusError::TooFewRankings(rankings.len()));
    }
    concordance_of_any(rankings, threshold)
}

/// [`concordance`] without the two-ranking minimum. A single ranking has
/// `W = 1`, which makes a one-stakeholder group agree with itself.
pub(crate) fn concordance_of_any(
    rankings: &[Ranking],
    threshold: f64,
) -> Result<ConcordanceReport, ConsensusError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ConsensusError::InvalidThreshold(threshold));
    }
    let first = rankings.first().ok_or(ConsensusError::Empty)?;
    if rankings
        .iter()
        .any(|r| r.attribute_ids != first.attribute_ids)
    {
        return Err(ConsensusError::MismatchedAttributes);
    }
    let k = rankings.len();
    let n = first.len();
    let mut rank_sums = vec![0u64; n];
    for r in rankings {
        for (sum, &rank) in rank_sums.iter_mut().zip(&r.ranks) {
            *sum += u64::from(rank);
        }
    }
    // Exact integer form: n*S = n*sum(R_i^2) - (sum R_i)^2.
    let total: u128 = rank_sums.iter().map(|&r| u128::from(r)).sum();
    let squares: u128 = rank_sums
        .iter()
        .map(|&r| u128::from(r) * u128::from(r))
        .sum();
    let (n_big, k_big) = (n as u128, k as u128);
    let n_times_s = n_big * squares - total * total;
    let s = n_times_s as f64 / n as f64;
    let denominator = n_big * k_big * k_big * (n_big * n_big * n_big - n_big);
    let w = if denominator == 0 {
        1.0
    } else {
        (12 * n_times_s) as f64 / denominator as f64
    };
    Ok(ConcordanceReport {
        k,
        n,
        w_coefficient: w,
        s,
        rank_sums,
        mean_rank_sum: total as f64 / n as f64,
        agreed: w >= threshold,
        threshold,
    })
}

/// An attribute pair on which stakeholders disagree about the order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingConflict<K> {
    pub first: AttributeId,
    pub second: AttributeId,
    /// Stakeholders ranking `first` above `second`.
    pub first_preferred_by: Vec<K>,
    /// Stakeholders ranking `second` above `first`.
    pub second_preferred_by: Vec<K>,
}

/// Every attribute pair ordered differently by at least two stakeholders.
/// Pairs follow declaration order; unanimous pairs are omitted.
pub fn ranking_conflicts<K: Clone>(
    rankings: &[(K, Ranking)],
) -> Result<Vec<RankingConflict<K>>, ConsensusError> {
    if rankings.len() < 2 {
        return Err(ConsensusError::TooFewRankings(rankings.len()));
    }
    let attributes = rankings[0].1.attribute_ids();
    if rankings
        .iter()
        .any(|(_, r)| r.attribute_ids() != attributes)
    {
        return Err(ConsensusError::MismatchedAttributes);
    }
    let n = attributes.len();
    let mut conflicts = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let (mut first, mut second) = (Vec::new(), Vec::new());
            for (who, r) in rankings {
                if r.ranks[a] < r.ranks[b] {
                    first.push(who.clone());
                } else {
                    second.push(who.clone());
                }
            }
            if !first.is_empty() && !second.is_empty() {
                conflicts.push(RankingConflict {
                    first: attributes[a].clone(),
                    second: attributes[b].clone(),
                    first_preferred_by: first,
                    second_preferred_by: second,
                });
            }
        }
    }
    Ok(conflicts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StakeholderWeight {
    pub stakeholder_id: StakeholderId,
    pub weight: f64,
}

impl StakeholderWeight {
    pub fn new(stakeholder_id: impl Into<StakeholderId>, weight: f64) -> Self {
        Self {
            stakeholder_id: stakeholder_id.into(),
            weight,
        }
    }
}

/// Weighted arithmetic mean of individual priorities.
///
/// The attribute set is the union of all vectors and abstentions, in order
/// of first appearance. Each stakeholder's vector must cover exactly that set
/// minus their own abstentions. For every attribute the mean runs over the
/// stakeholders who did not abstain, with their weights renormalized for
/// that attribute; the result is renormalized to sum 1.
pub fn aggregate_aip(
    vectors: &[(StakeholderId, PriorityVector)],
    weights: &[StakeholderWeight],
    abstentions: &[(StakeholderId, AttributeId)],
) -> Result<PriorityVector, ConsensusError> {
    if vectors.is_empty() {
        return Err(ConsensusError::Empty);
    }
    let mut attributes: Vec<AttributeId> = Vec::new();
    let mut known = HashSet::new();
    let all_ids = vectors
        .iter()
        .flat_map(|(_, v)| v.attribute_ids().iter())
        .chain(abstentions.iter().map(|(_, a)| a));
    for id in all_ids {
        if known.insert(id) {
            attributes.push(id.clone());
        }
    }

    let weight_of: BTreeMap<&StakeholderId, f64> = weights
        .iter()
        .map(|w| (&w.stakeholder_id, w.weight))
        .collect();
    let mut seen = HashSet::new();
    for (who, vector) in vectors {
        if !seen.insert(who) {
            return Err(ConsensusError::DuplicateStakeholder(who.clone()));
        }
        let w = *weight_of
            .get(who)
            .ok_or_else(|| ConsensusError::MissingWeight(who.clone()))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(ConsensusError::InvalidWeight(who.clone()));
        }
        let abstained: HashSet<&AttributeId> = abstentions
            .iter()
            .filter(|(s, _)| s == who)
            .map(|(_, a)| a)
            .collect();
        let covered: HashSet<&AttributeId> = vector.attribute_ids().iter().collect();
        let expected = attributes.iter().filter(|a| !abstained.contains(a)).count();
        if covered.len() != expected || covered.iter().any(|a| abstained.contains(a)) {
            return Err(ConsensusError::CoverageMismatch {
                stakeholder: who.clone(),
            });
        }
    }

    let mut values = Vec::with_capacity(attributes.len());
    for attribute in &attributes {
        let (mut num, mut den) = (0.0, 0.0);
        for (who, vector) in vectors {
            if let Some(p) = vector.get(attribute) {
                let w = weight_of[who];
                num += w * p;
                den += w;
            }
        }
        if den == 0.0 {
            return Err(ConsensusError::AllAbstained(attribute.clone()));
        }
        values.push(num / den);
    }
    let total: f64 = values.iter().sum();
    for v in &mut values {
        *v /= total;
    }
    Ok(PriorityVector::from_parts_unchecked(attributes, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<AttributeId> {
        names.iter().map(|&s| AttributeId::from(s)).collect()
    }

    fn ranking(ranks: &[u32]) -> Ranking {
        let names: Vec<String> = (1..=ranks.len()).map(|i| format!("qa{i}")).collect();
        Ranking::new(
            names.into_iter().map(AttributeId::from).collect(),
            ranks.to_vec(),
        )
        .unwrap()
    }

    fn pv(values: &[f64]) -> PriorityVector {
        PriorityVector::new(ids(&["safety", "speed", "energy"]), values.to_vec()).unwrap()
    }

    #[test]
    fn ranks_from_priorities() {
        assert_eq!(
            ranking_from_priorities(&pv(&[0.8, 0.1, 0.1]), 1e-9).ranks(),
            &[1, 2, 3]
        );
        let third = 1.0 / 3.0;
        assert_eq!(
            ranking_from_priorities(&pv(&[third, third, third]), 1e-9).ranks(),
            &[1, 2, 3]
        );
        assert_eq!(
            ranking_from_priorities(&pv(&[0.2, 0.5, 0.3]), 1e-9).ranks(),
            &[3, 1, 2]
        );
    }

    #[test]
    fn near_ties_follow_declaration_order() {
        let v = pv(&[0.3, 0.35 + 1e-12, 0.35 - 1e-12]);
        assert_eq!(ranking_from_priorities(&v, 1e-9).ranks(), &[3, 1, 2]);
        let v = pv(&[0.3, 0.35 - 1e-12, 0.35 + 1e-12]);
        assert_eq!(ranking_from_priorities(&v, 1e-9).ranks(), &[3, 1, 2]);
        assert_eq!(ranking_from_priorities(&v, 0.0).ranks(), &[3, 2, 1]);
    }

    #[test]
    fn unscored_attributes_go_last() {
        let r = ranking_from_scores(
            &ids(&["a", "b", "c", "d"]),
            &[None, Some(0.4), None, Some(0.6)],
            1e-9,
        );
        assert_eq!(r.ranks(), &[3, 2, 4, 1]);
    }

    #[test]
    fn ranking_must_be_permutation() {
        assert!(matches!(
            Ranking::new(ids(&["a", "b"]), vec![1, 1]),
            Err(ConsensusError::NotAPermutation(_))
        ));
        assert!(matches!(
            Ranking::new(ids(&["a", "b"]), vec![0, 1]),
            Err(ConsensusError::NotAPermutation(_))
        ));
        assert!(matches!(
            Ranking::new(ids(&["a", "b"]), vec![1, 3]),
            Err(ConsensusError::NotAPermutation(_))
        ));
    }

    #[test]
    fn concordance_examples() {
        let r = concordance(&vec![ranking(&[1, 2, 3]); 3], 0.7).unwrap();
        assert_eq!(r.w_coefficient, 1.0);
        assert!(r.agreed);

        let r = concordance(&[ranking(&[1, 2, 3]), ranking(&[3, 2, 1])], 0.7).unwrap();
        assert_eq!(r.rank_sums, vec![4, 4, 4]);
        assert_eq!(r.s, 0.0);
        assert_eq!(r.w_coefficient, 0.0);
        assert!(!r.agreed);

        let r = concordance(
            &[
                ranking(&[1, 2, 3]),
                ranking(&[1, 2, 3]),
                ranking(&[2, 1, 3]),
            ],
            0.7,
        )
        .unwrap();
        assert_eq!(r.rank_sums, vec![4, 5, 9]);
        assert_eq!(r.mean_rank_sum, 6.0);
        assert_eq!(r.s, 14.0);
        assert!((r.w_coefficient - 14.0 / 18.0).abs() <= 1e-12);
        assert!(r.agreed);
    }

    #[test]
    fn concordance_errors() {
        assert_eq!(
            concordance(&[ranking(&[1, 2])], 0.7),
            Err(ConsensusError::TooFewRankings(1))
        );
        assert_eq!(
            concordance(&[ranking(&[1, 2]), ranking(&[1, 2, 3])], 0.7),
            Err(ConsensusError::MismatchedAttributes)
        );
        assert_eq!(
            concordance(&[ranking(&[1, 2]), ranking(&[2, 1])], 0.0),
            Err(ConsensusError::InvalidThreshold(0.0))
        );
    }

    #[test]
    fn single_ranking_agrees_with_itself() {
        let r = concordance_of_any(&[ranking(&[2, 1, 3])], 0.7).unwrap();
        assert_eq!(r.w_coefficient, 1.0);
        assert!(r.agreed);
    }

    #[test]
    fn conflict_examples() {
        let same =
            ranking_conflicts(&[("x", ranking(&[1, 2, 3])), ("y", ranking(&[1, 2, 3]))]).unwrap();
        assert!(same.is_empty());

        let one =
            ranking_conflicts(&[("x", ranking(&[1, 2, 3])), ("y", ranking(&[2, 1, 3]))]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(
            (one[0].first.as_str(), one[0].second.as_str()),
            ("qa1", "qa2")
        );
        assert_eq!(one[0].first_preferred_by, vec!["x"]);
        assert_eq!(one[0].second_preferred_by, vec!["y"]);

        let all =
            ranking_conflicts(&[("x", ranking(&[1, 2, 3])), ("y", ranking(&[3, 2, 1]))]).unwrap();
        let pairs: Vec<(&str, &str)> = all
            .iter()
            .map(|c| (c.first.as_str(), c.second.as_str()))
            .collect();
        assert_eq!(pairs, vec![("qa1", "qa2"), ("qa1", "qa3"), ("qa2", "qa3")]);
    }

    fn sid(s: &str) -> StakeholderId {
        StakeholderId::from(s)
    }

    #[test]
    fn aip_examples() {
        let a = pv(&[0.8, 0.1, 0.1]);
        let b = pv(&[0.2, 0.4, 0.4]);
        let equal = [
            StakeholderWeight::new("a", 1.0),
            StakeholderWeight::new("b", 1.0),
        ];

        let same =
            aggregate_aip(&[(sid("a"), a.clone()), (sid("b"), a.clone())], &equal, &[]).unwrap();
        for (got, want) in same.values().iter().zip([0.8, 0.1, 0.1]) {
            assert!((got - want).abs() < 1e-15);
        }

        let mean =
            aggregate_aip(&[(sid("a"), a.clone()), (sid("b"), b.clone())], &equal, &[]).unwrap();
        assert_eq!(mean.values(), &[0.5, 0.25, 0.25]);

        let skewed = [
            StakeholderWeight::new("a", 0.75),
            StakeholderWeight::new("b", 0.25),
        ];
        let v = aggregate_aip(&[(sid("a"), a), (sid("b"), b)], &skewed, &[]).unwrap();
        for (got, want) in v.values().iter().zip([0.65, 0.175, 0.175]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((v.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aip_with_abstention() {
        // b abstains on energy: energy comes from a alone.
        let a = pv(&[0.5, 0.3, 0.2]);
        let b = PriorityVector::new(ids(&["safety", "speed"]), vec![0.25, 0.75]).unwrap();
        let w = [
            StakeholderWeight::new("a", 1.0),
            StakeholderWeight::new("b", 1.0),
        ];
        let v = aggregate_aip(
            &[(sid("a"), a), (sid("b"), b)],
            &w,
            &[(sid("b"), "energy".into())],
        )
        .unwrap();
        let raw = [0.375, 0.525, 0.2];
        let total: f64 = raw.iter().sum();
        for (got, want) in v.values().iter().zip(raw) {
            assert!((got - want / total).abs() < 1e-12);
        }
    }

    #[test]
    fn aip_errors() {
        let a = PriorityVector::new(ids(&["safety", "speed"]), vec![0.5, 0.5]).unwrap();
        let w = [StakeholderWeight::new("a", 1.0)];
        assert_eq!(
            aggregate_aip(&[(sid("a"), a.clone())], &w, &[(sid("a"), "energy".into())]),
            Err(ConsensusError::AllAbstained("energy".into()))
        );
        assert_eq!(aggregate_aip(&[], &w, &[]), Err(ConsensusError::Empty));
        assert_eq!(
            aggregate_aip(&[(sid("z"), a.clone())], &w, &[]),
            Err(ConsensusError::MissingWeight(sid("z")))
        );
        assert_eq!(
            aggregate_aip(&[(sid("a"), a.clone()), (sid("a"), a.clone())], &w, &[]),
            Err(ConsensusError::DuplicateStakeholder(sid("a")))
        );
        let b = pv(&[0.5, 0.3, 0.2]);
        let w2 = [
            StakeholderWeight::new("a", 1.0),
            StakeholderWeight::new("b", 1.0),
        ];
        assert!(matches!(
            aggregate_aip(&[(sid("a"), a), (sid("b"), b)], &w2, &[]),
            Err(ConsensusError::CoverageMismatch { .. })
        ));
    }
}
