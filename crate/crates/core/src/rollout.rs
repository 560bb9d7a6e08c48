//! One sample's worth of proposal-RL rollouts: G critiqued drafts, K
//! selected parents and M revisions per parent, with advantages computed
//! strictly within each group.

use thiserror::Error;

use crate::breakdown::RewardBreakdown;
use crate::grpo::{group_advantages, AdvantageSet, GrpoError};
use crate::scalar::{Real, RewardScalar};
use crate::types::{Critique, Label, ReasoningOutput};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RolloutError {
    #[error("{parents} parents for {drafts} drafts")]
    ParentCount { parents: usize, drafts: usize },
    #[error("parent index {0} is out of range or repeated")]
    BadParentIndex(usize),
    #[error("feedback recorded for parent {0} differs from its draft's critique")]
    FeedbackMismatch(usize),
    #[error(transparent)]
    Grpo(#[from] GrpoError),
}

#[derive(Debug, Clone)]
pub struct DraftCandidate<T = f64> {
    pub output: ReasoningOutput,
    pub critique: Critique,
    pub reward: RewardBreakdown<T>,
}

#[derive(Debug, Clone)]
pub struct RevisionCandidate<T = f64> {
    pub output: ReasoningOutput,
    pub reward: RewardBreakdown<T>,
}

#[derive(Debug, Clone)]
pub struct ParentRecord<T = f64> {
    /// Index into the group's drafts.
    pub index: usize,
    pub feedback: String,
    pub revisions: Vec<RevisionCandidate<T>>,
}

#[derive(Debug, Clone)]
pub struct RolloutGroup<T = f64> {
    sample_id: String,
    gold: Label,
    drafts: Vec<DraftCandidate<T>>,
    parents: Vec<ParentRecord<T>>,
    draft_advantages: AdvantageSet<T>,
    revision_advantages: Vec<AdvantageSet<T>>,
}

impl<T: Real + RewardScalar> RolloutGroup<T> {
    /// Validates the group structure and computes advantages over the draft
    /// totals and, separately, over each parent's revision totals.
    pub fn new(
        sample_id: impl Into<String>,
        gold: Label,
        drafts: Vec<DraftCandidate<T>>,
        parents: Vec<ParentRecord<T>>,
        adv_epsilon: T,
    ) -> Result<Self, RolloutError> {
        if parents.is_empty() || parents.len() > drafts.len() {
            return Err(RolloutError::ParentCount { parents: parents.len(), drafts: drafts.len() });
        }
        let mut seen = vec![false; drafts.len()];
        for p in &parents {
            if p.index >= drafts.len() || seen[p.index] {
                return Err(RolloutError::BadParentIndex(p.index));
            }
            seen[p.index] = true;
            if drafts[p.index].critique.feedback() != p.feedback {
                return Err(RolloutError::FeedbackMismatch(p.index));
            }
        }
        let totals: Vec<T> = drafts.iter().map(|d| d.reward.total()).collect();
        let draft_advantages = group_advantages(&totals, adv_epsilon)?;
        let revision_advantages = parents
            .iter()
            .map(|p| {
                let totals: Vec<T> = p.revisions.iter().map(|r| r.reward.total()).collect();
                group_advantages(&totals, adv_epsilon)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { sample_id: sample_id.into(), gold, drafts, parents, draft_advantages, revision_advantages })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn gold(&self) -> Label {
        self.gold
    }

    pub fn drafts(&self) -> &[DraftCandidate<T>] {
        &self.drafts
    }

    pub fn parents(&self) -> &[ParentRecord<T>] {
        &self.parents
    }

    pub fn draft_advantages(&self) -> &AdvantageSet<T> {
        &self.draft_advantages
    }

    /// Advantages of the `k`-th parent's revisions.
    pub fn revision_advantages(&self, k: usize) -> &AdvantageSet<T> {
        &self.revision_advantages[k]
    }

    pub fn revision_count(&self) -> usize {
        self.parents.iter().map(|p| p.revisions.len()).sum()
    }
}
