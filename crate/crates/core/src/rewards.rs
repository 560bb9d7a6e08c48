//! Scalar rewards for drafts, revisions and critiques.
//!
//! Component functions return small integers; composites assemble them into a
//! [`RewardBreakdown`] over any [`RewardScalar`], so the same code yields
//! `f64` totals for batch files and exact rationals for checking.

use crate::breakdown::{RewardBreakdown, RewardComponent};
use crate::scalar::RewardScalar;
use crate::structio::format_reward;
use crate::types::{Critique, Label, Prediction, ReasoningOutput, Score};

/// Default divisor mapping critic scores {0,1,2} onto {0, 0.5, 1}.
pub const DEFAULT_SCORE_DIVISOR: i64 = 2;

/// 1 iff the prediction is valid and equals gold.
pub fn accuracy_reward(pred: &Prediction, gold: Label) -> u8 {
    u8::from(pred.is(gold))
}

/// Normalized critic score `s / divisor`; invalid scores earn 0.
pub fn eval_reward<T: RewardScalar>(score: Score, divisor: i64) -> T {
    match score {
        Score::Valid(s) => T::from_int(i64::from(s)) / T::from_int(divisor),
        Score::Invalid => T::zero(),
    }
}

/// +1 for a fix, -1 for damage, 0 otherwise. The fix clause is tested first.
pub fn improvement_reward(draft_pred: &Prediction, revise_pred: &Prediction, gold: Label) -> i8 {
    if !draft_pred.is(gold) && revise_pred.is(gold) {
        1
    } else if !revise_pred.same_as(draft_pred) && !revise_pred.is(gold) {
        -1
    } else {
        0
    }
}

/// Rewards high scores on correct proposals and low scores on incorrect ones.
/// An unparseable score earns the worst value, -1.
pub fn score_alignment_reward(score: Score, pred: &Prediction, gold: Label) -> i8 {
    match score {
        Score::Valid(s) => {
            let s = s as i8;
            if accuracy_reward(pred, gold) == 1 {
                s - 1
            } else {
                1 - s
            }
        }
        Score::Invalid => -1,
    }
}

/// Credit for feedback whose frozen-proposal revision fixes the draft. Same
/// case table as [`improvement_reward`].
pub fn actionability_reward(draft_pred: &Prediction, revise_pred: &Prediction, gold: Label) -> i8 {
    improvement_reward(draft_pred, revise_pred, gold)
}

/// acc + fmt + eval, in [0, 3].
pub fn draft_reward<T: RewardScalar>(
    out: &ReasoningOutput,
    crit: &Critique,
    gold: Label,
    score_divisor: i64,
) -> RewardBreakdown<T> {
    RewardBreakdown::new(vec![
        (RewardComponent::Acc, T::from_int(accuracy_reward(out.prediction(), gold).into())),
        (RewardComponent::Fmt, T::from_int(format_reward(out).into())),
        (RewardComponent::Eval, eval_reward(crit.score(), score_divisor)),
    ])
}

/// acc + fmt + imp, in [-1, 3].
pub fn revise_reward<T: RewardScalar>(
    draft_pred: &Prediction,
    out: &ReasoningOutput,
    gold: Label,
) -> RewardBreakdown<T> {
    RewardBreakdown::new(vec![
        (RewardComponent::Acc, T::from_int(accuracy_reward(out.prediction(), gold).into())),
        (RewardComponent::Fmt, T::from_int(format_reward(out).into())),
        (RewardComponent::Imp, T::from_int(improvement_reward(draft_pred, out.prediction(), gold).into())),
    ])
}

/// fmt + align + act, in [-2, 3]. `revise_pred` is `None` when no probe
/// revision was requested (empty feedback), which scores act = 0.
pub fn critic_reward<T: RewardScalar>(
    crit: &Critique,
    draft_pred: &Prediction,
    revise_pred: Option<&Prediction>,
    gold: Label,
) -> RewardBreakdown<T> {
    let act = revise_pred.map_or(0, |r| actionability_reward(draft_pred, r, gold));
    RewardBreakdown::new(vec![
        (RewardComponent::Fmt, T::from_int(format_reward(crit).into())),
        (RewardComponent::Align, T::from_int(score_alignment_reward(crit.score(), draft_pred, gold).into())),
        (RewardComponent::Act, T::from_int(act.into())),
    ])
}
