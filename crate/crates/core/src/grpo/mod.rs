//! Group-relative policy optimization pieces: advantages, balanced parent
//! selection, the clipped dual-stage objective and a toy policy on which the
//! objective's gradient can be checked and trained.

mod advantage;
mod objective;
mod parents;
mod toy;
mod train;

use thiserror::Error;

pub use advantage::{group_advantages, AdvantageSet};
pub use objective::{clipped_surrogate, dual_stage_loss, unclipped_surrogate, ClipParams, TokenSequence};
pub use parents::select_parents;
pub use toy::{
    finite_difference_grad, gradient_check, max_relative_error, random_toy_problem, toy_dual_stage_grad,
    toy_dual_stage_loss, toy_logprob, ToyBatch, ToyGroup, ToyObjective, ToyPolicy, ToyProblemShape, ToySequence,
};
pub use train::{toy_train, ToyTask, ToyTrainConfig, TraceRow};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrpoError {
    #[error("group of {0} rewards is too small; need at least 2")]
    GroupTooSmall(usize),
    #[error("bad parameter: {0}")]
    BadParameter(&'static str),
    #[error("non-finite value")]
    NonFinite,
    #[error("cannot select {k} parents from a group of {g}")]
    BadParentCount { k: usize, g: usize },
    #[error("token lists differ in length")]
    LengthMismatch,
    #[error("token sequence is empty")]
    EmptySequence,
    #[error("kl_beta > 0 but no reference log-probs were recorded")]
    MissingRef,
    #[error("a stage has no sequences")]
    EmptyStage,
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("shapes do not match")]
    ShapeMismatch,
}
