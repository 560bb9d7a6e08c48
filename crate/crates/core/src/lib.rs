//! Core of a proposal/critic reasoning engine for multimodal sarcasm
//! detection: domain types, prompt and output grammars, rewards,
//! group-relative policy optimization math and evaluation metrics.
//!
//! Numeric code is generic: continuous math over [`Real`] (`f32`/`f64`),
//! rewards over [`RewardScalar`] (which adds the exact [`Rational`]). The
//! aliases below fix the common instantiations.

pub mod agent;
pub mod breakdown;
pub mod config;
pub mod grpo;
pub mod metrics;
pub mod rewards;
pub mod rollout;
pub mod scalar;
pub mod seed;
pub mod structio;
pub mod types;

pub use agent::{BackendSpec, Backoff, ChatMessage, ContentPart, DecodeParams, MessageError, ParamError, Role};
pub use breakdown::{RewardBreakdown, RewardComponent};
pub use config::{AgentEndpoints, ConfigError, DraftStyle, EngineConfig, RoleDecode, StageGate};
pub use grpo::GrpoError;
pub use metrics::{Confusion, MetricsError, Report, RoundSelector};
pub use rollout::{DraftCandidate, ParentRecord, RevisionCandidate, RolloutError, RolloutGroup};
pub use scalar::{Rational, Real, RewardScalar};
pub use types::{
    Critique, DcrRecord, DcrRound, Label, NextAction, Prediction, ReasoningOutput, RoleStep, Sample, SampleError,
    Score, Trajectory, TrajectoryError,
};

/// Reward breakdown in `f64`, as written to batch files.
pub type Breakdown = RewardBreakdown<f64>;
/// Reward breakdown in exact rationals.
pub type ExactBreakdown = RewardBreakdown<Rational>;
pub type Advantages = grpo::AdvantageSet<f64>;
pub type Advantages32 = grpo::AdvantageSet<f32>;
pub type Policy = grpo::ToyPolicy<f64>;
pub type Policy32 = grpo::ToyPolicy<f32>;
pub type Scores = metrics::Scores<f64>;
pub type Rollout = RolloutGroup<f64>;
