//! Engine configuration. One flat JSON object; nested objects only for agent
//! endpoints and per-role decode parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{BackendSpec, DecodeParams};
use crate::grpo::ToyTask;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

/// Which drafting prompt the proposal agent receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DraftStyle {
    /// Model picks its own perspectives.
    #[default]
    Dynamic,
    /// Three predefined perspectives.
    Fixed,
    /// Plain chain of thought.
    Generic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEndpoints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<BackendSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleDecode {
    pub proposal: DecodeParams,
    pub critic: DecodeParams,
    pub teacher: DecodeParams,
}

impl Default for RoleDecode {
    fn default() -> Self {
        Self {
            proposal: DecodeParams::proposal(),
            critic: DecodeParams::critic(),
            teacher: DecodeParams { temperature: 0.0, max_new_tokens: 1024, n: 1, seed: None },
        }
    }
}

/// How the engine waits between mutual-refinement stages while an external
/// trainer updates and redeploys the trained agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageGate {
    /// Proceed immediately.
    #[default]
    None,
    /// Poll a URL until it answers 2xx.
    Probe { url: String, interval_ms: u64, timeout_s: u64 },
    /// Wait until the operator creates a file.
    SignalFile { path: String, interval_ms: u64, timeout_s: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Draft group size.
    pub g: usize,
    /// Revisions per parent.
    pub m: usize,
    /// Parents per draft group.
    pub k: usize,
    /// Weight of the revision stage in the dual-stage loss.
    pub lambda: f64,
    pub adv_epsilon: f64,
    pub clip_epsilon: f64,
    pub kl_beta_proposal: f64,
    pub kl_beta_critic: f64,
    /// Divisor normalizing critic scores into the evaluation reward.
    pub score_divisor: i64,
    pub min_steps: usize,
    pub max_steps: usize,
    /// Re-asks of one rollout turn whose output fails to parse.
    pub parse_retries: usize,
    /// Extra teacher attempts when building a revision triple.
    pub triple_retries: usize,
    pub triple_temperature: f64,
    /// Sampling temperature for draft and revision groups.
    pub rl_temperature: f64,
    pub revision_rounds: usize,
    pub max_revision_rounds: usize,
    pub seed: u64,
    /// Concurrent requests per backend.
    pub workers: usize,
    /// Fraction of skipped samples above which a batch run fails.
    pub max_skip_fraction: f64,
    pub critic_stage_samples: usize,
    pub proposal_stage_samples: usize,
    pub refinement_cycles: usize,
    pub draft_style: DraftStyle,
    /// Directory of prompt overrides, one `<template_id>.txt` per prompt.
    pub prompt_dir: Option<String>,
    pub dataset: Option<String>,
    /// Prior drafts for critic batches (DCR results JSONL); generated when absent.
    pub draft_file: Option<String>,
    pub agents: AgentEndpoints,
    pub decode: RoleDecode,
    pub stage_gate: StageGate,
    /// Synthetic task for `toy-grpo-train`.
    pub toy: ToyTask,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            g: 8,
            m: 4,
            k: 2,
            lambda: 0.5,
            adv_epsilon: 1e-4,
            clip_epsilon: 0.2,
            kl_beta_proposal: 0.02,
            kl_beta_critic: 0.0,
            score_divisor: 2,
            min_steps: 2,
            max_steps: 6,
            parse_retries: 2,
            triple_retries: 2,
            triple_temperature: 0.7,
            rl_temperature: 1.0,
            revision_rounds: 1,
            max_revision_rounds: 5,
            seed: 0,
            workers: 8,
            max_skip_fraction: 0.1,
            critic_stage_samples: 5_000,
            proposal_stage_samples: 2_000,
            refinement_cycles: 1,
            draft_style: DraftStyle::Dynamic,
            prompt_dir: None,
            dataset: None,
            draft_file: None,
            agents: AgentEndpoints::default(),
            decode: RoleDecode::default(),
            stage_gate: StageGate::None,
            toy: ToyTask::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.g == 0 || self.m == 0 || self.k == 0 {
            return fail("g, m and k must be positive".into());
        }
        if self.k > self.g {
            return fail(format!("k ({}) must not exceed g ({})", self.k, self.g));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if [self.adv_epsilon, self.clip_epsilon].iter().any(|x| x.is_nan() || *x <= 0.0) {
            return fail("adv_epsilon and clip_epsilon must be positive".into());
        }
        if [self.kl_beta_proposal, self.kl_beta_critic].iter().any(|x| x.is_nan() || *x < 0.0) {
            return fail("kl coefficients must be non-negative".into());
        }
        if self.score_divisor <= 0 {
            return fail("score_divisor must be positive".into());
        }
        if self.min_steps < 2 || self.min_steps > self.max_steps {
            return fail(format!("need 2 <= min_steps ({}) <= max_steps ({})", self.min_steps, self.max_steps));
        }
        if self.revision_rounds > self.max_revision_rounds {
            return fail(format!(
                "revision_rounds {} exceeds max_revision_rounds {}",
                self.revision_rounds, self.max_revision_rounds
            ));
        }
        if self.workers == 0 {
            return fail("workers must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_skip_fraction) {
            return fail("max_skip_fraction outside [0, 1]".into());
        }
        for (role, d) in
            [("proposal", &self.decode.proposal), ("critic", &self.decode.critic), ("teacher", &self.decode.teacher)]
        {
            d.validate().map_err(|e| ConfigError(format!("decode.{role}: {e}")))?;
        }
        for (role, b) in
            [("proposal", &self.agents.proposal), ("critic", &self.agents.critic), ("teacher", &self.agents.teacher)]
        {
            if let Some(b) = b {
                b.validate().map_err(|e| ConfigError(format!("agents.{role}: {e}")))?;
            }
        }
        Ok(())
    }
}
