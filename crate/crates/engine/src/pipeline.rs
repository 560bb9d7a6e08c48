//! Draft → critique → revise inference and the RL batch generators.
//!
//! Batch generation never touches weights: it samples from the deployed
//! agents, scores everything, computes group-relative advantages and writes
//! JSONL for an external trainer.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use pcr_core::grpo::select_parents;
use pcr_core::rewards::{critic_reward, draft_reward, revise_reward};
use pcr_core::seed::stream;
use pcr_core::structio::{parse_critique, parse_reasoning, PromptSet, RenderError, TemplateId};
use pcr_core::{
    Breakdown, ChatMessage, Critique, DcrRecord, DecodeParams, DraftCandidate, EngineConfig, Label, ParentRecord,
    Prediction, ReasoningOutput, RevisionCandidate, RolloutError, RolloutGroup, Sample, Score, StageGate,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{build_backend, BackendError, Generator};
use crate::io::JsonlWriter;
use crate::pool::run_ordered;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("revision requested with empty feedback")]
    EmptyFeedback,
    #[error("sample {0} has no gold label")]
    MissingGold(String),
    #[error("no {0} endpoint configured")]
    MissingEndpoint(&'static str),
    #[error("only {eligible} drafts have usable feedback, {k} parents needed")]
    NotEnoughParents { eligible: usize, k: usize },
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error("{skipped} of {total} samples skipped, above the configured budget")]
    SkipBudget { skipped: usize, total: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("no draft for sample {0} in the draft file")]
    MissingDraft(String),
    #[error("{rounds} revision rounds requested, at most {max} allowed")]
    TooManyRounds { rounds: usize, max: usize },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("stage gate not ready after {0:?}")]
    GateTimeout(Duration),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

/// The proposal and critic agents plus everything needed to prompt them.
pub struct Pipeline {
    proposal: Arc<dyn Generator>,
    critic: Arc<dyn Generator>,
    prompts: PromptSet,
    cfg: EngineConfig,
}

impl Pipeline {
    pub fn new(
        proposal: Arc<dyn Generator>,
        critic: Arc<dyn Generator>,
        prompts: PromptSet,
        cfg: EngineConfig,
    ) -> Self {
        Self { proposal, critic, prompts, cfg }
    }

    /// Builds both agents from `cfg.agents`; relative paths resolve against
    /// `base_dir`.
    pub fn from_config(cfg: &EngineConfig, base_dir: Option<&Path>) -> Result<Self, PipelineError> {
        let spec = |s: &Option<_>, name| s.clone().ok_or(PipelineError::MissingEndpoint(name));
        let proposal = build_backend(&spec(&cfg.agents.proposal, "proposal")?, cfg.workers, base_dir)?;
        let critic = build_backend(&spec(&cfg.agents.critic, "critic")?, cfg.workers, base_dir)?;
        let dir = cfg.prompt_dir.as_ref().map(|d| match base_dir {
            Some(b) if Path::new(d).is_relative() => b.join(d),
            _ => PathBuf::from(d),
        });
        let prompts = PromptSet::load(dir.as_deref())?;
        Ok(Self::new(proposal, critic, prompts, cfg.clone()))
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn draft_messages(&self, sample: &Sample) -> Result<Vec<ChatMessage>, PipelineError> {
        let id = TemplateId::for_draft_style(self.cfg.draft_style);
        let text = self.prompts.render(id, Some(sample), &[])?;
        Ok(vec![ChatMessage::user_with_image(&text, sample.image_ref())])
    }

    pub fn critic_messages(&self, sample: &Sample, reasoning: &str) -> Result<Vec<ChatMessage>, PipelineError> {
        let text = self.prompts.render(TemplateId::Critic, Some(sample), &[("reasoning", reasoning)])?;
        Ok(vec![ChatMessage::user_with_image(&text, sample.image_ref())])
    }

    /// The draft exchange followed by the revision request.
    pub fn revise_messages(
        &self,
        sample: &Sample,
        previous: &str,
        feedback: &str,
    ) -> Result<Vec<ChatMessage>, PipelineError> {
        if feedback.trim().is_empty() {
            return Err(PipelineError::EmptyFeedback);
        }
        let mut messages = self.draft_messages(sample)?;
        messages.push(ChatMessage::assistant(previous));
        messages.push(ChatMessage::user(self.prompts.render(
            TemplateId::Revise,
            Some(sample),
            &[("feedback", feedback)],
        )?));
        Ok(messages)
    }

    fn eval_proposal(&self) -> DecodeParams {
        self.cfg.decode.proposal.clone().with_n(1)
    }

    fn eval_critic(&self) -> DecodeParams {
        self.cfg.decode.critic.clone().with_n(1)
    }

    fn first(replies: Vec<String>) -> Result<String, PipelineError> {
        replies.into_iter().next().ok_or_else(|| BackendError::MalformedResponse("no completion".into()).into())
    }

    pub fn draft(&self, sample: &Sample) -> Result<ReasoningOutput, PipelineError> {
        let raw = Self::first(self.proposal.generate(&self.draft_messages(sample)?, &self.eval_proposal())?)?;
        Ok(parse_reasoning(&raw))
    }

    pub fn critique(&self, sample: &Sample, output: &ReasoningOutput) -> Result<Critique, PipelineError> {
        let raw =
            Self::first(self.critic.generate(&self.critic_messages(sample, output.raw())?, &self.eval_critic())?)?;
        Ok(parse_critique(&raw))
    }

    pub fn revise(
        &self,
        sample: &Sample,
        previous: &ReasoningOutput,
        feedback: &str,
    ) -> Result<ReasoningOutput, PipelineError> {
        let messages = self.revise_messages(sample, previous.raw(), feedback)?;
        let raw = Self::first(self.proposal.generate(&messages, &self.eval_proposal())?)?;
        Ok(parse_reasoning(&raw))
    }

    /// Draft once, then `rounds` critique/revise cycles, each critiquing the
    /// latest output. A failing round is recorded in `error` and ends the
    /// record early.
    pub fn run_dcr(&self, sample: &Sample, rounds: usize) -> Result<DcrRecord, PipelineError> {
        if rounds > self.cfg.max_revision_rounds {
            return Err(PipelineError::TooManyRounds { rounds, max: self.cfg.max_revision_rounds });
        }
        let mut record = DcrRecord::new(sample, self.draft(sample)?);
        for round in 1..=rounds {
            let latest = record.rounds.last().map_or(&record.draft, |r| &r.revision).clone();
            let step =
                self.critique(sample, &latest).and_then(|c| self.revise(sample, &latest, c.feedback()).map(|r| (c, r)));
            match step {
                Ok((critique, revision)) => record.push_round(critique, revision),
                Err(e) => {
                    log::warn!("{}: round {round} failed: {e}", sample.id());
                    record.error = Some(format!("round {round}: {e}"));
                    break;
                }
            }
        }
        Ok(record)
    }

    /// Runs [`Pipeline::run_dcr`] over `samples` and writes one record per
    /// line. Samples whose draft fails get an empty, invalid draft and an
    /// `error`, so evaluation still counts them.
    pub fn run_dcr_file(
        &self,
        samples: &[Sample],
        rounds: usize,
        path: &Path,
    ) -> Result<Vec<DcrRecord>, PipelineError> {
        if rounds > self.cfg.max_revision_rounds {
            return Err(PipelineError::TooManyRounds { rounds, max: self.cfg.max_revision_rounds });
        }
        let records = run_ordered(samples, self.cfg.workers, |_, s| {
            self.run_dcr(s, rounds).unwrap_or_else(|e| {
                log::warn!("{}: draft failed: {e}", s.id());
                let mut r = DcrRecord::new(s, parse_reasoning(""));
                r.error = Some(format!("draft: {e}"));
                r
            })
        });
        let mut out = JsonlWriter::create(path).map_err(io_err(path))?;
        for r in &records {
            out.write(r).map_err(io_err(path))?;
        }
        out.finish().map_err(io_err(path))?;
        Ok(records)
    }

    fn rl(&self, base: &DecodeParams, n: usize) -> DecodeParams {
        base.clone().with_n(n as u32).with_temperature(self.cfg.rl_temperature)
    }

    /// One sample of proposal RL: G drafts, one critique each, K parents
    /// (among drafts with non-empty feedback), M revisions per parent.
    pub fn proposal_rollout(&self, index: usize, sample: &Sample) -> Result<ProposalRollout, PipelineError> {
        let gold = sample.gold().ok_or_else(|| PipelineError::MissingGold(sample.id().to_string()))?;
        let cfg = &self.cfg;
        let draft_prompt = self.draft_messages(sample)?;
        let raws = self.proposal.generate(&draft_prompt, &self.rl(&cfg.decode.proposal, cfg.g))?;
        if raws.len() != cfg.g {
            return Err(BackendError::MalformedResponse(format!("{} drafts for n={}", raws.len(), cfg.g)).into());
        }
        let mut drafts = Vec::with_capacity(cfg.g);
        for raw in &raws {
            let output = parse_reasoning(raw);
            let critique = self.critique(sample, &output)?;
            let reward: Breakdown = draft_reward(&output, &critique, gold, cfg.score_divisor);
            drafts.push(DraftCandidate { output, critique, reward });
        }

        let eligible: Vec<usize> =
            (0..drafts.len()).filter(|&i| !drafts[i].critique.feedback().trim().is_empty()).collect();
        if eligible.len() < cfg.k {
            return Err(PipelineError::NotEnoughParents { eligible: eligible.len(), k: cfg.k });
        }
        let flags: Vec<bool> = eligible.iter().map(|&i| drafts[i].output.prediction().is(gold)).collect();
        let mut rng = stream(cfg.seed, "parents", index as u64);
        let picked = select_parents(&flags, cfg.k, &mut rng).map_err(RolloutError::from)?;

        let mut parents = Vec::with_capacity(cfg.k);
        let mut revise_prompts = Vec::with_capacity(cfg.k);
        for p in picked {
            let di = eligible[p];
            let feedback = drafts[di].critique.feedback().to_string();
            let prompt = self.revise_messages(sample, drafts[di].output.raw(), &feedback)?;
            let raws = self.proposal.generate(&prompt, &self.rl(&cfg.decode.proposal, cfg.m))?;
            if raws.len() != cfg.m {
                return Err(BackendError::MalformedResponse(format!("{} revisions for n={}", raws.len(), cfg.m)).into());
            }
            let revisions = raws
                .iter()
                .map(|raw| {
                    let output = parse_reasoning(raw);
                    let reward = revise_reward(drafts[di].output.prediction(), &output, gold);
                    RevisionCandidate { output, reward }
                })
                .collect();
            parents.push(ParentRecord { index: di, feedback, revisions });
            revise_prompts.push(prompt);
        }
        let group = RolloutGroup::new(sample.id(), gold, drafts, parents, cfg.adv_epsilon)?;
        Ok(ProposalRollout { group, draft_prompt, revise_prompts })
    }

    /// Proposal-RL batch over `samples`, critic frozen. Failing samples are
    /// skipped and logged; the file is written either way, then the run
    /// fails if skips exceed `max_skip_fraction`.
    pub fn generate_proposal_rl_batch(&self, samples: &[Sample], path: &Path) -> Result<ProposalBatch, PipelineError> {
        require_gold(samples)?;
        let results = run_ordered(samples, self.cfg.workers, |i, s| self.proposal_rollout(i, s));
        let mut out = JsonlWriter::create(path).map_err(io_err(path))?;
        let mut groups = Vec::new();
        let mut skipped = Vec::new();
        for (s, r) in samples.iter().zip(results) {
            match r {
                Ok(ro) => {
                    for line in ro.lines() {
                        out.write(&line).map_err(io_err(path))?;
                    }
                    groups.push(ro.group);
                }
                Err(e) => {
                    log::warn!("{}: skipped: {e}", s.id());
                    skipped.push((s.id().to_string(), e.to_string()));
                }
            }
        }
        let summary = BatchSummary { path: path.to_path_buf(), samples: samples.len(), lines: out.lines(), skipped };
        out.finish().map_err(io_err(path))?;
        summary.check_budget(self.cfg.max_skip_fraction)?;
        Ok(ProposalBatch { summary, groups })
    }

    /// One sample of critic RL: G critiques of a fixed draft, each probed by
    /// one greedy frozen-proposal revision under its feedback.
    pub fn critic_rollout(&self, sample: &Sample, draft: &ReasoningOutput) -> Result<Vec<CriticLine>, PipelineError> {
        let gold = sample.gold().ok_or_else(|| PipelineError::MissingGold(sample.id().to_string()))?;
        let cfg = &self.cfg;
        let prompt = self.critic_messages(sample, draft.raw())?;
        let raws = self.critic.generate(&prompt, &self.rl(&cfg.decode.critic, cfg.g))?;
        if raws.len() != cfg.g {
            return Err(BackendError::MalformedResponse(format!("{} critiques for n={}", raws.len(), cfg.g)).into());
        }
        let probe_decode = self.eval_proposal().with_temperature(0.0);
        let mut scored = Vec::with_capacity(cfg.g);
        for raw in raws {
            let critique = parse_critique(&raw);
            let probe = if critique.feedback().trim().is_empty() {
                None
            } else {
                let messages = self.revise_messages(sample, draft.raw(), critique.feedback())?;
                let reply = Self::first(self.proposal.generate(&messages, &probe_decode)?)?;
                Some(parse_reasoning(&reply).prediction().clone())
            };
            let reward: Breakdown = critic_reward(&critique, draft.prediction(), probe.as_ref(), gold);
            scored.push((raw, critique, probe, reward));
        }
        let totals: Vec<f64> = scored.iter().map(|s| s.3.total()).collect();
        let adv = pcr_core::grpo::group_advantages(&totals, cfg.adv_epsilon).map_err(RolloutError::from)?;
        Ok(scored
            .into_iter()
            .zip(adv.values())
            .enumerate()
            .map(|(idx, ((completion, critique, probe, reward), &advantage))| CriticLine {
                sample_id: sample.id().to_string(),
                group: "critic",
                idx,
                prompt: prompt.clone(),
                completion,
                reward,
                advantage,
                score: critique.score(),
                probe_pred: probe,
            })
            .collect())
    }

    /// Critic-RL batch, proposal frozen. Drafts come from `drafts` when given
    /// (a sample missing there is skipped), otherwise one greedy draft per
    /// sample is generated here.
    pub fn generate_critic_rl_batch(
        &self,
        samples: &[Sample],
        drafts: Option<&HashMap<String, ReasoningOutput>>,
        path: &Path,
    ) -> Result<BatchSummary, PipelineError> {
        require_gold(samples)?;
        let results = run_ordered(samples, self.cfg.workers, |_, s| {
            let draft = match drafts {
                Some(map) => map.get(s.id()).cloned().ok_or_else(|| PipelineError::MissingDraft(s.id().to_string()))?,
                None => self.draft(s)?,
            };
            self.critic_rollout(s, &draft)
        });
        let mut out = JsonlWriter::create(path).map_err(io_err(path))?;
        let mut skipped = Vec::new();
        for (s, r) in samples.iter().zip(results) {
            match r {
                Ok(lines) => {
                    for line in &lines {
                        out.write(line).map_err(io_err(path))?;
                    }
                }
                Err(e) => {
                    log::warn!("{}: skipped: {e}", s.id());
                    skipped.push((s.id().to_string(), e.to_string()));
                }
            }
        }
        let summary = BatchSummary { path: path.to_path_buf(), samples: samples.len(), lines: out.lines(), skipped };
        out.finish().map_err(io_err(path))?;
        summary.check_budget(self.cfg.max_skip_fraction)?;
        Ok(summary)
    }
}

fn require_gold(samples: &[Sample]) -> Result<(), PipelineError> {
    match samples.iter().find(|s| s.gold().is_none()) {
        Some(s) => Err(PipelineError::MissingGold(s.id().to_string())),
        None => Ok(()),
    }
}

/// Drafts keyed by sample id, from a DCR results file.
pub fn load_drafts(path: &Path) -> Result<HashMap<String, ReasoningOutput>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DcrRecord = serde_json::from_str(line).map_err(|e| PipelineError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(rec.sample_id, rec.draft);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DraftLine<'a> {
    pub sample_id: &'a str,
    pub group: &'static str,
    pub idx: usize,
    pub prompt: &'a [ChatMessage],
    pub completion: &'a str,
    pub reward: &'a Breakdown,
    pub advantage: f64,
    pub pred: &'a Prediction,
    pub gold: Label,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReviseLine<'a> {
    pub sample_id: &'a str,
    pub group: &'static str,
    pub parent_idx: usize,
    pub idx: usize,
    pub prompt: &'a [ChatMessage],
    pub completion: &'a str,
    pub reward: &'a Breakdown,
    pub advantage: f64,
    pub pred: &'a Prediction,
    pub gold: Label,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum BatchLine<'a> {
    Draft(DraftLine<'a>),
    Revise(ReviseLine<'a>),
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticLine {
    pub sample_id: String,
    pub group: &'static str,
    pub idx: usize,
    pub prompt: Vec<ChatMessage>,
    pub completion: String,
    pub reward: Breakdown,
    pub advantage: f64,
    pub score: Score,
    pub probe_pred: Option<Prediction>,
}

/// A scored proposal group together with the prompts that produced it.
#[derive(Debug, Clone)]
pub struct ProposalRollout {
    pub group: RolloutGroup<f64>,
    pub draft_prompt: Vec<ChatMessage>,
    /// One per parent, in parent order.
    pub revise_prompts: Vec<Vec<ChatMessage>>,
}

impl ProposalRollout {
    /// G draft lines, then each parent's M revision lines.
    pub fn lines(&self) -> Vec<BatchLine<'_>> {
        let g = &self.group;
        let gold = g.gold();
        let mut out = Vec::with_capacity(g.drafts().len() + g.revision_count());
        for (idx, (d, &advantage)) in g.drafts().iter().zip(g.draft_advantages().values()).enumerate() {
            out.push(BatchLine::Draft(DraftLine {
                sample_id: g.sample_id(),
                group: "draft",
                idx,
                prompt: &self.draft_prompt,
                completion: d.output.raw(),
                reward: &d.reward,
                advantage,
                pred: d.output.prediction(),
                gold,
            }));
        }
        for (k, p) in g.parents().iter().enumerate() {
            for (idx, (r, &advantage)) in p.revisions.iter().zip(g.revision_advantages(k).values()).enumerate() {
                out.push(BatchLine::Revise(ReviseLine {
                    sample_id: g.sample_id(),
                    group: "revise",
                    parent_idx: p.index,
                    idx,
                    prompt: &self.revise_prompts[k],
                    completion: r.output.raw(),
                    reward: &r.reward,
                    advantage,
                    pred: r.output.prediction(),
                    gold,
                }));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub path: PathBuf,
    pub samples: usize,
    pub lines: usize,
    /// (sample id, reason)
    pub skipped: Vec<(String, String)>,
}

impl BatchSummary {
    fn check_budget(&self, max_fraction: f64) -> Result<(), PipelineError> {
        if self.samples > 0 && self.skipped.len() as f64 > max_fraction * self.samples as f64 {
            return Err(PipelineError::SkipBudget { skipped: self.skipped.len(), total: self.samples });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProposalBatch {
    pub summary: BatchSummary,
    pub groups: Vec<RolloutGroup<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    /// Critic trained, proposal frozen.
    CriticRl,
    /// Proposal trained, critic frozen.
    ProposalRl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub cycle: usize,
    pub kind: StageKind,
    pub frozen: String,
    pub samples: usize,
    pub batch_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
    /// Wait between consecutive stages.
    pub gate: StageGate,
}

/// Critic first, then proposal, repeated `refinement_cycles` times.
pub fn mutual_refinement_schedule(cfg: &EngineConfig) -> Result<StagePlan, PipelineError> {
    if cfg.agents.proposal.is_none() {
        return Err(PipelineError::MissingEndpoint("proposal"));
    }
    if cfg.agents.critic.is_none() {
        return Err(PipelineError::MissingEndpoint("critic"));
    }
    let mut stages = Vec::new();
    for cycle in 1..=cfg.refinement_cycles.max(1) {
        stages.push(Stage {
            cycle,
            kind: StageKind::CriticRl,
            frozen: "proposal".into(),
            samples: cfg.critic_stage_samples,
            batch_file: format!("cycle{cycle}_critic_rl.jsonl"),
        });
        stages.push(Stage {
            cycle,
            kind: StageKind::ProposalRl,
            frozen: "critic".into(),
            samples: cfg.proposal_stage_samples,
            batch_file: format!("cycle{cycle}_proposal_rl.jsonl"),
        });
    }
    Ok(StagePlan { stages, gate: cfg.stage_gate.clone() })
}

/// Blocks until the gate opens.
pub fn wait_for_gate(gate: &StageGate) -> Result<(), PipelineError> {
    let (interval, timeout) = match gate {
        StageGate::None => return Ok(()),
        StageGate::Probe { interval_ms, timeout_s, .. } | StageGate::SignalFile { interval_ms, timeout_s, .. } => {
            (Duration::from_millis(*interval_ms), Duration::from_secs(*timeout_s))
        }
    };
    let client = reqwest::blocking::Client::builder().timeout(interval.max(Duration::from_secs(1))).build().ok();
    let ready = || match gate {
        StageGate::Probe { url, .. } => {
            client.as_ref().and_then(|c| c.get(url).send().ok()).is_some_and(|r| r.status().is_success())
        }
        StageGate::SignalFile { path, .. } => Path::new(path).exists(),
        StageGate::None => true,
    };
    let start = Instant::now();
    loop {
        if ready() {
            return Ok(());
        }
        if start.elapsed() >= timeout {
            return Err(PipelineError::GateTimeout(timeout));
        }
        std::thread::sleep(interval);
    }
}

/// Runs every stage of `plan` on the first `stage.samples` samples, writing
/// batches into `out_dir` and waiting on the gate between stages.
pub fn execute_plan(
    plan: &StagePlan,
    pipeline: &Pipeline,
    samples: &[Sample],
    drafts: Option<&HashMap<String, ReasoningOutput>>,
    out_dir: &Path,
) -> Result<Vec<BatchSummary>, PipelineError> {
    let mut done = Vec::new();
    for (i, stage) in plan.stages.iter().enumerate() {
        if i > 0 {
            log::info!("waiting for stage gate before {:?} (cycle {})", stage.kind, stage.cycle);
            wait_for_gate(&plan.gate)?;
        }
        let subset = &samples[..stage.samples.min(samples.len())];
        let path = out_dir.join(&stage.batch_file);
        log::info!("stage {:?} (cycle {}): {} samples → {}", stage.kind, stage.cycle, subset.len(), path.display());
        let summary = match stage.kind {
            StageKind::CriticRl => pipeline.generate_critic_rl_batch(subset, drafts, &path)?,
            StageKind::ProposalRl => pipeline.generate_proposal_rl_batch(subset, &path)?.summary,
        };
        done.push(summary);
    }
    Ok(done)
}
