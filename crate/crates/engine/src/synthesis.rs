//! Teacher rollouts into training corpora.
//!
//! A teacher model reasons about a sample one role-step at a time, choosing a
//! new analytical perspective per turn. Trajectories that reach the gold
//! label are flattened into single-turn drafts; valid-but-wrong ones are sent
//! to the critic and back to the teacher to build draft/feedback/revision
//! triples.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pcr_core::metrics::pct;
use pcr_core::structio::{
    flatten_trajectory, parse_critique, parse_reasoning, parse_role_step, PromptSet, RenderError, StepParseError,
    TemplateId, CLARIFY_INSTRUCTION, FORCE_FINAL_INSTRUCTION,
};
use pcr_core::{
    ChatMessage, DecodeParams, EngineConfig, Label, NextAction, Prediction, RoleStep, Sample, Trajectory,
    TrajectoryError,
};
use serde::Serialize;
use thiserror::Error;

use crate::backend::{BackendError, Generator};
use crate::io::{write_json, JsonlWriter};
use crate::pool::run_ordered;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("turn {turn}: unparseable step after {attempts} attempt(s): {source}")]
    StepParseFailure {
        turn: usize,
        attempts: usize,
        #[source]
        source: StepParseError,
    },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("sample {0} has no gold label")]
    MissingGold(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthesisError + '_ {
    move |source| SynthesisError::Io { path: path.display().to_string(), source }
}

/// Rollout knobs, usually taken from [`EngineConfig`].
#[derive(Debug, Clone)]
pub struct RolloutParams {
    pub min_steps: usize,
    pub max_steps: usize,
    pub parse_retries: usize,
    pub decode: DecodeParams,
}

impl RolloutParams {
    pub fn from_config(cfg: &EngineConfig) -> Self {
        Self {
            min_steps: cfg.min_steps,
            max_steps: cfg.max_steps,
            parse_retries: cfg.parse_retries,
            decode: cfg.decode.teacher.clone().with_n(1),
        }
    }
}

/// Asks for the next step, re-issuing the same turn when the reply does not
/// parse. Returns the raw reply with its step.
fn next_step(
    teacher: &dyn Generator,
    history: &[ChatMessage],
    params: &RolloutParams,
    turn: usize,
) -> Result<(String, RoleStep), SynthesisError> {
    let mut last_err = StepParseError::NotJson;
    for attempt in 0..=params.parse_retries {
        let raw = teacher.generate(history, &params.decode)?.swap_remove(0);
        match parse_role_step(&raw) {
            Ok(step) => return Ok((raw, step)),
            Err(e) => {
                log::debug!("turn {turn}, attempt {}: {e}", attempt + 1);
                last_err = e;
            }
        }
    }
    Err(SynthesisError::StepParseFailure { turn, attempts: params.parse_retries + 1, source: last_err })
}

/// Runs one dynamic-role rollout to completion.
///
/// A `final_answer` before `min_steps` is kept as a step but coerced to
/// `continue`; after `max_steps` steps the teacher gets one forced-final
/// turn, so trajectories have between `min_steps` and `max_steps + 1` steps.
pub fn run_rollout(
    sample: &Sample,
    teacher: &dyn Generator,
    prompts: &PromptSet,
    params: &RolloutParams,
) -> Result<Trajectory, SynthesisError> {
    let question = prompts.render(TemplateId::RolloutQuestion, Some(sample), &[])?;
    let mut history = vec![
        ChatMessage::system(prompts.render(TemplateId::RolloutSystem, None, &[])?),
        ChatMessage::user_with_image(&question, sample.image_ref()),
    ];
    let followup = prompts.render(TemplateId::RolloutFollowup, None, &[])?;
    let mut steps: Vec<RoleStep> = Vec::new();
    loop {
        let forced = steps.len() == params.max_steps;
        let (raw, mut step) = next_step(teacher, &history, params, steps.len() + 1)?;
        history.push(ChatMessage::assistant(raw));
        if forced {
            step = step.with_action(NextAction::FinalAnswer);
        } else if step.next_action() == NextAction::FinalAnswer && steps.len() + 1 < params.min_steps {
            step = step.with_action(NextAction::Continue);
        }
        let done = step.next_action() == NextAction::FinalAnswer;
        steps.push(step);
        if done {
            break;
        }
        let next = if steps.len() == params.max_steps { FORCE_FINAL_INSTRUCTION } else { followup.as_str() };
        history.push(ChatMessage::user(next));
    }
    let answer = extract_final_answer(steps.last().expect("non-empty"), teacher, &history, &params.decode);
    Ok(Trajectory::new(sample.id(), steps, answer, params.max_steps + 1)?)
}

/// The one label named by a standalone, case-insensitive "yes" or "no".
/// `None` when neither or both occur.
pub fn scan_label(text: &str) -> Option<Label> {
    let mut yes = false;
    let mut no = false;
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        if word.eq_ignore_ascii_case("yes") {
            yes = true;
        } else if word.eq_ignore_ascii_case("no") {
            no = true;
        }
    }
    match (yes, no) {
        (true, false) => Some(Label::Sarcastic),
        (false, true) => Some(Label::NotSarcastic),
        _ => None,
    }
}

/// Reads the label off the final step, asking once for a bare yes/no when
/// the step is ambiguous. Never fails: anything unresolved is `Invalid`.
pub fn extract_final_answer(
    step: &RoleStep,
    teacher: &dyn Generator,
    history: &[ChatMessage],
    decode: &DecodeParams,
) -> Prediction {
    if let Some(label) = scan_label(step.content()) {
        return Prediction::valid(label, step.content());
    }
    let mut convo = history.to_vec();
    convo.push(ChatMessage::user(CLARIFY_INSTRUCTION));
    match teacher.generate(&convo, &decode.clone().with_n(1)) {
        Ok(mut replies) => {
            let reply = replies.swap_remove(0);
            match scan_label(&reply) {
                Some(label) => Prediction::valid(label, reply),
                None => Prediction::invalid(reply),
            }
        }
        Err(e) => {
            log::warn!("clarification turn failed: {e}");
            Prediction::invalid(String::new())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthesisOutcome {
    CorrectFlattened {
        sequence: String,
    },
    /// Valid but wrong; waiting for [`build_revision_triple`].
    Flawed {
        sequence: String,
    },
    FlawedTriple {
        draft: String,
        feedback: String,
        revision: String,
    },
    Discarded {
        reason: String,
    },
}

impl SynthesisOutcome {
    fn discarded(reason: &str) -> Self {
        SynthesisOutcome::Discarded { reason: reason.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisRecord {
    pub sample_id: String,
    /// Absent when the rollout itself was discarded.
    pub trajectory: Option<Trajectory>,
    pub outcome: SynthesisOutcome,
}

/// Sorts a finished trajectory by its answer.
pub fn filter_and_flatten(sample: &Sample, trajectory: Trajectory) -> Result<SynthesisRecord, SynthesisError> {
    let gold = sample.gold().ok_or_else(|| SynthesisError::MissingGold(sample.id().to_string()))?;
    let outcome = match flatten_trajectory(&trajectory) {
        Err(_) => SynthesisOutcome::discarded("invalid_answer"),
        Ok(sequence) if trajectory.final_answer().is(gold) => SynthesisOutcome::CorrectFlattened { sequence },
        Ok(sequence) => SynthesisOutcome::Flawed { sequence },
    };
    Ok(SynthesisRecord { sample_id: sample.id().to_string(), trajectory: Some(trajectory), outcome })
}

#[derive(Debug, Clone)]
pub struct TripleParams {
    /// Extra teacher attempts after the first.
    pub retries: usize,
    pub critic_decode: DecodeParams,
    pub teacher_decode: DecodeParams,
}

impl TripleParams {
    pub fn from_config(cfg: &EngineConfig) -> Self {
        Self {
            retries: cfg.triple_retries,
            critic_decode: cfg.decode.critic.clone().with_n(1),
            teacher_decode: cfg.decode.teacher.clone().with_n(1).with_temperature(cfg.triple_temperature),
        }
    }
}

/// Critic feedback on a flawed flattened draft, then up to `1 + retries`
/// teacher revisions until one is well-formed and reaches the gold label.
pub fn build_revision_triple(
    sample: &Sample,
    flawed: &str,
    critic: &dyn Generator,
    teacher: &dyn Generator,
    prompts: &PromptSet,
    params: &TripleParams,
) -> Result<SynthesisOutcome, SynthesisError> {
    let gold = sample.gold().ok_or_else(|| SynthesisError::MissingGold(sample.id().to_string()))?;
    let critic_prompt = prompts.render(TemplateId::Critic, Some(sample), &[("reasoning", flawed)])?;
    let raw =
        critic.generate(&[ChatMessage::user_with_image(&critic_prompt, sample.image_ref())], &params.critic_decode)?;
    let feedback = parse_critique(&raw[0]).feedback().to_string();
    if feedback.trim().is_empty() {
        return Ok(SynthesisOutcome::discarded("empty_feedback"));
    }
    let draft_prompt = prompts.render(TemplateId::Draft, Some(sample), &[])?;
    let revise_prompt = prompts.render(TemplateId::Revise, Some(sample), &[("feedback", &feedback)])?;
    let convo = [
        ChatMessage::user_with_image(&draft_prompt, sample.image_ref()),
        ChatMessage::assistant(flawed),
        ChatMessage::user(revise_prompt),
    ];
    for attempt in 0..=params.retries {
        let mut decode = params.teacher_decode.clone();
        decode.seed = decode.seed.map(|s| s.wrapping_add(attempt as u64));
        let revision = teacher.generate(&convo, &decode)?.swap_remove(0);
        let parsed = parse_reasoning(&revision);
        if parsed.format_ok() && parsed.prediction().is(gold) {
            return Ok(SynthesisOutcome::FlawedTriple { draft: flawed.to_string(), feedback, revision });
        }
    }
    Ok(SynthesisOutcome::discarded("uncorrected"))
}

/// Rollout, filter and (for flawed drafts) triple construction for one
/// sample. Unparseable rollouts are discarded rather than failing the run.
pub fn synthesize_sample(
    sample: &Sample,
    teacher: &dyn Generator,
    critic: &dyn Generator,
    prompts: &PromptSet,
    cfg: &EngineConfig,
) -> Result<SynthesisRecord, SynthesisError> {
    if sample.gold().is_none() {
        return Err(SynthesisError::MissingGold(sample.id().to_string()));
    }
    let trajectory = match run_rollout(sample, teacher, prompts, &RolloutParams::from_config(cfg)) {
        Ok(t) => t,
        Err(SynthesisError::StepParseFailure { turn, .. }) => {
            log::info!("{}: discarded, unparseable turn {turn}", sample.id());
            return Ok(SynthesisRecord {
                sample_id: sample.id().to_string(),
                trajectory: None,
                outcome: SynthesisOutcome::discarded("step_parse_failure"),
            });
        }
        Err(e) => return Err(e),
    };
    let mut record = filter_and_flatten(sample, trajectory)?;
    if let SynthesisOutcome::Flawed { sequence } = &record.outcome {
        record.outcome =
            build_revision_triple(sample, sequence, critic, teacher, prompts, &TripleParams::from_config(cfg))?;
    }
    Ok(record)
}

/// Per-label step-count table: trajectories by length and the mean length.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepRow {
    /// Step count → trajectories.
    pub steps: BTreeMap<usize, u64>,
    /// Step count → share of this row's trajectories, in percent.
    pub percent: BTreeMap<usize, f64>,
    pub total: u64,
    pub avg_steps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub samples: u64,
    pub correct_flattened: u64,
    pub triples: u64,
    pub discards: BTreeMap<String, u64>,
    pub histogram: BTreeMap<usize, u64>,
    pub by_label: BTreeMap<String, StepRow>,
}

impl StepRow {
    fn from_counts(steps: BTreeMap<usize, u64>) -> Self {
        let total: u64 = steps.values().sum();
        let step_sum: u64 = steps.iter().map(|(k, v)| *k as u64 * v).sum();
        let percent = steps.iter().map(|(k, v)| (*k, pct(*v, total))).collect();
        // Half-up to two decimals, in integers.
        let avg_steps = if total == 0 { 0.0 } else { ((200 * step_sum + total) / (2 * total)) as f64 / 100.0 };
        Self { steps, percent, total, avg_steps }
    }
}

impl StepStats {
    /// Step statistics over emitted records (flattened drafts and triples).
    pub fn from_records<'a>(records: impl IntoIterator<Item = (&'a Sample, &'a SynthesisRecord)>) -> Self {
        let mut stats = StepStats::default();
        let mut per_label: BTreeMap<String, BTreeMap<usize, u64>> = BTreeMap::new();
        for (sample, rec) in records {
            stats.samples += 1;
            match &rec.outcome {
                SynthesisOutcome::CorrectFlattened { .. } => stats.correct_flattened += 1,
                SynthesisOutcome::FlawedTriple { .. } => stats.triples += 1,
                SynthesisOutcome::Discarded { reason } => {
                    *stats.discards.entry(reason.clone()).or_default() += 1;
                    continue;
                }
                SynthesisOutcome::Flawed { .. } => continue,
            }
            let Some(t) = &rec.trajectory else { continue };
            *stats.histogram.entry(t.len()).or_default() += 1;
            let label = sample.gold().map_or("unlabeled", Label::as_str).to_string();
            for key in [label, "all".to_string()] {
                *per_label.entry(key).or_default().entry(t.len()).or_default() += 1;
            }
        }
        stats.by_label = per_label.into_iter().map(|(k, v)| (k, StepRow::from_counts(v))).collect();
        stats
    }
}

#[derive(Debug, Serialize)]
struct DraftLine<'a> {
    id: &'a str,
    image: Option<&'a str>,
    text: &'a str,
    label: Option<Label>,
    sequence: &'a str,
}

#[derive(Debug, Serialize)]
struct TripleLine<'a> {
    id: &'a str,
    image: Option<&'a str>,
    text: &'a str,
    label: Option<Label>,
    draft: &'a str,
    feedback: &'a str,
    revision: &'a str,
}

#[derive(Debug, Serialize)]
struct DiscardLine<'a> {
    id: &'a str,
    reason: &'a str,
}

#[derive(Debug, Clone)]
pub struct SynthesisSummary {
    pub stats: StepStats,
    pub outputs: Vec<PathBuf>,
}

/// Synthesizes the whole dataset into `out_dir`: `drafts.jsonl`,
/// `triples.jsonl`, `discards.jsonl` and `stats.json`. Samples run
/// concurrently on `cfg.workers` threads; files keep dataset order.
pub fn synthesize(
    samples: &[Sample],
    teacher: &dyn Generator,
    critic: &dyn Generator,
    prompts: &PromptSet,
    cfg: &EngineConfig,
    out_dir: &Path,
) -> Result<SynthesisSummary, SynthesisError> {
    let records = run_ordered(samples, cfg.workers, |_, s| synthesize_sample(s, teacher, critic, prompts, cfg));
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;

    let paths: Vec<PathBuf> =
        ["drafts.jsonl", "triples.jsonl", "discards.jsonl", "stats.json"].iter().map(|f| out_dir.join(f)).collect();
    let mut drafts = JsonlWriter::create(&paths[0]).map_err(io_err(&paths[0]))?;
    let mut triples = JsonlWriter::create(&paths[1]).map_err(io_err(&paths[1]))?;
    let mut discards = JsonlWriter::create(&paths[2]).map_err(io_err(&paths[2]))?;
    for (s, rec) in samples.iter().zip(&records) {
        let (id, image, text, label) = (s.id(), s.image_ref(), s.text(), s.gold());
        match &rec.outcome {
            SynthesisOutcome::CorrectFlattened { sequence } => {
                drafts.write(&DraftLine { id, image, text, label, sequence }).map_err(io_err(&paths[0]))?
            }
            SynthesisOutcome::FlawedTriple { draft, feedback, revision } => triples
                .write(&TripleLine { id, image, text, label, draft, feedback, revision })
                .map_err(io_err(&paths[1]))?,
            SynthesisOutcome::Discarded { reason } => {
                discards.write(&DiscardLine { id, reason }).map_err(io_err(&paths[2]))?
            }
            SynthesisOutcome::Flawed { .. } => unreachable!("flawed records are resolved per sample"),
        }
    }
    drafts.finish().map_err(io_err(&paths[0]))?;
    triples.finish().map_err(io_err(&paths[1]))?;
    discards.finish().map_err(io_err(&paths[2]))?;
    let stats = StepStats::from_records(samples.iter().zip(&records));
    write_json(&paths[3], &stats).map_err(io_err(&paths[3]))?;
    Ok(SynthesisSummary { stats, outputs: paths })
}
