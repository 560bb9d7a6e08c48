//! Desk-scale dual-stage training on a synthetic token-matching task.
//!
//! Each prompt has a hidden target string of `seq_len` tokens. A draft emits
//! one token per position from a per-(prompt, position) state and earns the
//! fraction of positions it got right. A revision re-emits the string from
//! states that additionally see whether the parent draft was right at that
//! position, and earns its own match fraction plus the sign of its change in
//! match fraction relative to the parent. With `shared_revision_states` the
//! revision task is the draft task verbatim, sharing all parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::grpo::advantage::group_advantages;
use crate::grpo::parents::select_parents;
use crate::grpo::toy::{
    toy_dual_stage_grad, toy_dual_stage_loss, ToyBatch, ToyGroup, ToyObjective, ToyPolicy, ToySequence,
};
use crate::grpo::GrpoError;
use crate::seed::stream;

/// Size and optimizer settings of the synthetic task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTask {
    pub prompts: usize,
    pub seq_len: usize,
    pub vocab: usize,
    pub iterations: usize,
    /// Gradient steps per sampled batch (old policy fixed across them).
    pub inner_steps: usize,
    pub lr: f64,
    pub shared_revision_states: bool,
}

impl Default for ToyTask {
    fn default() -> Self {
        Self {
            prompts: 6,
            seq_len: 4,
            vocab: 5,
            iterations: 500,
            inner_steps: 2,
            lr: 10.0,
            shared_revision_states: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyTrainConfig {
    pub task: ToyTask,
    pub g: usize,
    pub k: usize,
    pub m: usize,
    pub adv_epsilon: f64,
    pub objective: ToyObjective<f64>,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self { task: ToyTask::default(), g: 8, k: 2, m: 4, adv_epsilon: 1e-4, objective: ToyObjective::default() }
    }
}

impl ToyTrainConfig {
    /// Group sizes and objective settings from the engine config, with the
    /// proposal-side KL coefficient.
    pub fn from_engine(cfg: &EngineConfig) -> Self {
        Self {
            task: cfg.toy,
            g: cfg.g,
            k: cfg.k,
            m: cfg.m,
            adv_epsilon: cfg.adv_epsilon,
            objective: ToyObjective { clip_eps: cfg.clip_epsilon, kl_beta: cfg.kl_beta_proposal, lambda: cfg.lambda },
        }
    }
}

/// One line of the training trace. Rewards are exact expectations under the
/// policy at that iteration (match fraction only), so they do not move when
/// the policy does not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mean_draft_reward: f64,
    pub mean_revise_reward: f64,
    /// Loss of the sampled batch before the update; empty for iteration 0.
    pub loss: Option<f64>,
}

struct Layout {
    prompts: usize,
    len: usize,
    shared: bool,
}

impl Layout {
    fn num_states(&self) -> usize {
        let draft = self.prompts * self.len;
        if self.shared {
            draft
        } else {
            draft * 3
        }
    }

    fn draft(&self, p: usize, l: usize) -> usize {
        p * self.len + l
    }

    fn revise(&self, p: usize, l: usize, parent_right: bool) -> usize {
        if self.shared {
            self.draft(p, l)
        } else {
            self.prompts * self.len + 2 * self.draft(p, l) + usize::from(parent_right)
        }
    }
}

fn match_fraction(tokens: &[usize], target: &[usize]) -> f64 {
    let hits = tokens.iter().zip(target).filter(|(a, b)| a == b).count();
    hits as f64 / target.len() as f64
}

fn expected_rewards(policy: &ToyPolicy<f64>, layout: &Layout, targets: &[Vec<usize>]) -> Result<(f64, f64), GrpoError> {
    let mut draft = 0.0;
    let mut revise = 0.0;
    for (p, target) in targets.iter().enumerate() {
        for (l, &t) in target.iter().enumerate() {
            let pd = policy.probs(layout.draft(p, l))?[t];
            let right = policy.probs(layout.revise(p, l, true))?[t];
            let wrong = policy.probs(layout.revise(p, l, false))?[t];
            draft += pd;
            revise += pd * right + (1.0 - pd) * wrong;
        }
    }
    let n = (targets.len() * layout.len) as f64;
    Ok((draft / n, revise / n))
}

fn validate(cfg: &ToyTrainConfig) -> Result<(), GrpoError> {
    let t = &cfg.task;
    if t.prompts == 0 || t.seq_len == 0 || t.vocab < 2 {
        return Err(GrpoError::BadParameter("toy task needs prompts >= 1, seq_len >= 1, vocab >= 2"));
    }
    if cfg.g < 2 || cfg.m < 2 {
        return Err(GrpoError::GroupTooSmall(cfg.g.min(cfg.m)));
    }
    if cfg.k == 0 || cfg.k > cfg.g {
        return Err(GrpoError::BadParentCount { k: cfg.k, g: cfg.g });
    }
    if !t.lr.is_finite() || t.lr < 0.0 {
        return Err(GrpoError::BadParameter("lr must be finite and non-negative"));
    }
    Ok(())
}

/// Runs `cfg.task.iterations` rounds of sample → reward → advantage →
/// parent selection → revision → dual-stage update. Row 0 describes the
/// initial (uniform) policy.
pub fn toy_train(cfg: &ToyTrainConfig, seed: u64) -> Result<Vec<TraceRow>, GrpoError> {
    validate(cfg)?;
    let task = cfg.task;
    let layout = Layout { prompts: task.prompts, len: task.seq_len, shared: task.shared_revision_states };
    let mut task_rng = stream(seed, "toy-task", 0);
    let targets: Vec<Vec<usize>> =
        (0..task.prompts).map(|_| (0..task.seq_len).map(|_| task_rng.gen_range(0..task.vocab)).collect()).collect();

    let reference = ToyPolicy::uniform(layout.num_states(), task.vocab)?;
    let mut policy = reference.clone();
    let (d0, r0) = expected_rewards(&policy, &layout, &targets)?;
    let mut trace = vec![TraceRow { iteration: 0, mean_draft_reward: d0, mean_revise_reward: r0, loss: None }];

    for it in 1..=task.iterations {
        let mut rollout_rng = stream(seed, "toy-rollout", it as u64);
        let mut parent_rng = stream(seed, "toy-parents", it as u64);
        let old = policy.clone();
        let mut groups = Vec::with_capacity(task.prompts);

        for (p, target) in targets.iter().enumerate() {
            let draft_states: Vec<usize> = (0..task.seq_len).map(|l| layout.draft(p, l)).collect();
            let drafts: Vec<Vec<usize>> = (0..cfg.g)
                .map(|_| draft_states.iter().map(|&s| old.sample(s, &mut rollout_rng)).collect())
                .collect::<Result<_, _>>()?;
            let rewards: Vec<f64> = drafts.iter().map(|d| match_fraction(d, target)).collect();
            let adv = group_advantages(&rewards, cfg.adv_epsilon)?;
            let draft_seqs = drafts
                .into_iter()
                .zip(adv.values())
                .map(|(tokens, &a)| ToySequence::record(draft_states.clone(), tokens, &old, Some(&reference), a))
                .collect::<Result<Vec<_>, _>>()?;

            let correct: Vec<bool> = rewards.iter().map(|&r| r == 1.0).collect();
            let parents = select_parents(&correct, cfg.k, &mut parent_rng)?;
            let mut revisions = Vec::with_capacity(parents.len());
            for &pi in &parents {
                let parent = &draft_seqs[pi].tokens;
                let states: Vec<usize> =
                    (0..task.seq_len).map(|l| layout.revise(p, l, parent[l] == target[l])).collect();
                let outs: Vec<Vec<usize>> = (0..cfg.m)
                    .map(|_| states.iter().map(|&s| old.sample(s, &mut rollout_rng)).collect())
                    .collect::<Result<_, _>>()?;
                let rewards: Vec<f64> = outs
                    .iter()
                    .map(|o| {
                        let frac = match_fraction(o, target);
                        let imp = (frac - rewards[pi]).signum() * f64::from(u8::from(frac != rewards[pi]));
                        frac + imp
                    })
                    .collect();
                let adv = group_advantages(&rewards, cfg.adv_epsilon)?;
                revisions.push(
                    outs.into_iter()
                        .zip(adv.values())
                        .map(|(tokens, &a)| ToySequence::record(states.clone(), tokens, &old, Some(&reference), a))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            groups.push(ToyGroup { drafts: draft_seqs, revisions });
        }

        let batch = ToyBatch { groups };
        let loss = toy_dual_stage_loss(&policy, &batch, cfg.objective)?;
        for _ in 0..task.inner_steps {
            let grad = toy_dual_stage_grad(&policy, &batch, cfg.objective)?;
            policy.step(&grad, -task.lr)?;
        }
        let (d, r) = expected_rewards(&policy, &layout, &targets)?;
        trace.push(TraceRow { iteration: it, mean_draft_reward: d, mean_revise_reward: r, loss: Some(loss) });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(iterations: usize) -> ToyTrainConfig {
        ToyTrainConfig { task: ToyTask { iterations, ..ToyTask::default() }, ..ToyTrainConfig::default() }
    }

    #[test]
    fn starts_at_chance() {
        let trace = toy_train(&short(0), 1).unwrap();
        assert_eq!(trace.len(), 1);
        assert!((trace[0].mean_draft_reward - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_lr_is_flat() {
        let mut cfg = short(20);
        cfg.task.lr = 0.0;
        let trace = toy_train(&cfg, 4).unwrap();
        assert!(trace.iter().all(|r| r.mean_draft_reward == trace[0].mean_draft_reward));
        assert!(trace.iter().all(|r| r.mean_revise_reward == trace[0].mean_revise_reward));
    }

    #[test]
    fn deterministic() {
        assert_eq!(toy_train(&short(10), 9).unwrap(), toy_train(&short(10), 9).unwrap());
    }

    #[test]
    fn rejects_bad_parent_count() {
        let mut cfg = short(1);
        cfg.k = 9;
        assert!(toy_train(&cfg, 0).is_err());
    }
}
