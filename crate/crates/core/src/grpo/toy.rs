//! A tabular softmax policy small enough to differentiate by hand.
//!
//! Each state owns one row of logits over the vocabulary; a recorded sequence
//! is a list of (state, token) pairs plus the log-probabilities seen at
//! sampling time. The dual-stage loss over a batch of such sequences has a
//! closed-form gradient, which [`toy_dual_stage_grad`] computes and
//! [`finite_difference_grad`] checks.

use rand::Rng;

use crate::grpo::objective::{dual_stage_loss, surrogate_with_grad, ClipParams, TokenSequence};
use crate::grpo::GrpoError;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy<T = f64> {
    logits: Vec<T>,
    num_states: usize,
    vocab_size: usize,
}

impl<T: Real> ToyPolicy<T> {
    /// `logits` is row-major, `num_states × vocab_size`.
    pub fn new(num_states: usize, vocab_size: usize, logits: Vec<T>) -> Result<Self, GrpoError> {
        if num_states == 0 || vocab_size == 0 || logits.len() != num_states * vocab_size {
            return Err(GrpoError::ShapeMismatch);
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(GrpoError::NonFinite);
        }
        Ok(Self { logits, num_states, vocab_size })
    }

    pub fn uniform(num_states: usize, vocab_size: usize) -> Result<Self, GrpoError> {
        Self::new(num_states, vocab_size, vec![T::zero(); num_states * vocab_size])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.logits[state * self.vocab_size..(state + 1) * self.vocab_size]
    }

    /// Adds `scale * delta` to every logit.
    pub fn step(&mut self, delta: &[T], scale: T) -> Result<(), GrpoError> {
        if delta.len() != self.logits.len() {
            return Err(GrpoError::ShapeMismatch);
        }
        for (l, &d) in self.logits.iter_mut().zip(delta) {
            *l = *l + scale * d;
        }
        if self.logits.iter().any(|v| !v.is_finite()) {
            return Err(GrpoError::NonFinite);
        }
        Ok(())
    }

    pub(crate) fn set_logit(&mut self, index: usize, value: T) {
        self.logits[index] = value;
    }

    fn check_state(&self, state: usize) -> Result<(), GrpoError> {
        if state >= self.num_states {
            return Err(GrpoError::IndexOutOfRange { index: state, bound: self.num_states });
        }
        Ok(())
    }

    /// Softmax of one state's row.
    pub fn probs(&self, state: usize) -> Result<Vec<T>, GrpoError> {
        self.check_state(state)?;
        let row = self.row(state);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&l| (l - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }

    /// Draws one token from the state's distribution.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Result<usize, GrpoError> {
        let probs = self.probs(state)?;
        let u = T::lit(rng.gen::<f64>());
        let mut acc = T::zero();
        for (tok, &p) in probs.iter().enumerate() {
            acc = acc + p;
            if u < acc {
                return Ok(tok);
            }
        }
        Ok(self.vocab_size - 1)
    }
}

/// Log-softmax of the state's logit row, evaluated at `token`.
pub fn toy_logprob<T: Real>(policy: &ToyPolicy<T>, state: usize, token: usize) -> Result<T, GrpoError> {
    policy.check_state(state)?;
    if token >= policy.vocab_size {
        return Err(GrpoError::IndexOutOfRange { index: token, bound: policy.vocab_size });
    }
    let row = policy.row(state);
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + row.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    Ok(row[token] - lse)
}

/// One recorded completion: the states visited, the tokens emitted there,
/// their log-probabilities at sampling time and the sequence's advantage.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySequence<T = f64> {
    pub states: Vec<usize>,
    pub tokens: Vec<usize>,
    pub old_logps: Vec<T>,
    pub ref_logps: Option<Vec<T>>,
    pub advantage: T,
}

impl<T: Real> ToySequence<T> {
    /// Records `(states, tokens)` with old log-probs from `old` and
    /// reference log-probs from `reference`.
    pub fn record(
        states: Vec<usize>,
        tokens: Vec<usize>,
        old: &ToyPolicy<T>,
        reference: Option<&ToyPolicy<T>>,
        advantage: T,
    ) -> Result<Self, GrpoError> {
        if states.len() != tokens.len() {
            return Err(GrpoError::ShapeMismatch);
        }
        let logps = |p: &ToyPolicy<T>| -> Result<Vec<T>, GrpoError> {
            states.iter().zip(&tokens).map(|(&s, &a)| toy_logprob(p, s, a)).collect()
        };
        let old_logps = logps(old)?;
        let ref_logps = reference.map(logps).transpose()?;
        Ok(Self { states, tokens, old_logps, ref_logps, advantage })
    }

    fn token_sequence(&self, policy: &ToyPolicy<T>) -> Result<TokenSequence<T>, GrpoError> {
        if self.states.len() != self.tokens.len() {
            return Err(GrpoError::ShapeMismatch);
        }
        let new: Vec<T> =
            self.states.iter().zip(&self.tokens).map(|(&s, &a)| toy_logprob(policy, s, a)).collect::<Result<_, _>>()?;
        TokenSequence::new(new, self.old_logps.clone(), self.ref_logps.clone()).map_err(|e| match e {
            GrpoError::LengthMismatch => GrpoError::ShapeMismatch,
            other => other,
        })
    }
}

/// Everything recorded for one prompt: the draft group and, per selected
/// parent, its revision group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToyGroup<T = f64> {
    pub drafts: Vec<ToySequence<T>>,
    pub revisions: Vec<Vec<ToySequence<T>>>,
}

/// A batch of prompts; the loss is the mean of per-prompt dual-stage losses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToyBatch<T = f64> {
    pub groups: Vec<ToyGroup<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyObjective<T = f64> {
    pub clip_eps: T,
    pub kl_beta: T,
    pub lambda: T,
}

impl Default for ToyObjective<f64> {
    fn default() -> Self {
        Self { clip_eps: 0.2, kl_beta: 0.02, lambda: 0.5 }
    }
}

fn check_batch<T>(batch: &ToyBatch<T>) -> Result<(), GrpoError> {
    if batch.groups.is_empty() {
        return Err(GrpoError::EmptyStage);
    }
    for g in &batch.groups {
        if g.drafts.is_empty() || g.revisions.is_empty() || g.revisions.iter().any(Vec::is_empty) {
            return Err(GrpoError::EmptyStage);
        }
    }
    Ok(())
}

/// Dual-stage loss of `batch` evaluated at `policy`.
pub fn toy_dual_stage_loss<T: Real>(
    policy: &ToyPolicy<T>,
    batch: &ToyBatch<T>,
    obj: ToyObjective<T>,
) -> Result<T, GrpoError> {
    check_batch(batch)?;
    let p = ClipParams { clip_eps: obj.clip_eps, kl_beta: obj.kl_beta };
    let seq_loss = |s: &ToySequence<T>| -> Result<T, GrpoError> {
        Ok(surrogate_with_grad(&s.token_sequence(policy)?, s.advantage, p)?.0)
    };
    let mut total = T::zero();
    for g in &batch.groups {
        let drafts: Vec<T> = g.drafts.iter().map(seq_loss).collect::<Result<_, _>>()?;
        let revisions: Vec<Vec<T>> =
            g.revisions.iter().map(|o| o.iter().map(seq_loss).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
        total = total + dual_stage_loss(&drafts, &revisions, obj.lambda)?;
    }
    Ok(total / T::of_usize(batch.groups.len()))
}

/// Analytic gradient of [`toy_dual_stage_loss`] with respect to every logit,
/// laid out like [`ToyPolicy::logits`].
pub fn toy_dual_stage_grad<T: Real>(
    policy: &ToyPolicy<T>,
    batch: &ToyBatch<T>,
    obj: ToyObjective<T>,
) -> Result<Vec<T>, GrpoError> {
    check_batch(batch)?;
    if !(obj.lambda >= T::zero() && obj.lambda <= T::one()) {
        return Err(GrpoError::BadParameter("lambda must lie in [0, 1]"));
    }
    let p = ClipParams { clip_eps: obj.clip_eps, kl_beta: obj.kl_beta };
    let v = policy.vocab_size;
    let mut grad = vec![T::zero(); policy.logits.len()];
    let probs: Vec<Vec<T>> = (0..policy.num_states).map(|s| policy.probs(s)).collect::<Result<_, _>>()?;
    let prompt_w = T::one() / T::of_usize(batch.groups.len());

    let mut accumulate = |s: &ToySequence<T>, weight: T| -> Result<(), GrpoError> {
        let (_, d_new) = surrogate_with_grad(&s.token_sequence(policy)?, s.advantage, p)?;
        for ((&state, &tok), &d) in s.states.iter().zip(&s.tokens).zip(&d_new) {
            // d log softmax(z)_a / d z_b = 1[a = b] - softmax(z)_b
            let c = weight * d;
            for (b, &pb) in probs[state].iter().enumerate() {
                let ind = if b == tok { T::one() } else { T::zero() };
                grad[state * v + b] = grad[state * v + b] + c * (ind - pb);
            }
        }
        Ok(())
    };

    for g in &batch.groups {
        let wd = prompt_w * (T::one() - obj.lambda) / T::of_usize(g.drafts.len());
        for s in &g.drafts {
            accumulate(s, wd)?;
        }
        let k = T::of_usize(g.revisions.len());
        for o in &g.revisions {
            let wr = prompt_w * obj.lambda / (k * T::of_usize(o.len()));
            for s in o {
                accumulate(s, wr)?;
            }
        }
    }
    Ok(grad)
}

/// Central finite-difference gradient of [`toy_dual_stage_loss`].
pub fn finite_difference_grad<T: Real>(
    policy: &ToyPolicy<T>,
    batch: &ToyBatch<T>,
    obj: ToyObjective<T>,
    h: T,
) -> Result<Vec<T>, GrpoError> {
    let mut probe = policy.clone();
    let two_h = h + h;
    (0..policy.logits.len())
        .map(|i| {
            let base = policy.logits[i];
            probe.set_logit(i, base + h);
            let up = toy_dual_stage_loss(&probe, batch, obj)?;
            probe.set_logit(i, base - h);
            let down = toy_dual_stage_loss(&probe, batch, obj)?;
            probe.set_logit(i, base);
            Ok((up - down) / two_h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`, maximized over entries.
pub fn max_relative_error<T: Real>(a: &[T], b: &[T], floor: T) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(T::zero(), T::max)
}

/// Shape of a random gradient-check problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyProblemShape {
    pub num_states: usize,
    pub vocab_size: usize,
    pub prompts: usize,
    pub group_size: usize,
    pub parents: usize,
    pub revisions: usize,
    pub max_len: usize,
}

impl Default for ToyProblemShape {
    fn default() -> Self {
        Self { num_states: 6, vocab_size: 5, prompts: 3, group_size: 8, parents: 2, revisions: 4, max_len: 5 }
    }
}

/// A random policy, a perturbed rollout-time policy, a reference policy and
/// a batch of sequences sampled from the rollout-time policy with random
/// advantages. Perturbations are large enough that some tokens land in the
/// clipped region.
pub fn random_toy_problem<R: Rng + ?Sized>(
    shape: ToyProblemShape,
    rng: &mut R,
) -> Result<(ToyPolicy<f64>, ToyBatch<f64>), GrpoError> {
    let n = shape.num_states * shape.vocab_size;
    let mut rand_logits = |scale: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-scale..scale)).collect() };
    let current = ToyPolicy::new(shape.num_states, shape.vocab_size, rand_logits(1.5))?;
    let old_delta = rand_logits(0.3);
    let ref_delta = rand_logits(0.5);
    let mut old = current.clone();
    old.step(&old_delta, 1.0)?;
    let mut reference = current.clone();
    reference.step(&ref_delta, 1.0)?;

    let make_seq = |rng: &mut R| -> Result<ToySequence<f64>, GrpoError> {
        let len = rng.gen_range(1..=shape.max_len);
        let states: Vec<usize> = (0..len).map(|_| rng.gen_range(0..shape.num_states)).collect();
        let tokens: Vec<usize> = states.iter().map(|&s| old.sample(s, rng)).collect::<Result<_, _>>()?;
        ToySequence::record(states, tokens, &old, Some(&reference), rng.gen_range(-2.0..2.0))
    };
    let mut groups = Vec::with_capacity(shape.prompts);
    for _ in 0..shape.prompts {
        let drafts = (0..shape.group_size).map(|_| make_seq(rng)).collect::<Result<_, _>>()?;
        let revisions = (0..shape.parents)
            .map(|_| (0..shape.revisions).map(|_| make_seq(rng)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        groups.push(ToyGroup { drafts, revisions });
    }
    Ok((current, ToyBatch { groups }))
}

/// Largest relative disagreement between the analytic and finite-difference
/// gradients on a random problem drawn from `rng`.
pub fn gradient_check<R: Rng + ?Sized>(rng: &mut R, obj: ToyObjective<f64>, h: f64) -> Result<f64, GrpoError> {
    let (policy, batch) = random_toy_problem(ToyProblemShape::default(), rng)?;
    let analytic = toy_dual_stage_grad(&policy, &batch, obj)?;
    let numeric = finite_difference_grad(&policy, &batch, obj, h)?;
    Ok(max_relative_error(&analytic, &numeric, 1e-4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logprob() {
        let p = ToyPolicy::<f64>::uniform(2, 4).unwrap();
        assert!((toy_logprob(&p, 1, 3).unwrap() + 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_token_logprob() {
        let p = ToyPolicy::new(1, 2, vec![0.0, 3f64.ln()]).unwrap();
        assert!((toy_logprob(&p, 0, 1).unwrap() - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn normalized() {
        let p = ToyPolicy::new(1, 3, vec![5.0, -2.0, 0.3]).unwrap();
        let z: f64 = (0..3).map(|a| toy_logprob::<f64>(&p, 0, a).unwrap().exp()).sum();
        assert!((z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range() {
        let p = ToyPolicy::<f64>::uniform(2, 3).unwrap();
        assert_eq!(toy_logprob(&p, 2, 0), Err(GrpoError::IndexOutOfRange { index: 2, bound: 2 }));
        assert_eq!(toy_logprob(&p, 0, 3), Err(GrpoError::IndexOutOfRange { index: 3, bound: 3 }));
        assert_eq!(ToyPolicy::<f64>::new(2, 3, vec![0.0; 5]), Err(GrpoError::ShapeMismatch));
    }

    #[test]
    fn zero_advantage_zero_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (policy, mut batch) = random_toy_problem(ToyProblemShape::default(), &mut rng).unwrap();
        for g in &mut batch.groups {
            for s in g.drafts.iter_mut().chain(g.revisions.iter_mut().flatten()) {
                s.advantage = 0.0;
            }
        }
        let obj = ToyObjective { clip_eps: 0.2, kl_beta: 0.0, lambda: 0.5 };
        let grad = toy_dual_stage_grad(&policy, &batch, obj).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn analytic_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let err = gradient_check(&mut rng, ToyObjective::default(), 1e-5).unwrap();
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn shape_mismatch() {
        let p = ToyPolicy::<f64>::uniform(2, 2).unwrap();
        let bad =
            ToySequence { states: vec![0, 1], tokens: vec![0], old_logps: vec![0.0], ref_logps: None, advantage: 1.0 };
        let batch = ToyBatch { groups: vec![ToyGroup { drafts: vec![bad.clone()], revisions: vec![vec![bad]] }] };
        let obj = ToyObjective { clip_eps: 0.2, kl_beta: 0.0, lambda: 0.5 };
        assert_eq!(toy_dual_stage_grad(&p, &batch, obj), Err(GrpoError::ShapeMismatch));
    }

    #[test]
    fn sampling_follows_probs() {
        let p = ToyPolicy::new(1, 2, vec![0.0, 3f64.ln()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ones = (0..4000).filter(|_| p.sample(0, &mut rng).unwrap() == 1).count();
        assert!((ones as f64 / 4000.0 - 0.75).abs() < 0.03);
    }
}
