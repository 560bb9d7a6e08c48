use crate::grpo::GrpoError;
use crate::scalar::Real;

/// Per-token log-probabilities of one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence<T = f64> {
    new_logps: Vec<T>,
    old_logps: Vec<T>,
    ref_logps: Option<Vec<T>>,
}

impl<T: Real> TokenSequence<T> {
    pub fn new(new_logps: Vec<T>, old_logps: Vec<T>, ref_logps: Option<Vec<T>>) -> Result<Self, GrpoError> {
        if new_logps.is_empty() {
            return Err(GrpoError::EmptySequence);
        }
        if old_logps.len() != new_logps.len() || ref_logps.as_ref().is_some_and(|r| r.len() != new_logps.len()) {
            return Err(GrpoError::LengthMismatch);
        }
        let all = new_logps.iter().chain(&old_logps).chain(ref_logps.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(GrpoError::NonFinite);
        }
        Ok(Self { new_logps, old_logps, ref_logps })
    }

    pub fn len(&self) -> usize {
        self.new_logps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_logps.is_empty()
    }

    pub fn new_logps(&self) -> &[T] {
        &self.new_logps
    }
}

/// Clip ratio and KL weight for one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipParams<T = f64> {
    pub clip_eps: T,
    pub kl_beta: T,
}

/// Loss of one sequence and its derivative with respect to each `new_logp`.
pub(crate) fn surrogate_with_grad<T: Real>(
    seq: &TokenSequence<T>,
    advantage: T,
    p: ClipParams<T>,
) -> Result<(T, Vec<T>), GrpoError> {
    if p.clip_eps.is_nan() || p.clip_eps <= T::zero() || p.kl_beta.is_nan() || p.kl_beta < T::zero() {
        return Err(GrpoError::BadParameter("clip_eps must be positive and kl_beta non-negative"));
    }
    let refs = match (&seq.ref_logps, p.kl_beta > T::zero()) {
        (Some(r), true) => Some(r.as_slice()),
        (None, true) => return Err(GrpoError::MissingRef),
        (_, false) => None,
    };
    let n = T::of_usize(seq.len());
    let (lo, hi) = (T::one() - p.clip_eps, T::one() + p.clip_eps);
    let mut surrogate = T::zero();
    let mut kl = T::zero();
    let mut grad = Vec::with_capacity(seq.len());
    for t in 0..seq.len() {
        let new = seq.new_logps[t];
        let ratio = (new - seq.old_logps[t]).exp();
        let unclipped = ratio * advantage;
        let clipped = ratio.max(lo).min(hi) * advantage;
        // d(-min)/d(new): the unclipped branch carries ratio * A, the clipped
        // branch is flat outside the trust region.
        let mut g = if unclipped <= clipped {
            surrogate = surrogate + unclipped;
            -unclipped
        } else {
            surrogate = surrogate + clipped;
            T::zero()
        };
        if let Some(refs) = refs {
            let diff = refs[t] - new;
            kl = kl + diff.exp() - diff - T::one();
            g = g + p.kl_beta * (T::one() - diff.exp());
        }
        grad.push(g / n);
    }
    Ok((-surrogate / n + p.kl_beta * kl / n, grad))
}

/// Token-mean clipped surrogate loss with k3 KL penalty:
/// `-mean_t min(ρ_t A, clip(ρ_t, 1-ε, 1+ε) A) + β mean_t kl_t`.
pub fn clipped_surrogate<T: Real>(
    seq: &TokenSequence<T>,
    advantage: T,
    clip_eps: T,
    kl_beta: T,
) -> Result<T, GrpoError> {
    surrogate_with_grad(seq, advantage, ClipParams { clip_eps, kl_beta }).map(|(loss, _)| loss)
}

/// Surrogate without clipping or KL, for comparisons.
pub fn unclipped_surrogate<T: Real>(seq: &TokenSequence<T>, advantage: T) -> T {
    let n = T::of_usize(seq.len());
    let total: T = seq.new_logps.iter().zip(&seq.old_logps).map(|(&new, &old)| (new - old).exp() * advantage).sum();
    -total / n
}

fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::of_usize(xs.len())
}

/// `(1-λ)·mean(draft) + λ·(1/K)·Σ_k mean(revise_k)`.
pub fn dual_stage_loss<T: Real>(draft_losses: &[T], revise_losses: &[Vec<T>], lambda: T) -> Result<T, GrpoError> {
    if draft_losses.is_empty() || revise_losses.is_empty() || revise_losses.iter().any(Vec::is_empty) {
        return Err(GrpoError::EmptyStage);
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(GrpoError::BadParameter("lambda must lie in [0, 1]"));
    }
    let revise_term = revise_losses.iter().map(|r| mean(r)).sum::<T>() / T::of_usize(revise_losses.len());
    Ok((T::one() - lambda) * mean(draft_losses) + lambda * revise_term)
}
