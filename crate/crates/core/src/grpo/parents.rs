use rand::seq::SliceRandom;
use rand::Rng;

use crate::grpo::GrpoError;

/// Pick `k` revision parents spanning correct and incorrect drafts.
///
/// Quotas are ⌈k/2⌉ incorrect and ⌊k/2⌋ correct, drawn uniformly without
/// replacement inside each class; a class short of its quota is topped up
/// from the other. Returned indices are sorted.
pub fn select_parents<R: Rng + ?Sized>(correct_flags: &[bool], k: usize, rng: &mut R) -> Result<Vec<usize>, GrpoError> {
    let g = correct_flags.len();
    if k == 0 || k > g {
        return Err(GrpoError::BadParentCount { k, g });
    }
    let (correct, incorrect): (Vec<usize>, Vec<usize>) = (0..g).partition(|&i| correct_flags[i]);

    let want_incorrect = k.div_ceil(2);
    let want_correct = k / 2;
    let mut take_incorrect = want_incorrect.min(incorrect.len());
    let mut take_correct = want_correct.min(correct.len());
    if take_incorrect < want_incorrect {
        take_correct = (k - take_incorrect).min(correct.len());
    } else if take_correct < want_correct {
        take_incorrect = (k - take_correct).min(incorrect.len());
    }

    let mut out: Vec<usize> = incorrect
        .choose_multiple(rng, take_incorrect)
        .chain(correct.choose_multiple(rng, take_correct))
        .copied()
        .collect();
    out.sort_unstable();
    Ok(out)
}
