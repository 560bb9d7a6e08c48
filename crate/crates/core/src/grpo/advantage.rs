use crate::grpo::GrpoError;
use crate::scalar::Real;

/// Group-relative advantages `(r_i - mean) / (std + eps)` with the
/// population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet<T = f64> {
    values: Vec<T>,
    mean: T,
    std: T,
    epsilon: T,
}

impl<T: Real> AdvantageSet<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn std(&self) -> T {
        self.std
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn group_advantages<T: Real>(rewards: &[T], epsilon: T) -> Result<AdvantageSet<T>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if epsilon.is_nan() || epsilon <= T::zero() {
        return Err(GrpoError::BadParameter("epsilon must be positive"));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(GrpoError::NonFinite);
    }
    let n = T::of_usize(rewards.len());
    // Work relative to the first reward: a constant added to every reward
    // cancels here before any rounding happens.
    let pivot = rewards[0];
    let shifted: Vec<T> = rewards.iter().map(|&r| r - pivot).collect();
    let shifted_mean = shifted.iter().copied().sum::<T>() / n;
    let centered: Vec<T> = shifted.iter().map(|&d| d - shifted_mean).collect();
    let var = centered.iter().map(|&c| c * c).sum::<T>() / n;
    let std = var.sqrt();
    let denom = std + epsilon;
    Ok(AdvantageSet { values: centered.iter().map(|&c| c / denom).collect(), mean: pivot + shifted_mean, std, epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_group_is_zero() {
        let a = group_advantages(&[2.0, 2.0, 2.0], 1e-4).unwrap();
        assert_eq!(a.values(), &[0.0, 0.0, 0.0]);
        assert_eq!(a.std(), 0.0);
        assert_eq!(a.mean(), 2.0);
    }

    #[test]
    fn too_small() {
        assert_eq!(group_advantages(&[1.0f64], 1e-4), Err(GrpoError::GroupTooSmall(1)));
        assert_eq!(group_advantages::<f64>(&[], 1e-4), Err(GrpoError::GroupTooSmall(0)));
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(group_advantages(&[1.0, f64::NAN], 1e-4), Err(GrpoError::NonFinite));
    }

    #[test]
    fn shift_is_exact() {
        let a = group_advantages(&[1.0, 2.0, 3.0], 1e-4).unwrap();
        let b = group_advantages(&[11.0, 12.0, 13.0], 1e-4).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn works_in_f32() {
        let a = group_advantages(&[0.0f32, 1.0], 1e-4).unwrap();
        assert!((a.values()[1] - 0.5 / 0.5001).abs() < 1e-6);
    }
}
