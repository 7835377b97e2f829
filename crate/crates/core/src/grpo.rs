//! Group-relative advantages: rewards standardized within a prompt's group.

use thiserror::Error;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("a group needs at least one reward")]
    Empty,
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("reward {index} is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    prompt_id: String,
    rewards: Vec<f64>,
    epsilon: f64,
}

impl RolloutGroup {
    pub fn new(
        prompt_id: impl Into<String>,
        rewards: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self, GroupError> {
        if rewards.is_empty() {
            return Err(GroupError::Empty);
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(GroupError::BadEpsilon(epsilon));
        }
        if let Some(index) = rewards.iter().position(|r| !r.is_finite()) {
            return Err(GroupError::NonFinite { index });
        }
        Ok(RolloutGroup {
            prompt_id: prompt_id.into(),
            rewards,
            epsilon,
        })
    }

    pub fn prompt_id(&self) -> &str {
        &self.prompt_id
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Arithmetic mean and population standard deviation (divisor G).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn group_statistics(g: &RolloutGroup) -> (f64, f64) {
    mean_std(&g.rewards)
}

/// `(r_i - mean) / (std + epsilon)` for each reward.
pub fn group_advantages(g: &RolloutGroup) -> Vec<f64> {
    let (mean, std) = group_statistics(g);
    let denom = std + g.epsilon;
    g.rewards.iter().map(|r| (r - mean) / denom).collect()
}
