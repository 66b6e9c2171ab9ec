use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Multiplier on the windowed improvement.
    pub scale: f64,
    /// Number of earlier steps compared against.
    pub window: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            scale: 10.0,
            window: 5,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("reward scale {} must be positive", self.scale)));
        }
        Ok(())
    }
}

/// Mean improvement of the latest fitness over the last `window` entries
/// (and itself), times `scale`:
///
/// `r_t = scale · Σ_{l=max(0,t-ϑ)}^{t} (F_t - F_l) / (min(ϑ, t) + 1)`.
pub fn compute_reward(history: &[f64], cfg: &RewardConfig) -> Result<f64> {
    let Some(&latest) = history.last() else {
        return Err(Error::invalid("reward needs a nonempty fitness history"));
    };
    let t = history.len() - 1;
    let start = t.saturating_sub(cfg.window);
    let total: f64 = history[start..].iter().map(|&f| latest - f).sum();
    Ok(cfg.scale * total / (cfg.window.min(t) + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(window: usize) -> RewardConfig {
        RewardConfig { scale: 10.0, window }
    }

    #[test]
    fn constant_history_gives_zero() {
        assert_eq!(compute_reward(&[0.4; 9], &cfg(5)).unwrap(), 0.0);
    }

    #[test]
    fn full_window_example() {
        let r = compute_reward(&[0.5, 0.6, 0.7], &cfg(2)).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_window_example() {
        let r = compute_reward(&[0.5, 0.7], &cfg(5)).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_history_rejected() {
        assert!(compute_reward(&[], &cfg(5)).is_err());
    }
}
