use crate::error::{Error, Result};

/// Piecewise-constant learning rate: `base · factor^k` after the `k`-th
/// milestone step has been reached.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    base: f64,
    factor: f64,
    milestones: Vec<u64>,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Result<Self> {
        Self::piecewise(lr, 1.0, Vec::new())
    }

    pub fn piecewise(base: f64, factor: f64, milestones: Vec<u64>) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {base}")));
        }
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("decay factor must be positive, got {factor}")));
        }
        if milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("decay milestones must be strictly increasing"));
        }
        Ok(LrSchedule {
            base,
            factor,
            milestones,
        })
    }

    /// Learning rate `γ_t` used by step `t` (0-based).
    pub fn lr_at(&self, t: u64) -> f64 {
        let mut lr = self.base;
        for &m in &self.milestones {
            if t >= m {
                lr *= self.factor;
            }
        }
        lr
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn milestones(&self) -> &[u64] {
        &self.milestones
    }

    pub fn is_constant(&self) -> bool {
        self.milestones.is_empty() || self.factor == 1.0
    }

    /// True when step `t` uses a different rate than step `t − 1`.
    pub fn is_boundary(&self, t: u64) -> bool {
        self.factor != 1.0 && self.milestones.contains(&t)
    }

    /// `γ_0, …, γ_{T−1}`.
    pub fn rates(&self, steps: u64) -> Vec<f64> {
        (0..steps).map(|t| self.lr_at(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decays_at_milestones() {
        let s = LrSchedule::piecewise(0.1, 0.1, vec![100, 200]).unwrap();
        assert_eq!(s.lr_at(0), 0.1);
        assert_eq!(s.lr_at(99), 0.1);
        assert_eq!(s.lr_at(100), 0.1 * 0.1);
        assert_eq!(s.lr_at(250), 0.1 * 0.1 * 0.1);
        assert!(s.is_boundary(100) && !s.is_boundary(101));
        assert!(!s.is_constant());
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(LrSchedule::constant(0.0).is_err());
        assert!(LrSchedule::piecewise(0.1, 0.1, vec![5, 5]).is_err());
        assert!(LrSchedule::piecewise(0.1, -1.0, vec![]).is_err());
    }
}
