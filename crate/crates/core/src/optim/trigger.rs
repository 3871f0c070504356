/// Non-monotone switch rule: fires when the latest metric (lower is better)
/// is not better than the best value in the `window` entries before it.
pub fn asgd_switch(window: usize, history: &[f64]) -> bool {
    if window == 0 || history.len() <= window {
        return false;
    }
    let (latest, earlier) = history.split_last().expect("non-empty");
    let best = earlier[earlier.len() - window..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    *latest >= best
}

/// Latching form of [`asgd_switch`]: once fired it stays fired.
#[derive(Clone, Debug, PartialEq)]
pub struct NonMonotoneTrigger {
    window: usize,
    history: Vec<f64>,
    fired_at: Option<usize>,
}

impl NonMonotoneTrigger {
    pub fn new(window: usize) -> Self {
        NonMonotoneTrigger {
            window: window.max(1),
            history: Vec::new(),
            fired_at: None,
        }
    }

    /// Records a metric; returns whether the trigger has fired.
    pub fn observe(&mut self, metric: f64) -> bool {
        self.history.push(metric);
        if self.fired_at.is_none() && asgd_switch(self.window, &self.history) {
            self.fired_at = Some(self.history.len() - 1);
        }
        self.fired()
    }

    pub fn fired(&self) -> bool {
        self.fired_at.is_some()
    }

    /// Index of the observation that fired the trigger.
    pub fn fired_at(&self) -> Option<usize> {
        self.fired_at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_examples() {
        assert!(!asgd_switch(1, &[5.0, 4.0, 3.0, 2.0]));
        assert!(asgd_switch(1, &[3.0, 2.0, 2.5]));
        assert!(!asgd_switch(1, &[]));
        assert!(!asgd_switch(3, &[3.0, 2.0, 2.5]));
        assert!(asgd_switch(2, &[3.0, 2.0, 2.5, 2.2]));
    }

    #[test]
    fn trigger_latches() {
        let mut t = NonMonotoneTrigger::new(1);
        assert!(!t.observe(3.0));
        assert!(!t.observe(2.0));
        assert!(t.observe(2.5));
        assert!(t.observe(1.0));
        assert_eq!(t.fired_at(), Some(2));
    }
}
