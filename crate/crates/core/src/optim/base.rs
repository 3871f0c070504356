//! Base optimizers. Each one turns a gradient into a step `s_t` and the next
//! point `x − s_t`; the residual wrapper consumes the step directly.

use super::schedule::LrSchedule;
use crate::error::{Error, Result};
use crate::vecmath::{check_dim, ParamVector};

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum BaseKind {
    Sgd,
    /// Heavy ball: `v ← m·v + g`, step `γ·v`.
    Sgdm {
        momentum: f64,
    },
    /// SGD whose post-step points are Polyak-averaged once averaging starts,
    /// either at a fixed step or when [`BaseOptimizer::start_averaging`] is called.
    Asgd {
        averaging_start: Option<u64>,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Adagrad {
        eps: f64,
    },
}

impl BaseKind {
    pub fn adam() -> Self {
        BaseKind::Adam {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    pub fn adagrad() -> Self {
        BaseKind::Adagrad { eps: ADAGRAD_EPS }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaseKind::Sgd | BaseKind::Asgd { .. } => true,
            BaseKind::Sgdm { momentum } => (0.0..1.0).contains(&momentum),
            BaseKind::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
            BaseKind::Adagrad { eps } => eps > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid optimizer constants {self:?}")))
        }
    }
}

/// Output of one base update.
#[derive(Clone, Debug, PartialEq)]
pub struct Advance {
    /// `x − step`.
    pub next: ParamVector,
    pub step: ParamVector,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct BaseOptimizer {
    kind: BaseKind,
    schedule: LrSchedule,
    t: u64,
    dim: usize,
    velocity: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    accumulator: Vec<f64>,
    averaging: bool,
    average: Option<ParamVector>,
    averaged_points: u64,
}

impl BaseOptimizer {
    pub fn new(kind: BaseKind, schedule: LrSchedule, dim: usize) -> Result<Self> {
        kind.validate()?;
        let buf = |used: bool| if used { vec![0.0; dim] } else { Vec::new() };
        Ok(BaseOptimizer {
            velocity: buf(matches!(kind, BaseKind::Sgdm { .. })),
            first_moment: buf(matches!(kind, BaseKind::Adam { .. })),
            second_moment: buf(matches!(kind, BaseKind::Adam { .. })),
            accumulator: buf(matches!(kind, BaseKind::Adagrad { .. })),
            kind,
            schedule,
            t: 0,
            dim,
            averaging: false,
            average: None,
            averaged_points: 0,
        })
    }

    pub fn kind(&self) -> &BaseKind {
        &self.kind
    }

    pub fn schedule(&self) -> &LrSchedule {
        &self.schedule
    }

    /// Steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Learning rate of the next step.
    pub fn current_lr(&self) -> f64 {
        self.schedule.lr_at(self.t)
    }

    /// Momentum buffer `v_t` (SGDm only).
    pub fn velocity(&self) -> Option<ParamVector> {
        match self.kind {
            BaseKind::Sgdm { .. } => ParamVector::from_slice(&self.velocity).ok(),
            _ => None,
        }
    }

    pub fn advance(&mut self, x: &ParamVector, g: &ParamVector) -> Result<Advance> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, g.len())?;
        let lr = self.schedule.lr_at(self.t);
        let step: Vec<f64> = match self.kind {
            BaseKind::Sgd | BaseKind::Asgd { .. } => g.iter().map(|gi| lr * gi).collect(),
            BaseKind::Sgdm { momentum } => {
                for (v, gi) in self.velocity.iter_mut().zip(g) {
                    *v = momentum * *v + gi;
                }
                self.velocity.iter().map(|v| lr * v).collect()
            }
            BaseKind::Adam { beta1, beta2, eps } => {
                let n = (self.t + 1) as i32;
                let c1 = 1.0 - beta1.powi(n);
                let c2 = 1.0 - beta2.powi(n);
                let mut out = Vec::with_capacity(self.dim);
                for ((m, v), gi) in self.first_moment.iter_mut().zip(self.second_moment.iter_mut()).zip(g) {
                    *m = beta1 * *m + (1.0 - beta1) * gi;
                    *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                    out.push(lr * (*m / c1) / ((*v / c2).sqrt() + eps));
                }
                out
            }
            BaseKind::Adagrad { eps } => {
                let mut out = Vec::with_capacity(self.dim);
                for (a, gi) in self.accumulator.iter_mut().zip(g) {
                    *a += gi * gi;
                    out.push(lr * gi / (a.sqrt() + eps));
                }
                out
            }
        };
        let step = ParamVector::from_vec(step).map_err(|_| Error::NonFinite {
            context: "optimizer step",
        })?;
        let next = x.sub(&step)?;
        if let BaseKind::Asgd {
            averaging_start: Some(start),
        } = self.kind
        {
            if self.t >= start {
                self.averaging = true;
            }
        }
        if self.averaging {
            self.accumulate_average(&next)?;
        }
        self.t += 1;
        Ok(Advance { next, step, lr })
    }

    /// One update from `x`; returns the next point.
    pub fn base_step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        Ok(self.advance(x, g)?.next)
    }

    fn accumulate_average(&mut self, point: &ParamVector) -> Result<()> {
        self.averaged_points += 1;
        self.average = Some(match self.average.take() {
            None => point.clone(),
            Some(avg) => {
                let k = self.averaged_points as f64;
                avg.zip_with(point, "average", |a, p| a + (p - a) / k)?
            }
        });
        Ok(())
    }

    /// Switches on Polyak averaging (ASGD only; a no-op otherwise).
    pub fn start_averaging(&mut self) {
        if matches!(self.kind, BaseKind::Asgd { .. }) {
            self.averaging = true;
        }
    }

    pub fn averaging_active(&self) -> bool {
        self.averaging
    }

    /// Running average of post-step points, once averaging has started.
    pub fn average(&self) -> Option<&ParamVector> {
        self.average.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_slice(v).unwrap()
    }

    fn constant(kind: BaseKind, lr: f64, dim: usize) -> BaseOptimizer {
        BaseOptimizer::new(kind, LrSchedule::constant(lr).unwrap(), dim).unwrap()
    }

    #[test]
    fn sgd_step() {
        let mut b = constant(BaseKind::Sgd, 0.1, 1);
        assert_eq!(b.base_step(&pv(&[1.0]), &pv(&[1.0])).unwrap(), pv(&[0.9]));
    }

    #[test]
    fn sgdm_trace() {
        let mut b = constant(BaseKind::Sgdm { momentum: 0.9 }, 0.1, 1);
        let x1 = b.base_step(&pv(&[1.0]), &pv(&[1.0])).unwrap();
        assert_eq!(b.velocity().unwrap(), pv(&[1.0]));
        assert_eq!(x1, pv(&[0.9]));
        let x2 = b.base_step(&x1, &pv(&[1.0])).unwrap();
        assert_eq!(b.velocity().unwrap(), pv(&[1.9]));
        assert!((x2[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_matches_sgd() {
        let mut a = constant(BaseKind::Sgdm { momentum: 0.0 }, 0.05, 3);
        let mut b = constant(BaseKind::Sgd, 0.05, 3);
        let (mut xa, mut xb) = (pv(&[1.0, -2.0, 0.5]), pv(&[1.0, -2.0, 0.5]));
        for k in 0..50 {
            let g = pv(&[(k as f64).sin(), 0.3 * xa[1], -xa[2]]);
            xa = a.base_step(&xa, &g).unwrap();
            xb = b.base_step(&xb, &g).unwrap();
            assert_eq!(xa, xb);
        }
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        // Bias correction makes the first Adam step γ·g/(|g| + ε).
        let mut b = constant(BaseKind::adam(), 0.01, 2);
        let x = b.base_step(&pv(&[0.0, 0.0]), &pv(&[4.0, -0.5])).unwrap();
        assert!((x[0] + 0.01).abs() < 1e-9 && (x[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn adagrad_accumulates() {
        let mut b = constant(BaseKind::adagrad(), 1.0, 1);
        let x1 = b.base_step(&pv(&[0.0]), &pv(&[3.0])).unwrap();
        assert!((x1[0] + 1.0).abs() < 1e-9);
        let x2 = b.base_step(&x1, &pv(&[4.0])).unwrap();
        assert!((x2[0] - (x1[0] - 4.0 / 5.0)).abs() < 1e-9);
    }

    #[test]
    fn asgd_averages_after_start() {
        let mut b = constant(
            BaseKind::Asgd {
                averaging_start: Some(2),
            },
            1.0,
            1,
        );
        let mut x = pv(&[10.0]);
        let mut points = Vec::new();
        for _ in 0..5 {
            x = b.base_step(&x, &pv(&[1.0])).unwrap();
            points.push(x[0]);
        }
        assert!(b.averaging_active());
        let expected = (points[2] + points[3] + points[4]) / 3.0;
        assert!((b.average().unwrap()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let mut b = constant(BaseKind::Sgd, 0.1, 2);
        assert!(b.base_step(&pv(&[1.0]), &pv(&[1.0, 2.0])).is_err());
        let mut huge = constant(BaseKind::Sgd, 1e300, 1);
        assert!(huge.base_step(&pv(&[0.0]), &pv(&[1e300])).is_err());
        assert!(BaseOptimizer::new(BaseKind::Sgdm { momentum: 1.0 }, LrSchedule::constant(0.1).unwrap(), 1).is_err());
    }
}
