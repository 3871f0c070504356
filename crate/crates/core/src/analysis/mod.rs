//! Bound evaluators, twin-training stability measurements, and the
//! generalization-gap and proximity metrics.

mod bounds;
mod stability;

use std::io::Write;

pub use bounds::{
    best_c2, bound_corollary_scale, bound_stability_convex, bound_stability_nonconvex, bound_theorem4,
    sgd_convergence_bound, sgd_stability_convex, sgd_stability_nonconvex, BoundInputs,
};
pub use stability::{mean_stderr, run_pair, twin_training, PairTrace, ReplaceMode, StabilityTrace, TwinConfig};

use crate::error::{Error, Result};
use crate::problems::{Dataset, Problem};
use crate::vecmath::ParamVector;

/// `R_train(x) − R_heldout(x)`, with the heldout risk standing in for the
/// population risk.
pub fn generalization_gap(problem: &Problem, x: &ParamVector, train: &Dataset, heldout: &Dataset) -> Result<f64> {
    Ok(problem.empirical_risk(x, train)? - problem.empirical_risk(x, heldout)?)
}

/// `‖x_wrapped − x_ref‖₁ / ‖x_ref‖₁`.
pub fn proximity(x_wrapped: &ParamVector, x_ref: &ParamVector) -> Result<f64> {
    x_wrapped.check_len(x_ref)?;
    crate::optim::proximity_of(x_wrapped, x_ref)
        .ok_or_else(|| Error::Precondition("proximity needs a nonzero reference point".into()))
}

/// One row of a bound report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub t: u64,
    pub empirical: f64,
    pub bound: f64,
}

impl BoundRow {
    pub fn slack(&self) -> f64 {
        self.bound - self.empirical
    }
}

/// Writes `t,empirical,bound,slack`.
pub fn write_bound_report<W: Write>(mut w: W, rows: &[BoundRow]) -> Result<()> {
    writeln!(w, "t,empirical,bound,slack")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.empirical, r.bound, r.slack())?;
    }
    Ok(())
}

/// Writes `t,divergence,stderr`.
pub fn write_stability_trace<W: Write>(mut w: W, trace: &StabilityTrace) -> Result<()> {
    writeln!(w, "t,divergence,stderr")?;
    for (t, (d, s)) in trace.divergence.iter().zip(&trace.divergence_stderr).enumerate() {
        writeln!(w, "{t},{d},{s}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::generate_blobs;

    #[test]
    fn proximity_examples() {
        let x = ParamVector::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(proximity(&x, &x).unwrap(), 0.0);
        let y = x.scale(1.01).unwrap();
        assert!((proximity(&y, &x).unwrap() - 0.01).abs() < 1e-14);
        assert!(proximity(&x, &ParamVector::zeros(3)).is_err());
    }

    #[test]
    fn gap_on_same_data_is_zero() {
        let data = generate_blobs(3, 4, 2, 1.0, 1).unwrap();
        let p = Problem::logistic(2, 3).unwrap();
        let x = ParamVector::from_fn(p.dimension(), |i| 0.1 * i as f64).unwrap();
        assert_eq!(generalization_gap(&p, &x, &data, &data).unwrap(), 0.0);
    }

    #[test]
    fn report_format() {
        let mut out = Vec::new();
        write_bound_report(
            &mut out,
            &[BoundRow {
                t: 3,
                empirical: 0.5,
                bound: 2.0,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "t,empirical,bound,slack\n3,0.5,2,1.5\n"
        );
    }
}
