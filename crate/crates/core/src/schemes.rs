//! Residual schemes: maps from a proposed parameter delta to the part that
//! is actually applied. Whatever is not applied becomes the residual.
//!
//! [`SchemeSpec::split`] is the single entry point; [`apply`] and
//! [`residual_of`] are its two halves. The split is arranged so that
//! `applied + residual == delta` holds bitwise whenever
//! `|applied_i| ≤ |delta_i|` (always true for `scale` and `topk`): the
//! residual is rounded first and the applied part is recovered as
//! `delta − residual`, which is then exact (Fast2Sum).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vecmath::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchemeSpec {
    /// `R(x) = αx`, `0 < α ≤ 1`.
    Scale { alpha: f64 },
    /// `R(x) = (‖x‖₁/d)·sign(x)` with `sign(0) = 0`.
    ScaledSign,
    /// Keep the `max(1, ⌊fraction·d⌋)` largest-magnitude components.
    TopK { fraction: f64 },
}

/// Result of splitting a delta into applied step and residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub applied: ParamVector,
    pub residual: ParamVector,
}

impl SchemeSpec {
    pub fn scale(alpha: f64) -> Result<Self> {
        let s = SchemeSpec::Scale { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn top_k(fraction: f64) -> Result<Self> {
        let s = SchemeSpec::TopK { fraction };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SchemeSpec::Scale { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::invalid(format!("scale factor must lie in (0, 1], got {alpha}")))
            }
            SchemeSpec::TopK { fraction } if !(fraction > 0.0 && fraction <= 1.0) => Err(Error::invalid(format!(
                "top-k fraction must lie in (0, 1], got {fraction}"
            ))),
            _ => Ok(()),
        }
    }

    /// Number of components kept by top-k for a vector of length `d`.
    pub fn resolved_k(fraction: f64, d: usize) -> usize {
        ((fraction * d as f64).floor() as usize).clamp(1, d.max(1))
    }

    /// The scale factor, for schemes that have one.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SchemeSpec::Scale { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// The raw scheme output before the exact split.
    fn propose(&self, delta: &[f64]) -> Vec<f64> {
        match *self {
            SchemeSpec::Scale { alpha } => delta.iter().map(|v| alpha * v).collect(),
            SchemeSpec::ScaledSign => {
                let magnitude = mean_abs(delta);
                delta
                    .iter()
                    .map(|&v| {
                        if v > 0.0 {
                            magnitude
                        } else if v < 0.0 {
                            -magnitude
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            SchemeSpec::TopK { fraction } => {
                let k = Self::resolved_k(fraction, delta.len());
                let mut out = vec![0.0; delta.len()];
                for i in top_k_indices(delta, k) {
                    out[i] = delta[i];
                }
                out
            }
        }
    }

    pub fn split(&self, delta: &ParamVector) -> Result<Split> {
        let raw = self.propose(delta.as_slice());
        let mut applied = Vec::with_capacity(raw.len());
        let mut residual = Vec::with_capacity(raw.len());
        for (&d, &a) in delta.iter().zip(&raw) {
            let r = d - a;
            if a.abs() <= d.abs() {
                applied.push(d - r);
            } else {
                applied.push(a);
            }
            residual.push(r);
        }
        Ok(Split {
            applied: ParamVector::from_vec(applied)?,
            residual: ParamVector::from_vec(residual)?,
        })
    }
}

pub fn apply(scheme: &SchemeSpec, delta: &ParamVector) -> Result<ParamVector> {
    Ok(scheme.split(delta)?.applied)
}

pub fn residual_of(scheme: &SchemeSpec, delta: &ParamVector) -> Result<ParamVector> {
    Ok(scheme.split(delta)?.residual)
}

/// Running mean of `|v_i|` in index order. Equals `‖v‖₁/d` up to rounding
/// and is exact when all magnitudes coincide.
fn mean_abs(v: &[f64]) -> f64 {
    let mut mean = 0.0;
    for (i, x) in v.iter().enumerate() {
        mean += (x.abs() - mean) / (i + 1) as f64;
    }
    mean
}

/// Indices of the `k` largest magnitudes; ties go to the lower index.
fn top_k_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    if k >= v.len() {
        return idx;
    }
    let cmp = |a: &usize, b: &usize| v[*b].abs().total_cmp(&v[*a].abs()).then(a.cmp(b));
    idx.select_nth_unstable_by(k - 1, cmp);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::Scale { alpha } => write!(f, "scale:{alpha}"),
            SchemeSpec::ScaledSign => write!(f, "sign"),
            SchemeSpec::TopK { fraction } => write!(f, "topk:{fraction}"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    /// `scale:<alpha>`, `sign`, or `topk:<fraction>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::invalid(format!("scheme {name:?} needs a numeric argument")))?;
            a.parse()
                .map_err(|_| Error::invalid(format!("bad number {a:?} in scheme {s:?}")))
        };
        match name {
            "scale" => SchemeSpec::scale(number(arg)?),
            "topk" => SchemeSpec::top_k(number(arg)?),
            "sign" if arg.is_none() => Ok(SchemeSpec::ScaledSign),
            _ => Err(Error::invalid(format!("unknown residual scheme {s:?}"))),
        }
    }
}
