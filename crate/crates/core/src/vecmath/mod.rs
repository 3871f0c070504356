//! Flat real-vector arithmetic, norms, seeded randomness and checkpoints.
//!
//! All reductions run left to right in index order so that trajectories are
//! bitwise reproducible.

mod checkpoint;
mod hexfloat;
mod rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use hexfloat::{format_hex, parse_hex};
pub use rng::{RngStream, RNG_ALGORITHM};

use std::ops::Index;

use crate::error::{Error, Result};

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// A fixed-length vector of finite `f64` values.
///
/// Holds model parameters, momentum buffers, residuals and gradients.
/// Every constructor and arithmetic operation rejects non-finite results.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(d: usize) -> Self {
        ParamVector(vec![0.0; d])
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        check_finite(&data, "vector construction")?;
        Ok(ParamVector(data))
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::from_vec(data.to_vec())
    }

    /// Builds a vector by evaluating `f` at every index.
    pub fn from_fn(d: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::from_vec((0..d).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Result<ParamVector> {
        self.map(|a| c * a, "scale")
    }

    /// `self + c * other`.
    pub fn axpy(&self, other: &ParamVector, c: f64) -> Result<ParamVector> {
        self.zip_with(other, "axpy", |a, b| a + c * b)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64, context: &'static str) -> Result<ParamVector> {
        let data: Vec<f64> = self.0.iter().map(|&a| f(a)).collect();
        check_finite(&data, context)?;
        Ok(ParamVector(data))
    }

    pub fn zip_with(
        &self,
        other: &ParamVector,
        context: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<ParamVector> {
        self.check_len(other)?;
        let data: Vec<f64> = self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect();
        check_finite(&data, context)?;
        Ok(ParamVector(data))
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_len(other)?;
        let mut acc = 0.0;
        for (a, b) in self.0.iter().zip(&other.0) {
            acc += a * b;
        }
        Ok(acc)
    }

    pub fn norm(&self, p: Norm) -> f64 {
        match p {
            Norm::L1 => self.norm1(),
            Norm::L2 => self.norm2(),
        }
    }

    pub fn norm1(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.0 {
            acc += a.abs();
        }
        acc
    }

    pub fn norm2_sq(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.0 {
            acc += a * a;
        }
        acc
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn check_len(&self, other: &ParamVector) -> Result<()> {
        check_dim(self.len(), other.len())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a ParamVector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_finite(data: &[f64], context: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_slice(v).unwrap()
    }

    #[test]
    fn elementwise_ops() {
        assert_eq!(pv(&[1.0, 2.0]).sub(&pv(&[1.0, 2.0])).unwrap(), pv(&[0.0, 0.0]));
        assert_eq!(pv(&[1.0, 0.0]).axpy(&pv(&[0.0, 1.0]), 2.0).unwrap(), pv(&[1.0, 2.0]));
        assert_eq!(pv(&[3.0, -3.0]).scale(1.0 / 3.0).unwrap(), pv(&[1.0, -1.0]));
        assert_eq!(pv(&[1.0, 2.0]).add(&pv(&[3.0, 4.0])).unwrap(), pv(&[4.0, 6.0]));
    }

    #[test]
    fn inputs_unchanged() {
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[5.0, 7.0]);
        let _ = a.axpy(&b, 3.0).unwrap();
        assert_eq!(a, pv(&[1.0, 2.0]));
        assert_eq!(b, pv(&[5.0, 7.0]));
    }

    #[test]
    fn norms() {
        assert_eq!(pv(&[1.0, -2.0, 3.0]).norm(Norm::L1), 6.0);
        assert_eq!(pv(&[3.0, 4.0]).norm(Norm::L2), 5.0);
        assert_eq!(ParamVector::zeros(4).norm(Norm::L1), 0.0);
        assert_eq!(pv(&[-7.0, 2.0]).norm_inf(), 7.0);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let err = pv(&[1.0]).add(&pv(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, found: 2 }));
        assert!(pv(&[1.0]).dot(&pv(&[])).is_err());
    }

    #[test]
    fn non_finite_is_reported() {
        assert!(ParamVector::from_vec(vec![1.0, f64::NAN]).is_err());
        let err = pv(&[f64::MAX]).scale(10.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { context: "scale" }));
    }
}
