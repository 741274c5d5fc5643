//! Sorted per-arm samples with exact empirical distribution and quantile
//! functions.
//!
//! An [`ArmSample`] keeps every observation in a sorted vector, so order
//! statistics are O(1) and `F_n(x)` is a binary search. All step functions
//! built from one or two samples are constant between consecutive points of
//! [`merged_grid`] and below its minimum, which is what lets the band code
//! compute suprema and infima over the whole real line exactly.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A real number extended with the two infinities.
///
/// Quantile functions shifted by a band radius leave `[0, 1]` and become
/// unbounded; those cases are represented by the sentinels rather than by
/// IEEE infinities so that they cannot leak into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal<T> {
    NegInf,
    Finite(T),
    PosInf,
}

impl<T: Scalar> ExtendedReal<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// Maps sentinels onto the IEEE infinities.
    pub fn to_float(self) -> T {
        match self {
            ExtendedReal::NegInf => T::neg_infinity(),
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInf => T::infinity(),
        }
    }
}

/// Ordered multiset of one arm's observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound = "T: Scalar")]
pub struct ArmSample<T> {
    values: Vec<T>,
}

impl<T: Scalar> Default for ArmSample<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for ArmSample<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Self::from_values(values)
    }
}

impl<T: Scalar> From<ArmSample<T>> for Vec<T> {
    fn from(s: ArmSample<T>) -> Self {
        s.values
    }
}

impl<T: Scalar> ArmSample<T> {
    pub fn new() -> Self {
        Self { values: Vec::new() }
    }

    /// Builds a sample from unsorted observations. Non-finite values are rejected.
    pub fn from_values<I: IntoIterator<Item = T>>(values: I) -> Result<Self> {
        let mut values: Vec<T> = values.into_iter().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        Ok(Self { values })
    }

    /// Inserts one observation, keeping the storage sorted.
    pub fn insert(&mut self, x: T) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        let at = self.values.partition_point(|v| *v <= x);
        self.values.insert(at, x);
        Ok(())
    }

    /// Removes one copy of `x`; returns whether a copy was present.
    pub fn remove(&mut self, x: T) -> bool {
        let at = self.values.partition_point(|v| *v < x);
        if at < self.values.len() && self.values[at] == x {
            self.values.remove(at);
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The observations in non-decreasing order.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn min(&self) -> Option<T> {
        self.values.first().copied()
    }

    pub fn max(&self) -> Option<T> {
        self.values.last().copied()
    }

    /// Number of observations `<= x`.
    pub fn count_le(&self, x: T) -> usize {
        self.values.partition_point(|v| *v <= x)
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.values.is_empty() {
            Err(Error::EmptySample)
        } else {
            Ok(())
        }
    }

    /// Empirical distribution function `F_n(x) = #{x_i <= x} / n`.
    pub fn ecdf_at(&self, x: T) -> Result<T> {
        self.ensure_nonempty()?;
        Ok(T::from_count(self.count_le(x)) / T::from_count(self.len()))
    }

    /// Upper (right-continuous) quantile `sup{x : F_n(x) <= p}`, the
    /// `floor(n p) + 1`-th order statistic.
    pub fn upper_quantile(&self, p: T) -> Result<ExtendedReal<T>> {
        self.ensure_nonempty()?;
        if p.is_nan() {
            return Err(Error::InvalidProbability(p.as_f64()));
        }
        if p < T::zero() {
            return Ok(ExtendedReal::NegInf);
        }
        if p >= T::one() {
            return Ok(ExtendedReal::PosInf);
        }
        let n = self.len();
        let k = (T::from_count(n) * p).floor().to_usize().unwrap_or(0).min(n - 1);
        Ok(ExtendedReal::Finite(self.values[k]))
    }

    /// Lower (left-continuous) quantile `sup{x : F_n(x) < p}`, the
    /// `ceil(n p)`-th order statistic; `NegInf` for `p <= 0`.
    pub fn lower_quantile(&self, p: T) -> Result<ExtendedReal<T>> {
        self.ensure_nonempty()?;
        if p.is_nan() || p > T::one() {
            return Err(Error::InvalidProbability(p.as_f64()));
        }
        if p <= T::zero() {
            return Ok(ExtendedReal::NegInf);
        }
        let n = self.len();
        let k = (T::from_count(n) * p).ceil().to_usize().unwrap_or(1).clamp(1, n);
        Ok(ExtendedReal::Finite(self.values[k - 1]))
    }

    /// Sorted distinct values of this sample.
    pub fn distinct(&self) -> Vec<T> {
        let mut out = self.values.clone();
        out.dedup();
        out
    }
}

/// Sorted distinct union of the two samples' values.
pub fn merged_grid<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>) -> Result<Vec<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (xs, ys) = (a.values(), b.values());
    let mut out = Vec::with_capacity(xs.len() + ys.len());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if out.last() != Some(&next) {
            out.push(next);
        }
    }
    Ok(out)
}
