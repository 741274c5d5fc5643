//! Band radii and one-sample confidence bands.
//!
//! The fixed-n radius comes from the DKW inequality with Massart's constant,
//! `P[||F_n - F|| > eps] <= 2 exp(-2 n eps^2)`. The three sequential radii are
//! drop-in replacements that hold simultaneously for every `n`, so bands built
//! from them may be inspected after every observation:
//!
//! ```text
//! fixed           sqrt(ln(2/alpha) / 2n)
//! darling-robbins sqrt((n+1)(2 ln n - ln(alpha (n* - 1))) / n^2)      n >= n*
//! szorenyi        sqrt(ln(pi^2 n^2 / (3 alpha)) / 2n)
//! howard          0.85 sqrt((ln ln(e n) + 0.8 ln(1612 / alpha)) / n)
//! ```
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::empirical::{ArmSample, ExtendedReal};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which radius formula a band uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMethod {
    FixedDkwm,
    DarlingRobbins,
    Szorenyi,
    Howard,
}

impl EpsilonMethod {
    pub fn is_sequential(self) -> bool {
        self != EpsilonMethod::FixedDkwm
    }

    pub fn name(self) -> &'static str {
        match self {
            EpsilonMethod::FixedDkwm => "fixed",
            EpsilonMethod::DarlingRobbins => "darling",
            EpsilonMethod::Szorenyi => "szorenyi",
            EpsilonMethod::Howard => "howard",
        }
    }
}

pub const DEFAULT_N_STAR: usize = 2;

/// Radius formula plus significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpsilonSpec<T> {
    method: EpsilonMethod,
    alpha: T,
    n_star: usize,
}

impl<T: Scalar> EpsilonSpec<T> {
    pub fn new(method: EpsilonMethod, alpha: T, n_star: usize) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if method == EpsilonMethod::DarlingRobbins && n_star < 2 {
            return Err(Error::InvalidConfig(format!("n_star must be at least 2, got {n_star}")));
        }
        Ok(Self { method, alpha, n_star })
    }

    pub fn fixed(alpha: T) -> Result<Self> {
        Self::new(EpsilonMethod::FixedDkwm, alpha, DEFAULT_N_STAR)
    }

    pub fn howard(alpha: T) -> Result<Self> {
        Self::new(EpsilonMethod::Howard, alpha, DEFAULT_N_STAR)
    }

    pub fn szorenyi(alpha: T) -> Result<Self> {
        Self::new(EpsilonMethod::Szorenyi, alpha, DEFAULT_N_STAR)
    }

    pub fn darling_robbins(alpha: T, n_star: usize) -> Result<Self> {
        Self::new(EpsilonMethod::DarlingRobbins, alpha, n_star)
    }

    pub fn method(&self) -> EpsilonMethod {
        self.method
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn n_star(&self) -> usize {
        self.n_star
    }

    /// Same formula at a different level. Used for the `alpha / 2` split
    /// between arms; the level is not re-validated against `(0, 1)` so that
    /// root finders may probe `alpha` up to 2.
    pub fn with_alpha(&self, alpha: T) -> Self {
        Self { alpha, ..*self }
    }

    /// Smallest sample size the formula is defined for.
    pub fn min_n(&self) -> usize {
        match self.method {
            EpsilonMethod::DarlingRobbins => self.n_star,
            _ => 1,
        }
    }

    /// Band radius `eps_n(alpha)`.
    pub fn radius(&self, n: usize) -> Result<T> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if n < self.min_n() {
            return Err(Error::BelowNStar { n, n_star: self.n_star });
        }
        Ok(radius_at(self.method, self.alpha, n, self.n_star))
    }

    /// The level at which the radius for `n` observations equals `r`, i.e.
    /// the inverse of [`EpsilonSpec::radius`] in `alpha`. May exceed 1.
    pub fn alpha_for_radius(&self, n: usize, r: T) -> T {
        let nf = T::from_count(n);
        let log_alpha = match self.method {
            EpsilonMethod::FixedDkwm => T::LN_2() - T::lit(2.0) * nf * r * r,
            EpsilonMethod::Szorenyi => {
                (T::PI() * T::PI() * nf * nf / T::lit(3.0)).ln() - T::lit(2.0) * nf * r * r
            }
            EpsilonMethod::Howard => {
                let scaled = r / T::lit(0.85);
                T::lit(1612.0).ln() - (scaled * scaled * nf - (T::E() * nf).ln().ln()) / T::lit(0.8)
            }
            EpsilonMethod::DarlingRobbins => {
                T::lit(2.0) * nf.ln()
                    - r * r * nf * nf / (nf + T::one())
                    - T::from_count(self.n_star - 1).ln()
            }
        };
        log_alpha.exp()
    }
}

/// `eps_n(alpha)` for each method, without validation.
pub(crate) fn radius_at<T: Scalar>(method: EpsilonMethod, alpha: T, n: usize, n_star: usize) -> T {
    let nf = T::from_count(n);
    let two = T::lit(2.0);
    match method {
        EpsilonMethod::FixedDkwm => ((two / alpha).ln() / (two * nf)).sqrt(),
        EpsilonMethod::DarlingRobbins => {
            let inner = two * nf.ln() - (alpha * T::from_count(n_star - 1)).ln();
            ((nf + T::one()) * inner / (nf * nf)).sqrt()
        }
        EpsilonMethod::Szorenyi => {
            ((T::PI() * T::PI() * nf * nf / (T::lit(3.0) * alpha)).ln() / (two * nf)).sqrt()
        }
        EpsilonMethod::Howard => {
            let iterated = (T::E() * nf).ln().ln();
            T::lit(0.85) * ((iterated + T::lit(0.8) * (T::lit(1612.0) / alpha).ln()) / nf).sqrt()
        }
    }
}

/// What a [`BandCurve`] bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    Cdf,
    Quantile,
    Diff,
    AbsDiff,
}

/// Piecewise-constant lower and upper envelopes over an evaluation grid.
///
/// For x-indexed kinds the value at `grid[i]` holds on `[grid[i], grid[i+1])`;
/// a leading `NegInf` grid point stands for everything below the smallest
/// observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCurve<T> {
    pub kind: BandKind,
    pub grid: Vec<ExtendedReal<T>>,
    pub lower: Vec<ExtendedReal<T>>,
    pub upper: Vec<ExtendedReal<T>>,
    pub alpha: T,
}

impl<T: Scalar> BandCurve<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Clamped `[max(0, F - eps), min(1, F + eps)]`.
pub(crate) fn clamp_band<T: Scalar>(f: T, eps: T) -> (T, T) {
    ((f - eps).max(T::zero()), (f + eps).min(T::one()))
}

/// Distribution-function band `[max(0, F_n - eps), min(1, F_n + eps)]`
/// evaluated below the minimum and at every distinct sample value.
pub fn cdf_band<T: Scalar>(s: &ArmSample<T>, spec: &EpsilonSpec<T>) -> Result<BandCurve<T>> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let eps = spec.radius(s.len())?;
    let n = T::from_count(s.len());
    let values = s.values();
    let mut grid = vec![ExtendedReal::NegInf];
    let mut lower = Vec::with_capacity(values.len() + 1);
    let mut upper = Vec::with_capacity(values.len() + 1);
    let (lo, hi) = clamp_band(T::zero(), eps);
    lower.push(ExtendedReal::Finite(lo));
    upper.push(ExtendedReal::Finite(hi));
    let mut i = 0;
    while i < values.len() {
        let x = values[i];
        while i < values.len() && values[i] == x {
            i += 1;
        }
        let (lo, hi) = clamp_band(T::from_count(i) / n, eps);
        grid.push(ExtendedReal::Finite(x));
        lower.push(ExtendedReal::Finite(lo));
        upper.push(ExtendedReal::Finite(hi));
    }
    Ok(BandCurve { kind: BandKind::Cdf, grid, lower, upper, alpha: spec.alpha() })
}

/// Export grid for quantile bands: 0.01, 0.02, ..., 0.99.
pub fn default_quantile_probs<T: Scalar>() -> Vec<T> {
    (1..100).map(|k| T::from_count(k) / T::lit(100.0)).collect()
}

/// Quantile-function band: `upper(p) = Q_n(p + eps)`, `lower(p) = Q_n^<-(p - eps)`.
pub fn quantile_band<T: Scalar>(s: &ArmSample<T>, spec: &EpsilonSpec<T>, probs: &[T]) -> Result<BandCurve<T>> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let eps = spec.radius(s.len())?;
    let mut lower = Vec::with_capacity(probs.len());
    let mut upper = Vec::with_capacity(probs.len());
    for &p in probs {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidProbability(p.as_f64()));
        }
        let shifted_down = p - eps;
        lower.push(if shifted_down > T::one() {
            ExtendedReal::PosInf
        } else {
            s.lower_quantile(shifted_down)?
        });
        upper.push(s.upper_quantile(p + eps)?);
    }
    Ok(BandCurve {
        kind: BandKind::Quantile,
        grid: probs.iter().map(|&p| ExtendedReal::Finite(p)).collect(),
        lower,
        upper,
        alpha: spec.alpha(),
    })
}
