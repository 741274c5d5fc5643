//! Simultaneous two-arm bands and the confidence sets derived from them.
//!
//! With each arm's distribution-function band taken at `alpha / 2` the union
//! bound gives a joint `1 - alpha` statement, and the band on the difference
//! `d = F_b - F_a` follows pointwise:
//!
//! ```text
//! d_upper(x) = min(1, F_b(x) + eps_b) - max(0, F_a(x) - eps_a)
//! d_lower(x) = max(0, F_b(x) - eps_b) - min(1, F_a(x) + eps_a)
//! ```
//!
//! Every quantity is piecewise constant on the merged sample grid, so suprema
//! and infima over the real line are taken over the grid plus one point below
//! the smallest observation (both ECDFs are 0 there but the clamped band
//! edges are not symmetric). Above the largest observation both ECDFs equal 1
//! and the last grid point already covers it.

use serde::{Deserialize, Serialize};

use crate::bounds::{clamp_band, BandCurve, BandKind, EpsilonSpec};
use crate::diagnostic::Diagnostic;
use crate::empirical::{ArmSample, ExtendedReal};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScalarInterval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> ScalarInterval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Self { lo, hi }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Per-arm radii at `alpha / 2`: `(eps_a, eps_b)`.
pub fn split_radii<T: Scalar>(na: usize, nb: usize, spec: &EpsilonSpec<T>) -> Result<(T, T)> {
    let half = spec.with_alpha(spec.alpha() / T::lit(2.0));
    Ok((half.radius(na)?, half.radius(nb)?))
}

/// Calls `visit(count_a_le_x, count_b_le_x)` once per distinct value `x` of
/// the pooled samples, in increasing order.
pub(crate) fn walk_merged<T: Scalar>(a: &[T], b: &[T], mut visit: impl FnMut(T, usize, usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x <= y {
                    x
                } else {
                    y
                }
            }
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        visit(x, i, j);
    }
}

/// Suprema and infima of the difference band and of the empirical difference,
/// computed in one pass without materializing the band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffExtrema<T> {
    pub sup_lower: T,
    pub sup_upper: T,
    pub inf_lower: T,
    pub inf_upper: T,
    /// `sup d_n`; never negative because `d_n = 0` below both samples.
    pub max_diff: T,
    /// `inf d_n`; never positive.
    pub min_diff: T,
}

impl<T: Scalar> DiffExtrema<T> {
    /// Extrema for explicit per-arm radii. With both radii zero the band
    /// collapses onto the empirical difference.
    pub fn with_radii(a: &ArmSample<T>, b: &ArmSample<T>, eps_a: T, eps_b: T) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySample);
        }
        let (inv_a, inv_b) = (T::one() / T::from_count(a.len()), T::one() / T::from_count(b.len()));
        let (lo0, hi0) = point(T::zero(), T::zero(), eps_a, eps_b);
        let mut ext = DiffExtrema {
            sup_lower: lo0,
            sup_upper: hi0,
            inf_lower: lo0,
            inf_upper: hi0,
            max_diff: T::zero(),
            min_diff: T::zero(),
        };
        walk_merged(a.values(), b.values(), |_, ca, cb| {
            let fa = T::from_count(ca) * inv_a;
            let fb = T::from_count(cb) * inv_b;
            let (lo, hi) = point(fa, fb, eps_a, eps_b);
            let d = fb - fa;
            ext.sup_lower = ext.sup_lower.max(lo);
            ext.sup_upper = ext.sup_upper.max(hi);
            ext.inf_lower = ext.inf_lower.min(lo);
            ext.inf_upper = ext.inf_upper.min(hi);
            ext.max_diff = ext.max_diff.max(d);
            ext.min_diff = ext.min_diff.min(d);
        });
        Ok(ext)
    }

    /// Extrema of the `1 - alpha` band, each arm at `alpha / 2`.
    pub fn new(a: &ArmSample<T>, b: &ArmSample<T>, spec: &EpsilonSpec<T>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySample);
        }
        let (eps_a, eps_b) = split_radii(a.len(), b.len(), spec)?;
        Self::with_radii(a, b, eps_a, eps_b)
    }

    /// Confidence interval for `sup d`.
    pub fn sup_interval(&self) -> ScalarInterval<T> {
        ScalarInterval::new(self.sup_lower, self.sup_upper)
    }

    /// Confidence interval for `inf d`.
    pub fn inf_interval(&self) -> ScalarInterval<T> {
        ScalarInterval::new(self.inf_lower, self.inf_upper)
    }

    /// Confidence interval `[l, u]` for `||d||_inf`; see [`supnorm_interval`].
    pub fn supnorm_interval(&self) -> ScalarInterval<T> {
        supnorm_from_extrema(self.sup_lower, self.sup_upper, self.inf_lower, self.inf_upper)
    }

    /// `||d_n^+||_inf`.
    pub fn positive_norm(&self) -> T {
        self.max_diff
    }

    /// `||d_n^-||_inf`.
    pub fn negative_norm(&self) -> T {
        -self.min_diff
    }

    /// `||d_n||_inf`, the two-sample Kolmogorov-Smirnov distance.
    pub fn sup_norm(&self) -> T {
        self.max_diff.max(-self.min_diff)
    }
}

fn point<T: Scalar>(fa: T, fb: T, eps_a: T, eps_b: T) -> (T, T) {
    let (a_lo, a_hi) = clamp_band(fa, eps_a);
    let (b_lo, b_hi) = clamp_band(fb, eps_b);
    (b_lo - a_hi, b_hi - a_lo)
}

/// Two-sample sup-norm distance `||F_{n_b} - F_{n_a}||_inf`.
pub fn sup_norm_distance<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>) -> Result<T> {
    Ok(DiffExtrema::with_radii(a, b, T::zero(), T::zero())?.sup_norm())
}

/// Band on `d = F_b - F_a`, materialized on the merged grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffBand<T> {
    /// `NegInf` (below every observation) followed by the merged grid.
    pub grid: Vec<ExtendedReal<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// The empirical difference `d_n` at each grid point.
    pub diff: Vec<T>,
    pub alpha: T,
    pub n_a: usize,
    pub n_b: usize,
}

/// Builds the `1 - alpha` difference band, each arm's band at `alpha / 2`.
pub fn diff_band<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>, spec: &EpsilonSpec<T>) -> Result<DiffBand<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (eps_a, eps_b) = split_radii(a.len(), b.len(), spec)?;
    let (inv_a, inv_b) = (T::one() / T::from_count(a.len()), T::one() / T::from_count(b.len()));
    let cap = a.len() + b.len() + 1;
    let mut band = DiffBand {
        grid: Vec::with_capacity(cap),
        lower: Vec::with_capacity(cap),
        upper: Vec::with_capacity(cap),
        diff: Vec::with_capacity(cap),
        alpha: spec.alpha(),
        n_a: a.len(),
        n_b: b.len(),
    };
    let (lo, hi) = point(T::zero(), T::zero(), eps_a, eps_b);
    band.grid.push(ExtendedReal::NegInf);
    band.lower.push(lo);
    band.upper.push(hi);
    band.diff.push(T::zero());
    walk_merged(a.values(), b.values(), |x, ca, cb| {
        let fa = T::from_count(ca) * inv_a;
        let fb = T::from_count(cb) * inv_b;
        let (lo, hi) = point(fa, fb, eps_a, eps_b);
        band.grid.push(ExtendedReal::Finite(x));
        band.lower.push(lo);
        band.upper.push(hi);
        band.diff.push(fb - fa);
    });
    Ok(band)
}

impl<T: Scalar> DiffBand<T> {
    pub fn extrema(&self) -> DiffExtrema<T> {
        let fold = |v: &[T], pick_max: bool| {
            v.iter().copied().fold(v[0], |acc, x| if pick_max { acc.max(x) } else { acc.min(x) })
        };
        DiffExtrema {
            sup_lower: fold(&self.lower, true),
            sup_upper: fold(&self.upper, true),
            inf_lower: fold(&self.lower, false),
            inf_upper: fold(&self.upper, false),
            max_diff: fold(&self.diff, true),
            min_diff: fold(&self.diff, false),
        }
    }

    /// Whether the band excludes 0 at some grid point.
    pub fn excludes_zero(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(&lo, &hi)| lo > T::zero() || hi < T::zero())
    }
}

/// `(sup interval, inf interval)`: `[sup d_lower, sup d_upper]` and
/// `[inf d_lower, inf d_upper]`.
pub fn sup_inf_intervals<T: Scalar>(band: &DiffBand<T>) -> (ScalarInterval<T>, ScalarInterval<T>) {
    let ext = band.extrema();
    (ext.sup_interval(), ext.inf_interval())
}

/// Confidence interval for `||d||_inf`.
///
/// `u = max(|inf d_lower|, |sup d_upper|)`. For the lower end only the parts
/// of `sup d_lower` and `inf d_upper` that lie on the far side of zero count:
/// `l = max((sup d_lower)^+, (inf d_upper)^-)`. Since `sup d >= 0 >= inf d`
/// for any pair of distribution functions, a negative `sup d_lower` carries no
/// information about the norm, and `l > 0` exactly when the band excludes 0.
pub fn supnorm_interval<T: Scalar>(band: &DiffBand<T>) -> ScalarInterval<T> {
    band.extrema().supnorm_interval()
}

fn supnorm_from_extrema<T: Scalar>(sup_lower: T, sup_upper: T, inf_lower: T, inf_upper: T) -> ScalarInterval<T> {
    let zero = T::zero();
    let lo = sup_lower.max(zero).max((-inf_upper).max(zero));
    let hi = inf_lower.abs().max(sup_upper.abs());
    ScalarInterval::new(lo, hi.max(lo))
}

/// Pointwise image of the difference band under `|.|`.
pub fn abs_diff_band<T: Scalar>(band: &DiffBand<T>) -> BandCurve<T> {
    let (lower, upper) = band
        .lower
        .iter()
        .zip(&band.upper)
        .map(|(&l, &u)| {
            let (lo, hi) = abs_image(l, u);
            (ExtendedReal::Finite(lo), ExtendedReal::Finite(hi))
        })
        .unzip();
    BandCurve { kind: BandKind::AbsDiff, grid: band.grid.clone(), lower, upper, alpha: band.alpha }
}

/// Image of `[l, u]` under `x -> |x|`.
pub fn abs_image<T: Scalar>(l: T, u: T) -> (T, T) {
    let hi = l.abs().max(u.abs());
    if l > T::zero() || u < T::zero() {
        (l.abs().min(u.abs()), hi)
    } else {
        (T::zero(), hi)
    }
}

/// Running intersection of a sequence of confidence intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunningIntersection<T> {
    /// `None` until the first update.
    pub current: Option<ScalarInterval<T>>,
    pub count_updates: u64,
}

impl<T: Scalar> RunningIntersection<T> {
    pub fn new() -> Self {
        Self { current: None, count_updates: 0 }
    }

    /// Intersects with `next`. An empty result is clipped to the midpoint of
    /// the crossed endpoints and reported as [`Diagnostic::EmptyIntersection`].
    pub fn update(&mut self, next: ScalarInterval<T>) -> Option<Diagnostic> {
        self.count_updates += 1;
        let Some(cur) = self.current else {
            self.current = Some(next);
            return None;
        };
        let lo = cur.lo.max(next.lo);
        let hi = cur.hi.min(next.hi);
        if lo <= hi {
            self.current = Some(ScalarInterval::new(lo, hi));
            None
        } else {
            let mid = (lo + hi) / T::lit(2.0);
            self.current = Some(ScalarInterval::new(mid, mid));
            Some(Diagnostic::EmptyIntersection)
        }
    }
}
