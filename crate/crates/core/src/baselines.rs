//! Fixed-n two-sample baselines: Kolmogorov-Smirnov and Mann-Whitney U.
//!
//! Both are valid for one look at a predetermined sample size only. They are
//! here so that the cost of repeatedly peeking at them can be measured.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::empirical::ArmSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::twosample::{sup_norm_distance, walk_merged};

/// Pooled size up to which the Mann-Whitney null is enumerated exactly.
pub const MW_EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Ks,
    MannWhitney,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedTestResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub method: BaselineMethod,
}

/// Asymptotic Kolmogorov tail `P[K > lambda]`.
///
/// Uses `2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)` for moderate and large
/// `lambda`, and the equivalent theta-function form
/// `1 - sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))` below 1.18,
/// where the alternating series converges slowly.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..100 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            if term < 1e-12 {
                break;
            }
            sum += sign * term;
            sign = -sign;
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// P-value for a two-sample sup-norm distance `d` at sizes `(na, nb)`.
pub fn ks_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    kolmogorov_tail((na * nb / (na + nb)).sqrt() * d)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_test<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>) -> Result<FixedTestResult<T>> {
    let d = sup_norm_distance(a, b)?;
    let p = ks_pvalue(d.as_f64(), a.len(), b.len());
    Ok(FixedTestResult { statistic: d, p_value: T::lit(p), method: BaselineMethod::Ks })
}

/// Two-sided normal-approximation p-value for `U_a`, with tie-corrected
/// variance and continuity correction. `tie_sum` is `sum (t^3 - t)` over
/// groups of tied pooled values.
pub fn mw_normal_pvalue(u: f64, na: usize, nb: usize, tie_sum: f64) -> f64 {
    let (naf, nbf) = (na as f64, nb as f64);
    let n = naf + nbf;
    let mean = naf * nbf / 2.0;
    let var = naf * nbf / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// `(U_a, sum (t^3 - t))` with midranks: each `a` value scores the number of
/// smaller `b` values plus half the tied ones.
fn mw_counts<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>) -> (f64, f64) {
    let (mut u, mut ties) = (0.0, 0.0);
    let (mut prev_a, mut prev_b) = (0usize, 0usize);
    walk_merged(a.values(), b.values(), |_, ca, cb| {
        let (ka, kb) = ((ca - prev_a) as f64, (cb - prev_b) as f64);
        u += ka * (prev_b as f64 + kb / 2.0);
        let t = ka + kb;
        ties += t * t * t - t;
        prev_a = ca;
        prev_b = cb;
    });
    (u, ties)
}

/// Exact two-sided p-value by enumerating every split of the pooled midranks.
fn mw_exact_pvalue<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>, u: f64) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let mut pooled: Vec<T> = a.values().iter().chain(b.values()).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j] == pooled[i] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        ranks[i..j].fill(mid);
        i = j;
    }
    let mean = (na * nb) as f64 / 2.0;
    let observed = (u - mean).abs();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let r: f64 = (0..n).filter(|k| mask & (1 << k) != 0).map(|k| ranks[k]).sum();
        total += 1;
        if ((r - offset) - mean).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Mann-Whitney U test, two-sided. The statistic is `U_a`.
pub fn mann_whitney<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>) -> Result<FixedTestResult<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (u, ties) = mw_counts(a, b);
    let p = if a.len() + b.len() <= MW_EXACT_MAX_N {
        mw_exact_pvalue(a, b, u)
    } else {
        mw_normal_pvalue(u, a.len(), b.len(), ties)
    };
    Ok(FixedTestResult { statistic: T::lit(u), p_value: T::lit(p), method: BaselineMethod::MannWhitney })
}

/// Incrementally maintained `U_a` and tie sum for streams that only grow.
#[derive(Debug, Clone, Default)]
pub struct MannWhitneyTracker {
    u: f64,
    ties: f64,
}

impl MannWhitneyTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accounts for `x` joining arm A. Call before inserting `x` into `a`.
    pub fn add_a<T: Scalar>(&mut self, x: T, a: &ArmSample<T>, b: &ArmSample<T>) {
        let (below, equal) = below_equal(b.values(), x);
        self.u += below as f64 + equal as f64 / 2.0;
        self.bump_ties(equal + below_equal(a.values(), x).1);
    }

    /// Accounts for `y` joining arm B. Call before inserting `y` into `b`.
    pub fn add_b<T: Scalar>(&mut self, y: T, a: &ArmSample<T>, b: &ArmSample<T>) {
        let (below, equal) = below_equal(a.values(), y);
        self.u += (a.len() - below - equal) as f64 + equal as f64 / 2.0;
        self.bump_ties(equal + below_equal(b.values(), y).1);
    }

    fn bump_ties(&mut self, t: usize) {
        let t = t as f64;
        self.ties += 3.0 * t * t + 3.0 * t;
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn tie_sum(&self) -> f64 {
        self.ties
    }

    /// Same p-value as [`mann_whitney`] on the current samples.
    pub fn pvalue<T: Scalar>(&self, a: &ArmSample<T>, b: &ArmSample<T>) -> f64 {
        if a.len() + b.len() <= MW_EXACT_MAX_N {
            mw_exact_pvalue(a, b, self.u)
        } else {
            mw_normal_pvalue(self.u, a.len(), b.len(), self.ties)
        }
    }
}

fn below_equal<T: Scalar>(sorted: &[T], x: T) -> (usize, usize) {
    let below = sorted.partition_point(|&v| v < x);
    let upto = sorted.partition_point(|&v| v <= x);
    (below, upto - below)
}
