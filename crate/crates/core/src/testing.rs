//! Sequential hypothesis engine.
//!
//! A p-value for "the band still contains the null" is the smallest level
//! whose band rejects. For a one-sided test that is the root in `alpha` of
//!
//! ```text
//! f(alpha) = D - eps_{n_a}(alpha / 2) - eps_{n_b}(alpha / 2)
//! ```
//!
//! with `D = ||d_n^+||`, `||d_n^-||` or `||d_n||` depending on the
//! hypothesis. When `n_a = n_b = n` the root has the closed form
//! `2 * alpha_n(D / 2)`, where `alpha_n(r)` inverts the radius formula; for
//! unequal sizes it lies between the closed forms at `max(n_a, n_b)` and
//! `min(n_a, n_b)` and is found by bisection.
//!
//! Stopping rules, evaluated with time-uniform radii:
//!
//! | null          | reject              | accept approximately  |
//! |---------------|---------------------|-----------------------|
//! | `A <= B`      | `sup d_lower > 0`   | `sup d_upper < tau`   |
//! | `A >= B`      | `inf d_upper < 0`   | `inf d_lower > -tau`  |
//! | `A = B`       | `l > 0`             | `u < tau`             |
//!
//! Rejection wins when both fire at the same update.

use serde::{Deserialize, Serialize};

use crate::bounds::{radius_at, EpsilonSpec};
use crate::diagnostic::Diagnostic;
use crate::empirical::ArmSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::twosample::{DiffExtrema, RunningIntersection, ScalarInterval};

/// Absolute tolerance on `alpha` for the p-value root finder.
pub const ROOT_TOLERANCE: f64 = 1e-9;

/// Null hypothesis under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `A <= B` stochastically: `F_a(x) >= F_b(x)` for all x.
    APrecedesB,
    /// `A >= B` stochastically: `F_a(x) <= F_b(x)` for all x.
    ASucceedsB,
    /// `F_a = F_b`.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Continue,
    RejectNull,
    AcceptApproxNull,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Continue => "continue",
            Verdict::RejectNull => "reject_null",
            Verdict::AcceptApproxNull => "accept_approx_null",
        }
    }
}

/// Parameters fixed at test creation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TestConfig<T> {
    hypothesis: Hypothesis,
    tau: T,
    epsilon: EpsilonSpec<T>,
}

impl<T: Scalar> TestConfig<T> {
    /// `tau` is the practical-irrelevance tolerance on the CDF-difference
    /// scale. The radius must be time-uniform.
    pub fn new(hypothesis: Hypothesis, tau: T, epsilon: EpsilonSpec<T>) -> Result<Self> {
        if !(tau > T::zero()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        if !epsilon.method().is_sequential() {
            return Err(Error::InvalidConfig(
                "sequential monitoring needs a time-uniform radius, not the fixed-n one".into(),
            ));
        }
        Ok(Self { hypothesis, tau, epsilon })
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn alpha(&self) -> T {
        self.epsilon.alpha()
    }

    pub fn epsilon(&self) -> &EpsilonSpec<T> {
        &self.epsilon
    }
}

/// Bisection for an increasing `f` with `f(lo) <= 0 < f(hi)`.
///
/// Stops once the bracket is narrower than `tol` absolutely and relative to
/// its upper end, or when floating-point halving stalls.
pub fn bisect<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, tol: T) -> T {
    let two = T::lit(2.0);
    for _ in 0..2000 {
        let width = hi - lo;
        if width <= tol && width <= tol * hi {
            break;
        }
        let mid = lo + width / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo + (hi - lo) / two
}

fn clip_pvalue<T: Scalar>(p: T) -> T {
    if p.is_nan() {
        return T::one();
    }
    p.min(T::one()).max(T::min_positive_value())
}

/// Closed-form p-value `2 * alpha_n(D / 2)` for equal arm sizes, clipped to `(0, 1]`.
pub fn pvalue_closed_form<T: Scalar>(spec: &EpsilonSpec<T>, n: usize, d: T) -> T {
    if !(d > T::zero()) {
        return T::one();
    }
    clip_pvalue(T::lit(2.0) * spec.alpha_for_radius(n, d / T::lit(2.0)))
}

fn root_residual<T: Scalar>(spec: &EpsilonSpec<T>, na: usize, nb: usize, d: T, alpha: T) -> T {
    let half = alpha / T::lit(2.0);
    d - radius_at(spec.method(), half, na, spec.n_star()) - radius_at(spec.method(), half, nb, spec.n_star())
}

/// `f(alpha) = D - eps_{n_a}(alpha/2) - eps_{n_b}(alpha/2)`.
pub fn pvalue_residual<T: Scalar>(spec: &EpsilonSpec<T>, na: usize, nb: usize, d: T, alpha: T) -> T {
    root_residual(spec, na, nb, d, alpha)
}

/// Root of [`pvalue_residual`] searched in `[lo, hi]`, clipped to `(0, 1]`.
pub fn pvalue_root_in<T: Scalar>(spec: &EpsilonSpec<T>, na: usize, nb: usize, d: T, lo: T, hi: T) -> T {
    if !(d > T::zero()) {
        return T::one();
    }
    let hi = hi.min(T::one());
    if lo >= hi || root_residual(spec, na, nb, d, hi) <= T::zero() {
        // no level in range rejects
        return if lo >= T::one() || root_residual(spec, na, nb, d, hi) <= T::zero() { T::one() } else { clip_pvalue(lo) };
    }
    let root = bisect(|a| root_residual(spec, na, nb, d, a), lo.max(T::zero()), hi, T::lit(ROOT_TOLERANCE));
    clip_pvalue(root)
}

/// Bracket `[p_max(n)(D), p_min(n)(D)]` containing the root for unequal sizes.
pub fn pvalue_bracket<T: Scalar>(spec: &EpsilonSpec<T>, na: usize, nb: usize, d: T) -> (T, T) {
    let two = T::lit(2.0);
    let half = d / two;
    let lo = two * spec.alpha_for_radius(na.max(nb), half);
    let hi = two * spec.alpha_for_radius(na.min(nb), half);
    (lo, hi)
}

/// Root-found p-value using the closed-form bracket.
pub fn pvalue_by_root<T: Scalar>(spec: &EpsilonSpec<T>, na: usize, nb: usize, d: T) -> T {
    let (lo, hi) = pvalue_bracket(spec, na, nb, d);
    pvalue_root_in(spec, na, nb, d, lo, hi)
}

/// P-value for statistic `d` at sizes `(na, nb)`: closed form when the sizes
/// agree, bracketed bisection otherwise.
pub fn pvalue<T: Scalar>(spec: &EpsilonSpec<T>, na: usize, nb: usize, d: T) -> Result<T> {
    let min_n = spec.min_n();
    if na == 0 || nb == 0 {
        return Err(Error::EmptySample);
    }
    if na.min(nb) < min_n {
        return Err(Error::BelowNStar { n: na.min(nb), n_star: spec.n_star() });
    }
    Ok(if na == nb { pvalue_closed_form(spec, na, d) } else { pvalue_by_root(spec, na, nb, d) })
}

/// The statistic each hypothesis is tested with.
pub fn statistic<T: Scalar>(ext: &DiffExtrema<T>, hypothesis: Hypothesis) -> T {
    match hypothesis {
        Hypothesis::APrecedesB => ext.positive_norm(),
        Hypothesis::ASucceedsB => ext.negative_norm(),
        Hypothesis::Equal => ext.sup_norm(),
    }
}

/// Fixed-n DKW p-value for the null `F_a >= F_b` (`A <= B`).
pub fn fixed_pvalue_precedes<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>) -> Result<T> {
    fixed_pvalue(a, b, Hypothesis::APrecedesB)
}

/// Fixed-n DKW p-value for any hypothesis. Valid for a single look only.
pub fn fixed_pvalue<T: Scalar>(a: &ArmSample<T>, b: &ArmSample<T>, hypothesis: Hypothesis) -> Result<T> {
    let spec = EpsilonSpec::fixed(T::lit(0.05))?;
    let ext = DiffExtrema::with_radii(a, b, T::zero(), T::zero())?;
    pvalue(&spec, a.len(), b.len(), statistic(&ext, hypothesis))
}

/// Sequential p-value, valid simultaneously over all `(n_a, n_b)`. Only the
/// radius formula of `spec` matters, not its level.
pub fn seq_pvalue<T: Scalar>(
    a: &ArmSample<T>,
    b: &ArmSample<T>,
    hypothesis: Hypothesis,
    spec: &EpsilonSpec<T>,
) -> Result<T> {
    let ext = DiffExtrema::with_radii(a, b, T::zero(), T::zero())?;
    pvalue(spec, a.len(), b.len(), statistic(&ext, hypothesis))
}

/// When and where a test was decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecidedAt<T> {
    pub n_a: usize,
    pub n_b: usize,
    pub t: T,
}

/// One evaluation of the stopping rules; the decision record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub t: T,
    pub n_a: usize,
    pub n_b: usize,
    pub p: T,
    pub q: T,
    pub sup_d_l: T,
    pub inf_d_u: T,
    pub l: T,
    pub u: T,
    pub decision: Verdict,
}

/// Running state of one sequential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TestState<T> {
    config: TestConfig<T>,
    q: T,
    n_a: usize,
    n_b: usize,
    decision: Verdict,
    decided_at: Option<DecidedAt<T>>,
    evaluations: u64,
    supnorm_running: RunningIntersection<T>,
    diagnostics: Vec<Diagnostic>,
}

impl<T: Scalar> TestState<T> {
    pub fn new(config: TestConfig<T>) -> Self {
        Self {
            config,
            q: T::one(),
            n_a: 0,
            n_b: 0,
            decision: Verdict::Continue,
            decided_at: None,
            evaluations: 0,
            supnorm_running: RunningIntersection::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn config(&self) -> &TestConfig<T> {
        &self.config
    }

    /// Running minimum of the sequential p-values seen so far.
    pub fn q(&self) -> T {
        self.q
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.n_a, self.n_b)
    }

    pub fn decision(&self) -> Verdict {
        self.decision
    }

    pub fn decided_at(&self) -> Option<DecidedAt<T>> {
        self.decided_at
    }

    pub fn is_decided(&self) -> bool {
        self.decision != Verdict::Continue
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Running intersection of the `||d||_inf` confidence intervals.
    pub fn supnorm_running(&self) -> &RunningIntersection<T> {
        &self.supnorm_running
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    /// Records a diagnostic once.
    pub fn flag(&mut self, d: Diagnostic) {
        if !self.diagnostics.contains(&d) {
            self.diagnostics.push(d);
        }
    }

    /// Whether both arms are large enough for the radius formula.
    pub fn can_evaluate(&self, a: &ArmSample<T>, b: &ArmSample<T>) -> bool {
        let min_n = self.config.epsilon.min_n();
        a.len() >= min_n && b.len() >= min_n
    }

    /// Re-evaluates the stopping rules on the current samples. `t` is the
    /// time stamp reported with the record.
    pub fn update(&mut self, a: &ArmSample<T>, b: &ArmSample<T>, t: T) -> Result<Evaluation<T>> {
        if self.is_decided() {
            return Err(Error::UpdateAfterDecision);
        }
        let spec = self.config.epsilon;
        let ext = DiffExtrema::new(a, b, &spec)?;
        let p = pvalue(&spec, a.len(), b.len(), statistic(&ext, self.config.hypothesis))?;
        self.q = self.q.min(p);
        self.n_a = a.len();
        self.n_b = b.len();
        self.evaluations += 1;

        let norm = ext.supnorm_interval();
        if let Some(d) = self.supnorm_running.update(norm) {
            self.flag(d);
        }
        let tau = self.config.tau;
        let (reject, accept) = match self.config.hypothesis {
            Hypothesis::APrecedesB => (ext.sup_lower > T::zero(), ext.sup_upper < tau),
            Hypothesis::ASucceedsB => (ext.inf_upper < T::zero(), ext.inf_lower > -tau),
            Hypothesis::Equal => (norm.lo > T::zero(), norm.hi < tau),
        };
        self.decision = if reject {
            Verdict::RejectNull
        } else if accept {
            Verdict::AcceptApproxNull
        } else {
            Verdict::Continue
        };
        if self.is_decided() {
            self.decided_at = Some(DecidedAt { n_a: self.n_a, n_b: self.n_b, t });
        }
        Ok(Evaluation {
            t,
            n_a: self.n_a,
            n_b: self.n_b,
            p,
            q: self.q,
            sup_d_l: ext.sup_lower,
            inf_d_u: ext.inf_upper,
            l: norm.lo,
            u: norm.hi,
            decision: self.decision,
        })
    }

    /// Confidence interval for `||d||_inf` from the running intersection, if any.
    pub fn supnorm_interval(&self) -> Option<ScalarInterval<T>> {
        self.supnorm_running.current
    }
}

/// Per-arm fixed-n sample size giving a difference band of radius `r`:
/// `ceil(2 ln(4 / alpha) / r^2)`.
pub fn fixed_sample_size<T: Scalar>(alpha: T, r: T) -> Result<usize> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidConfig(format!("radius must be positive, got {r}")));
    }
    let n = (T::lit(2.0) * (T::lit(4.0) / alpha).ln() / (r * r)).ceil();
    Ok(n.to_usize().unwrap_or(usize::MAX).max(1))
}

/// Smallest per-arm `n` whose difference band radius `2 eps_n(alpha / 2)`
/// is at most `r`.
pub fn sequential_max_n<T: Scalar>(spec: &EpsilonSpec<T>, r: T) -> Result<usize> {
    if !(r > T::zero()) {
        return Err(Error::InvalidConfig(format!("radius must be positive, got {r}")));
    }
    let half = spec.with_alpha(spec.alpha() / T::lit(2.0));
    let fits = |n: usize| -> Result<bool> { Ok(T::lit(2.0) * half.radius(n)? <= r) };
    let mut lo = spec.min_n();
    if fits(lo)? {
        return Ok(lo);
    }
    let mut hi = lo.max(1) * 2;
    while !fits(hi)? {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::InvalidConfig("radius too small".into()))?;
    }
    // fits(lo) is false, fits(hi) is true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
