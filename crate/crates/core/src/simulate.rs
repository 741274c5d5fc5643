//! Monte-Carlo study of continuous monitoring.
//!
//! Two independent i.i.d. streams are sampled one pair at a time and, after
//! every pair, the fixed-n Kolmogorov-Smirnov and Mann-Whitney tests and the
//! sequential equality test are checked at level `alpha`. A run records the
//! first pair count at which each test rejects. The sequential test here only
//! looks for rejection; there is no approximate-null stop.
//!
//! Evaluation is exact at every pair. To avoid an `O(n)` pass per pair the
//! sup-norm distance is tracked with the bound `D_{n+1} <= D_n + 2 / (n+1)`
//! (each empirical CDF moves by at most `1 / (n+1)` when one point is
//! added), and the full pass is made only when the bound could cross a
//! rejection threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::Serialize;

use crate::baselines::{ks_pvalue, MannWhitneyTracker};
use crate::bounds::{EpsilonMethod, EpsilonSpec, DEFAULT_N_STAR};
use crate::empirical::ArmSample;
use crate::error::{Error, Result};
use crate::renewal::{count_metric_test_with, EpochStream};
use crate::ingest::Arm;
use crate::testing::{TestConfig, Verdict};
use crate::twosample::{split_radii, DiffExtrema};

/// Name of the generator recorded in output headers.
pub const RNG_NAME: &str = "ChaCha8";

/// Independent generator for replication `run` of a seeded study.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Which tests to run on each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tests {
    pub ks: bool,
    pub mann_whitney: bool,
    pub sequential: bool,
}

impl Tests {
    pub const ALL: Tests = Tests { ks: true, mann_whitney: true, sequential: true };
    pub const SEQUENTIAL: Tests = Tests { ks: false, mann_whitney: false, sequential: true };
}

/// Pair count at which each test first rejected, `None` if it never did
/// before the cap (or was not run).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PairOutcome {
    pub ks: Option<usize>,
    pub mann_whitney: Option<usize>,
    pub sequential: Option<usize>,
}

/// Streams pairs until every selected test has rejected or `cap` pairs
/// have been drawn.
pub fn monitor_pairs<R: Rng>(
    rng: &mut R,
    mut draw_a: impl FnMut(&mut R) -> f64,
    mut draw_b: impl FnMut(&mut R) -> f64,
    cap: usize,
    alpha: f64,
    spec: &EpsilonSpec<f64>,
    tests: Tests,
) -> Result<PairOutcome> {
    let mut out = PairOutcome::default();
    let mut a = ArmSample::new();
    let mut b = ArmSample::new();
    let mut mw = MannWhitneyTracker::new();
    let mut d_bound = f64::INFINITY;
    let min_n = spec.min_n();
    for n in 1..=cap {
        let (x, y) = (draw_a(rng), draw_b(rng));
        let mw_pending = tests.mann_whitney && out.mann_whitney.is_none();
        if mw_pending {
            mw.add_a(x, &a, &b);
        }
        a.insert(x)?;
        if mw_pending {
            mw.add_b(y, &a, &b);
        }
        b.insert(y)?;
        d_bound += 2.0 / n as f64;

        let seq_pending = tests.sequential && out.sequential.is_none() && n >= min_n;
        let ks_pending = tests.ks && out.ks.is_none();
        let need_seq = seq_pending && {
            let (ea, eb) = split_radii(n, n, spec)?;
            d_bound > (ea + eb) * (1.0 - 1e-9)
        };
        let need_ks = ks_pending && ks_pvalue(d_bound, n, n) <= alpha;
        if need_seq || need_ks {
            let ext = if need_seq { DiffExtrema::new(&a, &b, spec)? } else { DiffExtrema::with_radii(&a, &b, 0.0, 0.0)? };
            let d = ext.max_diff.max(-ext.min_diff);
            d_bound = d;
            if need_seq && ext.supnorm_interval().lo > 0.0 {
                out.sequential = Some(n);
            }
            if ks_pending && ks_pvalue(d, n, n) <= alpha {
                out.ks = Some(n);
            }
        }
        if mw_pending && mw.pvalue(&a, &b) <= alpha {
            out.mann_whitney = Some(n);
        }
        let done = (!tests.ks || out.ks.is_some())
            && (!tests.mann_whitney || out.mann_whitney.is_some())
            && (!tests.sequential || out.sequential.is_some());
        if done {
            break;
        }
    }
    Ok(out)
}

/// Gamma stream study: shape `shape` with rates `rate_a` and `rate_b`
/// (scale = 1 / rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaStudy {
    pub runs: usize,
    pub cap: usize,
    pub alpha: f64,
    pub seed: u64,
    pub shape: f64,
    pub rate_a: f64,
    pub rate_b: f64,
    pub method: EpsilonMethod,
    pub n_star: usize,
}

impl GammaStudy {
    /// Gamma(10, 10) against itself: 100 runs, 5000 pairs, alpha 0.05.
    pub fn null(seed: u64) -> Self {
        Self {
            runs: 100,
            cap: 5000,
            alpha: 0.05,
            seed,
            shape: 10.0,
            rate_a: 10.0,
            rate_b: 10.0,
            method: EpsilonMethod::Howard,
            n_star: DEFAULT_N_STAR,
        }
    }

    /// Gamma(10, 10) against Gamma(10, 11).
    pub fn alternative(seed: u64) -> Self {
        Self { rate_b: 11.0, ..Self::null(seed) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub study: GammaStudy,
    pub ks_rejections: usize,
    pub mw_rejections: usize,
    pub seq_rejections: usize,
    pub outcomes: Vec<PairOutcome>,
}

impl StudySummary {
    /// Median sequential stopping time with censored runs counted as
    /// never stopping; `None` when at least half the runs are censored.
    pub fn seq_median_stop(&self) -> Option<f64> {
        median_with_censoring(self.outcomes.iter().map(|o| o.sequential))
    }

    pub fn ks_median_stop(&self) -> Option<f64> {
        median_with_censoring(self.outcomes.iter().map(|o| o.ks))
    }

    pub fn mw_median_stop(&self) -> Option<f64> {
        median_with_censoring(self.outcomes.iter().map(|o| o.mann_whitney))
    }
}

/// Median of a sample where `None` means "beyond every observed value".
pub fn median_with_censoring(stops: impl Iterator<Item = Option<usize>>) -> Option<f64> {
    let mut v: Vec<f64> = stops.map(|s| s.map_or(f64::INFINITY, |n| n as f64)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    let med = if m % 2 == 1 { v[m / 2] } else { (v[m / 2 - 1] + v[m / 2]) / 2.0 };
    med.is_finite().then_some(med)
}

pub fn run_study(study: &GammaStudy) -> Result<StudySummary> {
    if study.runs == 0 || study.cap == 0 {
        return Err(Error::InvalidConfig("runs and cap must be positive".into()));
    }
    let spec = EpsilonSpec::new(study.method, study.alpha, study.n_star)?;
    if !spec.method().is_sequential() {
        return Err(Error::InvalidConfig("the sequential test needs a time-uniform radius".into()));
    }
    let gamma = |rate: f64| {
        Gamma::new(study.shape, 1.0 / rate).map_err(|e| Error::InvalidConfig(format!("gamma parameters: {e}")))
    };
    let (ga, gb) = (gamma(study.rate_a)?, gamma(study.rate_b)?);
    let mut outcomes = Vec::with_capacity(study.runs);
    for run in 0..study.runs {
        let mut rng = run_rng(study.seed, run as u64);
        outcomes.push(monitor_pairs(
            &mut rng,
            |r| ga.sample(r),
            |r| gb.sample(r),
            study.cap,
            study.alpha,
            &spec,
            Tests::ALL,
        )?);
    }
    let count = |f: fn(&PairOutcome) -> Option<usize>| outcomes.iter().filter(|o| f(o).is_some()).count();
    Ok(StudySummary {
        study: *study,
        ks_rejections: count(|o| o.ks),
        mw_rejections: count(|o| o.mann_whitney),
        seq_rejections: count(|o| o.sequential),
        outcomes,
    })
}

/// Homogeneous Poisson arrivals on `[0, horizon)`.
pub fn poisson_arrivals<R: Rng>(rng: &mut R, rate: f64, horizon: f64) -> Result<Vec<f64>> {
    let exp = Exp::new(rate).map_err(|e| Error::InvalidConfig(format!("rate: {e}")))?;
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(rng);
        if t >= horizon {
            return Ok(out);
        }
        out.push(t);
    }
}

/// Result of one renewal replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalOutcome {
    pub decision: Verdict,
    /// Event time of the deciding evaluation.
    pub decided_at: Option<f64>,
}

/// Runs the count-metric test on pairs of Poisson streams.
pub fn renewal_study(
    runs: usize,
    rate_a: f64,
    rate_b: f64,
    horizon: f64,
    config: TestConfig<f64>,
    cadence: usize,
    seed: u64,
) -> Result<Vec<RenewalOutcome>> {
    (0..runs)
        .map(|run| {
            let mut rng = run_rng(seed, run as u64);
            let a = EpochStream::from_timestamps(Arm::A, poisson_arrivals(&mut rng, rate_a, horizon)?)?;
            let b = EpochStream::from_timestamps(Arm::B, poisson_arrivals(&mut rng, rate_b, horizon)?)?;
            let st = count_metric_test_with(&a, &b, config, cadence, |_| {})?;
            Ok(RenewalOutcome { decision: st.decision(), decided_at: st.decided_at().map(|d| d.t) })
        })
        .collect()
}
