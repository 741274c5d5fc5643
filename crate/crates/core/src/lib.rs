//! Anytime-valid two-sample tests for canary analysis.
//!
//! Two arms (A, control; B, canary) stream observations. Confidence bands on
//! each arm's distribution function, built from radii that hold uniformly
//! over the sample size, give a band on the difference `d = F_b - F_a` that
//! may be inspected after every observation. From it come sequential tests
//! of stochastic order (`A <= B`, `A >= B`) and of equality, with early
//! acceptance when the difference is certified below a tolerance `tau`.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64` (or `f32` with a `32` suffix).
//!
//! ```
//! use seqcanary::{Config, EpsilonSpec, Hypothesis, Sample, State, Verdict};
//!
//! let cfg = Config::new(Hypothesis::Equal, 0.1, EpsilonSpec::howard(0.05).unwrap()).unwrap();
//! let mut state = State::new(cfg);
//! let a = Sample::from_values((0..400).map(|i| i as f64)).unwrap();
//! let b = Sample::from_values((0..400).map(|i| i as f64 + 300.0)).unwrap();
//! let ev = state.update(&a, &b, 0.0).unwrap();
//! assert_eq!(ev.decision, Verdict::RejectNull);
//! ```

pub mod baselines;
pub mod bounds;
pub mod diagnostic;
pub mod empirical;
pub mod error;
pub mod export;
pub mod ingest;
pub mod renewal;
pub mod scalar;
pub mod simulate;
pub mod testing;
pub mod twosample;

pub use baselines::{ks_test, mann_whitney, BaselineMethod, FixedTestResult};
pub use bounds::{cdf_band, quantile_band, BandCurve, BandKind, EpsilonMethod, EpsilonSpec};
pub use diagnostic::Diagnostic;
pub use empirical::{merged_grid, ArmSample, ExtendedReal};
pub use error::{Error, Result};
pub use ingest::{parse_event, Arm, Event, Mode, MonitorConfig, OutOfOrderPolicy, TestSnapshot};
pub use renewal::{count_metric_test, to_gaps, EpochStream, InterArrivalSample};
pub use scalar::Scalar;
pub use testing::{
    fixed_pvalue_precedes, fixed_sample_size, seq_pvalue, sequential_max_n, Evaluation, Hypothesis, TestConfig,
    TestState, Verdict,
};
pub use twosample::{
    abs_diff_band, diff_band, sup_inf_intervals, supnorm_interval, DiffBand, RunningIntersection, ScalarInterval,
};

pub type Sample = ArmSample<f64>;
pub type Sample32 = ArmSample<f32>;
pub type Band = BandCurve<f64>;
pub type Band32 = BandCurve<f32>;
pub type Diff = DiffBand<f64>;
pub type Diff32 = DiffBand<f32>;
pub type Interval = ScalarInterval<f64>;
pub type Interval32 = ScalarInterval<f32>;
pub type Epsilon = EpsilonSpec<f64>;
pub type Epsilon32 = EpsilonSpec<f32>;
pub type Config = TestConfig<f64>;
pub type Config32 = TestConfig<f32>;
pub type State = TestState<f64>;
pub type State32 = TestState<f32>;
