//! Count metrics as renewal processes.
//!
//! A stream that carries only arrival times is compared through its
//! inter-arrival distribution: the gaps `t_2 - t_1, t_3 - t_2, ...` are fed
//! to the same two-sample machinery as ordinary measurements. Fewer events
//! per unit time in B shows up as stochastically larger gaps in B.
//!
//! The open interval after the last event of each stream is not used.

use serde::{Deserialize, Serialize};

use crate::diagnostic::Diagnostic;
use crate::empirical::ArmSample;
use crate::error::{Error, Result};
use crate::ingest::Arm;
use crate::scalar::Scalar;
use crate::testing::{Evaluation, TestConfig, TestState};

/// Arrival times of one arm, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpochStream<T> {
    pub arm: Arm,
    timestamps: Vec<T>,
}

impl<T: Scalar> EpochStream<T> {
    pub fn new(arm: Arm) -> Self {
        Self { arm, timestamps: Vec::new() }
    }

    pub fn from_timestamps(arm: Arm, timestamps: Vec<T>) -> Result<Self> {
        check_increasing(&timestamps)?;
        Ok(Self { arm, timestamps })
    }

    /// Appends one arrival; it must come strictly after the previous one.
    pub fn push(&mut self, ts: T) -> Result<()> {
        if !(ts.is_finite() && ts >= T::zero()) {
            return Err(Error::NonFiniteValue);
        }
        if let Some(&last) = self.timestamps.last() {
            if ts <= last {
                return Err(Error::NonIncreasingTimestamps { index: self.timestamps.len() });
            }
        }
        self.timestamps.push(ts);
        Ok(())
    }

    pub fn timestamps(&self) -> &[T] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

fn check_increasing<T: Scalar>(ts: &[T]) -> Result<()> {
    for (i, &t) in ts.iter().enumerate() {
        if !(t.is_finite() && t >= T::zero()) {
            return Err(Error::NonFiniteValue);
        }
        if i > 0 && t <= ts[i - 1] {
            return Err(Error::NonIncreasingTimestamps { index: i });
        }
    }
    Ok(())
}

/// Successive differences of an arrival stream.
#[derive(Debug, Clone, PartialEq)]
pub struct InterArrivalSample<T> {
    pub gaps: Vec<T>,
}

impl<T: Scalar> InterArrivalSample<T> {
    pub fn to_sample(&self) -> Result<ArmSample<T>> {
        ArmSample::from_values(self.gaps.iter().copied())
    }
}

pub fn to_gaps<T: Scalar>(s: &EpochStream<T>) -> Result<InterArrivalSample<T>> {
    let ts = s.timestamps();
    if ts.len() < 2 {
        return Err(Error::InsufficientEvents { count: ts.len() });
    }
    check_increasing(ts)?;
    Ok(InterArrivalSample { gaps: ts.windows(2).map(|w| w[1] - w[0]).collect() })
}

/// Replays both streams in time order and runs the sequential test on the
/// gap samples, evaluating every `cadence` gaps once both arms have enough
/// of them. Arrivals with equal times are taken A first.
///
/// Returns the final state; a stream too short to form any usable gap
/// leaves the test undecided with [`Diagnostic::StarvedArm`].
pub fn count_metric_test<T: Scalar>(a: &EpochStream<T>, b: &EpochStream<T>, config: TestConfig<T>) -> Result<TestState<T>> {
    count_metric_test_with(a, b, config, 1, |_| {})
}

/// [`count_metric_test`] with an evaluation cadence and a callback receiving
/// every evaluation record.
pub fn count_metric_test_with<T: Scalar>(
    a: &EpochStream<T>,
    b: &EpochStream<T>,
    config: TestConfig<T>,
    cadence: usize,
    mut on_eval: impl FnMut(&Evaluation<T>),
) -> Result<TestState<T>> {
    if cadence == 0 {
        return Err(Error::InvalidConfig("cadence must be at least 1".into()));
    }
    check_increasing(a.timestamps())?;
    check_increasing(b.timestamps())?;
    let mut state = TestState::new(config);
    let (ta, tb) = (a.timestamps(), b.timestamps());
    let mut gaps_a = ArmSample::new();
    let mut gaps_b = ArmSample::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut pending = 0usize;
    while (i < ta.len() || j < tb.len()) && !state.is_decided() {
        let take_a = match (ta.get(i), tb.get(j)) {
            (Some(x), Some(y)) => x <= y,
            (Some(_), None) => true,
            _ => false,
        };
        let t = if take_a {
            if i > 0 {
                gaps_a.insert(ta[i] - ta[i - 1])?;
                pending += 1;
            }
            i += 1;
            ta[i - 1]
        } else {
            if j > 0 {
                gaps_b.insert(tb[j] - tb[j - 1])?;
                pending += 1;
            }
            j += 1;
            tb[j - 1]
        };
        if pending >= cadence && state.can_evaluate(&gaps_a, &gaps_b) {
            pending = 0;
            let ev = state.update(&gaps_a, &gaps_b, t)?;
            on_eval(&ev);
        }
    }
    if !state.is_decided() && !state.can_evaluate(&gaps_a, &gaps_b) {
        state.flag(Diagnostic::StarvedArm);
    }
    Ok(state)
}
