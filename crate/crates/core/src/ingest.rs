//! Event ingestion, per-test state assembly and snapshot persistence.
//!
//! Input is newline-delimited JSON, one event per line:
//!
//! ```text
//! {"arm":"a","value":120.5,"ts":3.25}
//! {"arm":"b","ts":3.40}
//! ```
//!
//! Unknown fields are ignored. In count mode only `ts` is used and the test
//! runs on inter-arrival gaps.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::EpsilonSpec;
use crate::diagnostic::Diagnostic;
use crate::empirical::ArmSample;
use crate::error::{Error, Result};
use crate::testing::{Evaluation, Hypothesis, TestConfig, TestState, Verdict};

/// Snapshot file format written by this version.
pub const FORMAT_VERSION: u32 = 1;

/// Offset applied to a count-mode timestamp that ties with its predecessor.
pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    A,
    B,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::A => "a",
            Arm::B => "b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Each event carries a measurement.
    Measurement,
    /// Events are arrivals; the test runs on inter-arrival gaps.
    Count,
}

/// What to do with a count-mode event older than the arm's latest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfOrderPolicy {
    Reject,
    /// Insert at its sorted position, splitting the gap it falls into.
    SortOnBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub arm: Arm,
    pub value: Option<f64>,
    pub ts: f64,
}

/// Parses one input line. `line_no` is only used in error messages.
pub fn parse_event(line: &str, line_no: usize, mode: Mode) -> Result<Event> {
    let malformed = |reason: &str| Error::MalformedEvent { line: line_no, reason: reason.to_string() };
    let v: Value = serde_json::from_str(line).map_err(|e| malformed(&e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| malformed("expected a JSON object"))?;
    let arm = match obj.get("arm").and_then(Value::as_str) {
        Some("a") | Some("A") => Arm::A,
        Some("b") | Some("B") => Arm::B,
        Some(other) => return Err(malformed(&format!("unknown arm {other:?}"))),
        None => return Err(malformed("missing arm")),
    };
    let ts = match obj.get("ts") {
        Some(t) => t.as_f64().ok_or_else(|| malformed("ts is not a number"))?,
        None => return Err(malformed("missing ts")),
    };
    if !(ts.is_finite() && ts >= 0.0) {
        return Err(malformed("ts must be a finite non-negative number"));
    }
    let value = match obj.get("value") {
        None | Some(Value::Null) => None,
        Some(x) => {
            let x = x.as_f64().ok_or_else(|| malformed("value is not a number"))?;
            if !x.is_finite() {
                return Err(malformed("value is not finite"));
            }
            Some(x)
        }
    };
    if mode == Mode::Measurement && value.is_none() {
        return Err(Error::MissingValue { line: line_no });
    }
    Ok(Event { arm, value, ts })
}

/// Ingestion settings that sit beside the statistical configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub mode: Mode,
    /// Evaluate after every `cadence` accepted events.
    pub cadence: usize,
    pub tie_epsilon: f64,
    pub out_of_order: OutOfOrderPolicy,
}

impl MonitorConfig {
    pub fn new(mode: Mode) -> Self {
        Self { mode, cadence: 1, tie_epsilon: DEFAULT_TIE_EPSILON, out_of_order: OutOfOrderPolicy::Reject }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cadence == 0 {
            return Err(Error::InvalidConfig("cadence must be at least 1".into()));
        }
        if !(self.tie_epsilon > 0.0 && self.tie_epsilon.is_finite()) {
            return Err(Error::InvalidConfig("tie epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to resume a test: configuration, samples, arrival
/// streams (count mode), the running test state and event counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSnapshot {
    monitor: MonitorConfig,
    state: TestState<f64>,
    /// Measurements, or gaps in count mode.
    a: ArmSample<f64>,
    b: ArmSample<f64>,
    /// Arrival times per arm; empty in measurement mode.
    times_a: Vec<f64>,
    times_b: Vec<f64>,
    accepted: u64,
    ignored: u64,
    since_eval: usize,
    latest_ts: f64,
}

impl TestSnapshot {
    pub fn new(config: TestConfig<f64>, monitor: MonitorConfig) -> Result<Self> {
        monitor.validate()?;
        Ok(Self {
            monitor,
            state: TestState::new(config),
            a: ArmSample::new(),
            b: ArmSample::new(),
            times_a: Vec::new(),
            times_b: Vec::new(),
            accepted: 0,
            ignored: 0,
            since_eval: 0,
            latest_ts: 0.0,
        })
    }

    pub fn monitor(&self) -> &MonitorConfig {
        &self.monitor
    }

    pub fn state(&self) -> &TestState<f64> {
        &self.state
    }

    pub fn config(&self) -> &TestConfig<f64> {
        self.state.config()
    }

    pub fn sample(&self, arm: Arm) -> &ArmSample<f64> {
        match arm {
            Arm::A => &self.a,
            Arm::B => &self.b,
        }
    }

    pub fn timestamps(&self, arm: Arm) -> &[f64] {
        match arm {
            Arm::A => &self.times_a,
            Arm::B => &self.times_b,
        }
    }

    /// Events applied to a sample.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    /// Events dropped because the test was already decided.
    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    pub fn latest_ts(&self) -> f64 {
        self.latest_ts
    }

    pub fn decision(&self) -> Verdict {
        self.state.decision()
    }

    /// Applies one event and evaluates the stopping rules if the cadence is
    /// due and both arms are large enough. Returns the evaluation, if any.
    pub fn apply_event(&mut self, e: &Event) -> Result<Option<Evaluation<f64>>> {
        if self.state.is_decided() {
            self.ignored += 1;
            self.state.flag(Diagnostic::IgnoredPostDecision);
            return Ok(None);
        }
        match self.monitor.mode {
            Mode::Measurement => {
                let v = e.value.ok_or(Error::MissingValue { line: 0 })?;
                match e.arm {
                    Arm::A => self.a.insert(v)?,
                    Arm::B => self.b.insert(v)?,
                }
            }
            Mode::Count => self.push_arrival(e.arm, e.ts)?,
        }
        self.accepted += 1;
        self.since_eval += 1;
        self.latest_ts = self.latest_ts.max(e.ts);
        if self.since_eval >= self.monitor.cadence && self.state.can_evaluate(&self.a, &self.b) {
            self.since_eval = 0;
            let ev = self.state.update(&self.a, &self.b, self.latest_ts)?;
            return Ok(Some(ev));
        }
        Ok(None)
    }

    fn push_arrival(&mut self, arm: Arm, ts: f64) -> Result<()> {
        let eps = self.monitor.tie_epsilon;
        let policy = self.monitor.out_of_order;
        let (times, gaps) = match arm {
            Arm::A => (&mut self.times_a, &mut self.a),
            Arm::B => (&mut self.times_b, &mut self.b),
        };
        let Some(&last) = times.last() else {
            times.push(ts);
            return Ok(());
        };
        if ts < last && policy == OutOfOrderPolicy::Reject {
            return Err(Error::OutOfOrderTimestamp { arm, ts, last });
        }
        // position after any equal timestamps, so ties keep input order
        let pos = times.partition_point(|&t| t <= ts);
        let mut t = ts;
        if pos > 0 && times[pos - 1] == t {
            t = times[pos - 1] + eps;
            if pos < times.len() && t >= times[pos] {
                t = (times[pos - 1] + times[pos]) / 2.0;
            }
            if t <= times[pos - 1] {
                return Err(Error::NonIncreasingTimestamps { index: pos });
            }
            self.state.flag(Diagnostic::TiePerturbed);
        }
        if pos == times.len() {
            gaps.insert(t - times[pos - 1])?;
        } else if pos == 0 {
            gaps.insert(times[0] - t)?;
        } else {
            let (prev, next) = (times[pos - 1], times[pos]);
            gaps.remove(next - prev);
            gaps.insert(t - prev)?;
            gaps.insert(next - t)?;
        }
        times.insert(pos, t);
        Ok(())
    }

    /// End-of-input bookkeeping: flags a starved arm on an undecided test.
    /// Does not evaluate.
    pub fn finish(&mut self) {
        if !self.state.is_decided() && !self.state.can_evaluate(&self.a, &self.b) {
            self.state.flag(Diagnostic::StarvedArm);
        }
    }

    /// Writes the snapshot as versioned newline-delimited JSON records.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_records()?.as_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)?;
        let mut lines = Vec::new();
        for line in BufReader::new(f).lines() {
            lines.push(line?);
        }
        Self::from_records(&lines)
    }

    fn to_records(&self) -> Result<String> {
        let mut out = String::new();
        let header = Header { record: "header".into(), format_version: FORMAT_VERSION };
        for rec in [
            enc(&header)?,
            enc(&Tagged { record: "monitor", body: &self.monitor })?,
            enc(&Tagged { record: "state", body: &self.state })?,
            enc(&Tagged { record: "counters", body: &Counters::of(self) })?,
            enc(&Tagged { record: "arm", body: &ArmRecord { arm: Arm::A, values: &self.a, timestamps: &self.times_a } })?,
            enc(&Tagged { record: "arm", body: &ArmRecord { arm: Arm::B, values: &self.b, timestamps: &self.times_b } })?,
        ] {
            out.push_str(&rec);
            out.push('\n');
        }
        Ok(out)
    }

    fn from_records(lines: &[String]) -> Result<Self> {
        let corrupt = |m: String| Error::CorruptSnapshot(m);
        let mut it = lines.iter().filter(|l| !l.trim().is_empty());
        let first = it.next().ok_or_else(|| corrupt("empty file".into()))?;
        let header: Value = serde_json::from_str(first).map_err(|e| corrupt(format!("header: {e}")))?;
        if header.get("record").and_then(Value::as_str) != Some("header") {
            return Err(corrupt("first record is not a header".into()));
        }
        let version = header
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| corrupt("header lacks format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch { found: u32::try_from(version).unwrap_or(u32::MAX), expected: FORMAT_VERSION });
        }
        let mut monitor = None;
        let mut state = None;
        let mut counters: Option<Counters> = None;
        let mut arms: Vec<OwnedArmRecord> = Vec::new();
        for line in it {
            let v: Value = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            let kind = v.get("record").and_then(Value::as_str).unwrap_or_default().to_string();
            let body = v.get("body").cloned().ok_or_else(|| corrupt(format!("{kind} record has no body")))?;
            let bad = |e: serde_json::Error| corrupt(format!("{kind}: {e}"));
            match kind.as_str() {
                "monitor" => monitor = Some(serde_json::from_value::<MonitorConfig>(body).map_err(bad)?),
                "state" => state = Some(serde_json::from_value::<TestState<f64>>(body).map_err(bad)?),
                "counters" => counters = Some(serde_json::from_value(body).map_err(bad)?),
                "arm" => arms.push(serde_json::from_value(body).map_err(bad)?),
                other => return Err(corrupt(format!("unknown record {other:?}"))),
            }
        }
        let monitor = monitor.ok_or_else(|| corrupt("missing monitor record".into()))?;
        let state = state.ok_or_else(|| corrupt("missing state record".into()))?;
        let counters = counters.ok_or_else(|| corrupt("missing counters record".into()))?;
        let take = |arm: Arm, arms: &mut Vec<OwnedArmRecord>| {
            let i = arms.iter().position(|r| r.arm == arm).ok_or_else(|| corrupt(format!("missing arm {arm}")))?;
            Ok::<_, Error>(arms.swap_remove(i))
        };
        let ra = take(Arm::A, &mut arms)?;
        let rb = take(Arm::B, &mut arms)?;
        if !arms.is_empty() {
            return Err(corrupt("duplicate arm record".into()));
        }
        monitor.validate().map_err(|e| corrupt(e.to_string()))?;
        let snap = Self {
            monitor,
            state,
            a: ra.values,
            b: rb.values,
            times_a: ra.timestamps,
            times_b: rb.timestamps,
            accepted: counters.accepted,
            ignored: counters.ignored,
            since_eval: counters.since_eval,
            latest_ts: counters.latest_ts,
        };
        snap.check_consistent().map_err(corrupt)?;
        Ok(snap)
    }

    fn check_consistent(&self) -> std::result::Result<(), String> {
        let arms = [(Arm::A, &self.a, &self.times_a), (Arm::B, &self.b, &self.times_b)];
        match self.monitor.mode {
            Mode::Measurement => {
                if arms.iter().any(|(_, _, t)| !t.is_empty()) {
                    return Err("measurement snapshot carries timestamps".into());
                }
                if (self.a.len() + self.b.len()) as u64 != self.accepted {
                    return Err("event count does not match sample sizes".into());
                }
            }
            Mode::Count => {
                for (arm, gaps, times) in arms {
                    if times.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(format!("arm {arm} timestamps are not increasing"));
                    }
                    if gaps.len() + 1 != times.len().max(1) {
                        return Err(format!("arm {arm} gap count does not match timestamps"));
                    }
                }
                if (self.times_a.len() + self.times_b.len()) as u64 != self.accepted {
                    return Err("event count does not match timestamps".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Header {
    record: String,
    format_version: u32,
}

#[derive(Serialize)]
struct Tagged<'a, B: Serialize> {
    record: &'a str,
    body: &'a B,
}

#[derive(Serialize, Deserialize)]
struct Counters {
    accepted: u64,
    ignored: u64,
    since_eval: usize,
    latest_ts: f64,
}

impl Counters {
    fn of(s: &TestSnapshot) -> Self {
        Self { accepted: s.accepted, ignored: s.ignored, since_eval: s.since_eval, latest_ts: s.latest_ts }
    }
}

#[derive(Serialize)]
struct ArmRecord<'a> {
    arm: Arm,
    values: &'a ArmSample<f64>,
    timestamps: &'a [f64],
}

#[derive(Deserialize)]
struct OwnedArmRecord {
    arm: Arm,
    values: ArmSample<f64>,
    timestamps: Vec<f64>,
}

fn enc<S: Serialize>(v: &S) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::CorruptSnapshot(e.to_string()))
}

/// Convenience constructor for the common case.
pub fn new_snapshot(hypothesis: Hypothesis, tau: f64, epsilon: EpsilonSpec<f64>, monitor: MonitorConfig) -> Result<TestSnapshot> {
    TestSnapshot::new(TestConfig::new(hypothesis, tau, epsilon)?, monitor)
}
