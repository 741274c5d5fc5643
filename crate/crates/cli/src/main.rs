use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use seqcanary::bounds::{cdf_band, default_quantile_probs, quantile_band, EpsilonMethod, EpsilonSpec};
use seqcanary::export::{decision_record, format_g, write_band_csv, write_diff_csv, write_supnorm_csv};
use seqcanary::ingest::{parse_event, Arm, Mode, MonitorConfig, OutOfOrderPolicy, TestSnapshot};
use seqcanary::simulate::{run_study, GammaStudy, StudySummary, RNG_NAME};
use seqcanary::testing::{fixed_sample_size, sequential_max_n, Hypothesis, TestConfig, Verdict};
use seqcanary::twosample::{abs_diff_band, diff_band, DiffExtrema, RunningIntersection, ScalarInterval};

const EXIT_ACCEPT: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_REJECT: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

/// Sequential canary analysis: anytime-valid two-sample tests on metric streams.
#[derive(Parser)]
#[command(name = "seqcanary", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monitor an event stream and emit one decision record per evaluation.
    Monitor(MonitorArgs),
    /// Export confidence bands as CSV files for plotting.
    Bands(BandsArgs),
    /// Run the Gamma stream study with fixed-n baselines.
    Simulate(SimulateArgs),
    /// Per-arm sample sizes for a target band radius.
    Plan(PlanArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum HypothesisArg {
    /// Null: B is stochastically no larger than A.
    Leq,
    /// Null: B is stochastically no smaller than A.
    Geq,
    /// Null: A and B have the same distribution.
    Eq,
}

impl From<HypothesisArg> for Hypothesis {
    fn from(h: HypothesisArg) -> Self {
        match h {
            // B <= A means F_b >= F_a, i.e. A >= B
            HypothesisArg::Leq => Hypothesis::ASucceedsB,
            HypothesisArg::Geq => Hypothesis::APrecedesB,
            HypothesisArg::Eq => Hypothesis::Equal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Measurement,
    Count,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Measurement => Mode::Measurement,
            ModeArg::Count => Mode::Count,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EpsilonArg {
    Howard,
    Szorenyi,
    Darling,
    Fixed,
}

impl From<EpsilonArg> for EpsilonMethod {
    fn from(e: EpsilonArg) -> Self {
        match e {
            EpsilonArg::Howard => EpsilonMethod::Howard,
            EpsilonArg::Szorenyi => EpsilonMethod::Szorenyi,
            EpsilonArg::Darling => EpsilonMethod::DarlingRobbins,
            EpsilonArg::Fixed => EpsilonMethod::FixedDkwm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Reject,
    Sort,
}

#[derive(Args)]
struct EpsilonOpts {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Band radius formula.
    #[arg(long, value_enum, default_value = "howard")]
    epsilon: EpsilonArg,
    /// First sample size covered by the Darling-Robbins radius.
    #[arg(long, default_value_t = 2)]
    n_star: usize,
}

impl EpsilonOpts {
    fn spec(&self) -> Result<EpsilonSpec<f64>> {
        Ok(EpsilonSpec::new(self.epsilon.into(), self.alpha, self.n_star)?)
    }
}

#[derive(Args)]
struct StreamOpts {
    /// Event file (newline-delimited JSON); standard input when absent or "-".
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "measurement")]
    mode: ModeArg,
    /// Count mode: handling of a timestamp older than the arm's latest.
    #[arg(long, value_enum, default_value = "reject")]
    out_of_order: OrderArg,
    /// Count mode: offset applied to tied timestamps, in seconds.
    #[arg(long, default_value_t = seqcanary::ingest::DEFAULT_TIE_EPSILON)]
    tie_epsilon: f64,
}

#[derive(Args)]
struct MonitorArgs {
    #[command(flatten)]
    eps: EpsilonOpts,
    #[command(flatten)]
    stream: StreamOpts,
    /// Practical-irrelevance tolerance on the CDF-difference scale.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, value_enum, default_value = "eq")]
    hypothesis: HypothesisArg,
    /// Evaluate after every N accepted events.
    #[arg(long, default_value_t = 1)]
    cadence: usize,
    /// Decision records file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume from this snapshot; its configuration replaces the flags.
    #[arg(long)]
    snapshot_in: Option<PathBuf>,
    /// Write the final state here.
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    /// Add a wall-clock stamp to each decision record.
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Args)]
struct BandsArgs {
    #[command(flatten)]
    eps: EpsilonOpts,
    #[command(flatten)]
    stream: StreamOpts,
    /// Read samples from a snapshot instead of an event file.
    #[arg(long, conflicts_with = "input")]
    snapshot_in: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Events between points of the running sup-norm interval.
    #[arg(long, default_value_t = 1)]
    cadence: usize,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ScenarioArg {
    Null,
    Alternative,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "howard")]
    epsilon: EpsilonArg,
    #[arg(long, default_value_t = 2)]
    n_star: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Pairs per run.
    #[arg(long, default_value_t = 5000)]
    cap: usize,
    #[arg(long, value_enum, default_value = "both")]
    scenario: ScenarioArg,
    /// Gamma shape.
    #[arg(long, default_value_t = 10.0)]
    shape: f64,
    /// Gamma rate of arm A (and of B in the null scenario).
    #[arg(long, default_value_t = 10.0)]
    rate_a: f64,
    /// Gamma rate of arm B in the alternative scenario.
    #[arg(long, default_value_t = 11.0)]
    rate_b: f64,
    /// Per-run stopping times as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    eps: EpsilonOpts,
    /// Difference-band radius.
    #[arg(long, conflicts_with = "tau", required_unless_present = "tau")]
    r: Option<f64>,
    /// Tolerance; plans for radius tau / 2.
    #[arg(long)]
    tau: Option<f64>,
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a rejection
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPT });
        }
    };
    let result = match cli.command {
        Command::Monitor(a) => monitor(a),
        Command::Bands(a) => bands(a).map(|_| EXIT_ACCEPT),
        Command::Simulate(a) => simulate(a).map(|_| EXIT_ACCEPT),
        Command::Plan(a) => plan(a).map(|_| EXIT_ACCEPT),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn BufRead>> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(Box::new(BufReader::new(f)))
        }
        _ => Ok(Box::new(BufReader::new(io::stdin()))),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn monitor_config(stream: &StreamOpts, cadence: usize) -> MonitorConfig {
    MonitorConfig {
        mode: stream.mode.into(),
        cadence,
        tie_epsilon: stream.tie_epsilon,
        out_of_order: match stream.out_of_order {
            OrderArg::Reject => OutOfOrderPolicy::Reject,
            OrderArg::Sort => OutOfOrderPolicy::SortOnBuffer,
        },
    }
}

/// Feeds every non-blank line of `input` to `f`, with 1-based line numbers.
fn for_each_event(
    input: Box<dyn BufRead>,
    mode: Mode,
    mut f: impl FnMut(seqcanary::ingest::Event) -> Result<()>,
) -> Result<()> {
    for (i, line) in input.lines().enumerate() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        f(parse_event(&line, i + 1, mode)?)?;
    }
    Ok(())
}

fn monitor(args: MonitorArgs) -> Result<u8> {
    let mut snap = match &args.snapshot_in {
        Some(p) => TestSnapshot::load(p).with_context(|| format!("loading snapshot {}", p.display()))?,
        None => {
            let cfg = TestConfig::new(args.hypothesis.into(), args.tau, args.eps.spec()?)?;
            TestSnapshot::new(cfg, monitor_config(&args.stream, args.cadence))?
        }
    };
    let mode = snap.monitor().mode;
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    for_each_event(open_input(&args.stream.input)?, mode, |e| {
        if let Some(ev) = snap.apply_event(&e)? {
            let wc = args
                .wall_clock
                .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0));
            writeln!(out, "{}", decision_record(&ev, wc))?;
        }
        Ok(())
    })?;
    out.flush()?;
    snap.finish();
    if let Some(p) = &args.snapshot_out {
        snap.save(p).with_context(|| format!("writing snapshot {}", p.display()))?;
    }

    let st = snap.state();
    let (na, nb) = (snap.sample(Arm::A).len(), snap.sample(Arm::B).len());
    let diags: Vec<String> = st.diagnostics().iter().map(|d| d.to_string()).collect();
    eprintln!(
        "final decision={} q={} n_a={} n_b={} events={} ignored={} diagnostics=[{}]",
        st.decision().as_str(),
        format_g(st.q()),
        na,
        nb,
        snap.accepted(),
        snap.ignored(),
        diags.join(",")
    );
    Ok(match st.decision() {
        Verdict::AcceptApproxNull => EXIT_ACCEPT,
        Verdict::RejectNull => EXIT_REJECT,
        Verdict::Continue => EXIT_UNDECIDED,
    })
}

fn bands(args: BandsArgs) -> Result<()> {
    if args.cadence == 0 {
        bail!("cadence must be at least 1");
    }
    let spec = args.eps.spec()?;
    let mut path: Vec<(f64, usize, usize, ScalarInterval<f64>)> = Vec::new();
    let mut running = RunningIntersection::new();
    let snap = match &args.snapshot_in {
        Some(p) => TestSnapshot::load(p).with_context(|| format!("loading snapshot {}", p.display()))?,
        None => {
            // accumulate only; the test itself is never evaluated here
            let cfg = TestConfig::new(Hypothesis::Equal, 1.0, EpsilonSpec::howard(0.5)?)?;
            let mut snap = TestSnapshot::new(cfg, monitor_config(&args.stream, usize::MAX))?;
            let mut since = 0usize;
            for_each_event(open_input(&args.stream.input)?, args.stream.mode.into(), |e| {
                snap.apply_event(&e)?;
                since += 1;
                let (a, b) = (snap.sample(Arm::A), snap.sample(Arm::B));
                if spec.method().is_sequential() && since >= args.cadence && a.len() >= spec.min_n() && b.len() >= spec.min_n()
                {
                    since = 0;
                    running.update(DiffExtrema::new(a, b, &spec)?.supnorm_interval());
                    let cur = running.current.expect("updated");
                    path.push((snap.latest_ts(), a.len(), b.len(), cur));
                }
                Ok(())
            })?;
            snap
        }
    };
    let (a, b) = (snap.sample(Arm::A), snap.sample(Arm::B));
    let half = spec.with_alpha(spec.alpha() / 2.0);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let dir = &args.out;
    let probs = default_quantile_probs::<f64>();

    let mut w = create(&dir.join("cdf_a.csv"))?;
    write_band_csv(&mut w, &cdf_band(a, &half).context("arm a")?, Some(a.len()), None)?;
    let mut w = create(&dir.join("cdf_b.csv"))?;
    write_band_csv(&mut w, &cdf_band(b, &half).context("arm b")?, None, Some(b.len()))?;
    let mut w = create(&dir.join("quantile_a.csv"))?;
    write_band_csv(&mut w, &quantile_band(a, &half, &probs)?, Some(a.len()), None)?;
    let mut w = create(&dir.join("quantile_b.csv"))?;
    write_band_csv(&mut w, &quantile_band(b, &half, &probs)?, None, Some(b.len()))?;
    let diff = diff_band(a, b, &spec)?;
    let mut w = create(&dir.join("diff.csv"))?;
    write_diff_csv(&mut w, &diff)?;
    let mut w = create(&dir.join("abs_diff.csv"))?;
    write_band_csv(&mut w, &abs_diff_band(&diff), Some(a.len()), Some(b.len()))?;
    if path.is_empty() {
        // single look: the interval from the full samples
        let iv = match (args.snapshot_in.is_some(), snap.state().supnorm_interval()) {
            (true, Some(iv)) => iv,
            _ => seqcanary::twosample::supnorm_interval(&diff),
        };
        path.push((snap.latest_ts(), a.len(), b.len(), iv));
    }
    let mut w = create(&dir.join("supnorm.csv"))?;
    write_supnorm_csv(&mut w, &path, spec.alpha())?;
    w.flush()?;
    Ok(())
}

fn stop_cell(s: Option<usize>) -> String {
    s.map(|n| n.to_string()).unwrap_or_default()
}

fn median_cell(m: Option<f64>) -> String {
    m.map(format_g).unwrap_or_else(|| "none".into())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let base = GammaStudy {
        runs: args.runs,
        cap: args.cap,
        alpha: args.alpha,
        seed: args.seed,
        shape: args.shape,
        rate_a: args.rate_a,
        rate_b: args.rate_a,
        method: args.epsilon.into(),
        n_star: args.n_star,
    };
    let mut studies = Vec::new();
    if args.scenario != ScenarioArg::Alternative {
        studies.push(("null", base));
    }
    if args.scenario != ScenarioArg::Null {
        studies.push(("alternative", GammaStudy { rate_b: args.rate_b, ..base }));
    }
    let results: Vec<(&str, StudySummary)> =
        studies.into_iter().map(|(name, s)| Ok((name, run_study(&s)?))).collect::<Result<_>>()?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "# rng={RNG_NAME} seed={} runs={} cap={} alpha={} epsilon={} shape={} rate_a={} rate_b={}",
        args.seed,
        args.runs,
        args.cap,
        format_g(args.alpha),
        EpsilonMethod::from(args.epsilon).name(),
        format_g(args.shape),
        format_g(args.rate_a),
        format_g(args.rate_b)
    )?;
    writeln!(out, "scenario,test,rejections,runs,median_stop")?;
    for (name, s) in &results {
        let rows = [
            ("ks", s.ks_rejections, s.ks_median_stop()),
            ("mann_whitney", s.mw_rejections, s.mw_median_stop()),
            ("sequential", s.seq_rejections, s.seq_median_stop()),
        ];
        for (test, k, med) in rows {
            writeln!(out, "{name},{test},{k},{},{}", s.outcomes.len(), median_cell(med))?;
        }
    }
    if let Some(p) = &args.out {
        let mut w = create(p)?;
        writeln!(w, "scenario,run,ks_stop,mw_stop,seq_stop")?;
        for (name, s) in &results {
            for (i, o) in s.outcomes.iter().enumerate() {
                writeln!(w, "{name},{i},{},{},{}", stop_cell(o.ks), stop_cell(o.mann_whitney), stop_cell(o.sequential))?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn plan(args: PlanArgs) -> Result<()> {
    let r = match (args.r, args.tau) {
        (Some(r), _) => r,
        (None, Some(tau)) => tau / 2.0,
        (None, None) => bail!("either --r or --tau is required"),
    };
    if !(r > 0.0) {
        bail!("radius must be positive, got {r}");
    }
    let spec = args.eps.spec()?;
    println!("alpha={} r={}", format_g(spec.alpha()), format_g(r));
    println!("fixed_n_per_arm={}", fixed_sample_size(spec.alpha(), r)?);
    if spec.method().is_sequential() {
        println!("sequential_max_n_per_arm={} epsilon={}", sequential_max_n(&spec, r)?, spec.method().name());
    }
    Ok(())
}
