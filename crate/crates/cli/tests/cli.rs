use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand_distr::{Distribution, Normal};
use seqcanary::simulate::run_rng;
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqcanary")).args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Interleaved measurement events: arm A from N(0, sd_a), arm B from
/// N(shift, sd_b), `n_a` and `n_b` events, one per time unit.
fn events(n_a: usize, n_b: usize, sd_a: f64, sd_b: f64, shift: f64, seed: u64) -> String {
    let mut rng = run_rng(seed, 0);
    let (da, db) = (Normal::new(0.0, sd_a).unwrap(), Normal::new(shift, sd_b).unwrap());
    let (mut i, mut j, mut t) = (0, 0, 0);
    let mut s = String::new();
    while i < n_a || j < n_b {
        // keep B's share proportional to its target size
        let take_b = j < n_b && (i >= n_a || j * n_a < i * n_b);
        if take_b {
            writeln!(s, r#"{{"arm":"b","value":{},"ts":{t}}}"#, db.sample(&mut rng)).unwrap();
            j += 1;
        } else {
            writeln!(s, r#"{{"arm":"a","value":{},"ts":{t}}}"#, da.sample(&mut rng)).unwrap();
            i += 1;
        }
        t += 1;
    }
    s
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn records(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn identical_streams_accept() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ev.jsonl", &events(15_000, 15_000, 1.0, 1.0, 0.0, 1));
    let out = dir.path().join("rec.jsonl");
    let o = run(&["monitor", "--in", &input, "--tau", "0.1", "--cadence", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("decision=accept_approx_null"));
    let recs = records(&out);
    let last = recs.last().unwrap();
    assert_eq!(last["decision"], "accept_approx_null");
    assert!(last["n_a"].as_u64().unwrap() <= 12957);
    // events after the decision are ignored, not evaluated
    assert!(!stderr(&o).contains("ignored=0 "));
}

#[test]
fn shifted_b_rejects_leq() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ev.jsonl", &events(20_000, 20_000, 1.0, 1.0, 0.25, 2));
    let o = run(&["monitor", "--in", &input, "--hypothesis", "leq", "--cadence", "50", "--out", "/dev/null"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    // the opposite one-sided null holds and is never rejected
    let o = run(&["monitor", "--in", &input, "--hypothesis", "geq", "--cadence", "50", "--out", "/dev/null"]);
    assert_ne!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn truncated_stream_is_undecided() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ev.jsonl", &events(100, 100, 1.0, 1.0, 0.25, 3));
    let out = dir.path().join("rec.jsonl");
    let o = run(&["monitor", "--in", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let last_q = records(&out).last().unwrap()["q"].as_f64().unwrap();
    assert!(stderr(&o).contains(&format!("q={last_q}")), "{}", stderr(&o));
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = events(5, 5, 1.0, 1.0, 0.0, 4);
    body.push_str("{\"arm\":\"c\",\"value\":1,\"ts\":99}\n");
    let input = write(dir.path(), "bad.jsonl", &body);
    let o = run(&["monitor", "--in", &input, "--out", "/dev/null"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 11"), "{}", stderr(&o));

    let input = write(dir.path(), "novalue.jsonl", "{\"arm\":\"a\",\"ts\":1}\n");
    assert_eq!(code(&run(&["monitor", "--in", &input, "--out", "/dev/null"])), 1);
    // the same line is fine for a count metric
    let o = run(&["monitor", "--in", &input, "--mode", "count", "--out", "/dev/null"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let input = write(dir.path(), "back.jsonl", "{\"arm\":\"a\",\"ts\":5}\n{\"arm\":\"a\",\"ts\":2}\n");
    assert_eq!(code(&run(&["monitor", "--in", &input, "--mode", "count", "--out", "/dev/null"])), 1);
    let o = run(&["monitor", "--in", &input, "--mode", "count", "--out-of-order", "sort", "--out", "/dev/null"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    assert_eq!(code(&run(&["monitor", "--tau", "0", "--in", &input])), 1);
    assert_eq!(code(&run(&["monitor", "--no-such-flag"])), 1);
}

#[test]
fn decision_records_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ev.jsonl", &events(3000, 3000, 1.0, 1.0, 0.3, 5));
    let out = dir.path().join("rec.jsonl");
    let o = run(&["monitor", "--in", &input, "--hypothesis", "eq", "--out", out.to_str().unwrap()]);
    assert_ne!(code(&o), 1, "{}", stderr(&o));
    let recs = records(&out);
    assert!(!recs.is_empty());
    let keys = ["t", "n_a", "n_b", "p", "q", "sup_d_l", "inf_d_u", "l", "u", "decision"];
    let mut prev_q = f64::INFINITY;
    for r in &recs {
        for k in keys {
            assert!(r.get(k).is_some(), "missing {k} in {r}");
        }
        assert!(r.get("wall_clock").is_none());
        let q = r["q"].as_f64().unwrap();
        assert!(q <= prev_q);
        assert!(r["p"].as_f64().unwrap() >= q);
        assert!(r["l"].as_f64().unwrap() <= r["u"].as_f64().unwrap());
        prev_q = q;
    }
    let with_clock = dir.path().join("clock.jsonl");
    run(&["monitor", "--in", &input, "--wall-clock", "--out", with_clock.to_str().unwrap()]);
    assert!(records(&with_clock)[0]["wall_clock"].as_f64().unwrap() > 1e9);
}

#[test]
fn snapshot_resume_matches_single_pass() {
    let dir = tempfile::tempdir().unwrap();
    let body = events(4000, 4000, 1.0, 1.0, 0.15, 6);
    let lines: Vec<&str> = body.lines().collect();
    let whole = write(dir.path(), "all.jsonl", &body);
    let first = write(dir.path(), "first.jsonl", &(lines[..3001].join("\n") + "\n"));
    let second = write(dir.path(), "second.jsonl", &(lines[3001..].join("\n") + "\n"));
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();

    let common = ["--cadence", "7", "--tau", "0.05", "--epsilon", "szorenyi"];
    let mut args = vec!["monitor", "--in", &whole];
    let full_out = p("full.jsonl");
    args.extend(["--out", &full_out]);
    args.extend(common);
    let full = run(&args);

    let (snap, r1, r2) = (p("snap.jsonl"), p("r1.jsonl"), p("r2.jsonl"));
    let mut args = vec!["monitor", "--in", &first, "--out", &r1, "--snapshot-out", &snap];
    args.extend(common);
    run(&args);
    let resumed = run(&["monitor", "--in", &second, "--out", &r2, "--snapshot-in", &snap]);

    let joined = fs::read_to_string(&r1).unwrap() + &fs::read_to_string(&r2).unwrap();
    assert_eq!(joined, fs::read_to_string(&full_out).unwrap());
    assert_eq!(code(&full), code(&resumed));
    assert_eq!(stderr(&full), stderr(&resumed));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,grid,lower,upper,alpha,n_a,n_b"));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn cell(s: &str) -> f64 {
    match s {
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().unwrap(),
    }
}

#[test]
fn bands_regenerate_normal_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ev.jsonl", &events(300, 600, 2.0, 0.25, 0.0, 7));
    let out = dir.path().join("bands");
    let o = run(&["bands", "--in", &input, "--epsilon", "fixed", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["cdf_a", "cdf_b", "quantile_a", "quantile_b", "diff", "abs_diff", "supnorm"] {
        assert!(out.join(format!("{name}.csv")).exists(), "{name}");
    }

    for (file, sd) in [("cdf_a.csv", 2.0), ("cdf_b.csv", 0.25)] {
        let f = NormalCdf::new(0.0, sd).unwrap();
        let rows = csv_rows(&out.join(file));
        assert_eq!(rows[0][1], "-inf");
        let grid: Vec<f64> = rows.iter().map(|r| cell(&r[1])).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]), "{file} grid not increasing");
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r[4], "0.025");
            // printed to 6 digits, so allow for rounding at the edges
            let left = if i == 0 { 0.0 } else { f.cdf(grid[i]) };
            let right = grid.get(i + 1).map_or(1.0, |&g| f.cdf(g));
            assert!(cell(&r[2]) <= left + 1e-5 && right <= cell(&r[3]) + 1e-5, "{file} row {i}");
        }
    }

    let diff = csv_rows(&out.join("diff.csv"));
    assert_eq!(diff.len(), 901);
    assert!(diff.iter().all(|r| r[0] == "diff" && r[5] == "300" && r[6] == "600"));
    let sup = csv_rows(&out.join("supnorm.csv"));
    assert_eq!(sup.len(), 1);
    assert!(cell(&sup[0][2]) <= cell(&sup[0][3]));

    // a sequential method writes the running interval at each cadence
    let o = run(&["bands", "--in", &input, "--cadence", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sup = csv_rows(&out.join("supnorm.csv"));
    assert!(sup.len() > 5);
    assert!(sup.windows(2).all(|w| cell(&w[1][2]) >= cell(&w[0][2]) && cell(&w[1][3]) <= cell(&w[0][3])));
}

#[test]
fn bands_need_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "a_only.jsonl", "{\"arm\":\"a\",\"value\":1,\"ts\":0}\n");
    let o = run(&["bands", "--in", &input, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn plan_reports_sizes() {
    let o = run(&["plan", "--alpha", "0.05", "--r", "0.1", "--epsilon", "fixed"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("fixed_n_per_arm=877"), "{text}");
    assert!(!text.contains("sequential"));

    let o = run(&["plan", "--tau", "0.1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sequential_max_n_per_arm=12957"), "{text}");

    assert_eq!(code(&run(&["plan", "--r", "0"])), 1);
    assert_eq!(code(&run(&["plan", "--r", "0.1", "--alpha", "1.5"])), 1);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("1.csv"), dir.path().join("2.csv"));
    let args = |p: &Path| {
        run(&["simulate", "--seed", "9", "--runs", "4", "--cap", "800", "--out", p.to_str().unwrap()])
    };
    let (a, b) = (args(&p1), args(&p2));
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# rng=ChaCha8 seed=9"));
    assert_eq!(text.lines().filter(|l| l.starts_with("null,") || l.starts_with("alternative,")).count(), 6);
    assert_eq!(fs::read_to_string(&p1).unwrap().lines().count(), 9);

    let other = run(&["simulate", "--seed", "10", "--runs", "4", "--cap", "800"]);
    assert_ne!(other.stdout, fs::read(&p1).unwrap());
    assert_eq!(code(&run(&["simulate", "--runs", "4"])), 1);
}
