//! Text renderings: band CSV files and JSON-lines decision records.
//!
//! Computed numbers are printed with 6 significant digits in the style of
//! C's `%g`. Grid points and event times echo input data and are printed in
//! their shortest exact form, so distinct observations stay distinct. In the
//! grid column the point below the smallest observation is written `-inf`;
//! unbounded band values (quantiles past the last order statistic) are left
//! empty.

use std::io::{self, Write};

use crate::bounds::{BandCurve, BandKind};
use crate::empirical::ExtendedReal;
use crate::scalar::Scalar;
use crate::testing::Evaluation;
use crate::twosample::{DiffBand, ScalarInterval};

pub const CSV_HEADER: &str = "kind,grid,lower,upper,alpha,n_a,n_b";

/// `%g` with 6 significant digits.
pub fn format_g(x: f64) -> String {
    const PREC: i32 = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_exact(x: f64) -> String {
    format!("{x}")
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn grid_cell<T: Scalar>(x: ExtendedReal<T>) -> String {
    match x {
        ExtendedReal::NegInf => "-inf".into(),
        ExtendedReal::PosInf => "inf".into(),
        ExtendedReal::Finite(v) => format_exact(v.as_f64()),
    }
}

fn value_cell<T: Scalar>(x: ExtendedReal<T>) -> String {
    x.finite().map(|v| format_g(v.as_f64())).unwrap_or_default()
}

fn count_cell(n: Option<usize>) -> String {
    n.map(|n| n.to_string()).unwrap_or_default()
}

pub fn kind_name(kind: BandKind) -> &'static str {
    match kind {
        BandKind::Cdf => "cdf",
        BandKind::Quantile => "quantile",
        BandKind::Diff => "diff",
        BandKind::AbsDiff => "abs_diff",
    }
}

/// One-arm or two-arm band as CSV rows. Pass the arm size in `n_a` or `n_b`
/// for a one-arm band and both for a two-arm band.
pub fn write_band_csv<T: Scalar, W: Write>(
    w: &mut W,
    band: &BandCurve<T>,
    n_a: Option<usize>,
    n_b: Option<usize>,
) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let alpha = format_g(band.alpha.as_f64());
    for i in 0..band.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            kind_name(band.kind),
            grid_cell(band.grid[i]),
            value_cell(band.lower[i]),
            value_cell(band.upper[i]),
            alpha,
            count_cell(n_a),
            count_cell(n_b)
        )?;
    }
    Ok(())
}

pub fn write_diff_csv<T: Scalar, W: Write>(w: &mut W, band: &DiffBand<T>) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let alpha = format_g(band.alpha.as_f64());
    for i in 0..band.grid.len() {
        writeln!(
            w,
            "diff,{},{},{},{},{},{}",
            grid_cell(band.grid[i]),
            format_g(band.lower[i].as_f64()),
            format_g(band.upper[i].as_f64()),
            alpha,
            band.n_a,
            band.n_b
        )?;
    }
    Ok(())
}

/// Running `||d||_inf` interval path; the grid column holds the event time
/// of each evaluation.
pub fn write_supnorm_csv<T: Scalar, W: Write>(
    w: &mut W,
    path: &[(T, usize, usize, ScalarInterval<T>)],
    alpha: T,
) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let alpha = format_g(alpha.as_f64());
    for &(t, na, nb, iv) in path {
        writeln!(
            w,
            "supnorm,{},{},{},{},{},{}",
            format_exact(t.as_f64()),
            format_g(iv.lo.as_f64()),
            format_g(iv.hi.as_f64()),
            alpha,
            na,
            nb
        )?;
    }
    Ok(())
}

/// One decision record as a single JSON line (no trailing newline).
/// `wall_clock` is seconds since the Unix epoch, included only when given.
pub fn decision_record<T: Scalar>(ev: &Evaluation<T>, wall_clock: Option<f64>) -> String {
    let g = |x: T| format_g(x.as_f64());
    let mut s = format!(
        "{{\"t\":{},\"n_a\":{},\"n_b\":{},\"p\":{},\"q\":{},\"sup_d_l\":{},\"inf_d_u\":{},\"l\":{},\"u\":{},\"decision\":\"{}\"",
        format_exact(ev.t.as_f64()),
        ev.n_a,
        ev.n_b,
        g(ev.p),
        g(ev.q),
        g(ev.sup_d_l),
        g(ev.inf_d_u),
        g(ev.l),
        g(ev.u),
        ev.decision.as_str()
    );
    if let Some(wc) = wall_clock {
        s.push_str(&format!(",\"wall_clock\":{}", format_g(wc)));
    }
    s.push('}');
    s
}
