//! Sweep result rows and their CSV form.

use crate::error::{Error, Result};
use crate::model::Mode;
use crate::prefetch::Prefetcher;
use std::io::{Read, Write};

pub const CSV_HEADER: [&str; 9] = ["sweep_param", "value", "mode", "prefetcher", "nf", "mean_rmin", "stderr", "trials", "failures"];

/// Significant digits of every float written to CSV.
pub const SIG_DIGITS: usize = 9;

/// One aggregated sweep cell. Floats are stored already rounded to
/// [`SIG_DIGITS`] significant digits so the CSV form is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_param: String,
    pub value: f64,
    pub mode: Mode,
    pub prefetcher: Prefetcher,
    /// `N_F`, or −1 where no hard transfer is used.
    pub nf: i64,
    pub mean_rmin: f64,
    pub stderr: f64,
    pub trials: usize,
    pub failures: usize,
}

/// C-style `%.9g`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.sweep_param.clone(),
            format_sig(r.value),
            r.mode.label().to_string(),
            r.prefetcher.label().to_string(),
            r.nf.to_string(),
            format_sig(r.mean_rmin),
            format_sig(r.stderr),
            r.trials.to_string(),
            r.failures.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    let int = |s: &str| s.parse::<i64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!("row has {} fields", rec.len())));
        }
        let count = |s: &str| usize::try_from(int(s)?).map_err(|_| Error::Parse(format!("negative count '{s}'")));
        rows.push(ResultRow {
            sweep_param: rec[0].to_string(),
            value: num(&rec[1])?,
            mode: rec[2].parse()?,
            prefetcher: rec[3].parse()?,
            nf: int(&rec[4])?,
            mean_rmin: num(&rec[5])?,
            stderr: num(&rec[6])?,
            trials: count(&rec[7])?,
            failures: count(&rec[8])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_matches_printf_g() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (0.0, "0"),
            (99999999999.0, "1e+11"),
            (0.999999999951, "1"),
        ];
        for (x, want) in cases {
            assert_eq!(format_sig(x), want, "{x}");
        }
    }

    #[test]
    fn header_is_exact() {
        assert_eq!(to_csv_string(&[]), "sweep_param,value,mode,prefetcher,nf,mean_rmin,stderr,trials,failures\n");
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    fn row() -> impl Strategy<Value = ResultRow> {
        (
            prop::sample::select(vec!["gamma", "mu", "C", "S", "snr"]),
            -1e6f64..1e6,
            prop::sample::select(vec![Mode::Hard, Mode::Soft, Mode::Hybrid]),
            prop::sample::select(vec![Prefetcher::Cmp, Prefetcher::Cd, Prefetcher::Fcd, Prefetcher::None, Prefetcher::Full]),
            -1i64..8,
            0.0f64..100.0,
            0.0f64..1e-3,
            0usize..50,
            0usize..50,
        )
            .prop_map(|(p, v, mode, prefetcher, nf, m, se, t, f)| ResultRow {
                sweep_param: p.to_string(),
                value: round_sig(v),
                mode,
                prefetcher,
                nf,
                mean_rmin: round_sig(m),
                stderr: round_sig(se),
                trials: t,
                failures: f,
            })
    }

    proptest! {
        #[test]
        fn csv_round_trips(rows in prop::collection::vec(row(), 0..10)) {
            let text = to_csv_string(&rows);
            prop_assert_eq!(read_csv(text.as_bytes()).unwrap(), rows);
        }

        #[test]
        fn rounding_is_idempotent(x in prop::num::f64::NORMAL) {
            let r = round_sig(x);
            prop_assert_eq!(round_sig(r), r);
            prop_assert!(((r - x) / x).abs() <= 5e-9);
        }
    }
}
