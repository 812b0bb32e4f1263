//! `t_s,re,im` CSV output.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::series::FidSeries;

pub const CSV_HEADER: &str = "t_s,re,im";

/// C's `%.17g`: 17 significant digits, trailing zeros dropped.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn emit_csv(series: &FidSeries) -> String {
    let mut out = String::with_capacity(16 + series.len() * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for ((t, re), im) in series.times.iter().zip(&series.re).zip(&series.im) {
        out.push_str(&format_g17(*t));
        out.push(',');
        out.push_str(&format_g17(*re));
        out.push(',');
        out.push_str(&format_g17(*im));
        out.push('\n');
    }
    out
}

pub fn write_csv(series: &FidSeries, path: &Path) -> Result<()> {
    fs::write(path, emit_csv(series))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AngularFreq, SpinSystem};
    use crate::series::Provenance;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.0, "0"),
            (-0.0, "-0"),
            (0.1, "0.10000000000000001"),
            (0.001, "0.001"),
            (1e-5, "1.0000000000000001e-05"),
            (2.5e-7, "2.4999999999999999e-07"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (-0.5, "-0.5"),
            (0.07788161993769471, "0.077881619937694713"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g17(x), want, "{x:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, -1.6e-19, 0.999999999999] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn three_samples_four_lines() {
        let s = FidSeries {
            times: vec![0.0, 0.001, 0.002],
            re: vec![1.0, 0.5, -0.25],
            im: vec![0.0; 3],
            provenance: Provenance::Analytic,
            system: SpinSystem::new("t", AngularFreq::ZERO, vec![]),
        };
        let text = emit_csv(&s);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "t_s,re,im");
        assert_eq!(lines[1], "0,1,0");
        assert_eq!(lines[2], "0.001,0.5,0");
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert_eq!(emit_csv(&s), text);
    }
}
