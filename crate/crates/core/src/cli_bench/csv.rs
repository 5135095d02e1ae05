//! Regret table output.

use crate::evaluation::RegretRow;
use crate::scalar::Scalar;

pub const HEADER: &str = "sweep_value,regret_hm,regret_ma,regret_mn,bcp";

/// `x` with 12 significant digits, trailing zeros removed, in the style of
/// C's `%.12g`.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}"))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn render_rows<S: Scalar>(rows: &[RegretRow<S>]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let cells = [&r.sweep_value, &r.regret_hm, &r.regret_ma, &r.regret_mn, &r.bcp];
        let line: Vec<String> = cells.iter().map(|c| format_sig(c.to_f64())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
