//! Text serialization of [`PiecewiseLinearFn`].
//!
//! ```text
//! # optional comments
//! plfn 1
//! x_0 left_0 right_0
//! ...
//! ```
//! Numbers use the shortest round-trip formatting, so writing and re-reading is lossless.

use std::fmt::Write as _;

use super::PiecewiseLinearFn;
use crate::error::{LabError, Result};
use crate::real::Real;

const HEADER: &str = "plfn 1";

pub fn to_text<T: Real>(u: &PiecewiseLinearFn<T>) -> String {
    let mut s = String::with_capacity(32 * u.breakpoints().len() + 16);
    s.push_str(HEADER);
    s.push('\n');
    for i in 0..u.breakpoints().len() {
        let _ = writeln!(s, "{} {} {}", u.breakpoints()[i], u.left_values()[i], u.right_values()[i]);
    }
    s
}

pub fn parse_text<T: Real>(text: &str) -> Result<PiecewiseLinearFn<T>> {
    let mut header = false;
    let (mut xs, mut l, mut r) = (Vec::new(), Vec::new(), Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| LabError::Parse { line: i + 1, message: m.to_string() };
        if !header {
            if line != HEADER {
                return Err(err(&format!("expected header `{HEADER}`")));
            }
            header = true;
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(&format!("not a number: {t}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 3 {
            return Err(err("expected `x left right`"));
        }
        xs.push(T::lit(nums[0]));
        l.push(T::lit(nums[1]));
        r.push(T::lit(nums[2]));
    }
    if !header {
        return Err(LabError::Parse { line: 0, message: "missing header".into() });
    }
    PiecewiseLinearFn::new(xs, l, r)
}

/// `x,left,right` rows with a header line.
pub fn to_csv<T: Real>(u: &PiecewiseLinearFn<T>) -> String {
    let mut s = String::from("x,left,right\n");
    for i in 0..u.breakpoints().len() {
        let _ = writeln!(s, "{},{},{}", u.breakpoints()[i], u.left_values()[i], u.right_values()[i]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_lossless() {
        let u = PiecewiseLinearFn::new(
            vec![0.0, 0.1, 1.0 / 3.0, 1.0],
            vec![0.0, 0.7, std::f64::consts::PI, 2.0],
            vec![0.0, 0.2, std::f64::consts::PI, 2.0],
        )
        .unwrap();
        let back: PiecewiseLinearFn<f64> = parse_text(&to_text(&u)).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn parse_accepts_comments_and_rejects_garbage() {
        let ok = "# made by hand\nplfn 1\n0 0 0\n# mid\n1 1 1\n";
        let u: PiecewiseLinearFn<f64> = parse_text(ok).unwrap();
        assert_eq!(u.eval(0.5), 0.5);
        assert!(parse_text::<f64>("0 0 0\n1 1 1\n").is_err());
        assert!(parse_text::<f64>("plfn 1\n0 0\n1 1 1\n").is_err());
        assert!(parse_text::<f64>("plfn 1\n0 0 0\n").is_err());
    }
}
