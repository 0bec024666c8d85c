//! Boundary parsing of exact rationals.
//!
//! Accepted forms: `"9/10"`, `"-3"`, `"0.25"`, `"2.5e-1"`. Decimal inputs are
//! converted exactly and must reduce to a denominator of at most
//! [`MAX_DENOMINATOR`]; anything else is rejected.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Largest denominator accepted for decimal input.
pub const MAX_DENOMINATOR: u64 = 1_000_000;

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in `{s}`")))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in `{s}`")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(BigRational::new(num, den));
    }
    let r = parse_decimal(s)?;
    if r.denom() > &BigInt::from(MAX_DENOMINATOR) {
        return Err(Error::Parse(format!(
            "`{s}` reduces to denominator {} > {MAX_DENOMINATOR}; give it as p/q",
            r.denom()
        )));
    }
    Ok(r)
}

fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = exp - frac_part.len() as i32;
    if scale.unsigned_abs() > 64 {
        return Err(bad());
    }
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Renders a rational as `p/q`, or `p` when integral.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact rational for a finite `f64` when its reduced denominator is small.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    let r = BigRational::from_float(x).ok_or_else(|| Error::Parse(format!("{x} is not finite")))?;
    if r.denom() > &BigInt::from(MAX_DENOMINATOR) {
        // try the shortest decimal rendering instead of the binary expansion
        return parse_rational(&format!("{x}"));
    }
    Ok(r)
}
