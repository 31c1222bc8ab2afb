//! C99 `%a`-style hexadecimal floats: `-0x1.8p+1`, `0x0.0000000000001p-1022`.

use crate::error::{Error, Result};

const MANTISSA_BITS: u32 = 52;
const EXP_BIAS: i32 = 1023;

pub fn format(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let frac = bits & ((1u64 << MANTISSA_BITS) - 1);
    let biased = ((bits >> MANTISSA_BITS) & 0x7ff) as i32;
    if biased == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 {
        (0, 1 - EXP_BIAS)
    } else {
        (1, biased - EXP_BIAS)
    };
    let digits = format!("{frac:013x}");
    let digits = digits.trim_end_matches('0');
    let dot = if digits.is_empty() { "" } else { "." };
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}0x{lead}{dot}{digits}p{esign}{}", exp.abs())
}

/// Parses what [`format`] writes, plus plain `inf`/`nan`. Exact whenever the
/// significand fits in 53 bits, which covers every value `format` produces.
pub fn parse(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("not a hex float: {s:?}"));
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let signed = |v: f64| if neg { -v } else { v };
    match body {
        "inf" => return Ok(signed(f64::INFINITY)),
        "nan" => return Ok(f64::NAN),
        _ => {}
    }
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(bad)?;
    let (mant, exp) = body.split_once(['p', 'P']).ok_or_else(bad)?;
    let exp: i32 = exp.parse().map_err(|_| bad())?;
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let mut m: u64 = 0;
    let mut shift: i32 = 0;
    for (i, c) in int.chars().chain(frac.chars()).enumerate() {
        let d = c.to_digit(16).ok_or_else(bad)? as u64;
        if m >> 60 != 0 {
            // more digits than a u64 holds; only trailing zeros are exact
            if d != 0 {
                return Err(Error::Parse(format!("hex float {s:?} has too many digits")));
            }
            if i < int.len() {
                shift += 4;
            }
            continue;
        }
        m = (m << 4) | d;
        if i >= int.len() {
            shift -= 4;
        }
    }
    Ok(signed(ldexp(m as f64, exp + shift)))
}

/// `x·2ᵉ` in steps that never overflow or underflow an intermediate.
fn ldexp(mut x: f64, mut e: i32) -> f64 {
    let big = 2f64.powi(960);
    let small = 2f64.powi(-960);
    while e > 960 {
        x *= big;
        e -= 960;
    }
    while e < -960 {
        x *= small;
        e += 960;
    }
    x * 2f64.powi(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(format(1.0), "0x1p+0");
        assert_eq!(format(3.0), "0x1.8p+1");
        assert_eq!(format(-0.1), "-0x1.999999999999ap-4");
        assert_eq!(format(0.0), "0x0p+0");
        assert_eq!(format(-0.0), "-0x0p+0");
        assert_eq!(format(f64::from_bits(1)), "0x0.0000000000001p-1022");
        assert_eq!(format(f64::MAX), "0x1.fffffffffffffp+1023");
        assert_eq!(parse("0x1.8p+1").unwrap(), 3.0);
        assert_eq!(parse("0X1P-2").unwrap(), 0.25);
        assert_eq!(parse("0xa.8p0").unwrap(), 10.5);
        assert_eq!(parse("0x.8p0").unwrap(), 0.5);
        assert_eq!(parse("0x0.0000000000001p-1022").unwrap().to_bits(), 1);
        assert!(parse("-0x0p+0").unwrap().is_sign_negative());
        assert_eq!(parse("-inf").unwrap(), f64::NEG_INFINITY);
        assert!(parse("nan").unwrap().is_nan());
        for bad in ["", "1.5", "0x", "0xp1", "0x1.g p1", "0x1p", "0x1.8"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(!x.is_nan());
            prop_assert_eq!(parse(&format(x)).unwrap().to_bits(), bits);
        }
    }
}
