//! C99-style hexadecimal float encoding (`0x1.8p+1`), exact for every finite `f64`.

const FRAC_BITS: u32 = 52;
const FRAC_MASK: u64 = (1 << FRAC_BITS) - 1;
const EXP_BIAS: i64 = 1023;

/// Formats a finite value; the fraction is printed without trailing zeros.
pub fn format_hex(v: f64) -> String {
    debug_assert!(v.is_finite());
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let biased = ((bits >> FRAC_BITS) & 0x7ff) as i64;
    let frac = bits & FRAC_MASK;
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
    let exp_sign = if exp < 0 { '-' } else { '+' };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp_sign}{}", exp.abs())
    } else {
        format!("{sign}0x{lead}.{digits}p{exp_sign}{}", exp.abs())
    }
}

/// Parses the output of [`format_hex`]. Returns `None` for anything else,
/// including encodings that would need rounding.
pub fn parse_hex(s: &str) -> Option<f64> {
    let (negative, rest) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let rest = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X"))?;
    let (mantissa, exp) = rest.split_once(['p', 'P'])?;
    let exp: i64 = exp.parse().ok()?;
    let (lead, digits) = match mantissa.split_once('.') {
        Some((lead, digits)) => (lead, digits),
        None => (mantissa, ""),
    };
    if digits.len() > 13 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let frac = if digits.is_empty() {
        0
    } else {
        u64::from_str_radix(digits, 16).ok()? << (4 * (13 - digits.len()))
    };
    let bits = match lead {
        "1" => {
            let biased = exp + EXP_BIAS;
            if !(1..=2046).contains(&biased) {
                return None;
            }
            ((biased as u64) << FRAC_BITS) | frac
        }
        "0" if frac == 0 => 0,
        "0" if exp == 1 - EXP_BIAS => frac,
        _ => return None,
    };
    let sign = if negative { 1u64 << 63 } else { 0 };
    Some(f64::from_bits(sign | bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_encodings() {
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(3.0), "0x1.8p+1");
        assert_eq!(format_hex(-0.5), "-0x1p-1");
        assert_eq!(format_hex(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex(0.0), "0x0p+0");
        assert_eq!(format_hex(-0.0), "-0x0p+0");
        assert_eq!(format_hex(f64::from_bits(1)), "0x0.0000000000001p-1022");
    }

    #[test]
    fn extremes_round_trip() {
        for v in [
            f64::MAX,
            f64::MIN,
            f64::MIN_POSITIVE,
            f64::from_bits(1),
            -f64::from_bits(0x000f_ffff_ffff_ffff),
            1e-300,
            -0.0,
        ] {
            let s = format_hex(v);
            assert_eq!(parse_hex(&s).map(f64::to_bits), Some(v.to_bits()), "{s}");
        }
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "0x", "1.0", "0x2p+0", "0x1.gp+0", "0x1p+5000", "0x0.1p+0"] {
            assert_eq!(parse_hex(s), None, "{s}");
        }
    }
}
