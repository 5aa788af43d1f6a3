//! Bit-exact hexadecimal float formatting and parsing.
//!
//! The emitted test binaries print their result with C's `%a` conversion, so
//! comparing outputs bit-exactly means reproducing the same textual form here.
//! [`format_hex`] mirrors what glibc prints: normals carry a leading `1`
//! digit, subnormals a leading `0` with the minimum-normal exponent, trailing
//! zero digits are stripped, and the binary exponent is always signed
//! (`0x1.cp+1`, `0x0.0000000000001p-1022`, `0x0p+0`).
//!
//! [`parse_hex`] accepts the general hexadecimal-significand syntax including
//! non-canonical forms (`0x2.0p-21`, `0x0.0008p-7`) and rounds to nearest-even
//! when the input carries more precision than binary64 holds.

/// Format an `f64` exactly as glibc's `printf("%a", x)` does.
///
/// `f32` values are expected to be widened first; C varargs promote `float`
/// to `double`, so the printed text of a float result is the hex form of its
/// exact double value.
pub fn format_hex(value: f64) -> String {
    let bits = value.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    if value.is_nan() {
        return format!("{sign}nan");
    }
    if value.is_infinite() {
        return format!("{sign}inf");
    }
    let exp_field = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_field == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_field == 0 {
        ('0', -1022)
    } else {
        ('1', exp_field - 1023)
    };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{exp:+}")
    }
}

/// Parse a hexadecimal float literal into an `f64`, rounding to nearest-even.
///
/// Returns `None` if `s` is not a hexadecimal float. The binary exponent part
/// is optional (`0x1.8` reads as `0x1.8p0`).
pub fn parse_hex(s: &str) -> Option<f64> {
    let s = s.trim();
    let (negative, rest) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))?;

    let mut acc: u128 = 0;
    let mut digits_taken = 0u32;
    let mut overflow_digits = 0i64; // integer-side digits dropped past capacity
    let mut sticky = false;
    let mut frac_digits = 0i64;
    let mut seen_dot = false;
    let mut seen_digit = false;
    let mut chars = rest.char_indices().peekable();
    let mut exp_start = rest.len();

    while let Some(&(i, c)) = chars.peek() {
        match c {
            '.' if !seen_dot => {
                seen_dot = true;
                chars.next();
            }
            'p' | 'P' => {
                exp_start = i;
                break;
            }
            _ => {
                let d = c.to_digit(16)?;
                seen_digit = true;
                // 28 hex digits saturate the 112 bits of headroom we round from.
                if digits_taken < 28 && !(acc == 0 && d == 0) {
                    acc = (acc << 4) | u128::from(d);
                    digits_taken += 1;
                    if seen_dot {
                        frac_digits += 1;
                    }
                } else if acc == 0 && d == 0 {
                    if seen_dot {
                        frac_digits += 1;
                    }
                } else {
                    if d != 0 {
                        sticky = true;
                    }
                    if seen_dot {
                        // dropped fraction digit: weight already below acc
                    } else {
                        overflow_digits += 1;
                    }
                }
                chars.next();
            }
        }
    }
    if !seen_digit {
        return None;
    }

    let mut exp2: i64 = 0;
    if exp_start < rest.len() {
        let e = &rest[exp_start + 1..];
        if e.is_empty() {
            return None;
        }
        exp2 = e.parse::<i64>().ok()?.clamp(-1_000_000, 1_000_000);
    }
    exp2 += 4 * (overflow_digits - frac_digits);

    Some(round_to_f64(negative, acc, exp2, sticky))
}

/// Round `±acc × 2^exp2` (plus a sticky residue strictly below `acc`'s lsb)
/// to the nearest `f64`, ties to even.
fn round_to_f64(negative: bool, acc: u128, exp2: i64, sticky: bool) -> f64 {
    let sign_bit = if negative { 1u64 << 63 } else { 0 };
    if acc == 0 {
        return f64::from_bits(sign_bit);
    }
    let nlz = acc.leading_zeros() as i64;
    let acc = acc << nlz;
    // value = acc × 2^(exp2 - nlz) with acc in [2^127, 2^128); the leading
    // bit has weight 2^q.
    let q = 127 + exp2 - nlz;
    if q > 1023 {
        return f64::from_bits(sign_bit | 0x7ff0_0000_0000_0000);
    }
    // Bits of significand we can keep: 53 for normals, fewer as the value
    // sinks into the subnormal range.
    let keep = if q >= -1022 { 53 } else { 53 - (-1022 - q) };
    if keep <= 0 {
        // Below half the smallest subnormal, or exactly half (ties to even → 0).
        let min_sub = keep == 0 && (acc & (u128::MAX >> 1) != 0 || sticky);
        return f64::from_bits(sign_bit | u64::from(min_sub));
    }
    let drop = 128 - keep as u32;
    let mut kept = (acc >> drop) as u64;
    let round_bit = (acc >> (drop - 1)) & 1 == 1;
    let rest = acc & ((1u128 << (drop - 1)) - 1) != 0;
    if round_bit && (rest || sticky || kept & 1 == 1) {
        kept += 1;
    }
    if q >= -1022 {
        let mut q = q;
        if kept == 1 << 53 {
            kept >>= 1;
            q += 1;
            if q > 1023 {
                return f64::from_bits(sign_bit | 0x7ff0_0000_0000_0000);
            }
        }
        f64::from_bits(sign_bit | (((q + 1023) as u64) << 52) | (kept & ((1 << 52) - 1)))
    } else {
        // Subnormal: `kept` lands in the fraction field; a carry out of the
        // top fraction bit yields the smallest normal, which is exactly the
        // adjacent representable value.
        f64::from_bits(sign_bit | kept)
    }
}
