//! Locale-independent number formatting shared by every table writer.

/// Formats `x` like C's `%.17g`: 17 significant digits, trailing zeros
/// removed, exponent form outside `1e-4 <= |x| < 1e17`. Parsing the result
/// back with `str::parse::<f64>` recovers the exact bits.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf" } else { "-Inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }

    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("`e` format always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    if !(-4..17).contains(&exp) {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        let exp_sign = if exp < 0 { '-' } else { '+' };
        let exp_abs = exp.unsigned_abs();
        return if rest.is_empty() {
            format!("{sign}{lead}e{exp_sign}{exp_abs:02}")
        } else {
            format!("{sign}{lead}.{rest}e{exp_sign}{exp_abs:02}")
        };
    }

    let body = if exp >= 0 {
        let split = exp as usize + 1;
        let (int_part, frac) = digits.split_at(split);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = format!("{zeros}{digits}");
        format!("0.{}", frac.trim_end_matches('0'))
    };
    format!("{sign}{body}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_c_printf_on_known_values() {
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(0.1), "0.10000000000000001");
        assert_eq!(g17(-2.5), "-2.5");
        assert_eq!(g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(g17(123456.0), "123456");
        assert_eq!(g17(1e20), "1e+20");
        assert_eq!(g17(0.0001), "0.0001");
    }

    proptest! {
        #[test]
        fn round_trips_bits(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let back: f64 = g17(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
