//! Locale-independent decimal text for floats.
//!
//! [`fmt_exact`] is the shortest text that parses back to the same `f64`.
//! [`fmt_sig9`] first rounds to 9 significant digits and then prints the
//! shortest text for the rounded value, so `fmt_sig9(parse(fmt_sig9(x)))`
//! reproduces its input byte for byte.

/// Shortest round-trip text; plain notation for moderate magnitudes,
/// exponent notation otherwise.
pub fn fmt_exact(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        // `-0` collapses to `0` so signed zeros do not leak into files
        if x == 0.0 {
            return "0".into();
        }
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Rounded to 9 significant digits, then printed by [`fmt_exact`].
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return fmt_exact(x);
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    fmt_exact(rounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(fmt_exact(77e9), "77000000000");
        assert_eq!(fmt_exact(0.5), "0.5");
        assert_eq!(fmt_exact(-0.0), "0");
        assert_eq!(fmt_exact(1.5e-7), "1.5e-7");
        assert_eq!(fmt_exact(2.5e20), "2.5e20");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456789.87), "123456790");
        assert_eq!(fmt_sig9(f64::NAN), "NaN");
    }

    proptest! {
        #[test]
        fn exact_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = fmt_exact(x).parse().unwrap();
            prop_assert!(back == x);
        }

        #[test]
        fn sig9_is_idempotent_and_close(x in -1e12f64..1e12) {
            let s = fmt_sig9(x);
            let y: f64 = s.parse().unwrap();
            prop_assert_eq!(fmt_sig9(y), s);
            prop_assert!((y - x).abs() <= 1e-8 * x.abs());
        }
    }
}
