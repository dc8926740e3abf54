//! Heading arithmetic on the circle.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Shortest signed angular distance `a - b`, in `(-π, π]`.
pub fn diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

/// Circular (vector) mean of a set of headings. `None` for an empty set or
/// when the unit vectors cancel exactly.
pub fn circular_mean<I: IntoIterator<Item = f64>>(angles: I) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        s += a.sin();
        c += a.cos();
        n += 1;
    }
    if n == 0 || (s == 0.0 && c == 0.0) {
        return None;
    }
    Some(wrap(s.atan2(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_boundaries() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert_eq!(wrap(0.0), 0.0);
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn diff_takes_short_way_round() {
        let d = diff(PI - 0.1, -PI + 0.1);
        assert!((d + 0.2).abs() < 1e-12);
    }

    #[test]
    fn circular_mean_symmetric_pair() {
        let m = circular_mean([PI / 4.0, -PI / 4.0]).unwrap();
        assert!(m.abs() < 1e-15);
        let m = circular_mean([PI - 0.1, -PI + 0.1]).unwrap();
        assert!((m - PI).abs() < 1e-12);
        assert!(circular_mean(std::iter::empty()).is_none());
    }

    proptest! {
        #[test]
        fn wrap_range_and_equivalence(x in -100.0f64..100.0) {
            let w = wrap(x);
            prop_assert!(w > -PI && w <= PI);
            let k = ((x - w) / TAU).round();
            prop_assert!((x - w - k * TAU).abs() < 1e-9);
        }
    }
}
