use super::{check_unit, ReliabilityError, ReliabilityParams, StatTriple};

pub fn forward(theta: f64, r: f64, g: f64) -> Result<StatTriple, ReliabilityError> {
    check_unit("theta", theta)?;
    check_unit("r", r)?;
    check_unit("g", g)?;
    Ok(forward_unchecked(theta, r, g))
}

pub(crate) fn forward_unchecked(theta: f64, r: f64, g: f64) -> StatTriple {
    let known = 1.0 - theta;
    StatTriple {
        re: theta * r.powi(4) + known * g.powi(4),
        ve_bar: theta * r + known * g,
        ma: theta * (1.0 - r).powi(4) + known * (1.0 - g).powi(4),
    }
}

/// Single-pass accuracy with guessing discounted: `theta * r`.
pub fn adjusted_accuracy(params: &ReliabilityParams) -> f64 {
    params.theta * params.r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_mixture() {
        let s = forward(0.5, 1.0, 0.0).unwrap();
        assert_eq!((s.re, s.ve_bar, s.ma), (0.5, 0.5, 0.5));
    }

    #[test]
    fn haiku_scene_understanding_row() {
        let s = forward(0.853, 0.965, 0.278).unwrap();
        assert!((s.re - 0.740).abs() <= 0.0015, "{}", s.re);
        assert!((s.ve_bar - 0.864).abs() <= 0.0015);
        // θ(1−r)⁴ + (1−θ)(1−g)⁴ evaluated directly
        assert!((s.ma - 0.0400).abs() < 1e-4);
    }

    #[test]
    fn adjusted_accuracy_rows() {
        let a = |t, r| adjusted_accuracy(&ReliabilityParams::new(t, r, 0.2));
        assert!((a(0.853, 0.965) - 0.823).abs() <= 0.0005);
        assert!((a(0.951, 0.974) - 0.926).abs() <= 0.0005);
        assert_eq!(a(1.0, 0.77), 0.77);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            forward(1.2, 0.5, 0.5),
            Err(ReliabilityError::InputOutOfRange { name: "theta", .. })
        ));
        assert!(forward(0.5, f64::NAN, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn label_swap_symmetry(t in 0.0..=1.0f64, r in 0.0..=1.0f64, g in 0.0..=1.0f64) {
            let a = forward(t, r, g).unwrap();
            let b = forward(1.0 - t, g, r).unwrap();
            prop_assert!((a.re - b.re).abs() <= 1e-15);
            prop_assert!((a.ve_bar - b.ve_bar).abs() <= 1e-15);
            prop_assert!((a.ma - b.ma).abs() <= 1e-15);
        }

        #[test]
        fn jensen_bounds(t in 0.0..=1.0f64, r in 0.0..=1.0f64, g in 0.0..=1.0f64) {
            let s = forward(t, r, g).unwrap();
            prop_assert!(s.re >= s.ve_bar.powi(4) - 1e-15);
            prop_assert!(s.ma >= (1.0 - s.ve_bar).powi(4) - 1e-15);
            // strict away from the equality cases
            if (r - g).abs() > 0.05 && t > 0.05 && t < 0.95 {
                prop_assert!(s.re > s.ve_bar.powi(4));
                prop_assert!(s.ma > (1.0 - s.ve_bar).powi(4));
            }
        }
    }
}
