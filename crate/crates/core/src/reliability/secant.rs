use super::ReliabilityError;

/// Right-hand side of `r³ + g r² + g² r + g³ = (RE − g⁴) / (VE − g)`.
fn rhs(g: f64, re: f64, ve: f64) -> f64 {
    (re - g.powi(4)) / (ve - g)
}

fn cubic_lhs(r: f64, g: f64) -> f64 {
    ((r + g) * r + g * g) * r + g * g * g
}

/// Root `r > g` of the cubic without the `r <= 1` cap.
///
/// The left side is increasing and convex for `r >= g >= 0`, so Newton from
/// the upper bound `cbrt(rhs)` descends monotonically onto the root.
pub(crate) fn extended_r(g: f64, rhs: f64) -> Option<f64> {
    if !rhs.is_finite() || rhs <= 4.0 * g * g * g {
        return None;
    }
    let mut hi = rhs.cbrt().max(g);
    let lo = g;
    let mut r = hi;
    for _ in 0..64 {
        let f = cubic_lhs(r, g) - rhs;
        if f <= 0.0 {
            break;
        }
        hi = r;
        let df = (3.0 * r + 2.0 * g) * r + g * g;
        let next = r - f / df;
        if !(next > lo) {
            return Some(bisect_r(lo, hi, g, rhs));
        }
        if r - next <= 4.0 * f64::EPSILON * r {
            r = next;
            break;
        }
        r = next;
    }
    Some(r)
}

fn bisect_r(mut lo: f64, mut hi: f64, g: f64, rhs: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cubic_lhs(mid, g) > rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_precondition(g: f64, ve: f64, re: f64) -> Result<(), ReliabilityError> {
    let ok = [g, ve, re].iter().all(|v| v.is_finite()) && g >= 0.0 && g < ve && ve <= 1.0;
    if ok {
        Ok(())
    } else {
        Err(ReliabilityError::PreconditionViolated(format!(
            "need 0 <= g < VE <= 1, got g = {g}, VE = {ve}"
        )))
    }
}

/// The knower accuracy `r` implied by RE and VE-bar once `g` is fixed.
pub fn solve_r_given_g(g: f64, re: f64, ve: f64) -> Result<f64, ReliabilityError> {
    check_precondition(g, ve, re)?;
    let rhs = rhs(g, re, ve);
    let at_one = cubic_lhs(1.0, g);
    if rhs > at_one * (1.0 + 1e-12) {
        return Err(ReliabilityError::NoRoot);
    }
    let r = extended_r(g, rhs).ok_or(ReliabilityError::NoRoot)?;
    Ok(r.min(1.0))
}

/// `-(a³ + a²b + ab² + b³)` with `a = 1 − r`, `b = 1 − g`, which equals
/// `((1 − r)⁴ − (1 − g)⁴) / (r − g)` without the cancellation.
pub(crate) fn miss_slope(r: f64, g: f64) -> f64 {
    let a = 1.0 - r;
    let b = 1.0 - g;
    -(((a + b) * a + b * b) * a + b * b * b)
}

pub(crate) fn residual_with_r(g: f64, r: f64, ve: f64, ma: f64) -> f64 {
    miss_slope(r, g) - (ma - (1.0 - g).powi(4)) / (ve - g)
}

/// Difference of the two secant slopes of `x ↦ (1 − x)⁴`; zero at a solution.
pub fn secant_residual(g: f64, re: f64, ve: f64, ma: f64) -> Result<f64, ReliabilityError> {
    if !ma.is_finite() {
        return Err(ReliabilityError::PreconditionViolated(format!("MA = {ma}")));
    }
    let r = solve_r_given_g(g, re, ve)?;
    Ok(residual_with_r(g, r, ve, ma))
}

/// Residual along the extended root, so the scan sees a continuous curve.
pub(crate) fn extended_residual(g: f64, re: f64, ve: f64, ma: f64) -> Option<(f64, f64)> {
    let r = extended_r(g, rhs(g, re, ve))?;
    Some((residual_with_r(g, r, ve, ma), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reliability::forward;
    use proptest::prelude::*;

    #[test]
    fn known_root() {
        // rhs = (0.3 - 0.0016) / 0.4 = 0.746, root found by independent bisection
        let r = solve_r_given_g(0.2, 0.3, 0.6).unwrap();
        assert!((r - 0.8280410401355913).abs() < 1e-12, "{r}");
    }

    #[test]
    fn no_root_when_rhs_too_small() {
        assert_eq!(
            solve_r_given_g(0.9, 0.1, 0.95),
            Err(ReliabilityError::NoRoot)
        );
    }

    #[test]
    fn no_root_when_rhs_above_one() {
        // rhs = 0.5 / 0.1 = 5 exceeds 1 + g + g² + g³ at g = 0
        assert_eq!(
            solve_r_given_g(0.0, 0.5, 0.1),
            Err(ReliabilityError::NoRoot)
        );
    }

    #[test]
    fn precondition() {
        assert!(matches!(
            solve_r_given_g(0.6, 0.3, 0.5),
            Err(ReliabilityError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn miss_slope_matches_quotient() {
        for &(r, g) in &[(0.9, 0.2), (0.55, 0.5), (1.0, 0.0)] {
            let q = ((1.0f64 - r).powi(4) - (1.0f64 - g).powi(4)) / (r - g);
            assert!((miss_slope(r, g) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_at_truth() {
        let s = forward(0.6, 0.95, 0.25).unwrap();
        let e = secant_residual(0.25, s.re, s.ve_bar, s.ma).unwrap();
        assert!(e.abs() < 1e-12, "{e}");
        let e_off = secant_residual(0.3, s.re, s.ve_bar, s.ma).unwrap();
        assert!(e_off.abs() > 1e-3);
    }

    proptest! {
        #[test]
        fn recovers_r(t in 0.05..0.95f64, g in 0.0..0.9f64, gap in 0.05..1.0f64) {
            let r = (g + gap).min(1.0);
            prop_assume!(r - g >= 0.05);
            let s = forward(t, r, g).unwrap();
            let got = solve_r_given_g(g, s.re, s.ve_bar).unwrap();
            prop_assert!((got - r).abs() < 1e-9, "{} vs {}", got, r);
        }

        #[test]
        fn increasing_in_re(g in 0.0..0.5f64, ve in 0.55..0.95f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            // admissible RE lies between g⁴ + 4g³(ve − g) and g⁴ + (ve − g)(1 + g + g² + g³)
            let lo = g.powi(4) + 4.0 * g.powi(3) * (ve - g);
            let hi = g.powi(4) + (ve - g) * (1.0 + g + g * g + g.powi(3));
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(b - a > 1e-6);
            let re1 = lo + (hi - lo) * (0.001 + 0.998 * a);
            let re2 = lo + (hi - lo) * (0.001 + 0.998 * b);
            let r1 = solve_r_given_g(g, re1, ve).unwrap();
            let r2 = solve_r_given_g(g, re2, ve).unwrap();
            prop_assert!(r1 < r2);
            prop_assert!(r1 > g);
        }
    }
}
