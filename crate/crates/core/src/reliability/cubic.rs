/// Coefficients `[a, b, c, d]` of the cubic `a x³ + b x² + c x + d` through
/// four points with distinct abscissae (Newton divided differences).
pub fn interpolate_cubic(xs: [f64; 4], ys: [f64; 4]) -> [f64; 4] {
    let mut dd = ys;
    for level in 1..4 {
        for i in (level..4).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    // Horner expansion of dd0 + dd1 (x−x0) + dd2 (x−x0)(x−x1) + dd3 (x−x0)(x−x1)(x−x2),
    // coefficients kept low to high.
    let mut poly = [dd[3], 0.0, 0.0, 0.0];
    for (degree, k) in (0..3).rev().enumerate() {
        // poly = poly * (x - xs[k]) + dd[k]
        let mut next = [0.0; 4];
        for i in 0..=degree {
            next[i + 1] += poly[i];
            next[i] -= poly[i] * xs[k];
        }
        next[0] += dd[k];
        poly = next;
    }
    [poly[3], poly[2], poly[1], poly[0]]
}

/// `18abcd − 4b³d + b²c² − 4ac³ − 27a²d²`. Positive means three distinct real
/// roots, negative means one.
pub fn cubic_discriminant(coeffs: [f64; 4]) -> f64 {
    let [a, b, c, d] = coeffs;
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
        - 4.0 * a * c.powi(3)
        - 27.0 * a * a * d * d
}

/// Four Chebyshev nodes of the first kind inside `(lo, hi)`.
pub(crate) fn chebyshev_nodes(lo: f64, hi: f64) -> [f64; 4] {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let angle = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / 8.0;
        *slot = mid - half * angle.cos();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_known_cubic() {
        let p = |x: f64| 2.0 * x.powi(3) - 3.0 * x * x + 0.5 * x - 7.0;
        let xs = [-1.0, 0.3, 1.1, 2.5];
        let c = interpolate_cubic(xs, xs.map(p));
        for (got, want) in c.iter().zip([2.0, -3.0, 0.5, -7.0]) {
            assert!((got - want).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn discriminant_sign() {
        // (x−1)(x−2)(x−3) = x³ − 6x² + 11x − 6, discriminant 4
        assert!((cubic_discriminant([1.0, -6.0, 11.0, -6.0]) - 4.0).abs() < 1e-9);
        // x³ + x has one real root, discriminant −4
        assert!((cubic_discriminant([1.0, 0.0, 1.0, 0.0]) + 4.0).abs() < 1e-12);
        // (x−1)²(x+2): repeated root
        assert!(cubic_discriminant([1.0, 0.0, -3.0, 2.0]).abs() < 1e-12);
    }

    #[test]
    fn nodes_inside_interval() {
        let n = chebyshev_nodes(0.0, 0.8);
        assert!(n.windows(2).all(|w| w[0] < w[1]));
        assert!(n[0] > 0.0 && n[3] < 0.8);
    }
}
