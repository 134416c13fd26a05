use std::fmt;
use std::str::FromStr;

use super::cubic::{chebyshev_nodes, cubic_discriminant, interpolate_cubic};
use super::oracle::oracle_grid_solve;
use super::secant::extended_residual;
use super::{check_unit, ReliabilityError, ReliabilityParams, StatTriple};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Unique,
    Multiple(usize),
    Degenerate,
    NoSolution,
    Boundary,
    /// Least-squares fit substituted in reconcile mode.
    Approximate,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Unique => f.write_str("unique"),
            Classification::Multiple(k) => write!(f, "multiple({k})"),
            Classification::Degenerate => f.write_str("degenerate"),
            Classification::NoSolution => f.write_str("no_solution"),
            Classification::Boundary => f.write_str("boundary"),
            Classification::Approximate => f.write_str("approximate"),
        }
    }
}

/// How a single answer is picked when several solutions exist.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    #[default]
    MaxTheta,
    Fail,
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "max-theta" => Ok(Selection::MaxTheta),
            "fail" => Ok(Selection::Fail),
            other => Err(format!("unknown selection policy `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub scan_nodes: usize,
    pub epsilon: f64,
    pub bisection_tol: f64,
    pub dedupe_tol: f64,
    pub residual_tol: f64,
    pub degeneracy_tol: f64,
    pub jensen_tol: f64,
    /// Fall back to the grid oracle when no exact solution exists.
    pub reconcile: bool,
    pub oracle_resolution: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            scan_nodes: 10_000,
            epsilon: 1e-9,
            bisection_tol: 1e-12,
            dedupe_tol: 1e-8,
            residual_tol: 1e-9,
            degeneracy_tol: 1e-9,
            jensen_tol: 1e-9,
            reconcile: false,
            oracle_resolution: 400,
        }
    }
}

impl SolveOptions {
    /// Tolerances suited to statistics printed at three decimals.
    pub fn reconcile() -> Self {
        SolveOptions {
            residual_tol: 2e-3,
            degeneracy_tol: 5e-4,
            jensen_tol: 2e-3,
            reconcile: true,
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub classification: Classification,
    pub solutions: Vec<ReliabilityParams>,
    pub residuals: Vec<f64>,
    pub discriminant: Option<f64>,
    /// `[a, b, c, d]` of the interpolated `P(g)`.
    pub cubic: Option<[f64; 4]>,
}

impl SolveResult {
    fn bare(classification: Classification) -> Self {
        SolveResult {
            classification,
            solutions: Vec::new(),
            residuals: Vec::new(),
            discriminant: None,
            cubic: None,
        }
    }

    pub fn select(&self, selection: Selection) -> Option<(ReliabilityParams, f64)> {
        match self.classification {
            Classification::Unique | Classification::Approximate => {
                Some((self.solutions[0], self.residuals[0]))
            }
            Classification::Multiple(_) if selection == Selection::MaxTheta => self
                .solutions
                .iter()
                .zip(&self.residuals)
                .max_by(|a, b| a.0.theta.total_cmp(&b.0.theta))
                .map(|(p, r)| (*p, *r)),
            _ => None,
        }
    }
}

pub fn solve(stats: StatTriple, opts: &SolveOptions) -> Result<SolveResult, ReliabilityError> {
    let StatTriple { re, ve_bar: ve, ma } = stats;
    check_unit("re", re)?;
    check_unit("ve_bar", ve)?;
    check_unit("ma", ma)?;

    if ve <= 0.0 || ve >= 1.0 || ma <= 0.0 || ma >= 1.0 {
        return Ok(SolveResult::bare(Classification::Boundary));
    }

    let re_floor = ve.powi(4);
    let ma_floor = (1.0 - ve).powi(4);
    if re < re_floor - opts.jensen_tol {
        return Err(ReliabilityError::InconsistentStats(format!(
            "RE = {re} < VE^4 = {re_floor}"
        )));
    }
    if ma < ma_floor - opts.jensen_tol {
        return Err(ReliabilityError::InconsistentStats(format!(
            "MA = {ma} < (1 - VE)^4 = {ma_floor}"
        )));
    }
    if (re - re_floor).abs() <= opts.degeneracy_tol && (ma - ma_floor).abs() <= opts.degeneracy_tol
    {
        return Ok(SolveResult::bare(Classification::Degenerate));
    }

    let roots = scan_roots(re, ve, ma, opts);
    let mut solutions = Vec::new();
    let mut residuals = Vec::new();
    for g in roots {
        let Some((_, r_ext)) = extended_residual(g, re, ve, ma) else {
            continue;
        };
        if r_ext <= ve {
            continue;
        }
        let r = r_ext.min(1.0);
        let theta = ((ve - g) / (r - g)).clamp(0.0, 1.0);
        let params = ReliabilityParams::new(theta, r, g);
        let residual = params.max_residual(&stats);
        if residual <= opts.residual_tol {
            solutions.push(params);
            residuals.push(residual);
        }
    }

    let cubic = interpolated_cubic(re, ve, ma, opts.epsilon);
    let discriminant = cubic.map(cubic_discriminant);

    let classification = match solutions.len() {
        0 => Classification::NoSolution,
        1 => Classification::Unique,
        k => Classification::Multiple(k),
    };
    let mut result = SolveResult {
        classification,
        solutions,
        residuals,
        discriminant,
        cubic,
    };

    if result.classification == Classification::NoSolution && opts.reconcile {
        let fit = oracle_grid_solve(stats, opts.oracle_resolution)?;
        if let Some(best) = fit.best {
            log::debug!("no exact solution, substituting least-squares fit {best:?}");
            result.classification = Classification::Approximate;
            result.residuals = vec![best.max_residual(&stats)];
            result.solutions = vec![best];
        }
    }
    Ok(result)
}

/// Sign-change scan of `E(g)` on `[0, VE − ε]` followed by bisection.
fn scan_roots(re: f64, ve: f64, ma: f64, opts: &SolveOptions) -> Vec<f64> {
    let k = opts.scan_nodes.max(2);
    let hi = ve - opts.epsilon;
    if hi <= 0.0 {
        return Vec::new();
    }
    let node = |i: usize| hi * i as f64 / (k - 1) as f64;
    let eval = |g: f64| extended_residual(g, re, ve, ma).map(|(e, _)| e);

    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..k {
        let g = node(i);
        let Some(e) = eval(g) else {
            prev = None;
            continue;
        };
        if e == 0.0 {
            roots.push(g);
        } else if let Some((gp, ep)) = prev {
            if ep != 0.0 && ep.signum() != e.signum() {
                if let Some(root) = bisect(gp, ep, g, opts.bisection_tol, &eval) {
                    roots.push(root);
                }
            }
        }
        prev = Some((g, e));
    }

    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= opts.dedupe_tol);
    roots
}

fn bisect(
    mut lo: f64,
    e_lo: f64,
    mut hi: f64,
    tol: f64,
    eval: &impl Fn(f64) -> Option<f64>,
) -> Option<f64> {
    let sign_lo = e_lo.signum();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = eval(mid)?;
        if e == 0.0 {
            return Some(mid);
        }
        if e.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Cubic through the denominator-cleared residual
/// `((1−R)⁴ − (1−g)⁴)(VE − g) − (MA − (1−g)⁴)(R − g)` at four nodes.
fn interpolated_cubic(re: f64, ve: f64, ma: f64, eps: f64) -> Option<[f64; 4]> {
    let xs = chebyshev_nodes(eps, ve - eps);
    let mut ys = [0.0; 4];
    for (y, &g) in ys.iter_mut().zip(&xs) {
        let (e, r) = extended_residual(g, re, ve, ma)?;
        *y = e * (r - g) * (ve - g);
    }
    Some(interpolate_cubic(xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reliability::forward;
    use proptest::prelude::*;

    fn exact(stats: StatTriple) -> SolveResult {
        solve(stats, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn trivial_separated_case() {
        let res = exact(StatTriple::new(0.5, 0.5, 0.5));
        assert_eq!(res.classification, Classification::Unique);
        let p = res.solutions[0];
        assert!((p.theta - 0.5).abs() < 1e-9);
        assert!((p.r - 1.0).abs() < 1e-9);
        assert!(p.g.abs() < 1e-9);
    }

    #[test]
    fn spatial_relationship_row() {
        let res = exact(StatTriple::new(0.8559, 0.9337, 0.0252));
        assert_eq!(res.classification, Classification::Unique, "{res:?}");
        let p = res.solutions[0];
        assert!((p.theta - 0.951).abs() <= 2e-3, "{p:?}");
        assert!((p.r - 0.974).abs() <= 2e-3, "{p:?}");
        assert!((p.g - 0.153).abs() <= 2e-3, "{p:?}");
    }

    #[test]
    fn degenerate() {
        let res = exact(StatTriple::new(0.0625, 0.5, 0.0625));
        assert_eq!(res.classification, Classification::Degenerate);
        assert!(res.solutions.is_empty());
    }

    #[test]
    fn boundary() {
        for s in [
            StatTriple::new(0.0, 0.0, 1.0),
            StatTriple::new(1.0, 1.0, 0.0),
            StatTriple::new(0.2, 0.5, 0.0),
        ] {
            assert_eq!(exact(s).classification, Classification::Boundary);
        }
    }

    #[test]
    fn jensen_violation() {
        let err = solve(StatTriple::new(0.05, 0.5, 0.1), &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, ReliabilityError::InconsistentStats(_)));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            solve(StatTriple::new(1.5, 0.5, 0.5), &SolveOptions::default()),
            Err(ReliabilityError::InputOutOfRange { name: "re", .. })
        ));
    }

    #[test]
    fn reported_solution_is_ordered() {
        // forward(0.3, 0.1, 0.9) is the mirror image of (0.7, 0.9, 0.1)
        let s = forward(0.3, 0.1, 0.9).unwrap();
        let p = exact(s).solutions[0];
        assert!(p.g < p.r);
        assert!((p.theta - 0.7).abs() < 1e-7 && (p.r - 0.9).abs() < 1e-7);
    }

    #[test]
    fn too_few_all_wrong_has_no_exact_solution() {
        // feasible RE and VE, but MA below every mixture that produces them
        let s = StatTriple::new(0.930, 0.961, 0.0001);
        let res = exact(s);
        assert!(
            matches!(res.classification, Classification::NoSolution),
            "{res:?}"
        );
    }

    #[test]
    fn reconcile_substitutes_fit() {
        let s = StatTriple::new(0.930, 0.961, 0.0001);
        let res = solve(s, &SolveOptions::reconcile()).unwrap();
        assert!(matches!(
            res.classification,
            Classification::Approximate | Classification::Unique
        ));
        assert_eq!(res.solutions.len(), 1);
    }

    #[test]
    fn selection_policy() {
        let a = ReliabilityParams::new(0.4, 0.9, 0.2);
        let b = ReliabilityParams::new(0.6, 0.8, 0.3);
        let res = SolveResult {
            classification: Classification::Multiple(2),
            solutions: vec![a, b],
            residuals: vec![0.0, 0.0],
            discriminant: Some(1.0),
            cubic: None,
        };
        assert_eq!(res.select(Selection::MaxTheta).unwrap().0, b);
        assert!(res.select(Selection::Fail).is_none());
        assert_eq!("max_theta".parse::<Selection>(), Ok(Selection::MaxTheta));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roundtrip(t in 0.05..=0.95f64, g in 0.0..0.95f64, gap in 0.05..1.0f64) {
            let r = g + gap;
            prop_assume!(r <= 1.0);
            let s = forward(t, r, g).unwrap();
            let res = exact(s);
            prop_assert_eq!(res.classification, Classification::Unique);
            let p = res.solutions[0];
            prop_assert!(p.max_abs_diff(&ReliabilityParams::new(t, r, g)) <= 1e-6, "{:?}", p);
            prop_assert!(res.residuals[0] <= 1e-9);
        }

        #[test]
        fn certificate_consistency(re in 0.0..1.0f64, ve in 0.05..0.95f64, ma in 0.0..1.0f64) {
            let s = StatTriple::new(re, ve, ma);
            if let Ok(res) = solve(s, &SolveOptions { scan_nodes: 2_000, ..SolveOptions::default() }) {
                if let Some(d) = res.discriminant {
                    if d < 0.0 {
                        prop_assert!(res.solutions.len() <= 1);
                    }
                    if res.solutions.len() >= 2 {
                        prop_assert!(d >= 0.0);
                    }
                }
            }
        }
    }
}
