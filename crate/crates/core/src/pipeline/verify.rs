use super::aggregate::read_aggregation_csv;
use super::{csv_err, files, io_err, PipelineError, RunConfig};
use crate::reliability::{
    oracle_grid_solve, solve, Classification, OracleVerdict, ReliabilityParams, Selection,
    SolveOptions, StatTriple,
};

/// Solver and grid oracle run on the same statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyRow {
    pub group: String,
    pub solver: Option<Classification>,
    pub oracle: OracleVerdict,
    pub solver_params: Option<ReliabilityParams>,
    pub oracle_params: Option<ReliabilityParams>,
    /// Largest component gap between the two fits, in parameter units.
    pub max_diff: Option<f64>,
    pub grid_step: f64,
    /// `None` when the statistics are outside the solver's scope.
    pub agree: Option<bool>,
}

/// Agreement means the fits are within two grid steps, or both sides report
/// the same kind of non-uniqueness or absence of a fit.
pub fn cross_check(
    group: &str,
    stats: StatTriple,
    resolution: usize,
    opts: &SolveOptions,
) -> Result<VerifyRow, PipelineError> {
    let fit = oracle_grid_solve(stats, resolution)?;
    let solved = solve(stats, opts).ok();
    let solver = solved.as_ref().map(|r| r.classification);
    let solver_params = solved
        .as_ref()
        .and_then(|r| r.select(Selection::MaxTheta))
        .map(|(p, _)| p);
    let max_diff = solver_params.zip(fit.best).map(|(a, b)| a.max_abs_diff(&b));
    let close = max_diff.is_some_and(|d| d <= 2.0 * fit.step);
    let agree = match solver {
        None | Some(Classification::Boundary) => None,
        Some(Classification::Unique | Classification::Approximate) => Some(close),
        Some(Classification::Multiple(_)) => Some(matches!(
            fit.verdict,
            OracleVerdict::Multiple(_) | OracleVerdict::Ridge
        )),
        Some(Classification::Degenerate) => Some(fit.verdict == OracleVerdict::Ridge),
        Some(Classification::NoSolution) => Some(fit.verdict == OracleVerdict::NoExactFit),
    };
    Ok(VerifyRow {
        group: group.to_string(),
        solver,
        oracle: fit.verdict,
        solver_params,
        oracle_params: fit.best,
        max_diff,
        grid_step: fit.step,
        agree,
    })
}

fn verdict_label(v: OracleVerdict) -> String {
    match v {
        OracleVerdict::Unique => "unique".into(),
        OracleVerdict::Multiple(k) => format!("multiple({k})"),
        OracleVerdict::Ridge => "ridge".into(),
        OracleVerdict::NoExactFit => "no_exact_fit".into(),
    }
}

/// Cross-checks every row of `aggregation.csv` and writes `verify.csv`.
pub fn cmd_verify(cfg: &RunConfig, resolution: usize) -> Result<Vec<VerifyRow>, PipelineError> {
    let stats = read_aggregation_csv(&cfg.out(files::AGGREGATION))?;
    let opts = cfg.solve_options();
    let rows = stats
        .iter()
        .map(|s| cross_check(&s.group, StatTriple::from(s), resolution, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let path = cfg.out(files::VERIFY);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record([
        "group",
        "solver",
        "oracle",
        "theta",
        "r",
        "g",
        "oracle_theta",
        "oracle_r",
        "oracle_g",
        "max_diff",
        "agree",
    ])
    .map_err(csv_err(&path))?;
    let num = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for row in &rows {
        let (a, b) = (row.solver_params, row.oracle_params);
        w.write_record([
            row.group.clone(),
            row.solver
                .map_or_else(|| "inconsistent".into(), |c| c.to_string()),
            verdict_label(row.oracle),
            num(a.map(|p| p.theta)),
            num(a.map(|p| p.r)),
            num(a.map(|p| p.g)),
            num(b.map(|p| p.theta)),
            num(b.map(|p| p.r)),
            num(b.map(|p| p.g)),
            num(row.max_diff),
            row.agree.map_or_else(|| "-".into(), |x| x.to_string()),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(rows)
}
