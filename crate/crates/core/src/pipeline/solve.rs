use std::path::Path;

use super::aggregate::read_aggregation_csv;
use super::{csv_err, files, PipelineError, RunConfig};
use crate::aggregation::ObservedStats;
use crate::reliability::{
    solve, ReliabilityError, ReliabilityParams, Selection, SolveOptions, StatTriple,
};

pub const SOLVE_HEADER: [&str; 8] = [
    "group",
    "classification",
    "theta",
    "r",
    "g",
    "a_adj",
    "residual",
    "discriminant",
];

/// One group's solver outcome as written to `solve.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolvedRow {
    pub group: String,
    /// `unique`, `multiple(k)`, `degenerate`, `no_solution`, `boundary`,
    /// `approximate`, or `inconsistent` for stats that break the Jensen bound.
    pub classification: String,
    /// The selected solution, if any.
    pub params: Option<ReliabilityParams>,
    pub residual: Option<f64>,
    pub discriminant: Option<f64>,
}

pub fn solve_one(stats: &ObservedStats, opts: &SolveOptions, selection: Selection) -> SolvedRow {
    let mut row = SolvedRow {
        group: stats.group.clone(),
        classification: String::new(),
        params: None,
        residual: None,
        discriminant: None,
    };
    match solve(StatTriple::from(stats), opts) {
        Ok(res) => {
            row.classification = res.classification.to_string();
            row.discriminant = res.discriminant;
            if let Some((p, r)) = res.select(selection) {
                row.params = Some(p);
                row.residual = Some(r);
            }
        }
        Err(ReliabilityError::InconsistentStats(msg)) => {
            log::warn!("{}: {msg}", stats.group);
            row.classification = "inconsistent".into();
        }
        Err(e) => {
            log::warn!("{}: {e}", stats.group);
            row.classification = "invalid".into();
        }
    }
    row
}

/// Solves each group independently; results follow input order.
pub fn solve_rows(
    rows: &[ObservedStats],
    opts: &SolveOptions,
    selection: Selection,
) -> Vec<SolvedRow> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = rows
            .iter()
            .map(|s| scope.spawn(move || solve_one(s, opts, selection)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_solve_csv(path: &Path, rows: &[SolvedRow]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SOLVE_HEADER).map_err(csv_err(path))?;
    for row in rows {
        let p = row.params;
        w.write_record([
            row.group.clone(),
            row.classification.clone(),
            opt(p.map(|p| p.theta)),
            opt(p.map(|p| p.r)),
            opt(p.map(|p| p.g)),
            opt(p.map(|p| p.a_adj)),
            opt(row.residual),
            opt(row.discriminant),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_solve_csv(path: &Path) -> Result<Vec<SolvedRow>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let field = |k: usize| -> Result<Option<f64>, PipelineError> {
            let s = record.get(k).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|e| PipelineError::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                reason: format!("column {}: {e}", SOLVE_HEADER[k]),
            })
        };
        let params = match (field(2)?, field(3)?, field(4)?, field(5)?) {
            (Some(theta), Some(r), Some(g), Some(a_adj)) => {
                Some(ReliabilityParams { theta, r, g, a_adj })
            }
            _ => None,
        };
        out.push(SolvedRow {
            group: record.get(0).unwrap_or("").to_string(),
            classification: record.get(1).unwrap_or("").to_string(),
            params,
            residual: field(6)?,
            discriminant: field(7)?,
        });
    }
    Ok(out)
}

/// Reads `aggregation.csv` and writes `solve.csv`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Vec<SolvedRow>, PipelineError> {
    let stats = read_aggregation_csv(&cfg.out(files::AGGREGATION))?;
    let rows = solve_rows(&stats, &cfg.solve_options(), cfg.selection);
    write_solve_csv(&cfg.out(files::SOLVE), &rows)?;
    cfg.write_run_record()?;
    Ok(rows)
}
