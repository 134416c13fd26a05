use std::fmt::Write as _;
use std::path::Path;

use super::aggregate::read_aggregation_csv;
use super::solve::read_solve_csv;
use super::{csv_err, files, io_err, PipelineError, RunConfig, SolvedRow};
use crate::aggregation::ObservedStats;

pub const REPORT_HEADER: [&str; 16] = [
    "group",
    "n",
    "RE",
    "VE0",
    "VEbar",
    "MA",
    "delta",
    "theta",
    "r",
    "g",
    "a_adj",
    "classification",
    "all_correct",
    "all_wrong",
    "correct",
    "correct_at_zero",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub stats: ObservedStats,
    pub solved: Option<SolvedRow>,
}

/// Three decimals, `-` when absent. Negative zero prints as `0.000`.
pub fn format_fraction(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(x) => {
            let s = format!("{x:.3}");
            if s == "-0.000" {
                "0.000".into()
            } else {
                s
            }
        }
    }
}

impl ReportRow {
    pub fn cells(&self) -> Vec<String> {
        let s = &self.stats;
        let p = self.solved.as_ref().and_then(|r| r.params);
        let count = |f: fn(&crate::aggregation::GroupCounts) -> u64| {
            s.counts
                .as_ref()
                .map_or_else(|| "-".to_string(), |c| f(c).to_string())
        };
        vec![
            s.group.clone(),
            s.n.to_string(),
            format_fraction(Some(s.re)),
            format_fraction(Some(s.ve0)),
            format_fraction(Some(s.ve_bar)),
            format_fraction(Some(s.ma)),
            format_fraction(Some(s.delta())),
            format_fraction(p.map(|p| p.theta)),
            format_fraction(p.map(|p| p.r)),
            format_fraction(p.map(|p| p.g)),
            format_fraction(p.map(|p| p.a_adj)),
            self.solved
                .as_ref()
                .map_or_else(|| "-".to_string(), |r| r.classification.clone()),
            count(|c| c.all_correct),
            count(|c| c.all_wrong),
            count(|c| c.correct),
            count(|c| c.correct_at_zero),
        ]
    }
}

/// Joins aggregation rows with solver rows by group name.
pub fn join(stats: Vec<ObservedStats>, solved: &[SolvedRow]) -> Vec<ReportRow> {
    stats
        .into_iter()
        .map(|s| {
            let solved = solved.iter().find(|r| r.group == s.group).cloned();
            ReportRow { stats: s, solved }
        })
        .collect()
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(REPORT_HEADER).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.cells()).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Fixed-width text rendering of the report.
pub fn render_table(rows: &[ReportRow], seed: u64) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(ReportRow::cells).collect();
    let mut widths: Vec<usize> = REPORT_HEADER.iter().map(|h| h.len()).collect();
    for cells in &body {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = format!("seed: {seed}\n");
    let line = |cells: &[String], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    let header: Vec<String> = REPORT_HEADER.iter().map(|h| h.to_string()).collect();
    line(&header, &mut out);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&rule, &mut out);
    for cells in &body {
        line(cells, &mut out);
    }
    out
}

/// Writes `report.csv` and `report.txt` from `aggregation.csv` and,
/// when present, `solve.csv`.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<ReportRow>, PipelineError> {
    let stats = read_aggregation_csv(&cfg.out(files::AGGREGATION))?;
    let solve_path = cfg.out(files::SOLVE);
    let solved = if solve_path.exists() {
        read_solve_csv(&solve_path)?
    } else {
        Vec::new()
    };
    let rows = join(stats, &solved);
    write_report_csv(&cfg.out(files::REPORT_CSV), &rows)?;
    let txt = cfg.out(files::REPORT_TXT);
    std::fs::write(&txt, render_table(&rows, cfg.seed)).map_err(io_err(&txt))?;
    cfg.write_run_record()?;
    Ok(rows)
}
