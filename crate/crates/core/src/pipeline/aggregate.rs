use std::path::Path;

use super::score::read_outcomes;
use super::{csv_err, files, PipelineError, RunConfig};
use crate::aggregation::{
    aggregate, collect_question_outcomes, AggregationError, GroupCounts, ObservedStats,
};
use crate::dataset::load_manifest;

pub const AGGREGATION_HEADER: [&str; 11] = [
    "group",
    "n",
    "RE",
    "VE0",
    "VEbar",
    "MA",
    "delta",
    "all_correct",
    "all_wrong",
    "correct",
    "correct_at_zero",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregateSummary {
    pub rows: Vec<ObservedStats>,
    pub excluded_incomplete: usize,
    pub excluded_unknown: usize,
}

/// Full-precision rows; rounding happens only in the report.
pub fn write_aggregation_csv(path: &Path, rows: &[ObservedStats]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(AGGREGATION_HEADER).map_err(csv_err(path))?;
    for s in rows {
        let counts = s.counts.map_or_else(
            || vec![String::new(); 4],
            |c| {
                vec![
                    c.all_correct.to_string(),
                    c.all_wrong.to_string(),
                    c.correct.to_string(),
                    c.correct_at_zero.to_string(),
                ]
            },
        );
        let mut record = vec![
            s.group.clone(),
            s.n.to_string(),
            s.re.to_string(),
            s.ve0.to_string(),
            s.ve_bar.to_string(),
            s.ma.to_string(),
            s.delta().to_string(),
        ];
        record.extend(counts);
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_aggregation_csv(path: &Path) -> Result<Vec<ObservedStats>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let line = i + 2;
        let bad = |reason: String| PipelineError::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let field = |k: usize| record.get(k).unwrap_or("").trim();
        let float = |k: usize| {
            field(k)
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", AGGREGATION_HEADER[k])))
        };
        let int = |k: usize| {
            field(k)
                .parse::<u64>()
                .map_err(|e| bad(format!("column {}: {e}", AGGREGATION_HEADER[k])))
        };
        let counts = if field(7).is_empty() {
            None
        } else {
            Some(GroupCounts {
                n: int(1)?,
                all_correct: int(7)?,
                all_wrong: int(8)?,
                correct: int(9)?,
                correct_at_zero: int(10)?,
            })
        };
        rows.push(ObservedStats {
            group: field(0).to_string(),
            n: int(1)?,
            re: float(2)?,
            ve0: float(3)?,
            ve_bar: float(4)?,
            ma: float(5)?,
            counts,
        });
    }
    Ok(rows)
}

/// Reads `outcomes.jsonl`, reduces per category and overall, and writes
/// `aggregation.csv`.
pub fn cmd_aggregate(cfg: &RunConfig) -> Result<AggregateSummary, PipelineError> {
    let manifest = load_manifest(&cfg.manifest)?;
    let outcomes = read_outcomes(&cfg.out(files::OUTCOMES))?;
    let (complete, exclusions) = collect_question_outcomes(&manifest, &outcomes);
    if !exclusions.incomplete.is_empty() {
        log::warn!(
            "{} question(s) lack an outcome for some orientation and are excluded",
            exclusions.incomplete.len()
        );
    }
    let rows = match aggregate(&complete) {
        Ok(agg) => agg.rows(cfg.averaging),
        Err(AggregationError::EmptyGroup(_)) => {
            log::warn!("no evaluable questions; writing a header-only table");
            Vec::new()
        }
        Err(e) => return Err(e.into()),
    };
    cfg.ensure_output_dir()?;
    write_aggregation_csv(&cfg.out(files::AGGREGATION), &rows)?;
    cfg.write_run_record()?;
    Ok(AggregateSummary {
        rows,
        excluded_incomplete: exclusions.incomplete.len(),
        excluded_unknown: exclusions.unknown.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_full_precision() {
        let mut c = GroupCounts::default();
        c.add(&[true, true, true, false]);
        c.add(&[false, false, false, false]);
        c.add(&[true, true, true, true]);
        let counted = ObservedStats::from_counts("scene_understanding", c).unwrap();
        let averaged = ObservedStats {
            group: "overall".into(),
            n: 3,
            re: 1.0 / 3.0,
            ve_bar: 0.1 + 0.2,
            ma: 0.0,
            ve0: 2.0 / 3.0,
            counts: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_aggregation_csv(&path, &[counted.clone(), averaged.clone()]).unwrap();
        assert_eq!(
            read_aggregation_csv(&path).unwrap(),
            vec![counted, averaged]
        );
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_aggregation_csv(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(read_aggregation_csv(&path).unwrap().is_empty());
    }
}
