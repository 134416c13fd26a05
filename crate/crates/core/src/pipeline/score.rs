use std::path::Path;

use super::rotate::load_realized;
use super::{files, io_err, PipelineError, RunConfig};
use crate::dataset::{load_responses, Orientation};
use crate::scoring::{score_all, Outcome, RuleExtractor};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSummary {
    pub scored: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub unanswered: usize,
    pub mean_iou: Option<f64>,
}

/// Scores every answer against its realized question and writes
/// `outcomes.jsonl`, one outcome per line in `(question, orientation)` order.
pub fn cmd_score(cfg: &RunConfig) -> Result<ScoreSummary, PipelineError> {
    let mut questions = Vec::new();
    let mut canvas = None;
    for phi in Orientation::ALL {
        let (c, qs) = load_realized(&cfg.out(&files::realized(phi)))?;
        canvas.get_or_insert(c);
        questions.extend(qs);
    }
    let opts = cfg.scoring_options(canvas.unwrap_or(crate::dataset::DEFAULT_CANVAS));
    let responses = load_responses(&cfg.responses_path()?)?;
    let report = score_all(&questions, &responses, &RuleExtractor, &opts);
    if !report.unanswered.is_empty() {
        log::warn!(
            "{} realized item(s) have no response",
            report.unanswered.len()
        );
    }

    let path = cfg.out(files::OUTCOMES);
    let mut text = String::new();
    for o in &report.outcomes {
        text.push_str(&serde_json::to_string(o).expect("outcome serializes"));
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(io_err(&path))?;
    cfg.write_run_record()?;

    Ok(ScoreSummary {
        scored: report.outcomes.len(),
        correct: report.outcomes.iter().filter(|o| o.correct).count(),
        unparsed: report.unparsed,
        unanswered: report.unanswered.len(),
        mean_iou: report.mean_iou,
    })
}

pub fn read_outcomes(path: &Path) -> Result<Vec<Outcome>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
