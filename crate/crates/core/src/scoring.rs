//! Per-(question, orientation) correctness from raw model text.
//!
//! Multiple-choice answers go through an [`AnswerExtractor`]; the built-in
//! [`RuleExtractor`] is deterministic and never touches the network.
//! Grounding answers are parsed into boxes and judged by centroid
//! containment, with IoU kept alongside for diagnostics.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dataset::{BBox, Extracted, Orientation, ResponseSet};
use crate::rotation::ConcreteQuestion;

/// Maps a raw answer onto a choice index. `None` means unparsed.
pub trait AnswerExtractor: Send + Sync {
    fn extract(&self, raw_text: &str, choices: &[String]) -> Option<usize>;
}

/// Letter, then exact text, then unique substring.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleExtractor;

impl AnswerExtractor for RuleExtractor {
    fn extract(&self, raw_text: &str, choices: &[String]) -> Option<usize> {
        extract_choice(raw_text, choices)
    }
}

static LEADING_LETTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*[(\[]?([A-D])(?:[.):,\]]|\s*$)").expect("regex"));
static ANSWER_LETTER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i:answer(?:\s+is)?\s*:?)\s*[(\[]?([A-D])(?:[\s.):,\]]|$)").expect("regex")
});
static ANSWER_TAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)answer(?:\s+is)?\s*:?\s*(.*)$").expect("regex"));

const TRIM_CHARS: &[char] = &[
    '.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '[', ']', '{', '}', '*', '`',
];

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .trim_matches(|c: char| TRIM_CHARS.contains(&c) || c.is_whitespace())
        .to_string()
}

/// True if `needle` occurs in `hay` with non-alphanumeric characters (or the
/// ends of the string) on both sides.
fn contains_word(hay: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    hay.match_indices(needle).any(|(start, _)| {
        let end = start + needle.len();
        let before_ok = hay[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        before_ok && after_ok
    })
}

fn letter_index(caps: Option<regex::Captures<'_>>, n: usize) -> Option<usize> {
    let letter = caps?.get(1)?.as_str().chars().next()?;
    let idx = (letter as u8 - b'A') as usize;
    (idx < n).then_some(idx)
}

/// Deterministic rule-based choice extraction.
///
/// Precedence: (1) a standalone option letter A–D at the start of the text
/// or after "answer is"/"answer:"; (2) the whole answer equal to one
/// choice after case/whitespace normalisation; (3) exactly one choice
/// occurring as a whole-word substring (a choice contained in another
/// matched choice does not count separately). Anything else is unparsed.
pub fn extract_choice(raw_text: &str, choices: &[String]) -> Option<usize> {
    let n = choices.len().min(4);
    if let Some(i) = letter_index(LEADING_LETTER.captures(raw_text), n)
        .or_else(|| letter_index(ANSWER_LETTER.captures(raw_text), n))
    {
        return Some(i);
    }

    let normalized: Vec<String> = choices.iter().map(|c| normalize(c)).collect();
    let text = normalize(raw_text);
    let mut candidates = vec![text.clone()];
    if let Some(tail) = ANSWER_TAIL.captures(raw_text).and_then(|c| c.get(1)) {
        candidates.push(normalize(tail.as_str()));
    }
    for cand in &candidates {
        let exact: Vec<usize> = (0..normalized.len())
            .filter(|&i| &normalized[i] == cand)
            .collect();
        if exact.len() == 1 {
            return Some(exact[0]);
        }
    }

    let matched: Vec<usize> = (0..normalized.len())
        .filter(|&i| contains_word(&text, &normalized[i]))
        .collect();
    let maximal: Vec<usize> = matched
        .iter()
        .copied()
        .filter(|&i| {
            !matched.iter().any(|&j| {
                j != i && normalized[j] != normalized[i] && normalized[j].contains(&normalized[i])
            })
        })
        .collect();
    match maximal.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

pub fn score_mcq(extracted: Option<usize>, label_index: usize) -> bool {
    extracted == Some(label_index)
}

/// How four numbers in a grounding answer are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxFormat {
    /// `(x_min, y_min, x_max, y_max)`; the maxima must exceed the minima.
    #[default]
    Corners,
    /// `(x, y, width, height)`.
    Xywh,
    /// Corners when the maxima exceed the minima, otherwise `(x, y, w, h)`.
    Auto,
}

impl std::str::FromStr for BoxFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corners" => Ok(BoxFormat::Corners),
            "xywh" => Ok(BoxFormat::Xywh),
            "auto" => Ok(BoxFormat::Auto),
            other => Err(format!(
                "unknown box format `{other}` (corners, xywh, auto)"
            )),
        }
    }
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").expect("regex"));
static BRACKETED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]|\(([^()]*)\)").expect("regex"));

fn numbers(s: &str) -> Vec<f64> {
    NUMBER
        .find_iter(s)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .collect()
}

fn four_numbers(raw_text: &str) -> Option<[f64; 4]> {
    let from_group = BRACKETED.captures_iter(raw_text).find_map(|caps| {
        let inner = caps.get(1).or(caps.get(2))?.as_str();
        <[f64; 4]>::try_from(numbers(inner)).ok()
    });
    from_group.or_else(|| <[f64; 4]>::try_from(numbers(raw_text)).ok())
}

/// Parses a predicted box. Values all within `[0, 1]` are treated as
/// normalised and scaled by `canvas`; the result is clamped to the canvas.
pub fn parse_bbox(raw_text: &str, canvas: f64, format: BoxFormat) -> Option<BBox> {
    let mut v = four_numbers(raw_text)?;
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    if v.iter().all(|x| (0.0..=1.0).contains(x)) {
        v = v.map(|x| x * canvas);
    }
    let [a, b, c, d] = v;
    let corners_ok = c > a && d > b;
    let (x0, y0, x1, y1) = match format {
        BoxFormat::Corners if corners_ok => (a, b, c, d),
        BoxFormat::Corners => return None,
        BoxFormat::Auto if corners_ok => (a, b, c, d),
        BoxFormat::Xywh | BoxFormat::Auto => (a, b, a + c, b + d),
    };
    let clamp = |x: f64| x.clamp(0.0, canvas);
    let (x0, y0, x1, y1) = (clamp(x0), clamp(y0), clamp(x1), clamp(y1));
    (x1 > x0 && y1 > y0).then(|| BBox::from_corners(x0, y0, x1, y1))
}

/// Predicted centroid inside `gt`, boundary inclusive.
pub fn score_vg_centroid(pred: &BBox, gt: &BBox) -> bool {
    // Doubled coordinates keep integer boxes exact.
    let cx2 = 2.0 * pred.x_min + pred.width;
    let cy2 = 2.0 * pred.y_min + pred.height;
    let (gx0, gy0) = (2.0 * gt.x_min, 2.0 * gt.y_min);
    let (gx1, gy1) = (gx0 + 2.0 * gt.width, gy0 + 2.0 * gt.height);
    (gx0..=gx1).contains(&cx2) && (gy0..=gy1).contains(&cy2)
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max().min(b.x_max()) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max().min(b.y_max()) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeDetail {
    MatchedChoice(usize),
    CentroidHit,
    CentroidMiss,
    Unparsed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub question_id: String,
    pub phi: Orientation,
    pub correct: bool,
    pub detail: OutcomeDetail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

impl Outcome {
    pub fn unparsed(question_id: impl Into<String>, phi: Orientation) -> Self {
        Outcome {
            question_id: question_id.into(),
            phi,
            correct: false,
            detail: OutcomeDetail::Unparsed,
            iou: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScoringOptions {
    pub box_format: BoxFormat,
    pub canvas: f64,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions {
            box_format: BoxFormat::Corners,
            canvas: crate::dataset::DEFAULT_CANVAS,
        }
    }
}

/// Scores one answer against its realized question.
pub fn score_response(
    q: &ConcreteQuestion,
    raw_text: &str,
    extractor: &dyn AnswerExtractor,
    opts: &ScoringOptions,
) -> (Outcome, Extracted) {
    let id = q.source_id.clone();
    match (q.label_index, q.gt_box) {
        (Some(label), _) => match extractor.extract(raw_text, &q.rendered_choices) {
            Some(i) => (
                Outcome {
                    question_id: id,
                    phi: q.phi,
                    correct: score_mcq(Some(i), label),
                    detail: OutcomeDetail::MatchedChoice(i),
                    iou: None,
                },
                Extracted::Choice(i),
            ),
            None => (Outcome::unparsed(id, q.phi), Extracted::Unparsed),
        },
        (None, Some(gt)) => match parse_bbox(raw_text, opts.canvas, opts.box_format) {
            Some(pred) => {
                let hit = score_vg_centroid(&pred, &gt);
                (
                    Outcome {
                        question_id: id,
                        phi: q.phi,
                        correct: hit,
                        detail: if hit {
                            OutcomeDetail::CentroidHit
                        } else {
                            OutcomeDetail::CentroidMiss
                        },
                        iou: Some(iou(&pred, &gt)),
                    },
                    Extracted::Box(pred),
                )
            }
            None => (Outcome::unparsed(id, q.phi), Extracted::Unparsed),
        },
        (None, None) => (Outcome::unparsed(id, q.phi), Extracted::Unparsed),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreReport {
    /// Sorted by `(question_id, phi)`.
    pub outcomes: Vec<Outcome>,
    /// Answers that could not be parsed; they are scored as wrong.
    pub unparsed: usize,
    /// Realized items with no response at all.
    pub unanswered: Vec<(String, Orientation)>,
    /// Mean IoU over parsed grounding answers, if any.
    pub mean_iou: Option<f64>,
}

pub fn score_all(
    questions: &[ConcreteQuestion],
    responses: &ResponseSet,
    extractor: &dyn AnswerExtractor,
    opts: &ScoringOptions,
) -> ScoreReport {
    let mut report = ScoreReport::default();
    let mut iou_sum = 0.0;
    let mut iou_n = 0usize;
    for q in questions {
        match responses.get(&q.source_id, q.phi) {
            Some(r) => {
                let (outcome, _) = score_response(q, &r.raw_text, extractor, opts);
                if outcome.detail == OutcomeDetail::Unparsed {
                    report.unparsed += 1;
                }
                if let Some(v) = outcome.iou {
                    iou_sum += v;
                    iou_n += 1;
                }
                report.outcomes.push(outcome);
            }
            None => report.unanswered.push((q.source_id.clone(), q.phi)),
        }
    }
    report
        .outcomes
        .sort_by(|a, b| (&a.question_id, a.phi).cmp(&(&b.question_id, b.phi)));
    report.unanswered.sort();
    report.mean_iou = (iou_n > 0).then(|| iou_sum / iou_n as f64);
    report
}
