//! Collapses per-orientation outcomes into RE, VE-bar, MA and VE@0° per
//! category and overall.
//!
//! Counts are kept as exact integers; fractions are derived on demand.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::dataset::{Category, Orientation, QuestionSet};
use crate::scoring::Outcome;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("question `{question_id}` has no outcome at {phi}")]
    MissingOrientation {
        question_id: String,
        phi: Orientation,
    },
    #[error("group `{0}` has no evaluable questions")]
    EmptyGroup(String),
}

/// One question's correctness at each orientation, indexed by [`Orientation::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub category: Category,
    pub per_phi: [bool; 4],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerQuestion {
    pub all_correct: bool,
    pub all_wrong: bool,
    pub mean: f64,
    pub at_zero: bool,
}

/// Reduces one question's four outcomes. A `None` entry is a missing orientation.
pub fn per_question(
    question_id: &str,
    outcomes: &[Option<bool>; 4],
) -> Result<PerQuestion, AggregationError> {
    let mut flags = [false; 4];
    for phi in Orientation::ALL {
        flags[phi.index()] =
            outcomes[phi.index()].ok_or_else(|| AggregationError::MissingOrientation {
                question_id: question_id.to_string(),
                phi,
            })?;
    }
    Ok(reduce(&flags))
}

fn reduce(flags: &[bool; 4]) -> PerQuestion {
    let correct = flags.iter().filter(|&&c| c).count();
    PerQuestion {
        all_correct: correct == 4,
        all_wrong: correct == 0,
        mean: correct as f64 / 4.0,
        at_zero: flags[Orientation::Deg0.index()],
    }
}

/// Exact tallies for one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GroupCounts {
    pub n: u64,
    pub all_correct: u64,
    pub all_wrong: u64,
    /// Correct answers summed over all four orientations (out of `4n`).
    pub correct: u64,
    pub correct_at_zero: u64,
}

impl GroupCounts {
    pub fn add(&mut self, flags: &[bool; 4]) {
        let pq = reduce(flags);
        self.n += 1;
        self.all_correct += u64::from(pq.all_correct);
        self.all_wrong += u64::from(pq.all_wrong);
        self.correct += flags.iter().filter(|&&c| c).count() as u64;
        self.correct_at_zero += u64::from(pq.at_zero);
    }

    pub fn merge(&mut self, other: &GroupCounts) {
        self.n += other.n;
        self.all_correct += other.all_correct;
        self.all_wrong += other.all_wrong;
        self.correct += other.correct;
        self.correct_at_zero += other.correct_at_zero;
    }
}

/// Observed statistics of one group; the solver's input.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedStats {
    pub group: String,
    pub n: u64,
    pub re: f64,
    pub ve_bar: f64,
    pub ma: f64,
    pub ve0: f64,
    /// Present for groups built from raw counts; absent for macro averages.
    pub counts: Option<GroupCounts>,
}

impl ObservedStats {
    pub fn from_counts(group: impl Into<String>, c: GroupCounts) -> Result<Self, AggregationError> {
        let group = group.into();
        if c.n == 0 {
            return Err(AggregationError::EmptyGroup(group));
        }
        let n = c.n as f64;
        Ok(ObservedStats {
            group,
            n: c.n,
            re: c.all_correct as f64 / n,
            ve_bar: c.correct as f64 / (4.0 * n),
            ma: c.all_wrong as f64 / n,
            ve0: c.correct_at_zero as f64 / n,
            counts: Some(c),
        })
    }

    pub fn delta(&self) -> f64 {
        delta(self.ve0, self.re)
    }
}

/// RE minus VE@0°; negative when rotation consistency costs accuracy.
pub fn delta(ve0: f64, re: f64) -> f64 {
    re - ve0
}

/// How the headline "overall" row averages across categories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean of per-category fractions.
    #[default]
    Macro,
    /// Pooled over all questions.
    Micro,
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Averaging::Macro),
            "micro" => Ok(Averaging::Micro),
            other => Err(format!("unknown averaging `{other}` (macro, micro)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    /// Categories with at least one question, in [`Category::ALL`] order.
    pub per_category: Vec<ObservedStats>,
    pub micro: ObservedStats,
    pub macro_avg: ObservedStats,
}

impl Aggregation {
    /// Per-category rows, then the chosen overall row labelled `overall`, then
    /// the other average labelled `overall_micro` / `overall_macro`.
    pub fn rows(&self, averaging: Averaging) -> Vec<ObservedStats> {
        let mut rows = self.per_category.clone();
        let (mut head, mut other) = match averaging {
            Averaging::Macro => (self.macro_avg.clone(), self.micro.clone()),
            Averaging::Micro => (self.micro.clone(), self.macro_avg.clone()),
        };
        head.group = "overall".into();
        other.group = match averaging {
            Averaging::Macro => "overall_micro".into(),
            Averaging::Micro => "overall_macro".into(),
        };
        rows.push(head);
        rows.push(other);
        rows
    }
}

pub fn aggregate(questions: &[QuestionOutcome]) -> Result<Aggregation, AggregationError> {
    let mut by_cat: BTreeMap<Category, GroupCounts> = BTreeMap::new();
    let mut total = GroupCounts::default();
    for q in questions {
        by_cat.entry(q.category).or_default().add(&q.per_phi);
        total.add(&q.per_phi);
    }
    if total.n == 0 {
        return Err(AggregationError::EmptyGroup("overall".into()));
    }
    let per_category = by_cat
        .into_iter()
        .map(|(cat, counts)| ObservedStats::from_counts(cat.as_str(), counts))
        .collect::<Result<Vec<_>, _>>()?;
    let micro = ObservedStats::from_counts("overall_micro", total)?;
    let k = per_category.len() as f64;
    let mean = |f: fn(&ObservedStats) -> f64| per_category.iter().map(f).sum::<f64>() / k;
    let macro_avg = ObservedStats {
        group: "overall_macro".into(),
        n: total.n,
        re: mean(|s| s.re),
        ve_bar: mean(|s| s.ve_bar),
        ma: mean(|s| s.ma),
        ve0: mean(|s| s.ve0),
        counts: None,
    };
    Ok(Aggregation {
        per_category,
        micro,
        macro_avg,
    })
}

/// Questions left out of aggregation because an orientation had no outcome.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Exclusions {
    pub incomplete: Vec<(String, Vec<Orientation>)>,
    /// Outcomes whose question is not in the manifest.
    pub unknown: Vec<String>,
}

/// Groups scored outcomes by question. Questions missing any orientation are
/// excluded and listed rather than imputed.
pub fn collect_question_outcomes(
    manifest: &QuestionSet,
    outcomes: &[Outcome],
) -> (Vec<QuestionOutcome>, Exclusions) {
    let mut slots: HashMap<&str, [Option<bool>; 4]> = HashMap::new();
    let mut exclusions = Exclusions::default();
    for o in outcomes {
        if manifest.get(&o.question_id).is_none() {
            if !exclusions.unknown.contains(&o.question_id) {
                exclusions.unknown.push(o.question_id.clone());
            }
            continue;
        }
        slots.entry(o.question_id.as_str()).or_default()[o.phi.index()] = Some(o.correct);
    }
    let mut complete = Vec::new();
    for q in manifest {
        let entry = slots.get(q.id.as_str()).copied().unwrap_or_default();
        match per_question(&q.id, &entry) {
            Ok(_) => complete.push(QuestionOutcome {
                question_id: q.id.clone(),
                category: q.category,
                per_phi: entry.map(|e| e.unwrap_or(false)),
            }),
            Err(_) => {
                let missing = Orientation::ALL
                    .into_iter()
                    .filter(|phi| entry[phi.index()].is_none())
                    .collect();
                exclusions.incomplete.push((q.id.clone(), missing));
            }
        }
    }
    (complete, exclusions)
}
