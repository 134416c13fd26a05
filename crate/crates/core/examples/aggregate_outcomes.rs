//! Turns per-orientation correctness into RE, VE0, VE-bar and MA.

use roteval::aggregation::{aggregate, Averaging, QuestionOutcome};
use roteval::dataset::Category;

fn main() {
    let patterns = [
        (Category::ObjectCounting, [true, true, true, true]),
        (Category::ObjectCounting, [true, true, true, false]),
        (Category::ObjectCounting, [false, false, false, false]),
        (Category::SceneUnderstanding, [true, false, true, false]),
        (Category::SceneUnderstanding, [true, true, true, true]),
    ];
    let questions: Vec<QuestionOutcome> = patterns
        .iter()
        .enumerate()
        .map(|(i, &(category, per_phi))| QuestionOutcome {
            question_id: format!("q{i}"),
            category,
            per_phi,
        })
        .collect();
    let agg = aggregate(&questions).unwrap();
    println!(
        "{:<22} {:>2} {:>6} {:>6} {:>6} {:>6} {:>7}",
        "group", "n", "RE", "VE0", "VEbar", "MA", "delta"
    );
    for s in agg.rows(Averaging::Macro) {
        println!(
            "{:<22} {:>2} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>7.3}",
            s.group,
            s.n,
            s.re,
            s.ve0,
            s.ve_bar,
            s.ma,
            s.delta()
        );
    }
}
