//! Scores free-text model answers against realized questions.

use roteval::dataset::{parse_manifest, Orientation};
use roteval::rotation::realize_question;
use roteval::scoring::{score_response, RuleExtractor, ScoringOptions};

const MANIFEST: &str = r#"{"id":"cars","category":"object_counting","task_kind":"mcq","rotation_sensitivity":"invariant","text":"How many cars are parked?","choices":["two","three","four"],"label":1,"image_ref":"lot.png"}
{"id":"pool","category":"visual_grounding","task_kind":"vg","rotation_sensitivity":"sensitive","text":"Where is the pool?","label":[200,200,50,40],"image_ref":"yard.png"}
"#;

fn main() {
    let set = parse_manifest(MANIFEST).unwrap();
    let opts = ScoringOptions::default();
    let cars =
        realize_question(set.get("cars").unwrap(), Orientation::Deg0, 0, set.canvas()).unwrap();
    println!("cars choices as shown: {:?}\n", cars.rendered_choices);
    let answers = [
        ("cars", "C"),
        ("cars", "There are three cars."),
        ("cars", "I can't tell."),
        ("pool", "[205, 210, 245, 235]"),
        ("pool", "The pool is at [10, 10, 40, 40]."),
    ];
    for (id, text) in answers {
        let q = realize_question(set.get(id).unwrap(), Orientation::Deg0, 0, set.canvas()).unwrap();
        let (outcome, extracted) = score_response(&q, text, &RuleExtractor, &opts);
        println!(
            "{id:<5} {text:<36} correct={:<5} {:?} iou={:?} extracted={extracted:?}",
            outcome.correct, outcome.detail, outcome.iou
        );
    }
}
