//! Shows one question as a model would see it at each orientation.

use roteval::dataset::{parse_manifest, Orientation};
use roteval::rotation::realize_question;

const MANIFEST: &str = r#"{"id":"boat","category":"spatial_relationship","task_kind":"mcq","rotation_sensitivity":"sensitive","text":"Is the boat top-left of the pier or bottom-right?","choices":["top-left","bottom-right","left","center"],"label":0,"image_ref":"harbour.png"}
{"id":"roof","category":"visual_grounding","task_kind":"vg","rotation_sensitivity":"sensitive","text":"Outline the red roof.","label":[40,100,120,60],"image_ref":"street.png"}
"#;

fn main() {
    let set = parse_manifest(MANIFEST).expect("manifest parses");
    for q in set.iter() {
        println!("{} ({:?})", q.id, q.category);
        for phi in Orientation::ALL {
            let cq = realize_question(q, phi, 7, set.canvas()).expect("question realizes");
            print!("  {:>3}°  {}", phi.degrees(), cq.rendered_text);
            if let Some(answer) = cq.correct_choice() {
                print!("  choices {:?} answer {answer:?}", cq.rendered_choices);
            }
            if let Some(b) = cq.gt_box {
                print!(
                    "  box [{}, {}, {}, {}]",
                    b.x_min, b.y_min, b.width, b.height
                );
            }
            println!();
        }
    }
}
