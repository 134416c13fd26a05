//! Synthetic manifests and a scripted responder with planted reliability
//! parameters, for end-to-end checks without a hosted model.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::collect::{Responder, ResponderError};
use crate::dataset::{
    BBox, Category, Label, Orientation, PairLayout, Question, QuestionSet, RotationSensitivity,
    TaskKind, DEFAULT_CANVAS,
};
use crate::reliability::ReliabilityParams;
use crate::rotation::{shuffle_key, ConcreteQuestion};

const DIRECTIONS: [&str; 4] = ["top-left", "top-right", "bottom-right", "bottom-left"];

/// `n` questions cycling through the categories. Grounding questions get a
/// random box; the rest are four-way multiple choice with directional
/// answers when the category is spatial.
pub fn synthetic_manifest(n: usize, seed: u64) -> QuestionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let questions = (0..n)
        .map(|i| {
            let category = Category::ALL[i % Category::ALL.len()];
            let id = format!("syn{i:06}");
            let image_ref = format!("img/{id}.png");
            if category == Category::VisualGrounding {
                let w = rng.random_range(20..=120) as f64;
                let h = rng.random_range(20..=120) as f64;
                let x = rng.random_range(0.0..DEFAULT_CANVAS - w).floor();
                let y = rng.random_range(0.0..DEFAULT_CANVAS - h).floor();
                return Question {
                    id,
                    category,
                    task_kind: TaskKind::Vg,
                    rotation_sensitivity: RotationSensitivity::Sensitive,
                    text: "Locate the marked object.".into(),
                    choices: Vec::new(),
                    label: Label::Box(BBox::new(x, y, w, h)),
                    image_ref,
                    pair_layout: PairLayout::None,
                };
            }
            let label = rng.random_range(0..4);
            let (text, choices, sensitivity) = if category == Category::SpatialRelationship {
                (
                    "Which corner holds the red car?".to_string(),
                    DIRECTIONS.iter().map(|d| d.to_string()).collect(),
                    RotationSensitivity::Sensitive,
                )
            } else {
                (
                    format!("Question {i} about the scene?"),
                    (0..4).map(|k| format!("option {k} of {i}")).collect(),
                    RotationSensitivity::Invariant,
                )
            };
            Question {
                id,
                category,
                task_kind: TaskKind::Mcq,
                rotation_sensitivity: sensitivity,
                text,
                choices,
                label: Label::Choice(label),
                image_ref,
                pair_layout: PairLayout::None,
            }
        })
        .collect();
    QuestionSet::new(DEFAULT_CANVAS, questions).expect("synthetic manifest is valid")
}

/// Answers as the mixture model prescribes: each question is known with
/// probability `theta`, drawn once; each orientation is then answered
/// correctly with probability `r` (known) or `g` (guessing), independently.
///
/// Draws are keyed by `(seed, question, orientation)`, so answers do not
/// depend on request order or concurrency.
#[derive(Clone, Debug)]
pub struct SimulatedResponder {
    pub params: ReliabilityParams,
    pub seed: u64,
    pub canvas: f64,
}

impl SimulatedResponder {
    pub fn new(params: ReliabilityParams, seed: u64) -> Self {
        SimulatedResponder {
            params,
            seed,
            canvas: DEFAULT_CANVAS,
        }
    }

    fn draw(&self, salt: u64, id: &str, phi: Orientation) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(shuffle_key(self.seed ^ salt, id, phi))
    }

    pub fn knows(&self, id: &str) -> bool {
        self.draw(0x6b6e_6f77, id, Orientation::Deg0)
            .random::<f64>()
            < self.params.theta
    }

    fn answer(&self, q: &ConcreteQuestion) -> String {
        let p = if self.knows(&q.source_id) {
            self.params.r
        } else {
            self.params.g
        };
        let mut rng = self.draw(0x616e_7377, &q.source_id, q.phi);
        let correct = rng.random::<f64>() < p;
        match (q.label_index, q.gt_box) {
            (Some(label), _) => {
                let n = q.rendered_choices.len();
                let pick = if correct {
                    label
                } else {
                    (label + 1 + rng.random_range(0..n - 1)) % n
                };
                format!("{}", (b'A' + pick as u8) as char)
            }
            (None, Some(gt)) => {
                let b = if correct { gt } else { self.miss_box(&gt) };
                format!("[{}, {}, {}, {}]", b.x_min, b.y_min, b.x_max(), b.y_max())
            }
            (None, None) => String::new(),
        }
    }

    /// A small box near a canvas corner whose centre lies outside `gt`.
    fn miss_box(&self, gt: &BBox) -> BBox {
        let s = self.canvas;
        [
            (0.0, 0.0),
            (s - 10.0, 0.0),
            (0.0, s - 10.0),
            (s - 10.0, s - 10.0),
        ]
        .into_iter()
        .map(|(x, y)| BBox::new(x, y, 10.0, 10.0))
        .find(|b| {
            let (cx, cy) = b.centroid();
            !(cx >= gt.x_min && cx <= gt.x_max() && cy >= gt.y_min && cy <= gt.y_max())
        })
        .expect("a box smaller than half the canvas leaves a corner free")
    }
}

impl Responder for SimulatedResponder {
    fn respond(
        &self,
        q: &ConcreteQuestion,
        _image: Option<&Path>,
    ) -> Result<String, ResponderError> {
        Ok(self.answer(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::realize_question;
    use crate::scoring::{score_response, RuleExtractor, ScoringOptions};

    #[test]
    fn manifest_is_deterministic_and_valid() {
        let a = synthetic_manifest(50, 3);
        let b = synthetic_manifest(50, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert!(a.iter().any(|q| q.task_kind == TaskKind::Vg));
    }

    #[test]
    fn perfect_and_hopeless_responders() {
        let set = synthetic_manifest(40, 1);
        let always = SimulatedResponder::new(ReliabilityParams::new(1.0, 1.0, 0.0), 9);
        let never = SimulatedResponder::new(ReliabilityParams::new(0.0, 1.0, 0.0), 9);
        for q in set.iter() {
            for phi in Orientation::ALL {
                let cq = realize_question(q, phi, 5, DEFAULT_CANVAS).unwrap();
                let opts = ScoringOptions::default();
                let hit = score_response(
                    &cq,
                    &always.respond(&cq, None).unwrap(),
                    &RuleExtractor,
                    &opts,
                )
                .0;
                let miss = score_response(
                    &cq,
                    &never.respond(&cq, None).unwrap(),
                    &RuleExtractor,
                    &opts,
                )
                .0;
                assert!(hit.correct, "{}", cq.source_id);
                assert!(!miss.correct, "{}", cq.source_id);
            }
        }
    }
}
