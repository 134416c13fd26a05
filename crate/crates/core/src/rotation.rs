//! Orientation variants of a question: geometry, directional language,
//! pair placeholders, and per-rotation choice shuffling.
//!
//! Coordinates have their origin at the top-left corner with y growing
//! downward. A clockwise quarter turn of an `S×S` canvas maps
//! `(x, y) → (S − y, x)`; the other orientations are its powers.

use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    BBox, Category, DatasetError, Label, Orientation, PairLayout, Question, RotationSensitivity,
    TaskKind,
};

#[derive(Debug, Error)]
pub enum RotationError {
    #[error("point ({x}, {y}) lies outside the {canvas}px canvas")]
    PointOutOfCanvas { x: f64, y: f64, canvas: f64 },
    #[error("box {0:?} is not a valid box on the canvas")]
    InvalidBox(BBox),
    #[error("question `{0}` uses pair placeholders but has no pair layout")]
    PlaceholderWithoutLayout(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("image {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

pub fn rotate_point(
    p: (f64, f64),
    phi: Orientation,
    canvas: f64,
) -> Result<(f64, f64), RotationError> {
    let (x, y) = p;
    if !(x.is_finite()
        && y.is_finite()
        && (0.0..=canvas).contains(&x)
        && (0.0..=canvas).contains(&y))
    {
        return Err(RotationError::PointOutOfCanvas { x, y, canvas });
    }
    Ok(rotate_point_unchecked(p, phi, canvas))
}

fn rotate_point_unchecked((mut x, mut y): (f64, f64), phi: Orientation, canvas: f64) -> (f64, f64) {
    for _ in 0..phi.quarter_turns() {
        (x, y) = (canvas - y, x);
    }
    (x, y)
}

/// Rotates a box by mapping its corners and taking the axis-aligned hull.
pub fn rotate_bbox(b: BBox, phi: Orientation, canvas: f64) -> Result<BBox, RotationError> {
    if !b.is_valid_on(canvas) {
        return Err(RotationError::InvalidBox(b));
    }
    let corners = [
        (b.x_min, b.y_min),
        (b.x_max(), b.y_min),
        (b.x_min, b.y_max()),
        (b.x_max(), b.y_max()),
    ]
    .map(|c| rotate_point_unchecked(c, phi, canvas));
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in corners {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    Ok(BBox::from_corners(x0, y0, x1, y1))
}

/// A cell of the 3×3 direction grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DirectionalToken {
    TopLeft,
    Top,
    TopRight,
    Right,
    BottomRight,
    Bottom,
    BottomLeft,
    Left,
    Center,
}

/// The eight outer cells in clockwise order; a quarter turn advances two places.
const RING: [DirectionalToken; 8] = [
    DirectionalToken::TopLeft,
    DirectionalToken::Top,
    DirectionalToken::TopRight,
    DirectionalToken::Right,
    DirectionalToken::BottomRight,
    DirectionalToken::Bottom,
    DirectionalToken::BottomLeft,
    DirectionalToken::Left,
];

impl DirectionalToken {
    pub const ALL: [DirectionalToken; 9] = [
        DirectionalToken::TopLeft,
        DirectionalToken::Top,
        DirectionalToken::TopRight,
        DirectionalToken::Right,
        DirectionalToken::BottomRight,
        DirectionalToken::Bottom,
        DirectionalToken::BottomLeft,
        DirectionalToken::Left,
        DirectionalToken::Center,
    ];

    /// Lower-case words making up the token, e.g. `["top", "left"]`.
    pub fn words(self) -> &'static [&'static str] {
        match self {
            DirectionalToken::TopLeft => &["top", "left"],
            DirectionalToken::Top => &["top"],
            DirectionalToken::TopRight => &["top", "right"],
            DirectionalToken::Right => &["right"],
            DirectionalToken::BottomRight => &["bottom", "right"],
            DirectionalToken::Bottom => &["bottom"],
            DirectionalToken::BottomLeft => &["bottom", "left"],
            DirectionalToken::Left => &["left"],
            DirectionalToken::Center => &["center"],
        }
    }

    /// Parses one or two words (case-insensitive). `centre` is accepted.
    pub fn from_words(first: &str, second: Option<&str>) -> Option<Self> {
        let first = first.to_ascii_lowercase();
        let second = second.map(str::to_ascii_lowercase);
        let tok = match (first.as_str(), second.as_deref()) {
            ("top", Some("left")) => DirectionalToken::TopLeft,
            ("top", Some("right")) => DirectionalToken::TopRight,
            ("bottom", Some("left")) => DirectionalToken::BottomLeft,
            ("bottom", Some("right")) => DirectionalToken::BottomRight,
            ("top", None) => DirectionalToken::Top,
            ("bottom", None) => DirectionalToken::Bottom,
            ("left", None) => DirectionalToken::Left,
            ("right", None) => DirectionalToken::Right,
            ("center" | "centre", None) => DirectionalToken::Center,
            _ => return None,
        };
        Some(tok)
    }
}

impl fmt::Display for DirectionalToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.words().join("-"))
    }
}

pub fn remap_token(t: DirectionalToken, phi: Orientation) -> DirectionalToken {
    match RING.iter().position(|&r| r == t) {
        Some(i) => RING[(i + 2 * phi.quarter_turns() as usize) % RING.len()],
        None => t,
    }
}

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:(top|bottom)([- ])(left|right)|(top|bottom|left|right|center|centre))\b")
        .expect("token regex")
});

static PLACEHOLDER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"⟨img([12])⟩|<img([12])>").expect("placeholder regex"));

#[derive(Clone, Copy)]
enum Case {
    Lower,
    Title,
    Upper,
}

fn case_of(s: &str) -> Case {
    let letters: Vec<char> = s.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        Case::Upper
    } else if letters.first().is_some_and(|c| c.is_uppercase()) {
        Case::Title
    } else {
        Case::Lower
    }
}

fn apply_case(word: &str, case: Case) -> String {
    match case {
        Case::Lower => word.to_string(),
        Case::Upper => word.to_ascii_uppercase(),
        Case::Title => {
            let mut chars = word.chars();
            match chars.next() {
                Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
                None => String::new(),
            }
        }
    }
}

/// Rewrites every directional phrase in `text` for orientation `phi`.
///
/// Whole-word and case-insensitive; the original separator (hyphen or
/// space) and capitalisation style are kept. A `centre` spelling is left as is.
pub fn remap_text(text: &str, phi: Orientation) -> String {
    if phi == Orientation::Deg0 {
        return text.to_string();
    }
    TOKEN_RE
        .replace_all(text, |caps: &Captures<'_>| {
            let whole = &caps[0];
            let (tok, sep) = match (caps.get(1), caps.get(4)) {
                (Some(first), _) => (
                    DirectionalToken::from_words(first.as_str(), Some(&caps[3])),
                    caps.get(2).map_or("-", |m| m.as_str()),
                ),
                (None, Some(single)) => (DirectionalToken::from_words(single.as_str(), None), "-"),
                _ => (None, "-"),
            };
            let Some(tok) = tok else {
                return whole.to_string();
            };
            let mapped = remap_token(tok, phi);
            if mapped == tok {
                return whole.to_string();
            }
            let case = case_of(whole);
            mapped
                .words()
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    // Title case only capitalises the first word ("Top-left").
                    let c = match (case, i) {
                        (Case::Title, 0) | (Case::Upper, _) => case,
                        _ => Case::Lower,
                    };
                    apply_case(w, c)
                })
                .collect::<Vec<_>>()
                .join(sep)
        })
        .into_owned()
}

fn has_placeholder(text: &str) -> bool {
    PLACEHOLDER_RE.is_match(text)
}

/// Physical position word for sub-image 1 or 2 after rotation.
pub fn pair_position(layout: PairLayout, image: u8, phi: Orientation) -> Option<DirectionalToken> {
    let base = match (layout, image) {
        (PairLayout::Horizontal, 1) => DirectionalToken::Left,
        (PairLayout::Horizontal, 2) => DirectionalToken::Right,
        (PairLayout::Vertical, 1) => DirectionalToken::Top,
        (PairLayout::Vertical, 2) => DirectionalToken::Bottom,
        _ => return None,
    };
    Some(remap_token(base, phi))
}

/// Replaces `⟨img1⟩`/`⟨img2⟩` (or `<img1>`/`<img2>`) with "the {position} image",
/// where position follows the sub-image to where the rotation put it.
pub fn render_pair_placeholders(
    text: &str,
    layout: PairLayout,
    phi: Orientation,
) -> Result<String, RotationError> {
    if !has_placeholder(text) {
        return Ok(text.to_string());
    }
    if layout == PairLayout::None {
        return Err(RotationError::PlaceholderWithoutLayout(text.to_string()));
    }
    Ok(PLACEHOLDER_RE
        .replace_all(text, |caps: &Captures<'_>| {
            let n = caps.get(1).or(caps.get(2)).map_or("1", |m| m.as_str());
            let image = if n == "1" { 1 } else { 2 };
            let pos = pair_position(layout, image, phi).expect("layout is not none");
            format!("the {pos} image")
        })
        .into_owned())
}

/// FNV-1a over `(seed, id, phi)`; seeds the per-rotation choice shuffle.
pub fn shuffle_key(seed: u64, id: &str, phi: Orientation) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(id.bytes())
        .chain([0xff])
        .chain(phi.degrees().to_le_bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// `perm[i]` is the source index shown at position `i`.
pub fn shuffle_permutation(seed: u64, id: &str, phi: Orientation, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_key(seed, id, phi));
    perm.shuffle(&mut rng);
    perm
}

/// A question as shown to a model at one orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteQuestion {
    pub source_id: String,
    pub category: Category,
    pub task_kind: TaskKind,
    pub rotation_sensitivity: RotationSensitivity,
    pub phi: Orientation,
    pub rendered_text: String,
    pub rendered_choices: Vec<String>,
    /// Position of the correct answer in `rendered_choices` (MCQ).
    pub label_index: Option<usize>,
    /// Ground truth box in the rotated frame (VG).
    pub gt_box: Option<BBox>,
    pub image_ref: String,
    pub pair_layout: PairLayout,
    pub shuffle_seed: u64,
}

impl ConcreteQuestion {
    pub fn correct_choice(&self) -> Option<&str> {
        self.label_index
            .and_then(|i| self.rendered_choices.get(i))
            .map(String::as_str)
    }
}

/// On-disk shape of a realized record: the manifest schema plus
/// `phi`, `shuffle_seed` and `label_index`.
#[derive(Serialize, Deserialize)]
struct RealizedRecord {
    id: String,
    category: Category,
    task_kind: TaskKind,
    rotation_sensitivity: RotationSensitivity,
    text: String,
    #[serde(default)]
    choices: Vec<String>,
    label: Label,
    image_ref: String,
    #[serde(default)]
    pair_layout: PairLayout,
    phi: Orientation,
    shuffle_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_index: Option<usize>,
}

impl Serialize for ConcreteQuestion {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let label = match (self.label_index, self.gt_box) {
            (Some(i), _) => Label::Choice(i),
            (None, Some(b)) => Label::Box(b),
            (None, None) => {
                return Err(serde::ser::Error::custom("realized question without label"))
            }
        };
        RealizedRecord {
            id: self.source_id.clone(),
            category: self.category,
            task_kind: self.task_kind,
            rotation_sensitivity: self.rotation_sensitivity,
            text: self.rendered_text.clone(),
            choices: self.rendered_choices.clone(),
            label,
            image_ref: self.image_ref.clone(),
            pair_layout: self.pair_layout,
            phi: self.phi,
            shuffle_seed: self.shuffle_seed,
            label_index: self.label_index,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConcreteQuestion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = RealizedRecord::deserialize(deserializer)?;
        let (label_index, gt_box) = match r.label {
            Label::Choice(i) => (Some(r.label_index.unwrap_or(i)), None),
            Label::Box(b) => (None, Some(b)),
        };
        Ok(ConcreteQuestion {
            source_id: r.id,
            category: r.category,
            task_kind: r.task_kind,
            rotation_sensitivity: r.rotation_sensitivity,
            phi: r.phi,
            rendered_text: r.text,
            rendered_choices: r.choices,
            label_index,
            gt_box,
            image_ref: r.image_ref,
            pair_layout: r.pair_layout,
            shuffle_seed: r.shuffle_seed,
        })
    }
}

fn render(text: &str, q: &Question, phi: Orientation) -> Result<String, RotationError> {
    let remapped = match q.rotation_sensitivity {
        RotationSensitivity::Sensitive => remap_text(text, phi),
        RotationSensitivity::Invariant => text.to_string(),
    };
    // Placeholders are rendered after remapping so the words they produce
    // are not rotated a second time.
    render_pair_placeholders(&remapped, q.pair_layout, phi).map_err(|e| match e {
        RotationError::PlaceholderWithoutLayout(_) => {
            RotationError::PlaceholderWithoutLayout(q.id.clone())
        }
        other => other,
    })
}

/// Realizes `q` at orientation `phi`.
pub fn realize_question(
    q: &Question,
    phi: Orientation,
    seed: u64,
    canvas: f64,
) -> Result<ConcreteQuestion, RotationError> {
    q.validate(canvas, 0)?;
    let rendered_text = render(&q.text, q, phi)?;
    let remapped: Vec<String> = q
        .choices
        .iter()
        .map(|c| render(c, q, phi))
        .collect::<Result<_, _>>()?;

    let (rendered_choices, label_index, gt_box) = match q.label {
        Label::Choice(correct) => {
            let perm = shuffle_permutation(seed, &q.id, phi, remapped.len());
            let label_index = perm.iter().position(|&src| src == correct);
            let shown = perm.iter().map(|&src| remapped[src].clone()).collect();
            (shown, label_index, None)
        }
        Label::Box(b) => (remapped, None, Some(rotate_bbox(b, phi, canvas)?)),
    };

    Ok(ConcreteQuestion {
        source_id: q.id.clone(),
        category: q.category,
        task_kind: q.task_kind,
        rotation_sensitivity: q.rotation_sensitivity,
        phi,
        rendered_text,
        rendered_choices,
        label_index,
        gt_box,
        image_ref: q.image_ref.clone(),
        pair_layout: q.pair_layout,
        shuffle_seed: seed,
    })
}

/// Writes a clockwise quarter-turned copy of `src` to `dst`.
///
/// The output format follows `dst`'s extension; use PNG for a lossless copy.
pub fn rotate_image_file(src: &Path, dst: &Path, phi: Orientation) -> Result<(), RotationError> {
    let err = |path: &Path| {
        let path = path.display().to_string();
        move |source| RotationError::Image { path, source }
    };
    let img = image::open(src).map_err(err(src))?;
    let rotated = match phi {
        Orientation::Deg0 => img,
        Orientation::Deg90 => img.rotate90(),
        Orientation::Deg180 => img.rotate180(),
        Orientation::Deg270 => img.rotate270(),
    };
    rotated.save(dst).map_err(err(dst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DEFAULT_CANVAS as S;
    use proptest::prelude::*;

    const D90: Orientation = Orientation::Deg90;
    const D180: Orientation = Orientation::Deg180;
    const D270: Orientation = Orientation::Deg270;

    #[test]
    fn rotate_point_examples() {
        assert_eq!(rotate_point((0.0, 0.0), D90, S).unwrap(), (512.0, 0.0));
        // (10,20) -> (492,10) -> (502,492)
        assert_eq!(rotate_point((10.0, 20.0), D180, S).unwrap(), (502.0, 492.0));
        assert_eq!(
            rotate_point((33.5, 7.25), Orientation::Deg0, S).unwrap(),
            (33.5, 7.25)
        );
        assert!(matches!(
            rotate_point((513.0, 0.0), D90, S),
            Err(RotationError::PointOutOfCanvas { .. })
        ));
    }

    #[test]
    fn rotate_bbox_examples() {
        let b = BBox::new(10.0, 20.0, 30.0, 40.0);
        // corners x in [10,40], y in [20,60] -> x' = 512-y in [452,492], y' = x in [10,40]
        assert_eq!(
            rotate_bbox(b, D90, S).unwrap(),
            BBox::new(452.0, 10.0, 40.0, 30.0)
        );
        assert_eq!(rotate_bbox(b, Orientation::Deg0, S).unwrap(), b);
        let mut r = b;
        for _ in 0..4 {
            r = rotate_bbox(r, D90, S).unwrap();
        }
        assert_eq!(r, b);
    }

    #[test]
    fn remap_token_examples() {
        use DirectionalToken::*;
        assert_eq!(remap_token(TopLeft, D90), TopRight);
        assert_eq!(remap_token(Top, D180), Bottom);
        assert_eq!(remap_token(BottomLeft, D270), BottomRight);
        assert_eq!(remap_token(Top, D90), Right);
        assert_eq!(remap_token(Right, D90), Bottom);
        assert_eq!(remap_token(Bottom, D90), Left);
        assert_eq!(remap_token(Left, D90), Top);
        for phi in Orientation::ALL {
            assert_eq!(remap_token(Center, phi), Center);
        }
    }

    #[test]
    fn token_ring_agrees_with_pixel_map() {
        // Each token's cell centre on a 3x3 grid must land in the remapped cell.
        let cell = |t: DirectionalToken| -> (f64, f64) {
            use DirectionalToken::*;
            let (cx, cy) = match t {
                TopLeft => (0, 0),
                Top => (1, 0),
                TopRight => (2, 0),
                Left => (0, 1),
                Center => (1, 1),
                Right => (2, 1),
                BottomLeft => (0, 2),
                Bottom => (1, 2),
                BottomRight => (2, 2),
            };
            (cx as f64 * 3.0 + 1.5, cy as f64 * 3.0 + 1.5)
        };
        for t in DirectionalToken::ALL {
            for phi in Orientation::ALL {
                let moved = rotate_point(cell(t), phi, 9.0).unwrap();
                assert_eq!(moved, cell(remap_token(t, phi)), "{t} at {phi}");
            }
        }
    }

    #[test]
    fn remap_text_keeps_spelling() {
        assert_eq!(
            remap_text("the car at top-left", D90),
            "the car at top-right"
        );
        assert_eq!(
            remap_text("the car at top left", D90),
            "the car at top right"
        );
        assert_eq!(remap_text("Top-left corner", D90), "Top-right corner");
        assert_eq!(remap_text("LEFT side", D180), "RIGHT side");
        assert_eq!(
            remap_text("left of the bus, right of the van", D90),
            "top of the bus, bottom of the van"
        );
        assert_eq!(remap_text("center stays", D270), "center stays");
        // substrings are not tokens
        assert_eq!(
            remap_text("leftover bright topology", D90),
            "leftover bright topology"
        );
    }

    #[test]
    fn placeholder_examples() {
        let h = PairLayout::Horizontal;
        assert_eq!(
            render_pair_placeholders("vehicles in ⟨img1⟩", h, Orientation::Deg0).unwrap(),
            "vehicles in the left image"
        );
        assert_eq!(
            render_pair_placeholders("vehicles in ⟨img1⟩", h, D180).unwrap(),
            "vehicles in the right image"
        );
        assert_eq!(
            render_pair_placeholders(
                "vehicles in ⟨img2⟩",
                PairLayout::Vertical,
                Orientation::Deg0
            )
            .unwrap(),
            "vehicles in the bottom image"
        );
        assert_eq!(
            render_pair_placeholders("⟨img1⟩ vs <img2>", h, D90).unwrap(),
            "the top image vs the bottom image"
        );
        assert!(matches!(
            render_pair_placeholders("in ⟨img1⟩", PairLayout::None, D90),
            Err(RotationError::PlaceholderWithoutLayout(_))
        ));
        assert_eq!(
            render_pair_placeholders("no pair", PairLayout::None, D90).unwrap(),
            "no pair"
        );
    }

    fn mcq(sensitivity: RotationSensitivity, choices: &[&str], label: usize) -> Question {
        Question {
            id: "q7".into(),
            category: Category::ObjectLocalization,
            task_kind: TaskKind::Mcq,
            rotation_sensitivity: sensitivity,
            text: "Where is the red car? Look at the top-left.".into(),
            choices: choices.iter().map(|s| s.to_string()).collect(),
            label: Label::Choice(label),
            image_ref: "img/q7.png".into(),
            pair_layout: PairLayout::None,
        }
    }

    #[test]
    fn invariant_question_keeps_text_and_permutes_choices() {
        let q = mcq(
            RotationSensitivity::Invariant,
            &["one", "two", "three", "four"],
            2,
        );
        for phi in Orientation::ALL {
            let c = realize_question(&q, phi, 11, S).unwrap();
            assert_eq!(c.rendered_text, q.text);
            let mut sorted = c.rendered_choices.clone();
            sorted.sort();
            let mut src = q.choices.clone();
            src.sort();
            assert_eq!(sorted, src);
            assert_eq!(c.correct_choice(), Some("three"));
        }
    }

    #[test]
    fn sensitive_answer_follows_rotation() {
        let q = mcq(
            RotationSensitivity::Sensitive,
            &["top-left", "bottom-right", "center", "bottom-left"],
            0,
        );
        let c = realize_question(&q, D90, 3, S).unwrap();
        assert_eq!(c.correct_choice(), Some("top-right"));
        assert_eq!(
            c.rendered_text,
            "Where is the red car? Look at the top-right."
        );
        let again = realize_question(&q, D90, 3, S).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn vg_truth_is_rotated() {
        let q = Question {
            id: "v".into(),
            category: Category::VisualGrounding,
            task_kind: TaskKind::Vg,
            rotation_sensitivity: RotationSensitivity::Invariant,
            text: "Locate the truck.".into(),
            choices: vec![],
            label: Label::Box(BBox::new(10.0, 20.0, 30.0, 40.0)),
            image_ref: "x.png".into(),
            pair_layout: PairLayout::None,
        };
        let c = realize_question(&q, D90, 0, S).unwrap();
        assert_eq!(c.gt_box, Some(BBox::new(452.0, 10.0, 40.0, 30.0)));
        assert_eq!(c.label_index, None);
    }

    #[test]
    fn shuffles_differ_across_rotations() {
        // Over many ids, per-rotation orders should not all coincide.
        let differing = (0..50)
            .filter(|i| {
                let id = format!("q{i}");
                let p0 = shuffle_permutation(1, &id, Orientation::Deg0, 4);
                Orientation::ALL[1..]
                    .iter()
                    .any(|&phi| shuffle_permutation(1, &id, phi, 4) != p0)
            })
            .count();
        assert!(differing > 40);
    }

    #[test]
    fn realized_record_round_trips() {
        let q = mcq(RotationSensitivity::Sensitive, &["top", "left"], 1);
        let c = realize_question(&q, D270, 9, S).unwrap();
        let line = serde_json::to_string(&c).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in [
            "id",
            "phi",
            "shuffle_seed",
            "label_index",
            "choices",
            "label",
            "text",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["phi"], 270);
        let back: ConcreteQuestion = serde_json::from_str(&line).unwrap();
        assert_eq!(back, c);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0u32..511, 0u32..511).prop_flat_map(|(x, y)| {
            (Just(x), Just(y), 1..=(512 - x), 1..=(512 - y))
                .prop_map(|(x, y, w, h)| BBox::new(x as f64, y as f64, w as f64, h as f64))
        })
    }

    fn arb_phi() -> impl Strategy<Value = Orientation> {
        (0u32..4).prop_map(Orientation::from_quarter_turns)
    }

    proptest! {
        #[test]
        fn bbox_rotation_composes(b in arb_box(), a in arb_phi(), c in arb_phi()) {
            let two_step = rotate_bbox(rotate_bbox(b, a, S).unwrap(), c, S).unwrap();
            prop_assert_eq!(two_step, rotate_bbox(b, a.then(c), S).unwrap());
        }

        #[test]
        fn bbox_rotation_preserves_area_and_centroid(b in arb_box(), phi in arb_phi()) {
            let r = rotate_bbox(b, phi, S).unwrap();
            prop_assert_eq!(r.area(), b.area());
            prop_assert_eq!(r.centroid(), rotate_point(b.centroid(), phi, S).unwrap());
            if phi.quarter_turns() % 2 == 1 {
                prop_assert_eq!((r.width, r.height), (b.height, b.width));
            }
        }

        #[test]
        fn remap_text_round_trips_through_full_turn(words in proptest::collection::vec(
            prop::sample::select(vec!["top-left", "Top", "bottom right", "left", "the", "car", "center", "RIGHT"]), 0..8)) {
            // separate words by a comma so neighbours never read as one compound
            let text = words.join(", ");
            let mut t = text.clone();
            for _ in 0..4 {
                t = remap_text(&t, D90);
            }
            prop_assert_eq!(t, text);
        }
    }
}
