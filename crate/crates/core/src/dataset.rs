//! Question and response data model, manifest file formats, and validation.
//!
//! Manifests and response sets are newline-delimited JSON (one object per
//! line). A manifest may start with an optional header line
//! `{"canvas_size": S}`; without it the canvas side defaults to 512 px.
//!
//! ```text
//! {"id":"q1","category":"spatial_relationship","task_kind":"mcq","rotation_sensitivity":"sensitive",
//!  "text":"Where is the truck?","choices":["top-left","bottom-right"],"label":0,
//!  "image_ref":"img/q1.png","pair_layout":"none"}
//! {"id":"q2","category":"visual_grounding","task_kind":"vg","rotation_sensitivity":"sensitive",
//!  "text":"Locate the bus.","choices":[],"label":[10,20,30,40],"image_ref":"img/q2.png","pair_layout":"none"}
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default canvas side in pixels.
pub const DEFAULT_CANVAS: f64 = 512.0;

pub const MIN_CHOICES: usize = 2;
pub const MAX_CHOICES: usize = 4;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: duplicate question id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error(
        "line {line}: question `{id}` has {count} choices (allowed {MIN_CHOICES}..={MAX_CHOICES})"
    )]
    ChoiceCountOutOfRange {
        id: String,
        line: usize,
        count: usize,
    },
    #[error("line {line}: question `{id}` label does not index a choice")]
    LabelOutOfRange { id: String, line: usize },
    #[error("line {line}: question `{id}` box lies outside the canvas")]
    BoxOutOfCanvas { id: String, line: usize },
    #[error("line {line}: duplicate response for ({question_id}, {phi})")]
    DuplicateResponse {
        question_id: String,
        phi: Orientation,
        line: usize,
    },
    #[error("line {line}: unknown orientation {phi} (expected 0, 90, 180 or 270)")]
    UnknownOrientation { phi: i64, line: usize },
}

/// The ten ability categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SceneUnderstanding,
    HallucinationDetection,
    ObjectPresence,
    ObjectLocalization,
    AttributeRecognition,
    ObjectCounting,
    AttributeComparison,
    DynamicTemporal,
    SpatialRelationship,
    VisualGrounding,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::SceneUnderstanding,
        Category::HallucinationDetection,
        Category::ObjectPresence,
        Category::ObjectLocalization,
        Category::AttributeRecognition,
        Category::ObjectCounting,
        Category::AttributeComparison,
        Category::DynamicTemporal,
        Category::SpatialRelationship,
        Category::VisualGrounding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SceneUnderstanding => "scene_understanding",
            Category::HallucinationDetection => "hallucination_detection",
            Category::ObjectPresence => "object_presence",
            Category::ObjectLocalization => "object_localization",
            Category::AttributeRecognition => "attribute_recognition",
            Category::ObjectCounting => "object_counting",
            Category::AttributeComparison => "attribute_comparison",
            Category::DynamicTemporal => "dynamic_temporal",
            Category::SpatialRelationship => "spatial_relationship",
            Category::VisualGrounding => "visual_grounding",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Mcq,
    Vg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSensitivity {
    Invariant,
    Sensitive,
}

/// How a two-image question was concatenated onto the canvas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLayout {
    #[default]
    None,
    Horizontal,
    Vertical,
}

/// Clockwise quarter-turn applied to the source image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Deg0,
        Orientation::Deg90,
        Orientation::Deg180,
        Orientation::Deg270,
    ];

    pub fn degrees(self) -> u16 {
        self.quarter_turns() as u16 * 90
    }

    pub fn quarter_turns(self) -> u8 {
        match self {
            Orientation::Deg0 => 0,
            Orientation::Deg90 => 1,
            Orientation::Deg180 => 2,
            Orientation::Deg270 => 3,
        }
    }

    pub fn from_quarter_turns(turns: u32) -> Self {
        Orientation::ALL[(turns % 4) as usize]
    }

    pub fn from_degrees(deg: i64) -> Option<Self> {
        match deg {
            0 => Some(Orientation::Deg0),
            90 => Some(Orientation::Deg90),
            180 => Some(Orientation::Deg180),
            270 => Some(Orientation::Deg270),
            _ => None,
        }
    }

    /// Composition of two rotations (addition mod 360).
    pub fn then(self, other: Orientation) -> Orientation {
        Orientation::from_quarter_turns(u32::from(self.quarter_turns() + other.quarter_turns()))
    }

    pub fn index(self) -> usize {
        self.quarter_turns() as usize
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.degrees())
    }
}

impl Serialize for Orientation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u16(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Orientation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let deg = i64::deserialize(deserializer)?;
        Orientation::from_degrees(deg)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown orientation {deg}")))
    }
}

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
///
/// Serialized as `[x_min, y_min, width, height]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.width, b.height]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Self {
        BBox {
            x_min,
            y_min,
            width,
            height,
        }
    }

    pub fn from_corners(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        BBox::new(x_min, y_min, x_max - x_min, y_max - y_min)
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn centroid(&self) -> (f64, f64) {
        (
            self.x_min + self.width / 2.0,
            self.y_min + self.height / 2.0,
        )
    }

    /// Positive extent and fully inside `[0, canvas]²`.
    pub fn is_valid_on(&self, canvas: f64) -> bool {
        let finite = [self.x_min, self.y_min, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        finite
            && self.width > 0.0
            && self.height > 0.0
            && self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max() <= canvas
            && self.y_max() <= canvas
    }
}

/// Ground truth: a choice index for MCQ, a box for visual grounding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Choice(usize),
    Box(BBox),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub category: Category,
    pub task_kind: TaskKind,
    pub rotation_sensitivity: RotationSensitivity,
    pub text: String,
    #[serde(default)]
    pub choices: Vec<String>,
    pub label: Label,
    pub image_ref: String,
    #[serde(default)]
    pub pair_layout: PairLayout,
}

impl Question {
    /// Checks the record-local invariants. `line` is only used for error reporting.
    pub fn validate(&self, canvas: f64, line: usize) -> Result<(), DatasetError> {
        let id = || self.id.clone();
        if self.id.is_empty() {
            return Err(DatasetError::MalformedRecord {
                line,
                reason: "empty id".into(),
            });
        }
        match (self.task_kind, &self.label) {
            (TaskKind::Mcq, Label::Choice(idx)) => {
                let n = self.choices.len();
                if !(MIN_CHOICES..=MAX_CHOICES).contains(&n) {
                    return Err(DatasetError::ChoiceCountOutOfRange {
                        id: id(),
                        line,
                        count: n,
                    });
                }
                if *idx >= n {
                    return Err(DatasetError::LabelOutOfRange { id: id(), line });
                }
            }
            (TaskKind::Vg, Label::Box(b)) => {
                if !b.is_valid_on(canvas) {
                    return Err(DatasetError::BoxOutOfCanvas { id: id(), line });
                }
            }
            (kind, _) => {
                return Err(DatasetError::MalformedRecord {
                    line,
                    reason: format!(
                        "label type does not match task_kind {kind:?} for `{}`",
                        self.id
                    ),
                })
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    canvas_size: f64,
}

fn read_text(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits `text` into `(1-based line number, line)` pairs, skipping blank lines.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses the optional canvas header. Returns the canvas side if `line` is a header.
fn parse_header(line_no: usize, line: &str) -> Result<Option<f64>, DatasetError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| DatasetError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
    let is_header = value
        .as_object()
        .is_some_and(|o| o.contains_key("canvas_size") && !o.contains_key("id"));
    if !is_header {
        return Ok(None);
    }
    let header: ManifestHeader =
        serde_json::from_value(value).map_err(|e| DatasetError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
    if !(header.canvas_size.is_finite() && header.canvas_size > 0.0) {
        return Err(DatasetError::MalformedRecord {
            line: line_no,
            reason: "canvas_size must be positive".into(),
        });
    }
    Ok(Some(header.canvas_size))
}

/// Splits off the optional canvas header, returning the canvas side and the
/// remaining records.
pub(crate) fn split_header(text: &str) -> Result<(f64, Vec<(usize, &str)>), DatasetError> {
    let mut lines: Vec<(usize, &str)> = records(text).collect();
    let mut canvas = DEFAULT_CANVAS;
    if let Some(&(line_no, first)) = lines.first() {
        if let Some(c) = parse_header(line_no, first)? {
            canvas = c;
            lines.remove(0);
        }
    }
    Ok((canvas, lines))
}

pub(crate) fn header_line(canvas: f64) -> Option<String> {
    (canvas != DEFAULT_CANVAS).then(|| {
        serde_json::to_string(&ManifestHeader {
            canvas_size: canvas,
        })
        .expect("header serializes")
    })
}

/// A validated, immutable set of questions in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct QuestionSet {
    canvas: f64,
    questions: Vec<Question>,
    index: HashMap<String, usize>,
}

impl QuestionSet {
    /// Builds a set from already-constructed questions, applying the same
    /// validation as [`load_manifest`]. Line numbers in errors are 1-based
    /// positions in `questions`.
    pub fn new(canvas: f64, questions: Vec<Question>) -> Result<Self, DatasetError> {
        let mut index = HashMap::with_capacity(questions.len());
        for (i, q) in questions.iter().enumerate() {
            q.validate(canvas, i + 1)?;
            if index.insert(q.id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateId {
                    id: q.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(QuestionSet {
            canvas,
            questions,
            index,
        })
    }

    pub fn canvas(&self) -> f64 {
        self.canvas
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Question> {
        self.questions.iter()
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.index.get(id).map(|&i| &self.questions[i])
    }

    /// Serializes back to manifest text (header only when the canvas is not 512).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if let Some(h) = header_line(self.canvas) {
            out.push_str(&h);
            out.push('\n');
        }
        for q in &self.questions {
            out.push_str(&serde_json::to_string(q).expect("question serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_jsonl()).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl<'a> IntoIterator for &'a QuestionSet {
    type Item = &'a Question;
    type IntoIter = std::slice::Iter<'a, Question>;

    fn into_iter(self) -> Self::IntoIter {
        self.questions.iter()
    }
}

pub fn parse_manifest(text: &str) -> Result<QuestionSet, DatasetError> {
    let (canvas, lines) = split_header(text)?;
    let mut questions = Vec::with_capacity(lines.len());
    let mut index = HashMap::with_capacity(lines.len());
    for (line, raw) in lines {
        let q: Question = serde_json::from_str(raw).map_err(|e| DatasetError::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        q.validate(canvas, line)?;
        if index.insert(q.id.clone(), questions.len()).is_some() {
            return Err(DatasetError::DuplicateId { id: q.id, line });
        }
        questions.push(q);
    }
    Ok(QuestionSet {
        canvas,
        questions,
        index,
    })
}

pub fn load_manifest(path: &Path) -> Result<QuestionSet, DatasetError> {
    parse_manifest(&read_text(path)?)
}

/// What the scorer pulled out of a raw answer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extracted {
    Choice(usize),
    Box(BBox),
    Unparsed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub question_id: String,
    pub phi: Orientation,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted: Option<Extracted>,
}

impl ResponseRecord {
    pub fn new(
        question_id: impl Into<String>,
        phi: Orientation,
        raw_text: impl Into<String>,
    ) -> Self {
        ResponseRecord {
            question_id: question_id.into(),
            phi,
            raw_text: raw_text.into(),
            extracted: None,
        }
    }
}

#[derive(Deserialize)]
struct RawResponse {
    question_id: String,
    phi: i64,
    raw_text: String,
    #[serde(default)]
    extracted: Option<Extracted>,
}

/// Responses keyed by `(question_id, phi)`, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResponseSet {
    records: Vec<ResponseRecord>,
    index: HashMap<(String, Orientation), usize>,
}

impl ResponseSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a record, rejecting a second answer for the same `(question_id, phi)`.
    pub fn insert(&mut self, record: ResponseRecord) -> Result<(), DatasetError> {
        let key = (record.question_id.clone(), record.phi);
        if self.index.contains_key(&key) {
            return Err(DatasetError::DuplicateResponse {
                question_id: key.0,
                phi: key.1,
                line: self.records.len() + 1,
            });
        }
        self.index.insert(key, self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, question_id: &str, phi: Orientation) -> Option<&ResponseRecord> {
        // HashMap<(String, _)> cannot be probed with (&str, _) without allocating.
        self.index
            .get(&(question_id.to_string(), phi))
            .map(|&i| &self.records[i])
    }

    pub fn contains(&self, question_id: &str, phi: Orientation) -> bool {
        self.get(question_id, phi).is_some()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ResponseRecord> {
        self.records.iter()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("response serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_jsonl()).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn parse_responses(text: &str) -> Result<ResponseSet, DatasetError> {
    let mut set = ResponseSet::new();
    for (line, raw) in records(text) {
        let r: RawResponse =
            serde_json::from_str(raw).map_err(|e| DatasetError::MalformedRecord {
                line,
                reason: e.to_string(),
            })?;
        let phi = Orientation::from_degrees(r.phi)
            .ok_or(DatasetError::UnknownOrientation { phi: r.phi, line })?;
        let record = ResponseRecord {
            question_id: r.question_id,
            phi,
            raw_text: r.raw_text,
            extracted: r.extracted,
        };
        set.insert(record).map_err(|e| match e {
            DatasetError::DuplicateResponse {
                question_id, phi, ..
            } => DatasetError::DuplicateResponse {
                question_id,
                phi,
                line,
            },
            other => other,
        })?;
    }
    Ok(set)
}

pub fn load_responses(path: &Path) -> Result<ResponseSet, DatasetError> {
    parse_responses(&read_text(path)?)
}

/// Which questions have answers at all four orientations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageReport {
    /// Ids with all four orientations answered, in manifest order.
    pub evaluable: Vec<String>,
    /// Ids with at least one orientation missing, with the missing set.
    pub missing: Vec<(String, Vec<Orientation>)>,
    /// Responses whose question id is not in the manifest.
    pub orphans: Vec<(String, Orientation)>,
}

impl CoverageReport {
    pub fn is_evaluable(&self, id: &str) -> bool {
        self.evaluable.iter().any(|e| e == id)
    }

    pub fn missing_for(&self, id: &str) -> Option<&[Orientation]> {
        self.missing
            .iter()
            .find(|(q, _)| q == id)
            .map(|(_, m)| m.as_slice())
    }
}

pub fn validate_coverage(questions: &QuestionSet, responses: &ResponseSet) -> CoverageReport {
    let mut report = CoverageReport::default();
    for q in questions {
        let missing: Vec<Orientation> = Orientation::ALL
            .into_iter()
            .filter(|&phi| !responses.contains(&q.id, phi))
            .collect();
        if missing.is_empty() {
            report.evaluable.push(q.id.clone());
        } else {
            report.missing.push((q.id.clone(), missing));
        }
    }
    let orphans: BTreeSet<(String, Orientation)> = responses
        .iter()
        .filter(|r| questions.get(&r.question_id).is_none())
        .map(|r| (r.question_id.clone(), r.phi))
        .collect();
    report.orphans = orphans.into_iter().collect();
    report
}
