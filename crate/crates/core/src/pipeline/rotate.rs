use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{files, io_err, PipelineError, RunConfig};
use crate::dataset::{header_line, load_manifest, split_header, Orientation, QuestionSet};
use crate::rotation::{realize_question, rotate_image_file, ConcreteQuestion};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RotateSummary {
    pub questions: usize,
    pub files: Vec<PathBuf>,
    pub images_written: usize,
    /// Image references that could not be read; their records keep the
    /// original reference.
    pub images_missing: Vec<String>,
    pub warnings: Vec<String>,
}

/// Every question at every orientation, grouped by orientation.
pub fn realize_all(
    set: &QuestionSet,
    seed: u64,
    canvas: f64,
) -> Result<[Vec<ConcreteQuestion>; 4], PipelineError> {
    let mut out: [Vec<ConcreteQuestion>; 4] = Default::default();
    for phi in Orientation::ALL {
        out[phi.index()] = set
            .iter()
            .map(|q| realize_question(q, phi, seed, canvas))
            .collect::<Result<_, _>>()?;
    }
    Ok(out)
}

/// Where the quarter-turned copy of `image_ref` lives, relative to the
/// output directory. Copies are always PNG.
fn rotated_image_ref(image_ref: &str, phi: Orientation) -> String {
    let stem = Path::new(image_ref).with_extension("png");
    format!(
        "{}/{:03}/{}",
        files::IMAGES,
        phi.degrees(),
        stem.to_string_lossy().replace('\\', "/")
    )
}

pub(crate) fn realized_to_jsonl(canvas: f64, questions: &[ConcreteQuestion]) -> String {
    let mut out = String::new();
    if let Some(h) = header_line(canvas) {
        out.push_str(&h);
        out.push('\n');
    }
    for q in questions {
        out.push_str(&serde_json::to_string(q).expect("realized question serializes"));
        out.push('\n');
    }
    out
}

/// Reads one realized file, returning its canvas size and records.
pub fn load_realized(path: &Path) -> Result<(f64, Vec<ConcreteQuestion>), PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let (canvas, lines) = split_header(&text)?;
    let questions = lines
        .into_iter()
        .map(|(line, raw)| {
            serde_json::from_str(raw).map_err(|e| PipelineError::Parse {
                path: path.to_path_buf(),
                line,
                reason: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok((canvas, questions))
}

/// Writes the four realized manifests and the rotated image copies.
pub fn cmd_rotate(cfg: &RunConfig) -> Result<RotateSummary, PipelineError> {
    let set = load_manifest(&cfg.manifest)?;
    let canvas = cfg.canvas.unwrap_or(set.canvas());
    let mut realized = realize_all(&set, cfg.seed, canvas)?;
    cfg.ensure_output_dir()?;

    let mut summary = RotateSummary {
        questions: set.len(),
        ..Default::default()
    };
    if set.is_empty() {
        let msg = format!("{} contains no questions", cfg.manifest.display());
        log::warn!("{msg}");
        summary.warnings.push(msg);
    }

    let image_root = match cfg.manifest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut unique_refs: BTreeMap<&str, bool> = BTreeMap::new();
    for q in set.iter() {
        unique_refs.entry(q.image_ref.as_str()).or_insert(false);
    }
    for (image_ref, readable) in unique_refs.iter_mut() {
        let src = image_root.join(image_ref);
        if !src.is_file() {
            continue;
        }
        *readable = true;
        for phi in Orientation::ALL {
            let dst = cfg.out(&rotated_image_ref(image_ref, phi));
            if let Some(parent) = dst.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            rotate_image_file(&src, &dst, phi)?;
            summary.images_written += 1;
        }
    }
    for (image_ref, readable) in &unique_refs {
        if !readable {
            summary.images_missing.push(image_ref.to_string());
        }
    }
    if !summary.images_missing.is_empty() {
        let msg = format!(
            "{} image(s) not found under {}; records keep their original image_ref",
            summary.images_missing.len(),
            image_root.display()
        );
        log::warn!("{msg}");
        summary.warnings.push(msg);
    }

    for phi in Orientation::ALL {
        let questions = &mut realized[phi.index()];
        for q in questions.iter_mut() {
            if unique_refs.get(q.image_ref.as_str()) == Some(&true) {
                q.image_ref = rotated_image_ref(&q.image_ref, phi);
            }
        }
        let path = cfg.out(&files::realized(phi));
        std::fs::write(&path, realized_to_jsonl(canvas, questions)).map_err(io_err(&path))?;
        summary.files.push(path);
    }
    cfg.write_run_record()?;
    Ok(summary)
}
