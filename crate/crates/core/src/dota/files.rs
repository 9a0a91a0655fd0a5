use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::annotation::{parse_annotation, parse_submission_line, DotaAnnotation, DotaCategory};
use super::eval::{EvalResult, ImagePredictions};
use crate::error::{Error, Result};
use crate::geometry::Detection;

fn txt_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(_) => e,
        other => Error::invalid(format!("{}: {other}", path.display())),
    }
}

/// Reads every `<image_id>.txt` label file in `dir`, sorted by file name.
pub fn load_annotations(dir: &Path) -> Result<Vec<DotaAnnotation>> {
    txt_files(dir)?
        .into_iter()
        .map(|p| parse_annotation(&stem(&p), &read(&p)?).map_err(|e| in_file(&p, e)))
        .collect()
}

/// Category named by a Task-1 submission file: `Task1_<name>.txt` or `<name>.txt`.
pub fn submission_category(path: &Path) -> Option<DotaCategory> {
    let s = stem(path);
    s.strip_prefix("Task1_").unwrap_or(&s).parse().ok()
}

/// Reads Task-1 submission files (one per class) and groups detections by
/// image. Files whose name is not a category are skipped and returned.
pub fn load_submissions(dir: &Path) -> Result<(Vec<ImagePredictions>, Vec<PathBuf>)> {
    let mut by_image: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for path in txt_files(dir)? {
        let Some(category) = submission_category(&path) else {
            skipped.push(path);
            continue;
        };
        for (i, raw) in read(&path)?.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let (image_id, score, bbox) = parse_submission_line(raw, i + 1).map_err(|e| in_file(&path, e))?;
            let det = Detection::new(bbox, score, category.index()).map_err(|e| in_file(&path, e))?;
            by_image.entry(image_id).or_default().push(det);
        }
    }
    let preds = by_image
        .into_iter()
        .map(|(image_id, detections)| ImagePredictions { image_id, detections })
        .collect();
    Ok((preds, skipped))
}

/// `class,ap` rows for the fifteen categories, then `mAP`, at 4 decimals.
pub fn write_results_csv<W: Write>(result: &EvalResult, mut out: W) -> Result<()> {
    writeln!(out, "class,ap")?;
    for c in DotaCategory::ALL {
        let ap = result.per_class_ap.get(&c).copied().unwrap_or(0.0);
        writeln!(out, "{},{:.4}", c.name(), ap)?;
    }
    writeln!(out, "mAP,{:.4}", result.map_score)?;
    out.flush()?;
    Ok(())
}
