//! Cornell grasp annotation files.
//!
//! Grammar: one corner per line, `x y` as two real numbers separated by
//! whitespace; blank lines are ignored; every four consecutive corner lines
//! form one rectangle. A rectangle with any `NaN` coordinate is dropped and
//! counted. Files pair by image id: `pcd<ID>cpos.txt` holds positives,
//! `pcd<ID>cneg.txt` negatives, and `pcd<ID>cpred.txt` a prediction.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::DatasetError;
use crate::grasp::GraspRect8;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRects {
    pub rects: Vec<GraspRect8>,
    /// Rectangles dropped for containing `NaN`.
    pub dropped_nan: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub image_id: String,
    pub positives: Vec<GraspRect8>,
    pub negatives: Vec<GraspRect8>,
    pub dropped_nan: usize,
}

/// Parses one annotation file body.
pub fn parse_cornell_rects(text: &str) -> Result<ParsedRects, DatasetError> {
    let mut corners: Vec<(usize, [f64; 2])> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || DatasetError::MalformedLine {
            line: i + 1,
            text: line.chars().take(80).collect(),
        };
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(malformed());
        };
        let x: f64 = a.parse().map_err(|_| malformed())?;
        let y: f64 = b.parse().map_err(|_| malformed())?;
        if x.is_infinite() || y.is_infinite() {
            return Err(malformed());
        }
        corners.push((i + 1, [x, y]));
    }
    if corners.len() % 4 != 0 {
        return Err(DatasetError::DanglingCorners(corners.len() % 4));
    }

    let mut out = ParsedRects {
        rects: Vec::with_capacity(corners.len() / 4),
        dropped_nan: 0,
    };
    for group in corners.chunks_exact(4) {
        if group.iter().any(|(_, c)| c[0].is_nan() || c[1].is_nan()) {
            out.dropped_nan += 1;
            continue;
        }
        let xy = [group[0].1, group[1].1, group[2].1, group[3].1];
        let rect = GraspRect8::from_xy(xy).map_err(|source| DatasetError::InvalidRectangle {
            line: group[0].0,
            source,
        })?;
        out.rects.push(rect);
    }
    Ok(out)
}

pub fn parse_cornell_annotations(
    image_id: &str,
    pos_text: &str,
    neg_text: &str,
) -> Result<AnnotationSet, DatasetError> {
    let pos = parse_cornell_rects(pos_text)?;
    let neg = parse_cornell_rects(neg_text)?;
    Ok(AnnotationSet {
        image_id: image_id.to_string(),
        positives: pos.rects,
        negatives: neg.rects,
        dropped_nan: pos.dropped_nan + neg.dropped_nan,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CornellFiles {
    pub pos: Option<PathBuf>,
    pub neg: Option<PathBuf>,
    pub pred: Option<PathBuf>,
}

/// Splits `pcd<ID>c<kind>.txt` into `(ID, kind)`.
fn split_name(name: &str) -> Option<(&str, &str)> {
    let stem = name.strip_prefix("pcd")?.strip_suffix(".txt")?;
    ["pos", "neg", "pred"].into_iter().find_map(|kind| {
        let id = stem.strip_suffix(kind)?.strip_suffix('c')?;
        (!id.is_empty()).then_some((id, kind))
    })
}

/// Annotation files in `dir`, grouped by image id.
pub fn scan_cornell_dir(dir: &Path) -> Result<BTreeMap<String, CornellFiles>, DatasetError> {
    let entries = fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut out: BTreeMap<String, CornellFiles> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| DatasetError::io(dir, e))?;
        let name = entry.file_name();
        let Some((id, kind)) = name.to_str().and_then(split_name) else {
            continue;
        };
        let files = out.entry(id.to_string()).or_default();
        let slot = match kind {
            "pos" => &mut files.pos,
            "neg" => &mut files.neg,
            _ => &mut files.pred,
        };
        *slot = Some(entry.path());
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn parse_file(path: &Path) -> Result<ParsedRects, DatasetError> {
    parse_cornell_rects(&read_text(path)?).map_err(|e| e.in_file(path))
}

/// Loads every image in `dir` that has a positives file. A missing
/// negatives file counts as empty.
pub fn load_cornell_dir(dir: &Path) -> Result<Vec<AnnotationSet>, DatasetError> {
    let files: Vec<(String, CornellFiles)> = scan_cornell_dir(dir)?
        .into_iter()
        .filter(|(_, f)| f.pos.is_some())
        .collect();
    if files.is_empty() {
        return Err(DatasetError::EmptyDirectory(dir.to_path_buf()));
    }
    files
        .into_par_iter()
        .map(|(id, f)| {
            let pos_path = f.pos.expect("filtered above");
            let pos = parse_file(&pos_path)?;
            let neg = match &f.neg {
                Some(p) => parse_file(p)?,
                None => ParsedRects {
                    rects: Vec::new(),
                    dropped_nan: 0,
                },
            };
            Ok(AnnotationSet {
                image_id: id,
                positives: pos.rects,
                negatives: neg.rects,
                dropped_nan: pos.dropped_nan + neg.dropped_nan,
            })
        })
        .collect()
}

/// One predicted rectangle per image: the first rectangle of
/// `pcd<ID>cpred.txt`, or of `pcd<ID>cpos.txt` when no prediction file
/// exists for that id.
pub fn load_predictions(dir: &Path) -> Result<BTreeMap<String, GraspRect8>, DatasetError> {
    let files: Vec<(String, PathBuf)> = scan_cornell_dir(dir)?
        .into_iter()
        .filter_map(|(id, f)| f.pred.or(f.pos).map(|p| (id, p)))
        .collect();
    if files.is_empty() {
        return Err(DatasetError::EmptyDirectory(dir.to_path_buf()));
    }
    files
        .into_par_iter()
        .map(|(id, path)| {
            let parsed = parse_file(&path)?;
            match parsed.rects.into_iter().next() {
                Some(r) => Ok((id, r)),
                None => Err(DatasetError::NoPositives(id).in_file(&path)),
            }
        })
        .collect()
}
