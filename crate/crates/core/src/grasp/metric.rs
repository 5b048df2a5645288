//! Rectangle metric: a prediction is correct when it overlaps some
//! ground-truth rectangle with Jaccard index at or above a threshold and,
//! optionally, agrees with it in orientation.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

use rayon::prelude::*;

use super::rect::{angle_difference, jaccard, GraspRect5};
use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Minimum Jaccard index, in `(0, 1]`.
    pub jaccard_threshold: f64,
    /// Maximum orientation difference in radians, in `(0, pi/2]`.
    pub angle_threshold: f64,
    pub angle_check_enabled: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            jaccard_threshold: 0.25,
            angle_threshold: FRAC_PI_6,
            angle_check_enabled: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "jaccard_threshold {} outside (0, 1]",
                self.jaccard_threshold
            )));
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold <= FRAC_PI_2) {
            return Err(GeometryError::InvalidConfig(format!(
                "angle_threshold {} outside (0, pi/2]",
                self.angle_threshold
            )));
        }
        Ok(())
    }
}

/// Outcome of scoring one prediction against a set of truths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspMatch {
    pub correct: bool,
    pub best_iou: f64,
    /// Truth that maximizes IoU among those passing the angle gate, or among
    /// all truths when none passes. `None` when no truth overlaps at all.
    pub best_index: Option<usize>,
}

pub fn is_correct_grasp(
    pred: &GraspRect5,
    truths: &[GraspRect5],
    cfg: &EvalConfig,
) -> Result<GraspMatch, GeometryError> {
    if truths.is_empty() {
        return Err(GeometryError::EmptyTruthSet);
    }
    let pred_corners = pred.to_corners();
    // (iou, index) of the best truth overall and the best passing the angle gate.
    let mut best_any: Option<(f64, usize)> = None;
    let mut best_gated: Option<(f64, usize)> = None;
    for (i, t) in truths.iter().enumerate() {
        let iou = jaccard(&pred_corners, &t.to_corners())?;
        // Strict comparison keeps the lowest index among equal IoU.
        if best_any.is_none_or(|(b, _)| iou > b) {
            best_any = Some((iou, i));
        }
        let angle_ok = !cfg.angle_check_enabled
            || angle_difference(pred.theta, t.theta) <= cfg.angle_threshold;
        if angle_ok && best_gated.is_none_or(|(b, _)| iou > b) {
            best_gated = Some((iou, i));
        }
    }
    let (best_iou, index, correct) = match best_gated {
        Some((iou, i)) => (iou, i, iou >= cfg.jaccard_threshold),
        None => {
            let (iou, i) = best_any.expect("truths is non-empty");
            (iou, i, false)
        }
    };
    Ok(GraspMatch {
        correct,
        best_iou,
        best_index: (best_iou > 0.0).then_some(index),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub image_id: String,
    pub predicted: GraspRect5,
    pub best_truth: Option<GraspRect5>,
    pub best_iou: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_images: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Sorted by image id.
    pub per_image: Vec<ImageResult>,
}

/// Scores one prediction per image against all of that image's truths.
pub fn evaluate_dataset(
    preds: &BTreeMap<String, GraspRect5>,
    annotations: &BTreeMap<String, Vec<GraspRect5>>,
    cfg: &EvalConfig,
) -> Result<EvalReport, GeometryError> {
    cfg.validate()?;
    if preds.is_empty() {
        return Err(GeometryError::NoPredictions);
    }
    let jobs = preds
        .iter()
        .map(|(id, pred)| match annotations.get(id) {
            Some(truths) => Ok((id, pred, truths)),
            None => Err(GeometryError::MissingAnnotation(id.clone())),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_image = jobs
        .into_par_iter()
        .map(|(id, pred, truths)| {
            let m = is_correct_grasp(pred, truths, cfg).map_err(|e| match e {
                GeometryError::EmptyTruthSet => GeometryError::MissingAnnotation(id.clone()),
                other => other,
            })?;
            Ok(ImageResult {
                image_id: id.clone(),
                predicted: *pred,
                best_truth: m.best_index.map(|i| truths[i]),
                best_iou: m.best_iou,
                matched: m.correct,
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;

    let n_images = per_image.len();
    let n_correct = per_image.iter().filter(|r| r.matched).count();
    Ok(EvalReport {
        n_images,
        n_correct,
        accuracy: n_correct as f64 / n_images as f64,
        per_image,
    })
}
