//! Grasp rectangles and the rectangle metric.

mod metric;
mod rect;

pub use metric::{
    evaluate_dataset, is_correct_grasp, EvalConfig, EvalReport, GraspMatch, ImageResult,
};
pub use rect::{
    angle_difference, ccw_convex, clip_convex, convex_contains, corners_to_rect5,
    corners_to_rect5_with_tolerance, jaccard, normalize_angle, polygon_intersection_area,
    polygon_jaccard, rect5_to_corners, signed_area, GraspRect5, GraspRect8,
    DEFAULT_RECT_TOLERANCE, MIN_POLYGON_AREA,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon is degenerate (area {area:e})")]
    DegeneratePolygon { area: f64 },
    #[error("polygon is not convex")]
    NotConvex,
    #[error("quadrilateral is not a rectangle (relative skew {relative_skew:e})")]
    NotARectangle { relative_skew: f64 },
    #[error("rectangle size must be positive (w={w}, h={h})")]
    NonPositiveSize { w: f64, h: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("ground-truth set is empty")]
    EmptyTruthSet,
    #[error("no annotation for image {0}")]
    MissingAnnotation(String),
    #[error("no predictions to evaluate")]
    NoPredictions,
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
}
