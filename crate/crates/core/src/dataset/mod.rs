//! Cornell grasp annotations, ASCII PLY point clouds and synthetic scenes.

mod cornell;
mod ply;
mod synth;

pub use cornell::{
    load_cornell_dir, load_predictions, parse_cornell_annotations, parse_cornell_rects,
    scan_cornell_dir, AnnotationSet, CornellFiles, ParsedRects,
};
pub use ply::{read_ply, read_ply_str, write_ply, write_ply_string};
pub use synth::{
    gen_box_scene, gen_cylinder_scene, gen_plane_patch, gen_sphere_scene, GraspTruth,
    ShapeParams, SynthConfig, SyntheticScene, TruthAxis,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::cloud::CloudError;
use crate::grasp::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: malformed corner line {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("{0} dangling corner line(s) after the last complete rectangle")]
    DanglingCorners(usize),
    #[error("line {line}: invalid rectangle: {source}")]
    InvalidRectangle { line: usize, source: GeometryError },
    #[error("bad PLY header: {0}")]
    BadHeader(String),
    #[error("PLY body has {found} data rows, header declares {declared}")]
    CountMismatch { declared: usize, found: usize },
    #[error("PLY line {line}: {msg}")]
    BadRow { line: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<DatasetError>,
    },
    #[error("no annotation files found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("image {0} has no positive rectangles")]
    NoPositives(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

impl DatasetError {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        DatasetError::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, e: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            msg: e.to_string(),
        }
    }
}
