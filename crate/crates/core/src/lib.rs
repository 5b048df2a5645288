//! Geometric grasp pipeline: grasp-rectangle metrics, pinhole cropping of
//! point clouds, surface normals, antipodal grasp search, and an
//! inference-only HiLo attention block with a grasp regression head.

pub mod antipodal;
pub mod bench;
pub mod camera;
pub mod cloud;
pub mod dataset;
pub mod fvit;
pub mod grasp;
