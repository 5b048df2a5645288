//! Synthetic shapes sampled on their surfaces, with analytic grasp truth.
//!
//! Each flat or curved patch receives `round(density * area)` points drawn
//! uniformly over its area. The shape is built in its local frame, moved by
//! `pose`, then perturbed by isotropic Gaussian noise.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::DatasetError;
use crate::camera::RigidPose;
use crate::cloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Points per square meter of surface.
    pub density: f64,
    /// Standard deviation of the per-coordinate noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            density: 1e5,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), DatasetError> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(DatasetError::InvalidParams(format!(
                "density must be positive, got {}",
                self.density
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(DatasetError::InvalidParams(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeParams {
    Box { w: f64, d: f64, h: f64 },
    /// Closed cylinder with its axis along local z.
    Cylinder { radius: f64, length: f64 },
    /// Rectangle in the local xy plane.
    Plane { width: f64, depth: f64 },
    Sphere { radius: f64 },
}

/// Admissible closing directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthAxis {
    /// Closing axis parallel (either sign) to this unit vector.
    Along(Vector3<f64>),
    /// Closing axis anywhere in the plane perpendicular to this unit vector.
    PerpendicularTo(Vector3<f64>),
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspTruth {
    pub center: Point3<f64>,
    pub axis: TruthAxis,
    /// Object extent along the closing axis.
    pub width: f64,
    /// Surface normal, for flat patches.
    pub normal: Option<Vector3<f64>>,
}

impl GraspTruth {
    /// Angle in radians between `closing` and the nearest admissible
    /// closing direction.
    pub fn axis_error(&self, closing: &Vector3<f64>) -> f64 {
        let c = closing.normalize();
        match self.axis {
            TruthAxis::Along(a) => c.dot(&a).abs().clamp(0.0, 1.0).acos(),
            TruthAxis::PerpendicularTo(a) => c.dot(&a).abs().clamp(0.0, 1.0).asin(),
            TruthAxis::Any => 0.0,
        }
    }

    /// Whether a gripper with this maximum opening can close across the
    /// object.
    pub fn graspable(&self, max_opening: f64) -> bool {
        self.width < max_opening
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub truth: GraspTruth,
    pub shape: ShapeParams,
    pub pose: RigidPose,
}

fn check_dims(dims: &[(&str, f64)]) -> Result<(), DatasetError> {
    for (name, v) in dims {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(DatasetError::InvalidParams(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

fn count(density: f64, area: f64) -> usize {
    (density * area).round() as usize
}

/// Applies the pose and noise to local-frame points.
fn finish(
    local: Vec<Point3<f64>>,
    pose: &RigidPose,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PointCloud, DatasetError> {
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|e| DatasetError::InvalidParams(e.to_string()))?;
    let points = local
        .into_iter()
        .map(|p| {
            let q = pose.transform_point(&p);
            if cfg.noise_sigma > 0.0 {
                q + Vector3::from_fn(|_, _| noise.sample(rng))
            } else {
                q
            }
        })
        .collect();
    Ok(PointCloud::new(points)?)
}

/// Surface of a `w × d × h` box centered at the local origin, edges along
/// local x, y, z.
pub fn gen_box_scene(
    w: f64,
    d: f64,
    h: f64,
    pose: &RigidPose,
    cfg: &SynthConfig,
) -> Result<SyntheticScene, DatasetError> {
    check_dims(&[("w", w), ("d", d), ("h", h)])?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = Vector3::new(w, d, h) / 2.0;
    let mut local = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let area = 4.0 * half[u] * half[v];
        for sign in [-1.0, 1.0] {
            for _ in 0..count(cfg.density, area) {
                let mut p = Point3::origin();
                p[axis] = sign * half[axis];
                p[u] = rng.random_range(-half[u]..=half[u]);
                p[v] = rng.random_range(-half[v]..=half[v]);
                local.push(p);
            }
        }
    }
    let dims = [w, d, h];
    let smallest = (0..3)
        .min_by(|&a, &b| dims[a].total_cmp(&dims[b]))
        .expect("three dims");
    let cloud = finish(local, pose, cfg, &mut rng)?;
    Ok(SyntheticScene {
        cloud,
        truth: GraspTruth {
            center: pose.transform_point(&Point3::origin()),
            axis: TruthAxis::Along(pose.transform_vector(&Vector3::ith(smallest, 1.0))),
            width: dims[smallest],
            normal: None,
        },
        shape: ShapeParams::Box { w, d, h },
        pose: *pose,
    })
}

/// Closed cylinder of the given radius and length, axis along local z,
/// centered at the local origin.
pub fn gen_cylinder_scene(
    radius: f64,
    length: f64,
    pose: &RigidPose,
    cfg: &SynthConfig,
) -> Result<SyntheticScene, DatasetError> {
    check_dims(&[("radius", radius), ("length", length)])?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut local = Vec::new();
    for _ in 0..count(cfg.density, 2.0 * PI * radius * length) {
        let a = rng.random_range(0.0..2.0 * PI);
        let z = rng.random_range(-length / 2.0..=length / 2.0);
        local.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
    }
    for sign in [-1.0, 1.0] {
        for _ in 0..count(cfg.density, PI * radius * radius) {
            // sqrt keeps the disc sampling uniform in area.
            let r = radius * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            local.push(Point3::new(r * a.cos(), r * a.sin(), sign * length / 2.0));
        }
    }
    let cloud = finish(local, pose, cfg, &mut rng)?;
    Ok(SyntheticScene {
        cloud,
        truth: GraspTruth {
            center: pose.transform_point(&Point3::origin()),
            axis: TruthAxis::PerpendicularTo(pose.transform_vector(&Vector3::z())),
            width: 2.0 * radius,
            normal: None,
        },
        shape: ShapeParams::Cylinder { radius, length },
        pose: *pose,
    })
}

/// Flat `width × depth` rectangle in the local xy plane, centered at the
/// local origin.
pub fn gen_plane_patch(
    width: f64,
    depth: f64,
    pose: &RigidPose,
    cfg: &SynthConfig,
) -> Result<SyntheticScene, DatasetError> {
    check_dims(&[("width", width), ("depth", depth)])?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let local = (0..count(cfg.density, width * depth))
        .map(|_| {
            Point3::new(
                rng.random_range(-width / 2.0..=width / 2.0),
                rng.random_range(-depth / 2.0..=depth / 2.0),
                0.0,
            )
        })
        .collect();
    let cloud = finish(local, pose, cfg, &mut rng)?;
    let normal = pose.transform_vector(&Vector3::z());
    Ok(SyntheticScene {
        cloud,
        truth: GraspTruth {
            center: pose.transform_point(&Point3::origin()),
            axis: TruthAxis::Along(normal),
            width: 0.0,
            normal: Some(normal),
        },
        shape: ShapeParams::Plane { width, depth },
        pose: *pose,
    })
}

pub fn gen_sphere_scene(
    radius: f64,
    pose: &RigidPose,
    cfg: &SynthConfig,
) -> Result<SyntheticScene, DatasetError> {
    check_dims(&[("radius", radius)])?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let local = (0..count(cfg.density, 4.0 * PI * radius * radius))
        .map(|_| loop {
            let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let n = v.norm();
            if n > 1e-12 {
                break Point3::from(v * (radius / n));
            }
        })
        .collect();
    let cloud = finish(local, pose, cfg, &mut rng)?;
    Ok(SyntheticScene {
        cloud,
        truth: GraspTruth {
            center: pose.transform_point(&Point3::origin()),
            axis: TruthAxis::Any,
            width: 2.0 * radius,
            normal: None,
        },
        shape: ShapeParams::Sphere { radius },
        pose: *pose,
    })
}
