//! Pinhole back-projection and the world-frame crop region spanned by an
//! image-plane polygon between two camera depths.
//!
//! Camera frame convention: +z along the optical axis, +x toward increasing
//! image column `u`, +y toward increasing image row `v`.

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use thiserror::Error;

use crate::grasp::{ccw_convex, convex_contains, signed_area, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal with det +1 (error {0:e})")]
    InvalidRotation(f64),
    #[error("invalid depth band [{z_min}, {z_max}]")]
    InvalidBand { z_min: f64, z_max: f64 },
    #[error("invalid region polygon: {0}")]
    InvalidPolygon(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(CameraError::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Forward pinhole map of a camera-frame point to `(u, v)`.
    pub fn project(&self, p: &Point3<f64>) -> Point2<f64> {
        Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

/// Camera-frame point for pixel `(u, v)` at depth `zc`.
pub fn backproject_pixel(
    u: f64,
    v: f64,
    zc: f64,
    k: &CameraIntrinsics,
) -> Result<Point3<f64>, CameraError> {
    if !(zc > 0.0) {
        return Err(CameraError::NonPositiveDepth(zc));
    }
    Ok(Point3::new(
        (u - k.cx) * zc / k.fx,
        (v - k.cy) * zc / k.fy,
        zc,
    ))
}

/// Rigid transform mapping points from a source frame into a target frame:
/// `p_target = rotation * p_source + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ROTATION_TOLERANCE: f64 = 1e-9;

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = (rotation.determinant() - 1.0).abs();
        let err = ortho.max(det);
        if !(err <= ROTATION_TOLERANCE) || !translation.iter().all(|t| t.is_finite()) {
            return Err(CameraError::InvalidRotation(err));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation of `angle` radians about `axis` followed by a translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *r.matrix(),
            translation: t,
        }
    }

    /// Twelve numbers: rotation in row-major order, then translation.
    pub fn from_row_major(values: &[f64; 12]) -> Result<Self, CameraError> {
        let r = Matrix3::from_row_slice(&values[..9]);
        let t = Vector3::new(values[9], values[10], values[11]);
        Self::new(r, t)
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
            t.x, t.y, t.z,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse_transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

pub fn camera_to_world(p: &Point3<f64>, pose: &RigidPose) -> Point3<f64> {
    pose.transform_point(p)
}

pub fn world_to_camera(p: &Point3<f64>, pose: &RigidPose) -> Point3<f64> {
    pose.inverse_transform_point(p)
}

/// Camera-depth interval `[z_min, z_max]` bounding the workspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZBand {
    pub z_min: f64,
    pub z_max: f64,
}

impl ZBand {
    pub fn new(z_min: f64, z_max: f64) -> Result<Self, CameraError> {
        if !(z_min > 0.0 && z_min < z_max && z_max.is_finite()) {
            return Err(CameraError::InvalidBand { z_min, z_max });
        }
        Ok(Self { z_min, z_max })
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_min && z <= self.z_max
    }
}

/// Points whose pinhole projection falls inside a convex pixel polygon and
/// whose camera depth lies inside a band.
#[derive(Debug, Clone, PartialEq)]
pub struct FrustumRegion {
    intrinsics: CameraIntrinsics,
    camera_pose: RigidPose,
    polygon_px: Vec<Point2<f64>>,
    band: ZBand,
    near: Vec<Point3<f64>>,
    far: Vec<Point3<f64>>,
}

impl FrustumRegion {
    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn camera_pose(&self) -> &RigidPose {
        &self.camera_pose
    }

    pub fn polygon_px(&self) -> &[Point2<f64>] {
        &self.polygon_px
    }

    pub fn band(&self) -> &ZBand {
        &self.band
    }

    /// World-frame polygon vertices back-projected at `z_min`.
    pub fn near_polygon(&self) -> &[Point3<f64>] {
        &self.near
    }

    /// World-frame polygon vertices back-projected at `z_max`.
    pub fn far_polygon(&self) -> &[Point3<f64>] {
        &self.far
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let pc = self.camera_pose.inverse_transform_point(p);
        if !self.band.contains(pc.z) {
            return false;
        }
        convex_contains(&self.polygon_px, self.intrinsics.project(&pc))
    }
}

/// Right prism: a convex polygon in the local xy-plane of `frame`, swept
/// along local z between `z_min` and `z_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrismRegion {
    frame: RigidPose,
    polygon: Vec<Point2<f64>>,
    z_min: f64,
    z_max: f64,
}

impl PrismRegion {
    pub fn new(
        frame: RigidPose,
        polygon: &[Point2<f64>],
        z_min: f64,
        z_max: f64,
    ) -> Result<Self, CameraError> {
        if !(z_min < z_max) || !z_min.is_finite() || !z_max.is_finite() {
            return Err(CameraError::InvalidBand { z_min, z_max });
        }
        Ok(Self {
            frame,
            polygon: ccw_convex(polygon)?,
            z_min,
            z_max,
        })
    }

    /// Axis-aligned box `[min, max]`.
    pub fn aabb(min: Point3<f64>, max: Point3<f64>) -> Result<Self, CameraError> {
        let poly = [
            Point2::new(min.x, min.y),
            Point2::new(max.x, min.y),
            Point2::new(max.x, max.y),
            Point2::new(min.x, max.y),
        ];
        Self::new(RigidPose::identity(), &poly, min.z, max.z)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let local = self.frame.inverse_transform_point(p);
        local.z >= self.z_min
            && local.z <= self.z_max
            && convex_contains(&self.polygon, Point2::new(local.x, local.y))
    }
}

/// World-frame crop region.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldRegion {
    Frustum(FrustumRegion),
    Prism(PrismRegion),
}

impl WorldRegion {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        match self {
            WorldRegion::Frustum(f) => f.contains(p),
            WorldRegion::Prism(r) => r.contains(p),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            WorldRegion::Frustum(f) => {
                // Cross-section at depth z has area A_px z^2 / (fx fy).
                let k = &f.intrinsics;
                let a = signed_area(&f.polygon_px) / (k.fx * k.fy);
                a * (f.band.z_max.powi(3) - f.band.z_min.powi(3)) / 3.0
            }
            WorldRegion::Prism(r) => signed_area(&r.polygon) * (r.z_max - r.z_min),
        }
    }

    /// Preferred "up" direction of the region in the world frame: toward the
    /// camera for a frustum, local +z for a prism. Grasp orientations are
    /// referenced to it.
    pub fn up_axis(&self) -> Vector3<f64> {
        match self {
            WorldRegion::Frustum(f) => -f.camera_pose.transform_vector(&Vector3::z()),
            WorldRegion::Prism(r) => r.frame.transform_vector(&Vector3::z()),
        }
    }

    /// Secondary reference axis, used when the up axis is degenerate.
    pub fn side_axis(&self) -> Vector3<f64> {
        match self {
            WorldRegion::Frustum(f) => f.camera_pose.transform_vector(&Vector3::x()),
            WorldRegion::Prism(r) => r.frame.transform_vector(&Vector3::x()),
        }
    }

    /// The same region moved by the rigid transform `t`.
    pub fn transformed(&self, t: &RigidPose) -> WorldRegion {
        match self {
            WorldRegion::Frustum(f) => WorldRegion::Frustum(FrustumRegion {
                camera_pose: t.compose(&f.camera_pose),
                near: f.near.iter().map(|p| t.transform_point(p)).collect(),
                far: f.far.iter().map(|p| t.transform_point(p)).collect(),
                ..f.clone()
            }),
            WorldRegion::Prism(r) => WorldRegion::Prism(PrismRegion {
                frame: t.compose(&r.frame),
                ..r.clone()
            }),
        }
    }
}

/// Region of world points that project inside `poly_px` with camera depth
/// in `band`. `pose` maps camera-frame points to the world frame.
pub fn project_polygon_region(
    poly_px: &[Point2<f64>],
    k: &CameraIntrinsics,
    pose: &RigidPose,
    band: &ZBand,
) -> Result<WorldRegion, CameraError> {
    let polygon_px = ccw_convex(poly_px)?;
    let lift = |z: f64| -> Result<Vec<Point3<f64>>, CameraError> {
        polygon_px
            .iter()
            .map(|p| Ok(camera_to_world(&backproject_pixel(p.x, p.y, z, k)?, pose)))
            .collect()
    };
    let near = lift(band.z_min)?;
    let far = lift(band.z_max)?;
    Ok(WorldRegion::Frustum(FrustumRegion {
        intrinsics: *k,
        camera_pose: *pose,
        polygon_px,
        band: *band,
        near,
        far,
    }))
}
