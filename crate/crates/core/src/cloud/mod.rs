//! Point clouds, cropping, neighborhood queries and surface normals.

mod index;
mod normal;

pub use index::VoxelIndex;
pub use normal::{estimate_normal, patch_stats, symmetric_eigen3, NormalEstimate, PatchStats};

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::camera::WorldRegion;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("normals length {normals} does not match points length {points}")]
    NormalsLength { points: usize, normals: usize },
    #[error("normal {0} is not unit length")]
    NonUnitNormal(usize),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("k = {k} exceeds cloud size {len}")]
    KTooLarge { k: usize, len: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("patch has {0} points, need at least 3")]
    PatchTooSmall(usize),
    #[error("patch index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("degenerate patch: normal direction is ill-defined")]
    DegeneratePatch,
}

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self, CloudError> {
        if let Some(i) = points
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(CloudError::NonFinite(i));
        }
        Ok(Self {
            points,
            normals: None,
        })
    }

    pub fn with_normals(
        points: Vec<Point3<f64>>,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self, CloudError> {
        if normals.len() != points.len() {
            return Err(CloudError::NormalsLength {
                points: points.len(),
                normals: normals.len(),
            });
        }
        if let Some(i) = normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > UNIT_TOLERANCE)
        {
            return Err(CloudError::NonUnitNormal(i));
        }
        let mut cloud = Self::new(points)?;
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Sub-cloud of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Concatenates two clouds. Normals are kept only if both have them.
    pub fn merged(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        PointCloud { points, normals }
    }

    /// Applies a rigid transform to points and normals.
    pub fn transformed(&self, t: &crate::camera::RigidPose) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| n.iter().map(|v| t.transform_vector(v)).collect()),
        }
    }
}

/// Indices of the points inside `region`, in cloud order.
pub fn crop_indices(cloud: &PointCloud, region: &WorldRegion) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| region.contains(p))
        .map(|(i, _)| i)
        .collect()
}

/// The points inside `region`, original order preserved.
pub fn crop(cloud: &PointCloud, region: &WorldRegion) -> PointCloud {
    cloud.select(&crop_indices(cloud, region))
}

/// Indices of the `k` nearest points to `query`, nearest first, ties broken
/// by lower index. Builds a throwaway index; reuse a [`VoxelIndex`] for
/// repeated queries.
pub fn knn(cloud: &PointCloud, query: &Point3<f64>, k: usize) -> Result<Vec<usize>, CloudError> {
    VoxelIndex::new(cloud.points()).knn(query, k)
}

/// How the neighborhood ("patch") around a point is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchConfig {
    /// Number of nearest neighbors, the query point included.
    pub k: usize,
    /// Optional cap on neighbor distance.
    pub radius: Option<f64>,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { k: 30, radius: None }
    }
}

/// Neighborhood indices of cloud point `i` under `cfg`.
pub fn patch_indices(
    cloud: &PointCloud,
    index: &VoxelIndex,
    i: usize,
    cfg: &PatchConfig,
) -> Result<Vec<usize>, CloudError> {
    let query = cloud.points[i];
    let k = cfg.k.min(cloud.len());
    let mut idx = index.knn(&query, k)?;
    if let Some(r) = cfg.radius {
        let r2 = r * r;
        idx.retain(|&j| (cloud.points[j] - query).norm_squared() <= r2);
    }
    if idx.len() < 3 {
        return Err(CloudError::PatchTooSmall(idx.len()));
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::PrismRegion;

    fn grid_cloud() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(Point3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn validation() {
        assert!(PointCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
        let p = vec![Point3::origin()];
        assert!(PointCloud::with_normals(p.clone(), vec![]).is_err());
        assert!(PointCloud::with_normals(p.clone(), vec![Vector3::new(0.0, 0.0, 2.0)]).is_err());
        assert!(PointCloud::with_normals(p, vec![Vector3::z()]).is_ok());
    }

    #[test]
    fn crop_all_and_none() {
        let c = grid_cloud();
        let all = WorldRegion::Prism(
            PrismRegion::aabb(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0)).unwrap(),
        );
        assert_eq!(crop(&c, &all), c);
        let none = WorldRegion::Prism(
            PrismRegion::aabb(Point3::new(5.0, 5.0, 5.0), Point3::new(6.0, 6.0, 6.0)).unwrap(),
        );
        assert!(crop(&c, &none).is_empty());
    }

    #[test]
    fn crop_keeps_order_and_normals() {
        let pts = vec![
            Point3::new(0.9, 0.0, 0.0),
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(0.2, 0.0, 0.0),
        ];
        let normals = vec![Vector3::x(), Vector3::y(), Vector3::z()];
        let c = PointCloud::with_normals(pts, normals).unwrap();
        let slab = WorldRegion::Prism(
            PrismRegion::aabb(Point3::new(0.0, -1.0, -1.0), Point3::new(0.5, 1.0, 1.0)).unwrap(),
        );
        let out = crop(&c, &slab);
        assert_eq!(out.points(), &[Point3::new(0.1, 0.0, 0.0), Point3::new(0.2, 0.0, 0.0)]);
        assert_eq!(out.normals().unwrap(), &[Vector3::y(), Vector3::z()]);
    }

    #[test]
    fn knn_edge_cases() {
        let c = grid_cloud();
        let all = knn(&c, &Point3::new(0.2, 0.2, 0.0), c.len()).unwrap();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, (0..c.len()).collect::<Vec<_>>());
        assert_eq!(knn(&c, &c.points()[7], 1).unwrap(), vec![7]);
        assert_eq!(
            knn(&c, &Point3::origin(), 26),
            Err(CloudError::KTooLarge { k: 26, len: 25 })
        );
        assert_eq!(knn(&c, &Point3::origin(), 0), Err(CloudError::KZero));
    }

    #[test]
    fn patch_radius_cap() {
        let c = grid_cloud();
        let index = VoxelIndex::new(c.points());
        let cfg = PatchConfig { k: 9, radius: Some(0.105) };
        // Center of the grid: itself plus 4 axis neighbors within 0.105.
        assert_eq!(patch_indices(&c, &index, 12, &cfg).unwrap().len(), 5);
        let cfg = PatchConfig { k: 9, radius: Some(0.05) };
        assert_eq!(
            patch_indices(&c, &index, 12, &cfg),
            Err(CloudError::PatchTooSmall(1))
        );
    }
}
