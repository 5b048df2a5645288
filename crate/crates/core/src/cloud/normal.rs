//! Patch centroid/scatter and the smallest-eigenvector surface normal.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3, Vector3};

use super::{CloudError, PointCloud};

/// Centroid `p*` and scatter `W = Σ (p - p*)(p - p*)ᵀ` of a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchStats {
    pub centroid: Point3<f64>,
    pub scatter: Matrix3<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEstimate {
    pub normal: Vector3<f64>,
    /// `λ_min / λ_mid`; 0 for a perfect plane.
    pub planarity: f64,
}

pub fn patch_stats(cloud: &PointCloud, indices: &[usize]) -> Result<PatchStats, CloudError> {
    if indices.len() < 3 {
        return Err(CloudError::PatchTooSmall(indices.len()));
    }
    let pts = cloud.points();
    if let Some(&bad) = indices.iter().find(|&&i| i >= pts.len()) {
        return Err(CloudError::IndexOutOfRange(bad));
    }
    let n = indices.len() as f64;
    let sum = indices
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + pts[i].coords);
    let centroid = Point3::from(sum / n);

    // Upper triangle only, mirrored, so the result is exactly symmetric.
    let mut s = [0.0f64; 6];
    for &i in indices {
        let d = pts[i] - centroid;
        s[0] += d.x * d.x;
        s[1] += d.x * d.y;
        s[2] += d.x * d.z;
        s[3] += d.y * d.y;
        s[4] += d.y * d.z;
        s[5] += d.z * d.z;
    }
    let scatter = Matrix3::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]);
    Ok(PatchStats {
        centroid,
        scatter,
        count: indices.len(),
    })
}

/// Eigenvalues of a symmetric 3x3 matrix in ascending order, plus a unit
/// eigenvector for the smallest one.
///
/// Closed form: the eigenvalues come from the trigonometric solution of the
/// characteristic cubic on the shifted, scaled matrix; the eigenvector is the
/// best-conditioned cross product of two rows of `A - λ_min I`. Returns
/// `None` when the smallest eigenvalue is not isolated (no row pair spans a
/// plane).
pub fn symmetric_eigen3(a: &Matrix3<f64>) -> Option<([f64; 3], Vector3<f64>)> {
    let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let eig = if off == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(f64::total_cmp);
        d
    } else {
        let q = a.trace() / 3.0;
        let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2)
            + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        let b = (a - Matrix3::identity() * q) / p;
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let mid = 3.0 * q - hi - lo;
        let mut d = [lo, mid, hi];
        d.sort_by(f64::total_cmp);
        d
    };

    let m = a - Matrix3::identity() * eig[0];
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    let crosses = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = crosses
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .copied()?;
    let len = best.norm();
    if !(len > 0.0) || !len.is_finite() {
        return None;
    }
    Some((eig, best / len))
}

/// Relative gap below which the two smallest eigenvalues count as equal.
const DEGENERACY_TOLERANCE: f64 = 1e-9;
/// Eigenvalues below this fraction of the trace are at the solver's
/// resolution and are reported as zero.
const ZERO_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Unit normal of a patch: the eigenvector of the scatter for its smallest
/// eigenvalue, i.e. the minimizer of `nᵀ W n` over unit `n`.
///
/// The sign is chosen so the normal faces `viewpoint` (the origin when
/// `None`).
pub fn estimate_normal(
    stats: &PatchStats,
    viewpoint: Option<&Point3<f64>>,
) -> Result<NormalEstimate, CloudError> {
    let w = &stats.scatter;
    let trace = w.trace();
    if !(trace > 0.0) {
        return Err(CloudError::DegeneratePatch);
    }
    let (eig, mut normal) = symmetric_eigen3(w).ok_or(CloudError::DegeneratePatch)?;
    let lambda_min = if eig[0] <= ZERO_FLOOR * trace {
        0.0
    } else {
        eig[0]
    };
    let lambda_mid = eig[1];
    if lambda_mid - lambda_min <= DEGENERACY_TOLERANCE * trace {
        return Err(CloudError::DegeneratePatch);
    }

    let view = viewpoint.copied().unwrap_or_else(Point3::origin);
    let facing = normal.dot(&(view - stats.centroid));
    if facing < 0.0 || (facing == 0.0 && first_nonzero_negative(&normal)) {
        normal = -normal;
    }
    Ok(NormalEstimate {
        normal,
        planarity: (lambda_min / lambda_mid).clamp(0.0, 1.0),
    })
}

fn first_nonzero_negative(v: &Vector3<f64>) -> bool {
    v.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
}
