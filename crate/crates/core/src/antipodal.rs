//! Antipodal two-finger grasp search over a cropped point cloud.
//!
//! Gripper frame: +x is the closing axis (from the left finger toward the
//! right finger), +y points from the fingertips toward the palm, +z = x × y.
//! The left finger is placed at the sampled seed point with its closing
//! axis anti-parallel to the seed's outward surface normal; orientations are
//! sampled by rotating about the closing axis.
//!
//! A candidate's cost is `1 - min(mean_L, mean_R)`, where `mean_F` is the
//! mean `|n·x|` over the contact points of finger `F`. Lower is better, so
//! the lowest-cost grasp is also the highest-scoring one.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{RigidPose, WorldRegion};
use crate::cloud::{
    crop_indices, estimate_normal, patch_indices, patch_stats, CloudError, NormalEstimate,
    PatchConfig, PointCloud, VoxelIndex,
};

/// Total finger clearance added to the measured contact span, split evenly
/// between both fingers.
pub const CONTACT_CLEARANCE: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperModel {
    pub max_opening: f64,
    /// Finger thickness along the closing axis; also the width of the
    /// contact slab in front of each finger.
    pub finger_thickness: f64,
    /// Pad extent along the approach axis, fingertip to palm.
    pub finger_depth: f64,
    /// Pad extent along the third axis.
    pub finger_width: f64,
    /// Depth of the palm volume behind the pads.
    pub palm_clearance: f64,
    /// Minimum mean `|cos|` between contact normals and the closing axis.
    pub mu_cos: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            max_opening: 0.08,
            finger_thickness: 0.004,
            finger_depth: 0.05,
            finger_width: 0.02,
            palm_clearance: 0.02,
            mu_cos: 0.9,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<(), AntipodalError> {
        let lengths = [
            ("max_opening", self.max_opening),
            ("finger_thickness", self.finger_thickness),
            ("finger_depth", self.finger_depth),
            ("finger_width", self.finger_width),
            ("palm_clearance", self.palm_clearance),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AntipodalError::InvalidConfig(format!(
                    "gripper.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.mu_cos > 0.0 && self.mu_cos <= 1.0) {
            return Err(AntipodalError::InvalidConfig(format!(
                "gripper.mu_cos must be in (0, 1], got {}",
                self.mu_cos
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub n_seeds: usize,
    pub n_orientations: usize,
    pub rng_seed: u64,
    pub patch: PatchConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_seeds: 64,
            n_orientations: 8,
            rng_seed: 0,
            patch: PatchConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), AntipodalError> {
        if self.n_seeds == 0 || self.n_orientations == 0 {
            return Err(AntipodalError::InvalidConfig(
                "n_seeds and n_orientations must be at least 1".into(),
            ));
        }
        if self.patch.k < 3 {
            return Err(AntipodalError::InvalidConfig(
                "patch k must be at least 3".into(),
            ));
        }
        Ok(())
    }

    /// Maximum number of seed draws, degenerate ones included.
    pub fn seed_budget(&self) -> usize {
        10 * self.n_seeds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rejection {
    Penetration,
    NoContact,
    NotAntipodal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub seed_draws: usize,
    pub degenerate_seeds: usize,
    pub evaluated: usize,
    pub penetration: usize,
    pub no_contact: usize,
    pub not_antipodal: usize,
}

impl SearchStats {
    fn record(&mut self, r: Rejection) {
        match r {
            Rejection::Penetration => self.penetration += 1,
            Rejection::NoContact => self.no_contact += 1,
            Rejection::NotAntipodal => self.not_antipodal += 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AntipodalError {
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("no cloud points inside the region")]
    EmptyRegion,
    #[error(
        "no valid grasp: penetration={} no_contact={} not_antipodal={} degenerate_seeds={}",
        .0.penetration, .0.no_contact, .0.not_antipodal, .0.degenerate_seeds
    )]
    NoValidGrasp(SearchStats),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspCandidate {
    /// Gripper pose in the world frame. Origin: midway between the finger
    /// pads at fingertip level.
    pub pose: RigidPose,
    pub seed_index: usize,
    pub orientation_index: usize,
    pub cost: f64,
    /// Distance between the inner faces of the fingers.
    pub opening: f64,
    /// Contact points inside the friction cone (`|n·x| >= mu_cos`), left
    /// finger then right finger.
    pub contacts: (Vec<usize>, Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGrasp {
    pub cost: f64,
    /// Pose with the fingers centered on the measured contact span.
    pub pose: RigidPose,
    pub opening: f64,
    pub contacts: (Vec<usize>, Vec<usize>),
}

/// Counter-based generator for seed draw `attempt`: the stream is fixed by
/// `(rng_seed, attempt)` alone, so draws do not depend on evaluation order.
pub fn seed_rng(rng_seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(attempt);
    rng
}

/// Lazily estimated per-point normals, or the cloud's own normals when
/// present.
pub struct NormalField<'a> {
    cloud: &'a PointCloud,
    index: &'a VoxelIndex,
    patch: PatchConfig,
    cache: Vec<OnceLock<Option<Vector3<f64>>>>,
}

impl<'a> NormalField<'a> {
    pub fn new(cloud: &'a PointCloud, index: &'a VoxelIndex, patch: PatchConfig) -> Self {
        let cache = if cloud.normals().is_some() {
            Vec::new()
        } else {
            (0..cloud.len()).map(|_| OnceLock::new()).collect()
        };
        Self {
            cloud,
            index,
            patch,
            cache,
        }
    }

    /// Unoriented unit normal at point `i`; `None` if its patch is degenerate.
    pub fn get(&self, i: usize) -> Option<Vector3<f64>> {
        if let Some(n) = self.cloud.normals() {
            return Some(n[i]);
        }
        *self.cache[i].get_or_init(|| {
            estimate_at(self.cloud, self.index, i, &self.patch, None)
                .ok()
                .map(|e| e.normal)
        })
    }
}

fn estimate_at(
    cloud: &PointCloud,
    index: &VoxelIndex,
    i: usize,
    patch: &PatchConfig,
    viewpoint: Option<&Point3<f64>>,
) -> Result<NormalEstimate, CloudError> {
    let idx = patch_indices(cloud, index, i, patch)?;
    let stats = patch_stats(cloud, &idx)?;
    estimate_normal(&stats, viewpoint)
}

/// Draws one seed uniformly from `candidates` and estimates its normal,
/// oriented to face `viewpoint`.
pub fn sample_seed<R: Rng>(
    cloud: &PointCloud,
    index: &VoxelIndex,
    candidates: &[usize],
    rng: &mut R,
    patch: &PatchConfig,
    viewpoint: Option<&Point3<f64>>,
) -> Result<(usize, NormalEstimate), AntipodalError> {
    if candidates.is_empty() {
        return Err(AntipodalError::EmptyCloud);
    }
    let i = candidates[rng.random_range(0..candidates.len())];
    let est = estimate_at(cloud, index, i, patch, viewpoint)?;
    Ok((i, est))
}

/// Reference directions fixing the rotation phase about the closing axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationReference {
    pub up: Vector3<f64>,
    /// Used when `up` is parallel to the closing axis.
    pub side: Vector3<f64>,
}

impl Default for OrientationReference {
    fn default() -> Self {
        Self {
            up: Vector3::z(),
            side: Vector3::x(),
        }
    }
}

impl OrientationReference {
    pub fn from_region(region: &WorldRegion) -> Self {
        Self {
            up: region.up_axis(),
            side: region.side_axis(),
        }
    }
}

/// Provisional gripper frames at the seed: x = -normal, y rotated about x in
/// steps of `2π / n_orientations` starting from `reference.up` projected
/// perpendicular to x.
pub fn candidate_poses(
    seed: &Point3<f64>,
    normal: &Vector3<f64>,
    n_orientations: usize,
    reference: &OrientationReference,
) -> Vec<RigidPose> {
    let x = -normal.normalize();
    let project = |v: &Vector3<f64>| {
        let p = v - x * x.dot(v);
        let len = p.norm();
        (len > 1e-6 * v.norm()).then(|| p / len)
    };
    let y0 = project(&reference.up)
        .or_else(|| project(&reference.side))
        .or_else(|| project(&Vector3::x()))
        .or_else(|| project(&Vector3::y()))
        .expect("two independent axes cannot both be parallel to x");
    let y90 = x.cross(&y0);
    (0..n_orientations)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / n_orientations as f64;
            let (s, c) = a.sin_cos();
            let y = y0 * c + y90 * s;
            let z = x.cross(&y);
            let r = Matrix3::from_columns(&[x, y, z]);
            RigidPose::new(r, seed.coords).expect("columns are orthonormal")
        })
        .collect()
}

struct LocalPoint {
    index: usize,
    p: Point3<f64>,
}

/// Scores the gripper placed in the provisional seed frame `frame`
/// (origin at the seed, x the closing axis).
pub fn score_candidate(
    cloud: &PointCloud,
    normals: &NormalField<'_>,
    frame: &RigidPose,
    g: &GripperModel,
) -> Result<ScoredGrasp, Rejection> {
    let t = g.finger_thickness;
    let half_w = g.finger_width / 2.0;
    let pad_top = g.finger_depth;
    let palm_top = g.finger_depth + g.palm_clearance;

    // Everything the fingers or palm could touch lies in this slab of
    // y and z; x is bounded later.
    let rot_t = frame.rotation().transpose();
    let origin = frame.translation();
    let mut nearby: Vec<LocalPoint> = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let l = Point3::from(rot_t * (p.coords - origin));
        if l.z.abs() <= half_w && l.y >= 0.0 && l.y <= palm_top {
            nearby.push(LocalPoint { index: i, p: l });
        }
    }
    let in_pad = |l: &Point3<f64>| l.y <= pad_top;

    let near = nearby
        .iter()
        .filter(|q| in_pad(&q.p) && q.p.x.abs() <= t)
        .map(|q| q.p.x)
        .fold(0.0f64, f64::min);
    let x_left = near - CONTACT_CLEARANCE / 2.0;
    let far = nearby
        .iter()
        .filter(|q| in_pad(&q.p) && q.p.x >= x_left)
        .map(|q| q.p.x)
        .fold(x_left, f64::max);
    let x_right = far + CONTACT_CLEARANCE / 2.0;
    let opening = x_right - x_left;
    if opening > g.max_opening {
        return Err(Rejection::NoContact);
    }

    for q in &nearby {
        let l = &q.p;
        let in_left_finger = l.x >= x_left - t && l.x < x_left;
        let in_right_finger = l.x > x_right && l.x <= x_right + t;
        if in_pad(l) && (in_left_finger || in_right_finger) {
            return Err(Rejection::Penetration);
        }
        if !in_pad(l) && l.x >= x_left - t && l.x <= x_right + t {
            return Err(Rejection::Penetration);
        }
    }

    let closing = frame.rotation().column(0).into_owned();
    let finger = |lo: f64, hi: f64| -> Result<(f64, Vec<usize>), Rejection> {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut aligned = Vec::new();
        for q in nearby
            .iter()
            .filter(|q| in_pad(&q.p) && q.p.x >= lo && q.p.x <= hi)
        {
            if let Some(n) = normals.get(q.index) {
                let c = n.dot(&closing).abs();
                sum += c;
                count += 1;
                if c >= g.mu_cos {
                    aligned.push(q.index);
                }
            }
        }
        if count == 0 {
            return Err(Rejection::NoContact);
        }
        Ok((sum / count as f64, aligned))
    };
    let (left_mean, left) = finger(x_left, x_left + t)?;
    let (right_mean, right) = finger(x_right - t, x_right)?;
    let score = left_mean.min(right_mean);
    if score < g.mu_cos {
        return Err(Rejection::NotAntipodal);
    }

    let center = frame.transform_point(&Point3::new((x_left + x_right) / 2.0, 0.0, 0.0));
    let pose = RigidPose::new(*frame.rotation(), center.coords).expect("rotation unchanged");
    Ok(ScoredGrasp {
        cost: (1.0 - score).max(0.0),
        pose,
        opening,
        contacts: (left, right),
    })
}

/// Which cloud the search works against once seeds are restricted to the
/// region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workspace {
    /// Crop first; normals, contacts and collisions use the cropped cloud.
    Cropped,
    /// Normals, contacts and collisions use the whole cloud.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: GraspCandidate,
    pub stats: SearchStats,
}

/// Lowest-cost grasp over `n_seeds × n_orientations` candidates seeded
/// inside `region`.
pub fn best_grasp(
    cloud: &PointCloud,
    region: &WorldRegion,
    cfg: &SamplerConfig,
    g: &GripperModel,
) -> Result<GraspCandidate, AntipodalError> {
    search(cloud, region, cfg, g, Workspace::Cropped).map(|o| o.best)
}

pub fn search(
    cloud: &PointCloud,
    region: &WorldRegion,
    cfg: &SamplerConfig,
    g: &GripperModel,
    workspace: Workspace,
) -> Result<SearchOutcome, AntipodalError> {
    cfg.validate()?;
    g.validate()?;
    if cloud.is_empty() {
        return Err(AntipodalError::EmptyCloud);
    }
    let in_region = crop_indices(cloud, region);
    if in_region.is_empty() {
        return Err(AntipodalError::EmptyRegion);
    }

    // `work` is the cloud the search sees; `to_input` maps its indices back
    // to the caller's cloud; `seeds_from` lists the seedable `work` indices.
    let (work, to_input, seeds_from): (Cow<'_, PointCloud>, Option<&[usize]>, Cow<'_, [usize]>) =
        match workspace {
            Workspace::Cropped => (
                Cow::Owned(cloud.select(&in_region)),
                Some(&in_region),
                Cow::Owned((0..in_region.len()).collect()),
            ),
            Workspace::Full => (Cow::Borrowed(cloud), None, Cow::Borrowed(&in_region)),
        };
    let map = |i: usize| to_input.map_or(i, |m| m[i]);

    let index = VoxelIndex::new(work.points());
    let normals = NormalField::new(&work, &index, cfg.patch);
    let reference = OrientationReference::from_region(region);

    // Seed normals face away from the centroid of the seedable points.
    let centroid = {
        let sum = seeds_from
            .iter()
            .fold(Vector3::zeros(), |acc, &i| acc + work.points()[i].coords);
        Point3::from(sum / seeds_from.len() as f64)
    };

    let mut stats = SearchStats::default();
    let mut seeds: Vec<(usize, Vector3<f64>)> = Vec::with_capacity(cfg.n_seeds);
    for attempt in 0..cfg.seed_budget() {
        if seeds.len() == cfg.n_seeds {
            break;
        }
        stats.seed_draws += 1;
        let mut rng = seed_rng(cfg.rng_seed, attempt as u64);
        let i = seeds_from[rng.random_range(0..seeds_from.len())];
        let p = work.points()[i];
        let outward = p + (p - centroid);
        match estimate_at(&work, &index, i, &cfg.patch, Some(&outward)) {
            Ok(est) => seeds.push((i, est.normal)),
            Err(_) => stats.degenerate_seeds += 1,
        }
    }

    let jobs: Vec<(usize, usize, RigidPose)> = seeds
        .iter()
        .flat_map(|&(i, n)| {
            candidate_poses(&work.points()[i], &n, cfg.n_orientations, &reference)
                .into_iter()
                .enumerate()
                .map(move |(j, pose)| (i, j, pose))
        })
        .collect();
    stats.evaluated = jobs.len();

    let results: Vec<(usize, usize, Result<ScoredGrasp, Rejection>)> = jobs
        .into_par_iter()
        .map(|(i, j, frame)| (i, j, score_candidate(&work, &normals, &frame, g)))
        .collect();

    let mut best: Option<GraspCandidate> = None;
    for (i, j, res) in results {
        match res {
            Err(r) => stats.record(r),
            Ok(s) => {
                let seed_index = map(i);
                let better = best.as_ref().is_none_or(|b| {
                    s.cost
                        .total_cmp(&b.cost)
                        .then(seed_index.cmp(&b.seed_index))
                        .then(j.cmp(&b.orientation_index))
                        .is_lt()
                });
                if better {
                    best = Some(GraspCandidate {
                        pose: s.pose,
                        seed_index,
                        orientation_index: j,
                        cost: s.cost,
                        opening: s.opening,
                        contacts: (
                            s.contacts.0.into_iter().map(map).collect(),
                            s.contacts.1.into_iter().map(map).collect(),
                        ),
                    });
                }
            }
        }
    }
    match best {
        Some(best) => Ok(SearchOutcome { best, stats }),
        None => Err(AntipodalError::NoValidGrasp(stats)),
    }
}
