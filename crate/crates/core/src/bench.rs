//! Wall-clock comparison of grasp search on the whole cloud against search
//! on the region crop, and the reference scene used for it.

use std::time::Instant;

use nalgebra::{Matrix3, Point2, Vector3};

use crate::antipodal::{search, AntipodalError, GripperModel, SamplerConfig, Workspace};
use crate::camera::{project_polygon_region, CameraIntrinsics, RigidPose, WorldRegion, ZBand};
use crate::cloud::PointCloud;
use crate::dataset::{gen_box_scene, SynthConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub n_points: usize,
    pub n_in_region: usize,
    /// Seconds per repeat, in run order.
    pub full: Vec<f64>,
    pub cropped: Vec<f64>,
    pub full_cost: f64,
    pub cropped_cost: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl BenchReport {
    /// Median full time over median cropped time.
    pub fn speedup(&self) -> f64 {
        median(&self.full) / median(&self.cropped)
    }
}

/// Times `repeat` rounds, each running the full search then the cropped
/// search with identical budgets.
pub fn run_bench(
    cloud: &PointCloud,
    region: &WorldRegion,
    cfg: &SamplerConfig,
    g: &GripperModel,
    repeat: usize,
) -> Result<BenchReport, AntipodalError> {
    let mut report = BenchReport {
        n_points: cloud.len(),
        n_in_region: crate::cloud::crop_indices(cloud, region).len(),
        full: Vec::with_capacity(repeat),
        cropped: Vec::with_capacity(repeat),
        full_cost: f64::NAN,
        cropped_cost: f64::NAN,
    };
    for _ in 0..repeat.max(1) {
        for (ws, times, cost) in [
            (Workspace::Full, &mut report.full, &mut report.full_cost),
            (Workspace::Cropped, &mut report.cropped, &mut report.cropped_cost),
        ] {
            let t = Instant::now();
            let out = search(cloud, region, cfg, g, ws)?;
            times.push(t.elapsed().as_secs_f64());
            *cost = out.best.cost;
        }
    }
    Ok(report)
}

/// Reference scene: one graspable box under a downward-looking camera, plus
/// four clutter blocks outside the camera's pixel region.
#[derive(Debug, Clone)]
pub struct BenchScene {
    pub cloud: PointCloud,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: RigidPose,
    pub polygon_px: Vec<Point2<f64>>,
    pub band: ZBand,
    pub region: WorldRegion,
}

/// 50 000 points: a 9 000-point box in the region and 41 000 clutter points.
pub fn bench_scene(seed: u64) -> BenchScene {
    let noise = 5e-4;
    let object = gen_box_scene(
        0.04,
        0.12,
        0.12,
        &RigidPose::from_translation(Vector3::new(0.0, 0.0, 0.5)),
        &SynthConfig {
            density: 187_500.0,
            noise_sigma: noise,
            seed,
        },
    )
    .expect("valid box");
    let mut cloud = object.cloud;
    for (k, (dx, dy)) in [(0.3, 0.3), (-0.3, 0.3), (0.3, -0.3), (-0.3, -0.3)]
        .into_iter()
        .enumerate()
    {
        let block = gen_box_scene(
            0.2,
            0.2,
            0.1,
            &RigidPose::from_translation(Vector3::new(dx, dy, 0.5)),
            &SynthConfig {
                density: 64_062.5,
                noise_sigma: noise,
                seed: seed.wrapping_add(1 + k as u64),
            },
        )
        .expect("valid box");
        cloud = cloud.merged(&block.cloud);
    }

    let intrinsics = CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0).expect("valid intrinsics");
    // Camera 1.5 m above the table looking straight down.
    let camera_pose = RigidPose::new(
        Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)),
        Vector3::new(0.0, 0.0, 1.5),
    )
    .expect("proper rotation");
    let polygon_px = vec![
        Point2::new(260.0, 180.0),
        Point2::new(380.0, 180.0),
        Point2::new(380.0, 300.0),
        Point2::new(260.0, 300.0),
    ];
    let band = ZBand::new(0.8, 1.2).expect("valid band");
    let region = project_polygon_region(&polygon_px, &intrinsics, &camera_pose, &band)
        .expect("valid region");
    BenchScene {
        cloud,
        intrinsics,
        camera_pose,
        polygon_px,
        band,
        region,
    }
}
