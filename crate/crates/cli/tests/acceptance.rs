//! Acceptance run: one `PASS`/`FAIL` line per criterion, nonzero exit if
//! any fails. Every check uses its own reference computation.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use graspkit::antipodal::{best_grasp, search, AntipodalError, GripperModel, SamplerConfig, Workspace};
use graspkit::bench::bench_scene;
use graspkit::camera::{backproject_pixel, CameraIntrinsics, PrismRegion, RigidPose, WorldRegion};
use graspkit::cloud::{estimate_normal, patch_stats, PointCloud};
use graspkit::dataset::{gen_box_scene, gen_sphere_scene, write_ply, SynthConfig};
use graspkit::fvit::{
    hi_branch, hilo_forward, hilo_forward_traced, leaky_relu, regression_forward, weights_from_bytes,
    weights_to_bytes, FvitError, HeadWeights, HiLoConfig, HiLoWeights, RegressionWeights, TensorF,
    FEATURE_DIM,
};
use graspkit::grasp::{
    is_correct_grasp, jaccard, rect5_to_corners, EvalConfig, GraspRect5,
};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- rectangle metric ----

/// Interval of `x` covered by the rectangle on scanline `y`.
fn row_span(r: &GraspRect5, y: f64) -> Option<(f64, f64)> {
    let (s, c) = r.theta.sin_cos();
    let dy = y - r.y;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b, half) in [(c, s * dy, r.w / 2.0), (-s, c * dy, r.h / 2.0)] {
        if a.abs() < 1e-15 {
            if b.abs() > half {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((-half - b) / a, (half - b) / a);
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    (lo <= hi).then_some((lo + r.x, hi + r.x))
}

/// IoU counted on the cell centers of a 2048² raster over the joint bbox.
fn raster_iou(u: &GraspRect5, v: &GraspRect5) -> f64 {
    const GRID: usize = 2048;
    let pts: Vec<_> = [u, v].iter().flat_map(|r| rect5_to_corners(r).corners().to_vec()).collect();
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.y), b.max(p.y)));
    let (dx, dy) = ((x1 - x0) / GRID as f64, (y1 - y0) / GRID as f64);
    let count = |lo: f64, hi: f64| -> i64 {
        let first = ((lo - x0) / dx - 0.5).ceil().max(0.0) as i64;
        let last = ((hi - x0) / dx - 0.5).floor().min(GRID as f64 - 1.0) as i64;
        (last - first + 1).max(0)
    };
    let (mut inter, mut a, mut b) = (0i64, 0i64, 0i64);
    for i in 0..GRID {
        let y = y0 + (i as f64 + 0.5) * dy;
        let (su, sv) = (row_span(u, y), row_span(v, y));
        a += su.map_or(0, |(l, h)| count(l, h));
        b += sv.map_or(0, |(l, h)| count(l, h));
        if let (Some(p), Some(q)) = (su, sv) {
            inter += count(p.0.max(q.0), p.1.min(q.1));
        }
    }
    inter as f64 / (a + b - inter) as f64
}

fn random_rect(rng: &mut impl Rng, center: f64, size: (f64, f64)) -> GraspRect5 {
    GraspRect5::new(
        rng.random_range(-center..center),
        rng.random_range(-center..center),
        rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        rng.random_range(size.0..size.1),
        rng.random_range(size.0..size.1),
    )
    .unwrap()
}

fn rect_metric() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (u, v) = (random_rect(&mut rng, 20.0, (10.0, 80.0)), random_rect(&mut rng, 20.0, (10.0, 80.0)));
        let exact = jaccard(&u.to_corners(), &v.to_corners()).unwrap();
        worst = worst.max((exact - raster_iou(&u, &v)).abs());
    }
    let mut not_one = 0;
    for _ in 0..10_000 {
        let c = random_rect(&mut rng, 500.0, (0.5, 200.0)).to_corners();
        not_one += usize::from(jaccard(&c, &c).unwrap() != 1.0);
    }
    // Sliding a copy away lowers IoU monotonically; correctness flips once, at 0.25.
    let cfg = EvalConfig::default();
    let truth = GraspRect5::new(0.0, 0.0, 0.3, 40.0, 20.0).unwrap();
    let (mut flips, mut last, mut prev_iou) = (0, true, 1.0);
    for k in 0..400 {
        let shift = k as f64 * 0.1;
        let p = GraspRect5::new(shift * 0.3f64.cos(), shift * 0.3f64.sin(), 0.3, 40.0, 20.0).unwrap();
        let m = is_correct_grasp(&p, &[truth], &cfg).unwrap();
        if m.best_iou > prev_iou + 1e-12 || m.correct != (m.best_iou >= 0.25) {
            return Err(format!("threshold behavior broken at shift {shift}"));
        }
        flips += usize::from(m.correct != last);
        (last, prev_iou) = (m.correct, m.best_iou);
    }
    check(
        worst <= 2e-3 && not_one == 0 && flips == 1,
        format!("max |analytic - raster| = {worst:.2e} over 1000 pairs; self-IoU != 1 in {not_one}/10000; threshold flips {flips}"),
    )
}

// ---- pinhole ----

fn pinhole() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let k = CameraIntrinsics::new(
            rng.random_range(100.0..2000.0),
            rng.random_range(100.0..2000.0),
            rng.random_range(0.0..1000.0),
            rng.random_range(0.0..1000.0),
        )
        .unwrap();
        let p = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.05..10.0));
        let px = k.project(&p);
        let back = backproject_pixel(px.x, px.y, p.z, &k).unwrap();
        worst = worst.max((back - p).norm() / p.coords.norm().max(1.0));
    }
    let k = CameraIntrinsics::new(500.0, 400.0, 320.0, 240.0).unwrap();
    let ex = backproject_pixel(320.0 + 500.0, 240.0, 1.0, &k).unwrap();
    check(
        worst <= 1e-12 && ex == Point3::new(1.0, 0.0, 1.0),
        format!("max round-trip error {worst:.2e} over 1e5 points; worked example {ex:?}"),
    )
}

// ---- normals ----

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn plane_patch(rng: &mut impl Rng, normal: &Vector3<f64>, sigma: f64) -> PointCloud {
    let a = normal.cross(&unit_vector(rng)).normalize();
    let b = normal.cross(&a);
    let c = Point3::new(0.2, -0.1, 1.0);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    let pts = (0..30)
        .map(|_| {
            let p = c + a * (rng.random_range(-0.5..0.5) * 0.05) + b * (rng.random_range(-0.5..0.5) * 0.05);
            if sigma > 0.0 {
                p + Vector3::from_fn(|_, _| noise.sample(rng))
            } else {
                p
            }
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let (a, b) = (a.normalize(), b.normalize());
    a.cross(&b).norm().atan2(a.dot(&b).abs())
}

fn normals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let idx: Vec<usize> = (0..30).collect();
    let mut worst_clean = 0.0f64;
    for _ in 0..500 {
        let n = unit_vector(&mut rng);
        let est = estimate_normal(&patch_stats(&plane_patch(&mut rng, &n, 0.0), &idx).unwrap(), None).unwrap();
        worst_clean = worst_clean.max(angle(&est.normal, &n));
    }
    let (mut total, mut violations) = (0.0, 0);
    for _ in 0..500 {
        let n = unit_vector(&mut rng);
        let stats = patch_stats(&plane_patch(&mut rng, &n, 0.001), &idx).unwrap();
        let est = estimate_normal(&stats, None).unwrap();
        total += angle(&est.normal, &n);
        let w = &stats.scatter;
        let best = (est.normal.transpose() * w * est.normal)[0];
        for _ in 0..1000 {
            let v = unit_vector(&mut rng);
            violations += usize::from(best > (v.transpose() * w * v)[0] + 1e-12 * w.trace());
        }
    }
    let mean_deg = (total / 500.0).to_degrees();
    check(
        worst_clean < 1e-6 && mean_deg < 2.0 && violations == 0,
        format!("noiseless max error {worst_clean:.2e} rad; noisy mean {mean_deg:.3} deg; minimality violations {violations}/500000"),
    )
}

// ---- antipodal ----

fn around(center: &Point3<f64>, half: f64) -> WorldRegion {
    let h = Vector3::repeat(half);
    WorldRegion::Prism(PrismRegion::aabb(center - h, center + h).unwrap())
}

fn antipodal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let g = GripperModel::default();
    let mut hits = 0;
    for trial in 0..50u64 {
        let small = rng.random_range(0.03..0.05);
        let (d, h) = (rng.random_range(0.09..0.15), rng.random_range(0.09..0.15));
        let axis = unit_vector(&mut rng);
        let t = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.5..1.0));
        let pose = RigidPose::from_axis_angle(axis, rng.random_range(-3.1..3.1), t);
        let cfg = SynthConfig { density: 1e5, noise_sigma: 5e-4, seed: trial };
        let scene = gen_box_scene(small, d, h, &pose, &cfg).unwrap();
        let sampler = SamplerConfig { rng_seed: trial, ..SamplerConfig::default() };
        if let Ok(best) = best_grasp(&scene.cloud, &around(&scene.truth.center, 0.2), &sampler, &g) {
            let closing = best.pose.rotation().column(0).into_owned();
            hits += usize::from(scene.truth.axis_error(&closing).to_degrees() <= 5.0);
        }
    }
    let mut rejected = 0;
    let radii = [0.041, 0.05, 0.065, 0.08];
    for (k, r) in radii.iter().enumerate() {
        let c = Vector3::new(0.0, 0.1, 0.7);
        let scene = gen_sphere_scene(
            *r,
            &RigidPose::from_translation(c),
            &SynthConfig { noise_sigma: 5e-4, seed: k as u64, ..SynthConfig::default() },
        )
        .unwrap();
        let out = search(&scene.cloud, &around(&Point3::from(c), 0.2), &SamplerConfig::default(), &g, Workspace::Cropped);
        rejected += usize::from(matches!(out, Err(AntipodalError::NoValidGrasp(_))));
    }
    check(
        hits >= 45 && rejected == radii.len(),
        format!("boxes within 5 deg: {hits}/50; wide spheres rejected: {rejected}/{}", radii.len()),
    )
}

// ---- crop speedup ----

fn crop_speedup(dir: &Path) -> Outcome {
    let scene = bench_scene(0);
    let ply = dir.join("bench.ply");
    write_ply(&ply, &scene.cloud).map_err(|e| e.to_string())?;
    let cfg = dir.join("bench.cfg");
    std::fs::write(&cfg, "camera.pose = 1 0 0 0 -1 0 0 0 -1 0 0 1.5\ncrop.z_min = 0.8\ncrop.z_max = 1.2\n")
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_graspkit"))
        .args(["bench", "--cloud", ply.to_str().unwrap(), "--region", "260,180 380,180 380,300 260,300"])
        .args(["--config", cfg.to_str().unwrap(), "--repeat", "20"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let field = |prefix: &str, key: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(prefix))
            .and_then(|l| l.split_whitespace().find_map(|t| t.strip_prefix(key)))
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN)
    };
    let (n, inside) = (field("points=", "points="), field("points=", "in_region="));
    let (full, cropped) = (field("full ", "median_s="), field("cropped ", "median_s="));
    let same = field("speedup=", "same_cost=") == 1.0;
    let reduction = 1.0 - cropped / full;
    check(
        n == 50_000.0 && inside <= 0.2 * n && reduction >= 0.15 && same && elapsed < 60.0,
        format!(
            "{inside}/{n} points in region; median full {full:.4}s cropped {cropped:.4}s ({:.1}% faster); same cost {same}; total {elapsed:.1}s",
            100.0 * reduction
        ),
    )
}

// ---- HiLo ----

fn random_map(h: usize, w: usize, c: usize, seed: u64) -> TensorF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TensorF::new(vec![h, w, c], (0..h * w * c).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn mat64(t: &TensorF) -> (usize, Vec<f64>) {
    (*t.shape().last().unwrap(), t.data().iter().map(|&v| v as f64).collect())
}

fn mul(a: &[f64], rows: usize, k: usize, b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * m];
    for i in 0..rows {
        for j in 0..m {
            out[i * m + j] = (0..k).map(|t| a[i * k + t] * b[t * m + j]).sum();
        }
    }
    out
}

/// Dense multi-head self-attention over all tokens, in f64.
fn dense_mhsa(x: &TensorF, w: &HiLoWeights, heads: usize) -> Vec<f64> {
    let (c, xv) = mat64(x);
    let n = xv.len() / c;
    let proj = |t: &TensorF| mul(&xv, n, c, &mat64(t).1, c);
    let (q, k, v) = (proj(&w.hi_q), proj(&w.hi_k), proj(&w.hi_v));
    let hd = c / heads;
    let mut cat = vec![0.0; n * c];
    for h in 0..heads {
        for i in 0..n {
            let logits: Vec<f64> = (0..n)
                .map(|j| (0..hd).map(|d| q[i * c + h * hd + d] * k[j * c + h * hd + d]).sum::<f64>() / (hd as f64).sqrt())
                .collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let z: f64 = e.iter().sum();
            for d in 0..hd {
                cat[i * c + h * hd + d] = (0..n).map(|j| e[j] / z * v[j * c + h * hd + d]).sum();
            }
        }
    }
    mul(&cat, n, c, &mat64(&w.out).1, c)
}

fn permute_windows(x: &TensorF, s: usize, perm: &[usize]) -> TensorF {
    let (w, c) = (x.shape()[1], x.shape()[2]);
    let per_row = w / s;
    let mut out = vec![0.0f32; x.data().len()];
    for (dst, &src) in perm.iter().enumerate() {
        for dy in 0..s {
            for dx in 0..s {
                let ts = ((src / per_row) * s + dy) * w + (src % per_row) * s + dx;
                let td = ((dst / per_row) * s + dy) * w + (dst % per_row) * s + dx;
                out[td * c..(td + 1) * c].copy_from_slice(&x.data()[ts * c..(ts + 1) * c]);
            }
        }
    }
    TensorF::new(x.shape().to_vec(), out).unwrap()
}

fn hilo() -> Outcome {
    let cfg = HiLoConfig { dim: 64, n_heads: 4, alpha: 0.0, window: 4 };
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let w = HiLoWeights::random(&cfg, seed);
        let x = random_map(4, 4, 64, 1000 + seed);
        let y = hilo_forward(&x, &cfg, &w).map_err(|e| e.to_string())?;
        for (a, b) in y.data().iter().zip(dense_mhsa(&x, &w, 4)) {
            worst = worst.max((*a as f64 - b).abs());
        }
    }
    let split = HiLoConfig { dim: 32, n_heads: 4, alpha: 0.5, window: 2 };
    let mut worst_row = 0.0f64;
    let mut perm_mismatch = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let w = HiLoWeights::random(&split, seed);
        let x = random_map(4, 6, 32, seed);
        let (_, trace) = hilo_forward_traced(&x, &split, &w).map_err(|e| e.to_string())?;
        for row in trace.hi.iter().chain(&trace.lo) {
            if row.iter().any(|&p| p < 0.0) {
                worst_row = f64::INFINITY;
            }
            worst_row = worst_row.max((row.iter().map(|&p| p as f64).sum::<f64>() - 1.0).abs());
        }
        let mut perm: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let a = hi_branch(&permute_windows(&x, 2, &perm), &split, &w).map_err(|e| e.to_string())?;
        let b = permute_windows(&hi_branch(&x, &split, &w).map_err(|e| e.to_string())?, 2, &perm);
        perm_mismatch += usize::from(a != b);
    }
    check(
        worst <= 1e-5 && worst_row <= 1e-6 && perm_mismatch == 0,
        format!("dense oracle max diff {worst:.2e} over 100 seeds; max |row sum - 1| {worst_row:.2e}; window-permutation mismatches {perm_mismatch}/20"),
    )
}

// ---- regression head ----

fn regression_head() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let feat = TensorF::new(vec![FEATURE_DIM], (0..FEATURE_DIM).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
    let mut worst = 0.0f64;
    for out_dim in [5, 8] {
        let w = RegressionWeights::random(out_dim, out_dim as u64);
        let y = regression_forward(&feat, &w, out_dim).map_err(|e| e.to_string())?;
        let layer = |x: &[f64], wt: &TensorF, b: &TensorF, act: bool| -> Vec<f64> {
            let (m, wv) = mat64(wt);
            let mut h = mul(x, 1, x.len(), &wv, m);
            for (v, bi) in h.iter_mut().zip(b.data()) {
                *v += *bi as f64;
                if act && *v < 0.0 {
                    *v *= 0.1;
                }
            }
            h
        };
        let x: Vec<f64> = feat.data().iter().map(|&v| v as f64).collect();
        let h1 = layer(&x, &w.fc1_w, &w.fc1_b, true);
        let h2 = layer(&h1, &w.fc2_w, &w.fc2_b, true);
        let r = layer(&h2, &w.fc3_w, &w.fc3_b, false);
        for (a, b) in y.data().iter().zip(&r) {
            worst = worst.max((*a as f64 - b).abs());
        }
    }
    let leaky_ok = (0..10_000).all(|_| {
        let x: f32 = rng.sample::<f32, _>(StandardNormal) * 50.0;
        leaky_relu(x).to_bits() == if x >= 0.0 { x } else { 0.1f32 * x }.to_bits()
    });
    let shape_err = |w: RegressionWeights, d: usize| matches!(regression_forward(&feat, &w, d), Err(FvitError::ShapeMismatch { .. }));
    let mut bad1 = RegressionWeights::zeros(5);
    bad1.fc1_w = TensorF::zeros(vec![768, 1024]);
    let mut bad2 = RegressionWeights::zeros(5);
    bad2.fc2_w = TensorF::zeros(vec![2048, 512]);
    let shapes_ok = shape_err(bad1, 5) && shape_err(bad2, 5) && shape_err(RegressionWeights::zeros(5), 8)
        && matches!(regression_forward(&TensorF::zeros(vec![767]), &RegressionWeights::zeros(5), 5), Err(FvitError::ShapeMismatch { .. }));
    let head = HeadWeights::random(&HiLoConfig { dim: 32, n_heads: 4, alpha: 0.5, window: 2 }, 8, 4);
    let bytes = weights_to_bytes(&head);
    let round_trip = weights_from_bytes(&bytes).map(|w| weights_to_bytes(&w) == bytes && w == head).unwrap_or(false);
    check(
        worst <= 1e-5 && leaky_ok && shapes_ok && round_trip,
        format!("oracle max diff {worst:.2e}; leaky exact {leaky_ok}; shapes enforced {shapes_ok}; container byte-identical {round_trip}"),
    )
}

// ---- mini fixture ----

fn mini_fixture() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/cornell_mini");
    let out = Command::new(env!("CARGO_BIN_EXE_graspkit"))
        .args(["eval", "--pred", root.join("pred").to_str().unwrap(), "--truth", root.join("truth").to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let expected = std::fs::read_to_string(root.join("expected.txt")).map_err(|e| e.to_string())?;
    // Hand count: 0100 0101 0102 0105 0106 0108 0109 match.
    let matched: Vec<&str> = text
        .lines()
        .filter(|l| l.ends_with("matched=1"))
        .filter_map(|l| l.strip_prefix("id=").map(|r| &r[..4]))
        .collect();
    check(
        out.status.success() && text == expected && matched == ["0100", "0101", "0102", "0105", "0106", "0108", "0109"],
        format!("{} ; matched {matched:?}", text.lines().last().unwrap_or("no output")),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("rectangle metric fidelity", Box::new(rect_metric)),
        ("pinhole correctness", Box::new(pinhole)),
        ("normal estimation", Box::new(normals)),
        ("antipodal oracle", Box::new(antipodal)),
        ("crop speedup", Box::new(|| crop_speedup(dir.path()))),
        ("hilo equivalence", Box::new(hilo)),
        ("regression head", Box::new(regression_head)),
        ("mini-fixture golden evaluation", Box::new(mini_fixture)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        match f() {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
