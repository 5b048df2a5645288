use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use graspkit::antipodal::{search, AntipodalError, SearchStats, Workspace};
use graspkit::bench::{mean, median, run_bench, stddev};
use graspkit::camera::{project_polygon_region, RigidPose, WorldRegion};
use graspkit::dataset::{
    gen_box_scene, gen_cylinder_scene, gen_plane_patch, gen_sphere_scene, load_cornell_dir,
    load_predictions, read_ply, write_ply, SyntheticScene, TruthAxis,
};
use graspkit::fvit::{
    load_weights, read_tensors, regression_forward, regression_forward_f64, save_weights,
    weights_from_bytes, HeadWeights, HiLoConfig, TensorF, FEATURE_DIM,
};
use graspkit::grasp::{corners_to_rect5_with_tolerance, evaluate_dataset, GraspRect5, GraspRect8};
use nalgebra::Point2;

use crate::config::RunConfig;
use crate::{ConfigArgs, Failure, Shape};

/// Relative skew tolerated when reading hand-labeled corner rectangles.
const LABEL_RECT_TOLERANCE: f64 = 1e-2;

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    RunConfig::load(args.config.as_deref(), &args.overrides).map_err(|e| Failure::input(e.0))
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Failure::input(format!("{what}: cannot parse {t:?}")))
        })
        .collect()
}

/// Parses "x1,y1 x2,y2 ..." into pixel vertices.
pub fn parse_polygon(text: &str) -> Result<Vec<Point2<f64>>, Failure> {
    text.split_whitespace()
        .map(|pair| {
            let v = numbers(pair, "region")?;
            match v.as_slice() {
                [x, y] => Ok(Point2::new(*x, *y)),
                _ => Err(Failure::input(format!("region: expected x,y, got {pair:?}"))),
            }
        })
        .collect()
}

pub struct EvalArgs {
    pub pred: PathBuf,
    pub truth: PathBuf,
    pub jaccard: Option<f64>,
    pub angle_deg: Option<f64>,
    pub no_angle_check: bool,
    pub split: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub cfg: ConfigArgs,
}

fn read_split(path: &Path) -> Result<Vec<String>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn eval(a: EvalArgs) -> Result<(), Failure> {
    let mut rc = load_config(&a.cfg)?;
    if let Some(j) = a.jaccard {
        rc.jaccard_threshold = j;
    }
    if let Some(d) = a.angle_deg {
        rc.angle_deg = d;
    }
    if a.no_angle_check {
        rc.angle_check = false;
    }
    let cfg = rc.eval().map_err(|e| Failure::input(e.0))?;

    let to5 = |r: &GraspRect8, what: &str| {
        corners_to_rect5_with_tolerance(r, LABEL_RECT_TOLERANCE)
            .map_err(|e| Failure::input(format!("{what}: {e}")))
    };
    let mut preds: BTreeMap<String, GraspRect5> = BTreeMap::new();
    for (id, r) in load_predictions(&a.pred).map_err(|e| Failure::input(e.to_string()))? {
        let rect = to5(&r, &format!("prediction for image {id}"))?;
        preds.insert(id, rect);
    }
    let mut truths: BTreeMap<String, Vec<GraspRect5>> = BTreeMap::new();
    for set in load_cornell_dir(&a.truth).map_err(|e| Failure::input(e.to_string()))? {
        let rects = set
            .positives
            .iter()
            .map(|r| to5(r, &format!("truth for image {}", set.image_id)))
            .collect::<Result<Vec<_>, _>>()?;
        truths.insert(set.image_id, rects);
    }
    if let Some(split) = &a.split {
        let ids = read_split(split)?;
        preds.retain(|id, _| ids.contains(id));
        truths.retain(|id, _| ids.contains(id));
    }
    // Every labeled image must be scored.
    if let Some(id) = truths.keys().find(|id| !preds.contains_key(*id)) {
        return Err(Failure::input(format!(
            "{}: no prediction for image {id}",
            a.pred.display()
        )));
    }

    let report = evaluate_dataset(&preds, &truths, &cfg).map_err(|e| Failure::input(e.to_string()))?;
    let mut text = String::new();
    for r in &report.per_image {
        let _ = writeln!(
            text,
            "id={} iou={:.6} matched={}",
            r.image_id,
            r.best_iou,
            u8::from(r.matched)
        );
    }
    let _ = writeln!(text, "accuracy={:.6} n={}", report.accuracy, report.n_images);
    print!("{text}");
    if let Some(p) = &a.report {
        write_out(p, &text)?;
    }
    Ok(())
}

fn region_from(rc: &RunConfig, polygon: &str) -> Result<WorldRegion, Failure> {
    let poly = parse_polygon(polygon)?;
    let k = rc.intrinsics().map_err(|e| Failure::input(e.0))?;
    let pose = rc.pose().map_err(|e| Failure::input(e.0))?;
    let band = rc.band().map_err(|e| Failure::input(e.0))?;
    project_polygon_region(&poly, &k, &pose, &band)
        .map_err(|e| Failure::input(format!("region: {e}")))
}

fn histogram(s: &SearchStats) -> String {
    format!(
        "penetration={} no_contact={} not_antipodal={} degenerate_seeds={}",
        s.penetration, s.no_contact, s.not_antipodal, s.degenerate_seeds
    )
}

fn search_failure(e: AntipodalError) -> Failure {
    match e {
        AntipodalError::NoValidGrasp(s) => {
            Failure::no_grasp(format!("no valid grasp: {}", histogram(&s)))
        }
        AntipodalError::EmptyRegion => Failure::no_grasp(format!(
            "no valid grasp: region contains no points: {}",
            histogram(&SearchStats::default())
        )),
        other => Failure::input(other.to_string()),
    }
}

pub fn grasp(cloud: &Path, polygon: &str, out: Option<&Path>, args: &ConfigArgs) -> Result<(), Failure> {
    let rc = load_config(args)?;
    let region = region_from(&rc, polygon)?;
    let sampler = rc.sampler().map_err(|e| Failure::input(e.0))?;
    let gripper = rc.gripper().map_err(|e| Failure::input(e.0))?;
    let cloud = read_ply(cloud).map_err(|e| Failure::input(e.to_string()))?;
    let found = search(&cloud, &region, &sampler, &gripper, Workspace::Cropped)
        .map_err(search_failure)?;
    let b = &found.best;
    let pose: Vec<String> = b.pose.to_row_major().iter().map(|v| format!("{v:.12e}")).collect();
    let mut text = String::new();
    let _ = writeln!(text, "pose {}", pose.join(" "));
    let _ = writeln!(text, "cost {:.12e}", b.cost);
    let _ = writeln!(text, "seed_index {}", b.seed_index);
    let _ = writeln!(text, "orientation_index {}", b.orientation_index);
    let _ = writeln!(text, "opening {:.12e}", b.opening);
    let _ = writeln!(text, "contacts left={} right={}", b.contacts.0.len(), b.contacts.1.len());
    print!("{text}");
    if let Some(p) = out {
        write_out(p, &text)?;
    }
    Ok(())
}

pub fn bench(cloud: &Path, polygon: &str, repeat: usize, args: &ConfigArgs) -> Result<(), Failure> {
    if repeat == 0 {
        return Err(Failure::input("--repeat must be at least 1"));
    }
    let rc = load_config(args)?;
    let region = region_from(&rc, polygon)?;
    let sampler = rc.sampler().map_err(|e| Failure::input(e.0))?;
    let gripper = rc.gripper().map_err(|e| Failure::input(e.0))?;
    let cloud = read_ply(cloud).map_err(|e| Failure::input(e.to_string()))?;
    let r = run_bench(&cloud, &region, &sampler, &gripper, repeat).map_err(search_failure)?;
    println!("points={} in_region={}", r.n_points, r.n_in_region);
    for (i, (f, c)) in r.full.iter().zip(&r.cropped).enumerate() {
        println!("time repeat={i} full_s={f:.6} cropped_s={c:.6}");
    }
    for (name, t) in [("full", &r.full), ("cropped", &r.cropped)] {
        println!(
            "{name} mean_s={:.6} stddev_s={:.6} median_s={:.6}",
            mean(t),
            stddev(t),
            median(t)
        );
    }
    println!(
        "speedup={:.4} full_cost={:.12e} cropped_cost={:.12e} same_cost={}",
        r.speedup(),
        r.full_cost,
        r.cropped_cost,
        u8::from(r.full_cost == r.cropped_cost)
    );
    Ok(())
}

fn truth_text(scene: &SyntheticScene, max_opening: f64) -> String {
    let mut t = String::new();
    let v3 = |v: &nalgebra::Vector3<f64>| format!("{:.9e} {:.9e} {:.9e}", v.x, v.y, v.z);
    let (name, dims): (&str, Vec<f64>) = match scene.shape {
        graspkit::dataset::ShapeParams::Box { w, d, h } => ("box", vec![w, d, h]),
        graspkit::dataset::ShapeParams::Cylinder { radius, length } => {
            ("cylinder", vec![radius, length])
        }
        graspkit::dataset::ShapeParams::Plane { width, depth } => ("plane", vec![width, depth]),
        graspkit::dataset::ShapeParams::Sphere { radius } => ("sphere", vec![radius]),
    };
    let dims: Vec<String> = dims.iter().map(|d| format!("{d:.9e}")).collect();
    let _ = writeln!(t, "shape {name} {}", dims.join(" "));
    let _ = writeln!(t, "points {}", scene.cloud.len());
    let _ = writeln!(t, "center {}", v3(&scene.truth.center.coords));
    let _ = match scene.truth.axis {
        TruthAxis::Along(a) => writeln!(t, "axis along {}", v3(&a)),
        TruthAxis::PerpendicularTo(a) => writeln!(t, "axis perpendicular {}", v3(&a)),
        TruthAxis::Any => writeln!(t, "axis any"),
    };
    let _ = writeln!(t, "width {:.9e}", scene.truth.width);
    let _ = writeln!(t, "graspable {}", u8::from(scene.truth.graspable(max_opening)));
    if let Some(n) = scene.truth.normal {
        let _ = writeln!(t, "normal {}", v3(&n));
    }
    t
}

pub fn synth(
    shape: Shape,
    dims: &str,
    pose: Option<&str>,
    out: &Path,
    truth_out: Option<&Path>,
    args: &ConfigArgs,
) -> Result<(), Failure> {
    let rc = load_config(args)?;
    let d = numbers(dims, "dims")?;
    let pose = match pose {
        None => RigidPose::identity(),
        Some(p) => {
            let v: [f64; 12] = numbers(p, "pose")?
                .try_into()
                .map_err(|v: Vec<f64>| Failure::input(format!("pose: expected 12 numbers, got {}", v.len())))?;
            RigidPose::from_row_major(&v).map_err(|e| Failure::input(format!("pose: {e}")))?
        }
    };
    let want = |n: usize, what: &str| {
        if d.len() == n {
            Ok(())
        } else {
            Err(Failure::input(format!("dims: {what} takes {n} values, got {}", d.len())))
        }
    };
    let cfg = rc.synth;
    let scene = match shape {
        Shape::Box => {
            want(3, "box")?;
            gen_box_scene(d[0], d[1], d[2], &pose, &cfg)
        }
        Shape::Cylinder => {
            want(2, "cylinder")?;
            gen_cylinder_scene(d[0], d[1], &pose, &cfg)
        }
        Shape::Plane => {
            want(2, "plane")?;
            gen_plane_patch(d[0], d[1], &pose, &cfg)
        }
        Shape::Sphere => {
            want(1, "sphere")?;
            gen_sphere_scene(d[0], &pose, &cfg)
        }
    }
    .map_err(|e| Failure::input(e.to_string()))?;
    write_ply(out, &scene.cloud).map_err(|e| Failure::input(e.to_string()))?;
    let truth = truth_text(&scene, rc.gripper.max_opening);
    print!("{truth}");
    if let Some(p) = truth_out {
        write_out(p, &truth)?;
    }
    Ok(())
}

fn read_feature(path: &Path) -> Result<TensorF, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let body: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join(" ");
    let values = body
        .split_whitespace()
        .map(|t| {
            t.parse::<f32>()
                .map_err(|_| Failure::input(format!("{}: cannot parse {t:?}", path.display())))
        })
        .collect::<Result<Vec<f32>, _>>()?;
    if values.len() != FEATURE_DIM {
        return Err(Failure::input(format!(
            "{}: expected {FEATURE_DIM} values, found {}",
            path.display(),
            values.len()
        )));
    }
    TensorF::new(vec![FEATURE_DIM], values).map_err(|e| Failure::input(e.to_string()))
}

pub fn infer(weights: &Path, feature: &Path, out_dim: usize, check_oracle: bool) -> Result<(), Failure> {
    let w = load_weights(weights)
        .map_err(|e| Failure::input(format!("{}: {e}", weights.display())))?;
    let feat = read_feature(feature)?;
    let y = regression_forward(&feat, &w.regression, out_dim)
        .map_err(|e| Failure::input(e.to_string()))?;
    let vals: Vec<String> = y.data().iter().map(|v| format!("{v:.9e}")).collect();
    println!("output {}", vals.join(" "));
    if check_oracle {
        let r = regression_forward_f64(&feat, &w.regression, out_dim)
            .map_err(|e| Failure::input(e.to_string()))?;
        let diff = y
            .data()
            .iter()
            .zip(&r)
            .map(|(a, b)| (*a as f64 - b).abs())
            .fold(0.0, f64::max);
        println!("oracle_max_abs_diff={diff:.3e}");
    }
    Ok(())
}

pub fn weights_inspect(file: &Path) -> Result<(), Failure> {
    let bytes = fs::read(file).map_err(|e| Failure::input(format!("{}: {e}", file.display())))?;
    let tensors = read_tensors(&bytes).map_err(|e| Failure::input(format!("{}: {e}", file.display())))?;
    println!("version=1 tensors={}", tensors.len());
    for (name, t) in &tensors {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        println!("{name} {}", dims.join("x"));
    }
    weights_from_bytes(&bytes).map_err(|e| Failure::input(format!("{}: {e}", file.display())))?;
    println!("valid=1");
    Ok(())
}

pub fn weights_init(
    out: &Path,
    dim: usize,
    heads: usize,
    alpha: f64,
    out_dim: usize,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let cfg = HiLoConfig {
        dim,
        n_heads: heads,
        alpha,
        window: 1,
    };
    cfg.validate().map_err(|e| Failure::input(e.to_string()))?;
    if out_dim != 5 && out_dim != 8 {
        return Err(Failure::input(format!("--out-dim must be 5 or 8, got {out_dim}")));
    }
    let w = match seed {
        Some(s) => HeadWeights::random(&cfg, out_dim, s),
        None => HeadWeights::zeros(&cfg, out_dim),
    };
    save_weights(out, &w).map_err(|e| Failure::input(e.to_string()))
}
