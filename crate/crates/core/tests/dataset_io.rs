use std::fs;
use std::path::PathBuf;

use graspkit::camera::RigidPose;
use graspkit::dataset::{
    gen_box_scene, gen_cylinder_scene, gen_plane_patch, load_cornell_dir, parse_cornell_annotations,
    parse_cornell_rects, read_ply, read_ply_str, write_ply, write_ply_string, DatasetError,
    SynthConfig, TruthAxis,
};
use graspkit::cloud::PointCloud;
use nalgebra::{DMatrix, DVector, Point3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn small_fixture_counts() {
    let dir = fixture("cornell_small");
    let sets = load_cornell_dir(&dir).unwrap();
    assert_eq!(sets.len(), 1);
    let s = &sets[0];
    assert_eq!(s.image_id, "0100");
    assert_eq!((s.positives.len(), s.negatives.len()), (3, 2));
    assert_eq!(s.dropped_nan, 1);

    let pos = fs::read_to_string(dir.join("pcd0100cpos.txt")).unwrap();
    let neg = fs::read_to_string(dir.join("pcd0100cneg.txt")).unwrap();
    let direct = parse_cornell_annotations("0100", &pos, &neg).unwrap();
    assert_eq!(&direct, s);
}

#[test]
fn grammar_examples() {
    let eight = "0 0\n1 0\n1 1\n0 1\n2 2\n3 2\n3 3\n2 3\n";
    assert_eq!(parse_cornell_rects(eight).unwrap().rects.len(), 2);
    let nan = "0 0\nNaN NaN\n1 1\n0 1\n";
    let p = parse_cornell_rects(nan).unwrap();
    assert_eq!((p.rects.len(), p.dropped_nan), (0, 1));
    assert_eq!(
        parse_cornell_rects("0 0\n1 0\n1 1\n0 1\n5 5\n"),
        Err(DatasetError::DanglingCorners(1))
    );
    assert!(matches!(
        parse_cornell_rects("0 0\n1 0\nx 1\n0 1\n"),
        Err(DatasetError::MalformedLine { line: 3, .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn parser_is_total_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_cornell_rects(&text);
    }

    #[test]
    fn parser_errors_point_at_real_lines(
        lines in prop::collection::vec(
            prop_oneof![
                (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(x, y)| format!("{x} {y}")),
                Just("NaN NaN".to_string()),
                Just("".to_string()),
                Just("1 2 3".to_string()),
                Just("inf 0".to_string()),
                "[ -~]{0,12}",
            ],
            0..40,
        )
    ) {
        let text = lines.join("\n");
        match parse_cornell_rects(&text) {
            Ok(p) => prop_assert!(p.rects.len() * 4 <= lines.len()),
            Err(DatasetError::MalformedLine { line, .. }) => {
                prop_assert!(line >= 1 && line <= lines.len());
            }
            Err(DatasetError::InvalidRectangle { line, .. }) => {
                prop_assert!(line >= 1 && line <= lines.len());
            }
            Err(DatasetError::DanglingCorners(n)) => prop_assert!((1..4).contains(&n)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

#[test]
fn ply_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pts: Vec<Point3<f64>> = (0..1000)
        .map(|_| {
            Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let normals: Vec<Vector3<f64>> = (0..1000)
        .map(|_| Vector3::new(rng.random_range(-1.0..1.0), 1.0, 0.5).normalize())
        .collect();
    let cloud = PointCloud::with_normals(pts, normals).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ply");
    write_ply(&path, &cloud).unwrap();
    let back = read_ply(&path).unwrap();
    assert_eq!(back.len(), 1000);
    for (a, b) in cloud.points().iter().zip(back.points()) {
        assert!((a - b).amax() <= 1e-7);
    }
    for (a, b) in cloud.normals().unwrap().iter().zip(back.normals().unwrap()) {
        assert!((a - b).amax() <= 1e-7);
    }
    // Printing is a fixed point after one round.
    assert_eq!(write_ply_string(&back), write_ply_string(&read_ply_str(&write_ply_string(&back)).unwrap()));
}

#[test]
fn ply_count_mismatch_and_extra_properties() {
    let header = |n: usize| {
        format!("ply\nformat ascii 1.0\nelement vertex {n}\nproperty float x\nproperty float y\nproperty float z\nend_header\n")
    };
    let body: String = (0..9).map(|i| format!("{i} 0 0\n")).collect();
    assert!(matches!(
        read_ply_str(&(header(10) + &body)),
        Err(DatasetError::CountMismatch { declared: 10, found: 9 })
    ));

    let colored = "ply\nformat ascii 1.0\ncomment from a scanner\nelement vertex 3\n\
        property float x\nproperty uchar red\nproperty float y\nproperty uchar green\n\
        property float z\nproperty uchar blue\nelement face 1\nproperty list uchar int vertex_indices\n\
        end_header\n1 255 2 0 3 10\n4 1 5 2 6 3\n7 0 8 0 9 0\n3 0 1 2\n";
    let c = read_ply_str(colored).unwrap();
    assert_eq!(
        c.points(),
        &[Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0), Point3::new(7.0, 8.0, 9.0)]
    );
    assert!(c.normals().is_none());
}

#[test]
fn box_generator_truth() {
    let scene = gen_box_scene(0.04, 0.1, 0.1, &RigidPose::identity(), &SynthConfig::default()).unwrap();
    match scene.truth.axis {
        TruthAxis::Along(a) => assert!((a.abs() - Vector3::x()).norm() < 1e-15),
        other => panic!("unexpected axis {other:?}"),
    }
    assert_eq!(scene.truth.width, 0.04);
    assert!(scene.truth.graspable(0.08));
    let half = [0.02, 0.05, 0.05];
    for p in scene.cloud.points() {
        let on_face = (0..3).any(|a| (p[a].abs() - half[a]).abs() <= 1e-12);
        let inside = (0..3).all(|a| p[a].abs() <= half[a] + 1e-12);
        assert!(on_face && inside, "{p}");
    }
    let area = 2.0 * (0.04 * 0.1 + 0.04 * 0.1 + 0.1 * 0.1);
    let n = scene.cloud.len() as f64;
    assert!((n - 1e5 * area).abs() <= 0.05 * 1e5 * area, "{n} points");
}

#[test]
fn generators_are_deterministic() {
    let cfg = SynthConfig {
        noise_sigma: 1e-3,
        seed: 17,
        ..SynthConfig::default()
    };
    let pose = RigidPose::from_axis_angle(Vector3::new(1.0, 1.0, 0.0), 0.4, Vector3::new(0.0, 0.0, 1.0));
    assert_eq!(
        gen_box_scene(0.03, 0.1, 0.2, &pose, &cfg).unwrap(),
        gen_box_scene(0.03, 0.1, 0.2, &pose, &cfg).unwrap()
    );
    assert_eq!(
        gen_cylinder_scene(0.02, 0.1, &pose, &cfg).unwrap(),
        gen_cylinder_scene(0.02, 0.1, &pose, &cfg).unwrap()
    );
    let other = SynthConfig { seed: 18, ..cfg };
    assert_ne!(
        gen_box_scene(0.03, 0.1, 0.2, &pose, &cfg).unwrap().cloud,
        gen_box_scene(0.03, 0.1, 0.2, &pose, &other).unwrap().cloud
    );
    assert!(matches!(
        gen_box_scene(0.0, 0.1, 0.1, &pose, &cfg),
        Err(DatasetError::InvalidParams(_))
    ));
}

#[test]
fn plane_and_cylinder_truths() {
    let plane = gen_plane_patch(0.2, 0.1, &RigidPose::identity(), &SynthConfig::default()).unwrap();
    assert_eq!(plane.truth.normal, Some(Vector3::z()));
    assert!(plane.cloud.points().iter().all(|p| p.z == 0.0));
    let cyl = gen_cylinder_scene(0.015, 0.1, &RigidPose::identity(), &SynthConfig::default()).unwrap();
    assert_eq!(cyl.truth.axis, TruthAxis::PerpendicularTo(Vector3::z()));
    assert_eq!(cyl.truth.width, 0.03);
    assert!(cyl.truth.axis_error(&Vector3::x()) < 1e-15);
    assert!((cyl.truth.axis_error(&Vector3::z()) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn noisy_cylinder_radius_by_circle_fit() {
    let (radius, length, sigma) = (0.015, 0.12, 0.001);
    let scene = gen_cylinder_scene(
        radius,
        length,
        &RigidPose::identity(),
        &SynthConfig {
            noise_sigma: sigma,
            seed: 4,
            ..SynthConfig::default()
        },
    )
    .unwrap();
    // Side wall only: the caps sit at |z| = length/2.
    let side: Vec<&Point3<f64>> = scene
        .cloud
        .points()
        .iter()
        .filter(|p| p.z.abs() < length / 2.0 - 5.0 * sigma)
        .collect();
    // Algebraic circle fit: x² + y² + D x + E y + F = 0 in least squares.
    let a = DMatrix::from_fn(side.len(), 3, |i, j| [side[i].x, side[i].y, 1.0][j]);
    let b = DVector::from_fn(side.len(), |i, _| -(side[i].x.powi(2) + side[i].y.powi(2)));
    let sol = a.svd(true, true).solve(&b, 1e-15).unwrap();
    let (d, e, f) = (sol[0], sol[1], sol[2]);
    let fitted = (d * d / 4.0 + e * e / 4.0 - f).sqrt();
    assert!((fitted - radius).abs() <= 0.05 * radius, "fitted radius {fitted}");
}
