mod common;

use cosy::geometry::{exp_so3, retract, rotation_from_6d, rotation_to_6d};
use cosy::scene_io::{filter_by_score, parse_json, to_json_string, ModelsFile, ObservationsFile};
use cosy::seeding::rng_for;
use cosy::simulation::{generate_observations, generate_scene, random_rotation, NoiseModel, ScenarioConfig};
use cosy::symmetry::{symmetric_distance, SymmetryGroup};
use cosy::{PointSet, Pose};
use nalgebra::{Point2, Point3, Vector3, Vector6};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pose_from_seed(seed: u64) -> Pose {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let t = Vector3::from_fn(|_, _| rand::Rng::random_range(&mut r, -0.5..0.5));
    Pose::new(random_rotation(&mut r), t)
}

/// `S` belongs to `group` up to the dedup tolerance on the model's ball.
fn contains(group: &SymmetryGroup, s: &Pose, radius: f64) -> bool {
    group.elements().iter().any(|e| {
        (e.rotation.matrix() - s.rotation.matrix()).norm() * radius + (e.translation - s.translation).norm() < 1e-9
    })
}

#[test]
fn group_axioms_hold_for_library_groups() {
    let cat = common::catalog();
    let mut r = common::rng(11);
    let mut checked = 0;
    for pm in cat.iter().filter(|p| p.is_symmetric()) {
        let g = pm.group();
        let radius = pm.model.points.radius();
        assert!(contains(g, &Pose::identity(), radius));
        for _ in 0..200 {
            let a = g.elements()[rand::Rng::random_range(&mut r, 0..g.len())];
            let b = g.elements()[rand::Rng::random_range(&mut r, 0..g.len())];
            assert!(contains(g, &a.compose(&b), radius));
            assert!(contains(g, &a.inverse(), radius));
            checked += 1;
        }
    }
    assert!(checked >= 1000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn six_d_is_orthonormal(a in prop::array::uniform3(-2.0..2.0f64), b in prop::array::uniform3(-2.0..2.0f64)) {
        let (e1, e2) = (Vector3::from(a), Vector3::from(b));
        prop_assume!(e1.norm() > 1e-3 && e1.normalize().cross(&e2).norm() > 1e-3);
        let r = rotation_from_6d(&e1, &e2).unwrap();
        let m = r.matrix();
        prop_assert!((m.transpose() * m - nalgebra::Matrix3::identity()).norm() < 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        // first column along e1, second in span(e1, e2)
        prop_assert!((m.column(0) - e1.normalize()).norm() < 1e-12);
        prop_assert!(m.column(1).dot(&e1.cross(&e2)).abs() < 1e-9);
    }

    #[test]
    fn six_d_round_trip(seed in any::<u64>()) {
        let r = pose_from_seed(seed).rotation;
        let (e1, e2) = rotation_to_6d(&r);
        let back = rotation_from_6d(&e1, &e2).unwrap();
        prop_assert!((back.matrix() - r.matrix()).norm() < 1e-9);
    }

    #[test]
    fn project_unproject(u in 0.0..640.0f64, v in 0.0..480.0f64, z in 0.05..20.0f64) {
        let k = common::intrinsics();
        let p = k.unproject(&Point2::new(u, v), z);
        prop_assert!((p.z - z).abs() < 1e-12);
        let back = k.project_point(&p, 1e-3).unwrap();
        prop_assert!((back - Point2::new(u, v)).norm() < 1e-9);
    }

    #[test]
    fn retraction_is_locally_injective(seed in any::<u64>(), d in prop::array::uniform6(-0.5..0.5f64), e in prop::array::uniform6(-0.5..0.5f64)) {
        let t = pose_from_seed(seed);
        let (d, e) = (Vector6::from_row_slice(&d), Vector6::from_row_slice(&e));
        prop_assume!((d - e).norm() > 1e-6);
        let (a, b) = (retract(&t, &d), retract(&t, &e));
        let diff = (a.rotation.matrix() - b.rotation.matrix()).norm() + (a.translation - b.translation).norm();
        prop_assert!(diff > 0.0);
        // zero increment is the identity map
        prop_assert_eq!(retract(&t, &Vector6::zeros()), t);
        // rotation part is exp on the left
        let w = Vector3::new(d[0], d[1], d[2]);
        prop_assert!((a.rotation.matrix() - (exp_so3(&w) * t.rotation).matrix()).norm() < 1e-12);
    }

    #[test]
    fn symmetric_distance_is_group_invariant(seed in any::<u64>(), which in 0usize..10, k in any::<prop::sample::Index>()) {
        let cat = common::catalog();
        let pm = cat.iter().nth(which).unwrap();
        let (t1, t2) = (pose_from_seed(seed), pose_from_seed(seed ^ 0x9e37));
        let s = pm.group().elements()[k.index(pm.group().len())];
        let base = symmetric_distance(&pm.model.points, pm.group(), &t1, &t2);
        let moved = symmetric_distance(&pm.model.points, pm.group(), &t1.compose(&s), &t2);
        prop_assert!((base - moved).abs() <= 1e-9 * base.max(1e-12));
        prop_assert!(base >= 0.0);
        prop_assert!(symmetric_distance(&pm.model.points, pm.group(), &t1, &t1) < 1e-12);
    }

    #[test]
    fn filter_is_idempotent_and_monotone(seed in 0u64..50, lo in 0.0..1.0f64, hi in 0.0..1.0f64) {
        let db = common::db();
        let cat = common::catalog();
        let scene = generate_scene(&ScenarioConfig::default(), &db, &mut rng_for(seed, &["s"])).unwrap();
        let noise = NoiseModel { true_score_range: [0.0, 1.0], outlier_score_range: [0.0, 1.0], ..NoiseModel::default() };
        let (obs, _) = generate_observations(&scene, &cat, &noise, &mut rng_for(seed, &["o"])).unwrap();
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let once = filter_by_score(&obs, lo);
        prop_assert_eq!(&filter_by_score(&once, lo), &once);
        prop_assert!(filter_by_score(&obs, hi).candidates.len() <= once.candidates.len());
        prop_assert!(once.candidates.iter().all(|c| c.score > lo));
    }
}

#[test]
fn observations_round_trip_bit_exact() {
    let db = common::db();
    let cat = common::catalog();
    for seed in 0..20 {
        let scene = generate_scene(&ScenarioConfig::default(), &db, &mut rng_for(seed, &["s"])).unwrap();
        let (obs, _) = generate_observations(&scene, &cat, &NoiseModel::default(), &mut rng_for(seed, &["o"])).unwrap();
        let text = to_json_string(&ObservationsFile::from_observations(&obs));
        let back = parse_json::<ObservationsFile>(&text).unwrap().to_observations(&db).unwrap();
        assert_eq!(back, obs);
        assert_eq!(to_json_string(&ObservationsFile::from_observations(&back)), text);
    }
    let text = to_json_string(&ModelsFile::from_db(&db));
    let back = parse_json::<ModelsFile>(&text).unwrap().to_db().unwrap();
    assert_eq!(to_json_string(&ModelsFile::from_db(&back)), text);
}

#[test]
fn symmetric_distance_matches_double_loop() {
    let cat = common::catalog();
    for seed in 0..200u64 {
        let pm = cat.iter().nth((seed % 10) as usize).unwrap();
        let (t1, t2) = (pose_from_seed(seed), pose_from_seed(seed + 1000));
        let pts: &PointSet = &pm.model.points;
        let mut best = f64::INFINITY;
        for s in pm.group().elements() {
            let mut sum = 0.0;
            for x in pts.iter() {
                let a: Point3<f64> = t1.transform_point(&s.transform_point(x));
                sum += (a - t2.transform_point(x)).norm();
            }
            best = best.min(sum / pts.len() as f64);
        }
        let got = symmetric_distance(pts, pm.group(), &t1, &t2);
        assert_eq!(got, best);
    }
}
