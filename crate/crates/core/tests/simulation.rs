mod common;

use cosy::seeding::rng_for;
use cosy::simulation::{generate_observations, generate_scene, look_at, random_rotation, NoiseModel, ScenarioConfig};
use nalgebra::{Matrix3, Point3, Vector3};
use rand::Rng;

#[test]
fn scenes_stay_inside_their_box() {
    let db = common::db();
    let cfg = ScenarioConfig::default();
    let half = cfg.box_size / 2.0;
    let mut sum = Vector3::zeros();
    let mut sq = Vector3::zeros();
    let mut n = 0.0;
    for seed in 0..1000 {
        let s = generate_scene(&cfg, &db, &mut rng_for(seed, &["scene"])).unwrap();
        assert_eq!(s.objects.len(), cfg.n_objects);
        let mut labels: Vec<&str> = s.objects.iter().map(|o| o.label.as_str()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), cfg.n_objects, "labels unique");
        for o in &s.objects {
            let t = o.pose.translation;
            assert!(t.iter().all(|c| c.abs() <= half));
            sum += t;
            sq += t.component_mul(&t);
            n += 1.0;
        }
        for c in &s.cameras {
            let d = c.pose.translation.norm();
            assert!(d >= cfg.camera_distance_range[0] - 1e-12 && d <= cfg.camera_distance_range[1] + 1e-12);
            // optical axis through the origin
            let axis = c.pose.rotation * Vector3::z();
            assert!(axis.cross(&(-c.pose.translation)).norm() < 1e-9);
            assert!(axis.dot(&c.pose.translation) < 0.0);
            let m = c.pose.rotation.matrix();
            assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            assert!(c.pose.translation.z > 0.0);
        }
    }
    // uniform on [-h, h]: mean 0, variance h^2/3 (separation rejection biases it slightly)
    let mean = sum / n;
    let var = sq / n - mean.component_mul(&mean);
    for i in 0..3 {
        assert!(mean[i].abs() < 0.01, "mean {mean}");
        assert!((var[i] / (half * half / 3.0) - 1.0).abs() < 0.1, "variance {var}");
    }
}

#[test]
fn random_rotations_have_zero_mean() {
    let mut r = common::rng(3);
    let n = 20000;
    let mut acc = Matrix3::zeros();
    for _ in 0..n {
        acc += random_rotation(&mut r).matrix();
    }
    // Haar measure: E[R] = 0, entries have variance 1/3
    assert!((acc / n as f64).amax() < 4.0 * (1.0f64 / 3.0 / n as f64).sqrt() * 1.5);
}

#[test]
fn look_at_keeps_image_y_away_from_world_up() {
    let p = look_at(Point3::new(1.0, 0.0, 0.5), Point3::origin(), 0.0);
    let y = p.rotation * Vector3::y();
    assert!(y.z < 0.0);
    let x = p.rotation * Vector3::x();
    assert!(x.z.abs() < 1e-12);
}

#[test]
fn noise_statistics_match_the_model() {
    let db = common::db();
    let cat = common::catalog();
    let noise = NoiseModel {
        rot_sigma: 5.0,
        trans_sigma: 0.005,
        depth_sigma_extra: 0.01,
        miss_prob: 0.2,
        outlier_prob: 0.0,
        symmetry_ambiguity: false,
        ..NoiseModel::noiseless()
    };
    let (mut dx, mut dz, mut ang) = (Vec::new(), Vec::new(), Vec::new());
    let (mut visible, mut seen) = (0usize, 0usize);
    for seed in 0..300 {
        let s = generate_scene(&ScenarioConfig::default(), &db, &mut rng_for(seed, &["s"])).unwrap();
        let (obs, prov) = generate_observations(&s, &cat, &noise, &mut rng_for(seed, &["o"])).unwrap();
        for ci in 0..s.cameras.len() {
            visible += s.visible_objects(ci).len();
        }
        for (c, p) in obs.candidates.iter().zip(&prov) {
            let o = p.expect("no outliers");
            let ci = obs.views.iter().position(|v| v.view_id == c.view_id).unwrap();
            let gt = s.camera_frame_pose(ci, o);
            assert_eq!(c.label, s.objects[o].label);
            let d = c.pose.translation - gt.translation;
            dx.push(d.x);
            dx.push(d.y);
            dz.push(d.z);
            ang.push((c.pose.rotation * gt.rotation.inverse()).angle());
            seen += 1;
        }
    }
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    assert!((rms(&dx) / 0.005 - 1.0).abs() < 0.05, "xy rms {}", rms(&dx));
    let z_expected = (0.005f64.powi(2) + 0.01f64.powi(2)).sqrt();
    assert!((rms(&dz) / z_expected - 1.0).abs() < 0.05, "z rms {}", rms(&dz));
    assert!((rms(&ang) / 5f64.to_radians() - 1.0).abs() < 0.05, "angle rms {}", rms(&ang));
    let miss = 1.0 - seen as f64 / visible as f64;
    assert!((miss - 0.2).abs() < 0.02, "miss rate {miss}");
}

#[test]
fn outliers_are_labelled_none_and_rate_matches() {
    let db = common::db();
    let cat = common::catalog();
    let noise = NoiseModel { outlier_prob: 0.3, ..NoiseModel::noiseless() };
    let (mut outliers, mut visible) = (0usize, 0usize);
    for seed in 0..300 {
        let s = generate_scene(&ScenarioConfig::default(), &db, &mut rng_for(seed, &["s"])).unwrap();
        let (obs, prov) = generate_observations(&s, &cat, &noise, &mut rng_for(seed, &["o"])).unwrap();
        visible += (0..s.cameras.len()).map(|c| s.visible_objects(c).len()).sum::<usize>();
        outliers += prov.iter().filter(|p| p.is_none()).count();
        for (c, p) in obs.candidates.iter().zip(&prov) {
            let k = &obs.view(&c.view_id).unwrap().intrinsics;
            assert!(c.pose.translation.z > 0.0);
            if p.is_none() {
                assert!(k.contains(&k.project_unchecked(&Point3::from(c.pose.translation))));
            }
        }
    }
    let rate = outliers as f64 / visible as f64;
    assert!((rate - 0.3).abs() < 0.02, "outlier rate {rate}");
}

#[test]
fn symmetric_ambiguity_stays_within_the_group() {
    let db = common::db();
    let cat = common::catalog();
    let noise = NoiseModel::noiseless();
    let mut r = common::rng(1);
    for _ in 0..20 {
        let seed = r.random_range(0..u64::MAX);
        let s = generate_scene(&ScenarioConfig::default(), &db, &mut rng_for(seed, &["s"])).unwrap();
        let (obs, prov) = generate_observations(&s, &cat, &noise, &mut rng_for(seed, &["o"])).unwrap();
        for (c, p) in obs.candidates.iter().zip(&prov) {
            let o = p.unwrap();
            let ci = obs.views.iter().position(|v| v.view_id == c.view_id).unwrap();
            let gt = s.camera_frame_pose(ci, o);
            let pm = cat.model(&c.label);
            let d = cosy::symmetry::symmetric_distance(&pm.model.points, pm.group(), &c.pose, &gt);
            assert!(d < 1e-9);
        }
    }
}
