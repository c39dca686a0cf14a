mod common;

use cosy::evaluation::{
    add_error, add_s_auc, adds_error, average_precision, evaluate, map_adds, nms_3d,
    recall_at_fraction_of_diameter, GroundTruthPose, NmsEntry, PosePrediction, AUC_MAX_THRESHOLD,
};
use cosy::simulation::random_rotation;
use cosy::{PointSet, Pose};
use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_pose(r: &mut ChaCha8Rng, spread: f64) -> Pose {
    Pose::new(random_rotation(r), Vector3::from_fn(|_, _| r.random_range(-spread..spread)))
}

fn random_points(r: &mut ChaCha8Rng, n: usize) -> PointSet {
    PointSet::new((0..n).map(|_| Point3::from(Vector3::from_fn(|_, _| r.random_range(-0.1..0.1)))).collect()).unwrap()
}

#[test]
fn add_and_adds_match_loops() {
    let mut r = common::rng(1);
    for _ in 0..100 {
        let n = r.random_range(1..40);
        let pts = random_points(&mut r, n);
        let (a, b) = (random_pose(&mut r, 0.2), random_pose(&mut r, 0.2));
        let mut add = 0.0;
        let mut adds = 0.0;
        for x in pts.iter() {
            let g = b.transform_point(x);
            add += (a.transform_point(x) - g).norm();
            let mut best = f64::INFINITY;
            for y in pts.iter() {
                let d = (a.transform_point(y) - g).norm_squared();
                if d < best {
                    best = d;
                }
            }
            adds += best.sqrt();
        }
        assert_eq!(add_error(&pts, &a, &b), add / n as f64);
        assert_eq!(adds_error(&pts, &a, &b), adds / n as f64);
        assert!(adds_error(&pts, &a, &b) <= add_error(&pts, &a, &b));
    }
}

/// Exact area under the empirical accuracy curve, integrated piecewise
/// between sorted breakpoints.
fn auc_oracle(errors: &[f64], max: f64) -> f64 {
    let mut e: Vec<f64> = errors.iter().map(|x| x.min(max)).collect();
    e.sort_by(f64::total_cmp);
    let n = e.len() as f64;
    let mut area = 0.0;
    for i in 0..e.len() {
        let next = if i + 1 < e.len() { e[i + 1] } else { max };
        area += (i + 1) as f64 / n * (next - e[i]);
    }
    area / max
}

#[test]
fn auc_matches_piecewise_integral() {
    let mut r = common::rng(2);
    for _ in 0..100 {
        let n = r.random_range(1..30);
        let errors: Vec<f64> = (0..n).map(|_| r.random_range(0.0..0.15)).collect();
        let got = add_s_auc(&errors, AUC_MAX_THRESHOLD);
        // the two formulations round differently
        assert!((got - auc_oracle(&errors, AUC_MAX_THRESHOLD)).abs() < 1e-12);
    }
    assert_eq!(add_s_auc(&[0.0; 7], AUC_MAX_THRESHOLD), 1.0);
    assert_eq!(add_s_auc(&[0.1, 0.2, 5.0], AUC_MAX_THRESHOLD), 0.0);
    assert_eq!(add_s_auc(&[0.05], AUC_MAX_THRESHOLD), 0.5);
}

#[test]
fn recall_matches_count() {
    let mut r = common::rng(3);
    for _ in 0..100 {
        let n = r.random_range(1..30);
        let e: Vec<f64> = (0..n).map(|_| r.random_range(0.0..0.05)).collect();
        let d: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.3)).collect();
        let mut hits = 0;
        for i in 0..n {
            if e[i] < 0.1 * d[i] {
                hits += 1;
            }
        }
        assert_eq!(recall_at_fraction_of_diameter(&e, &d, 0.1), hits as f64 / n as f64);
    }
}

/// All-points AP: at each rank where recall rises, take the best precision
/// at any rank at or after it.
fn ap_oracle(hits: &[bool], n_gt: usize) -> f64 {
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..hits.len() {
        let tp_k = hits[..=k].iter().filter(|h| **h).count();
        let recall = tp_k as f64 / n_gt as f64;
        let mut best = 0.0f64;
        for j in k..hits.len() {
            let tp_j = hits[..=j].iter().filter(|h| **h).count();
            best = best.max(tp_j as f64 / (j + 1) as f64);
        }
        ap += (recall - prev_recall) * best;
        prev_recall = recall;
    }
    ap
}

#[test]
fn average_precision_matches_envelope_oracle() {
    let mut r = common::rng(4);
    for _ in 0..100 {
        let n = r.random_range(0..20);
        let hits: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let n_gt = hits.iter().filter(|h| **h).count() + r.random_range(0..4);
        if n_gt == 0 {
            assert_eq!(average_precision(&hits, 0), 0.0);
            continue;
        }
        assert_eq!(average_precision(&hits, n_gt), ap_oracle(&hits, n_gt));
    }
    assert_eq!(average_precision(&[true, true], 2), 1.0);
    assert_eq!(average_precision(&[false, true], 1), 0.5);
}

#[test]
fn map_matches_oracle_on_random_instances() {
    let db = common::db();
    let labels = ["mug", "can", "sugar_box"];
    let mut r = common::rng(5);
    for _ in 0..100 {
        let mut gts = Vec::new();
        let mut preds = Vec::new();
        for v in 0..2 {
            for l in labels {
                for _ in 0..r.random_range(0..3) {
                    let pose = random_pose(&mut r, 0.3);
                    gts.push(GroundTruthPose { view_id: format!("v{v}"), label: l.into(), pose });
                    if r.random_bool(0.7) {
                        let t = Vector3::from_fn(|_, _| r.random_range(-0.01..0.01));
                        preds.push(PosePrediction {
                            view_id: format!("v{v}"),
                            label: l.into(),
                            score: (r.random_range(0..5) as f64) / 4.0,
                            pose: Pose::new(pose.rotation, pose.translation + t),
                        });
                    }
                }
                for _ in 0..r.random_range(0..2) {
                    preds.push(PosePrediction {
                        view_id: format!("v{v}"),
                        label: l.into(),
                        score: r.random_range(0.0..1.0),
                        pose: random_pose(&mut r, 0.3),
                    });
                }
            }
        }
        let (per_label, mean) = map_adds(&preds, &gts, &db, 0.1);

        // oracle: independent greedy assignment per label
        let mut aps = Vec::new();
        for l in labels {
            let model = db.get(l).unwrap();
            let symmetric = l != "mug";
            let g_idx: Vec<usize> = (0..gts.len()).filter(|&i| gts[i].label == l).collect();
            if g_idx.is_empty() {
                assert!(!per_label.contains_key(l));
                continue;
            }
            let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].label == l).collect();
            order.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).unwrap().then(a.cmp(&b)));
            let mut taken = vec![false; gts.len()];
            let mut hits = Vec::new();
            for p in order {
                let mut best = (usize::MAX, f64::INFINITY);
                for &g in &g_idx {
                    if taken[g] || gts[g].view_id != preds[p].view_id {
                        continue;
                    }
                    let e = if symmetric {
                        adds_error(&model.points, &preds[p].pose, &gts[g].pose)
                    } else {
                        add_error(&model.points, &preds[p].pose, &gts[g].pose)
                    };
                    if e < best.1 {
                        best = (g, e);
                    }
                }
                let hit = best.0 != usize::MAX && best.1 < 0.1 * model.diameter;
                if hit {
                    taken[best.0] = true;
                }
                hits.push(hit);
            }
            let ap = ap_oracle(&hits, g_idx.len());
            assert_eq!(per_label[l], ap, "label {l}");
            aps.push(ap);
        }
        if aps.is_empty() {
            assert_eq!(mean, 0.0);
        } else {
            assert_eq!(mean, aps.iter().sum::<f64>() / aps.len() as f64);
        }
    }
}

#[test]
fn nms_matches_greedy_oracle() {
    let mut r = common::rng(6);
    for _ in 0..100 {
        let n = r.random_range(0..25);
        let entries: Vec<NmsEntry> = (0..n)
            .map(|id| NmsEntry {
                id,
                position: Point3::from(Vector3::from_fn(|_, _| r.random_range(0.0..0.06))),
                score: r.random_range(0..6) as f64,
            })
            .collect();
        let radius = 0.02;
        let kept = nms_3d(&entries, radius);
        // oracle: repeatedly take the best remaining entry and drop its neighbours
        let mut alive: Vec<bool> = vec![true; n];
        let mut oracle = Vec::new();
        loop {
            let mut best: Option<usize> = None;
            for i in 0..n {
                if alive[i] && best.is_none_or(|b| entries[i].score > entries[b].score) {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            oracle.push(entries[b].id);
            for i in 0..n {
                if (entries[i].position - entries[b].position).norm() < radius {
                    alive[i] = false;
                }
            }
        }
        oracle.sort();
        assert_eq!(kept, oracle);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                assert!((entries[*a].position - entries[*b].position).norm() >= radius);
            }
        }
    }
}

#[test]
fn perfect_predictions_score_perfectly() {
    let db = common::db();
    let mut r = common::rng(7);
    let labels: Vec<String> = db.labels().map(String::from).collect();
    let gts: Vec<GroundTruthPose> = (0..20)
        .map(|i| GroundTruthPose {
            view_id: format!("v{}", i % 3),
            label: labels[i % labels.len()].clone(),
            pose: random_pose(&mut r, 0.5),
        })
        .collect();
    let preds: Vec<PosePrediction> = gts
        .iter()
        .map(|g| PosePrediction { view_id: g.view_id.clone(), label: g.label.clone(), score: 1.0, pose: g.pose })
        .collect();
    let rep = evaluate(&preds, &gts, &db);
    assert_eq!(rep.aggregate.auc_adds, 1.0);
    assert_eq!(rep.aggregate.recall_0p1d, 1.0);
    assert_eq!(rep.aggregate.map_adds, 1.0);
    assert_eq!(rep.aggregate.matched, 20);
    assert_eq!(rep.aggregate.adds, 0.0);

    let none = evaluate(&[], &gts, &db);
    assert_eq!(none.aggregate.auc_adds, 0.0);
    assert_eq!(none.aggregate.unmatched_gt, 20);
}
