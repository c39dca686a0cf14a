//! Pose-accuracy metrics (ADD, ADD-S, AUC, recall at a fraction of the
//! diameter, detection-style mAP) and 3D non-maximum suppression.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::{PointSet, Pose};
use crate::scene_io::ModelDb;

/// Upper bound of the AUC threshold range, meters.
pub const AUC_MAX_THRESHOLD: f64 = 0.10;
/// Default fraction of the diameter for recall and mAP.
pub const DIAMETER_FRACTION: f64 = 0.1;
/// Default 3D NMS radius, meters.
pub const NMS_RADIUS: f64 = 0.02;

/// Mean distance between corresponding model points.
pub fn add_error(points: &PointSet, t_pred: &Pose, t_gt: &Pose) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|x| (t_pred.transform_point(x) - t_gt.transform_point(x)).norm())
        .sum();
    sum / points.len() as f64
}

/// Mean over ground-truth points of the distance to the closest predicted point.
pub fn adds_error(points: &PointSet, t_pred: &Pose, t_gt: &Pose) -> f64 {
    let pred: Vec<Point3<f64>> = points.iter().map(|x| t_pred.transform_point(x)).collect();
    let sum: f64 = points
        .iter()
        .map(|x| {
            let g = t_gt.transform_point(x);
            pred.iter()
                .map(|p| (p - g).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    sum / points.len() as f64
}

/// ADD for asymmetric models, ADD-S for models with a non-trivial group.
pub fn pose_error(points: &PointSet, symmetric: bool, t_pred: &Pose, t_gt: &Pose) -> f64 {
    if symmetric {
        adds_error(points, t_pred, t_gt)
    } else {
        add_error(points, t_pred, t_gt)
    }
}

/// Area under the accuracy-threshold curve for thresholds in `[0, max]`,
/// normalized to `[0, 1]`. Exact: `(1/n) Σ max(0, max − e) / max`.
pub fn add_s_auc(errors: &[f64], max_threshold: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let sum: f64 = errors
        .iter()
        .map(|e| (max_threshold - e).max(0.0) / max_threshold)
        .sum();
    sum / errors.len() as f64
}

/// Fraction of errors strictly below `fraction · diameter`.
pub fn recall_at_fraction_of_diameter(errors: &[f64], diameters: &[f64], fraction: f64) -> f64 {
    assert_eq!(errors.len(), diameters.len(), "errors and diameters differ in length");
    if errors.is_empty() {
        return 0.0;
    }
    let hits = errors
        .iter()
        .zip(diameters)
        .filter(|(e, d)| **e < fraction * **d)
        .count();
    hits as f64 / errors.len() as f64
}

/// A camera-frame pose estimate to be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct PosePrediction {
    pub view_id: String,
    pub label: String,
    pub score: f64,
    pub pose: Pose,
}

/// A ground-truth object instance in one view.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPose {
    pub view_id: String,
    pub label: String,
    pub pose: Pose,
}

/// Average precision from a ranked list of true/false positives, all-points
/// interpolation.
pub fn average_precision(ranked_hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(ranked_hits.len());
    let mut recall = Vec::with_capacity(ranked_hits.len());
    let mut tp = 0usize;
    for (i, &hit) in ranked_hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    // envelope: precision at recall r is the best precision at recall >= r
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

/// Per label: predictions by descending score (input order on ties), each
/// matched to the unmatched same-view ground truth of lowest error, a true
/// positive when that error is below `fraction · diameter`. Returns the
/// per-label AP and their mean over labels present in the ground truth.
pub fn map_adds(
    preds: &[PosePrediction],
    gts: &[GroundTruthPose],
    db: &ModelDb,
    fraction: f64,
) -> (BTreeMap<String, f64>, f64) {
    let labels: BTreeSet<&str> = gts.iter().map(|g| g.label.as_str()).collect();
    let mut per_label = BTreeMap::new();
    for label in &labels {
        let model = db.get(label).expect("ground-truth label in model db");
        let symmetric = model.symmetries.discrete.len() > 1 || !model.symmetries.continuous_axes.is_empty();
        let gt_idx: Vec<usize> = (0..gts.len()).filter(|&i| gts[i].label == *label).collect();
        let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].label == *label).collect();
        order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));

        let mut used = vec![false; gts.len()];
        let mut hits = Vec::with_capacity(order.len());
        for &p in &order {
            let mut best: Option<(usize, f64)> = None;
            for &g in &gt_idx {
                if used[g] || gts[g].view_id != preds[p].view_id {
                    continue;
                }
                let e = pose_error(&model.points, symmetric, &preds[p].pose, &gts[g].pose);
                if best.is_none_or(|(_, be)| e < be) {
                    best = Some((g, e));
                }
            }
            match best {
                Some((g, e)) if e < fraction * model.diameter => {
                    used[g] = true;
                    hits.push(true);
                }
                _ => hits.push(false),
            }
        }
        per_label.insert(label.to_string(), average_precision(&hits, gt_idx.len()));
    }
    let mean = if per_label.is_empty() {
        0.0
    } else {
        per_label.values().sum::<f64>() / per_label.len() as f64
    };
    (per_label, mean)
}

/// An object considered by [`nms_3d`]: world position and aggregate score.
#[derive(Debug, Clone, PartialEq)]
pub struct NmsEntry {
    pub id: usize,
    pub position: Point3<f64>,
    pub score: f64,
}

/// Greedy suppression by descending score (lower id first on ties): an
/// entry closer than `radius` to an already kept one is dropped. Returns the
/// kept ids in ascending order.
pub fn nms_3d(entries: &[NmsEntry], radius: f64) -> Vec<usize> {
    let mut order: Vec<&NmsEntry> = entries.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    let mut kept: Vec<&NmsEntry> = Vec::new();
    for e in order {
        if kept.iter().all(|k| (k.position - e.position).norm() >= radius) {
            kept.push(e);
        }
    }
    let mut ids: Vec<usize> = kept.iter().map(|e| e.id).collect();
    ids.sort_unstable();
    ids
}

/// Aggregate metrics for one label, or over all labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMetrics {
    /// Mean ADD over matched ground truths, meters.
    pub add: f64,
    /// Mean ADD-S over matched ground truths, meters.
    pub adds: f64,
    pub auc_adds: f64,
    pub recall_0p1d: f64,
    pub map_adds: f64,
    pub n_gt: usize,
    pub n_pred: usize,
    pub matched: usize,
    pub unmatched_gt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub per_label: BTreeMap<String, LabelMetrics>,
    /// Means over labels for rates; means over matches for errors.
    pub aggregate: LabelMetrics,
}

/// One ground truth's best prediction: per (view, label), pairs are taken
/// greedily in ascending ADD-S so each prediction serves one ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GtMatch {
    pub gt: usize,
    pub pred: Option<usize>,
    pub add: f64,
    pub adds: f64,
}

pub fn match_predictions(preds: &[PosePrediction], gts: &[GroundTruthPose], db: &ModelDb) -> Vec<GtMatch> {
    let mut groups: BTreeMap<(&str, &str), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        groups.entry((&g.view_id, &g.label)).or_default().0.push(i);
    }
    for (i, p) in preds.iter().enumerate() {
        if let Some(e) = groups.get_mut(&(p.view_id.as_str(), p.label.as_str())) {
            e.1.push(i);
        }
    }
    let mut out: Vec<GtMatch> = (0..gts.len())
        .map(|gt| GtMatch {
            gt,
            pred: None,
            add: f64::INFINITY,
            adds: f64::INFINITY,
        })
        .collect();
    for ((_, label), (g_idx, p_idx)) in groups {
        let model = db.get(label).expect("ground-truth label in model db");
        let mut pairs = Vec::new();
        for &g in &g_idx {
            for &p in &p_idx {
                pairs.push((adds_error(&model.points, &preds[p].pose, &gts[g].pose), g, p));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut used_p = BTreeSet::new();
        for (e, g, p) in pairs {
            if out[g].pred.is_some() || used_p.contains(&p) {
                continue;
            }
            used_p.insert(p);
            out[g] = GtMatch {
                gt: g,
                pred: Some(p),
                add: add_error(&model.points, &preds[p].pose, &gts[g].pose),
                adds: e,
            };
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Full metric report. Unmatched ground truths count with infinite error in
/// AUC and recall.
pub fn evaluate(preds: &[PosePrediction], gts: &[GroundTruthPose], db: &ModelDb) -> MetricReport {
    let matches = match_predictions(preds, gts, db);
    let (ap, map) = map_adds(preds, gts, db, DIAMETER_FRACTION);
    let labels: BTreeSet<&str> = gts.iter().map(|g| g.label.as_str()).collect();
    let mut per_label = BTreeMap::new();
    let (mut all_add, mut all_adds) = (Vec::new(), Vec::new());
    for label in labels {
        let d = db.get(label).expect("label in db").diameter;
        let mine: Vec<&GtMatch> = matches.iter().filter(|m| gts[m.gt].label == label).collect();
        let matched: Vec<&&GtMatch> = mine.iter().filter(|m| m.pred.is_some()).collect();
        let add: Vec<f64> = matched.iter().map(|m| m.add).collect();
        let adds: Vec<f64> = matched.iter().map(|m| m.adds).collect();
        let errors: Vec<f64> = mine.iter().map(|m| m.adds).collect();
        all_add.extend(&add);
        all_adds.extend(&adds);
        per_label.insert(
            label.to_string(),
            LabelMetrics {
                add: mean(&add),
                adds: mean(&adds),
                auc_adds: add_s_auc(&errors, AUC_MAX_THRESHOLD),
                recall_0p1d: recall_at_fraction_of_diameter(&errors, &vec![d; errors.len()], DIAMETER_FRACTION),
                map_adds: ap[label],
                n_gt: mine.len(),
                n_pred: preds.iter().filter(|p| p.label == label).count(),
                matched: matched.len(),
                unmatched_gt: mine.len() - matched.len(),
            },
        );
    }
    let rates = |f: fn(&LabelMetrics) -> f64| mean(&per_label.values().map(f).collect::<Vec<_>>());
    let aggregate = LabelMetrics {
        add: mean(&all_add),
        adds: mean(&all_adds),
        auc_adds: rates(|m| m.auc_adds),
        recall_0p1d: rates(|m| m.recall_0p1d),
        map_adds: map,
        n_gt: gts.len(),
        n_pred: preds.len(),
        matched: per_label.values().map(|m| m.matched).sum(),
        unmatched_gt: per_label.values().map(|m| m.unmatched_gt).sum(),
    };
    MetricReport {
        per_label,
        aggregate,
    }
}

/// Mean ADD-S of the true positives (error below half the diameter) before
/// and after refinement, in meters. `before[i]` and `after[i]` are the two
/// estimates of the object whose model and ground truth are `models[i]`, `gts[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementComparison {
    pub before_adds: f64,
    pub after_adds: f64,
    pub n_before: usize,
    pub n_after: usize,
}

pub fn compare_refinement(
    models: &[&PointSet],
    diameters: &[f64],
    gts: &[Pose],
    before: &[Pose],
    after: &[Pose],
) -> RefinementComparison {
    let gated = |poses: &[Pose]| -> Vec<f64> {
        (0..gts.len())
            .map(|i| adds_error(models[i], &poses[i], &gts[i]))
            .zip(diameters)
            .filter(|(e, d)| *e < 0.5 * **d)
            .map(|(e, _)| e)
            .collect()
    };
    let (b, a) = (gated(before), gated(after));
    RefinementComparison {
        before_adds: mean(&b),
        after_adds: mean(&a),
        n_before: b.len(),
        n_after: a.len(),
    }
}
