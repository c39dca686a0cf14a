use std::collections::BTreeMap;
use std::path::PathBuf;

use cosy::evaluation::{compare_refinement, evaluate, GroundTruthPose, MetricReport, PosePrediction, RefinementComparison};
use cosy::scene_io::{load_models, load_observations, pose_from_record, read_json, write_json, EstimateFile, GroundTruthFile, ModelDb};
use cosy::{PointSet, Pose};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{config_err, path_str, report, CliError};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// The solved observation file. Adds the before/after refinement
    /// comparison of every inlier candidate.
    #[arg(long)]
    observations: Option<PathBuf>,
    /// Metric report to write; only printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub config: serde_json::Value,
    pub report: MetricReport,
    pub refinement: Option<RefinementComparison>,
}

fn camera_poses(gt: &GroundTruthFile) -> Result<BTreeMap<String, Pose>, CliError> {
    gt.views
        .iter()
        .map(|v| Ok((v.view_id.clone(), pose_from_record(&v.camera_pose, &format!("view {}", v.view_id))?)))
        .collect()
}

/// Camera-frame ground truth of every visible object in every view.
pub fn ground_truth_poses(gt: &GroundTruthFile, db: &ModelDb) -> Result<Vec<GroundTruthPose>, CliError> {
    let cams = camera_poses(gt)?;
    let mut objects = BTreeMap::new();
    for o in &gt.objects {
        if !db.contains(&o.label) {
            return Err(config_err(format!("ground-truth object {} has unknown label '{}'", o.id, o.label)));
        }
        objects.insert(o.id, (o.label.clone(), pose_from_record(&o.pose, &format!("object {}", o.id))?));
    }
    let mut out = Vec::new();
    for v in &gt.views {
        for id in &v.visible {
            let (label, pose) = objects
                .get(id)
                .ok_or_else(|| config_err(format!("view {} lists unknown object {id}", v.view_id)))?;
            out.push(GroundTruthPose {
                view_id: v.view_id.clone(),
                label: label.clone(),
                pose: cams[&v.view_id].inverse().compose(pose),
            });
        }
    }
    Ok(out)
}

pub fn predictions(est: &EstimateFile, db: &ModelDb, gt: &GroundTruthFile) -> Result<Vec<PosePrediction>, CliError> {
    est.predictions
        .iter()
        .map(|p| {
            if !db.contains(&p.label) {
                return Err(config_err(format!("prediction has unknown label '{}'", p.label)));
            }
            if !gt.views.iter().any(|v| v.view_id == p.view_id) {
                return Err(config_err(format!("prediction refers to view '{}' absent from ground truth", p.view_id)));
            }
            Ok(PosePrediction {
                view_id: p.view_id.clone(),
                label: p.label.clone(),
                score: p.score,
                pose: pose_from_record(&p.pose, "prediction")?,
            })
        })
        .collect()
}

/// Inlier candidates (before) against the refined object in the same view
/// (after), for members whose candidate came from a real object.
pub fn refinement_table(
    est: &EstimateFile,
    gt: &GroundTruthFile,
    obs: &cosy::SceneObservations,
    db: &ModelDb,
) -> Result<RefinementComparison, CliError> {
    if gt.provenance.len() != obs.candidates.len() {
        return Err(config_err("ground-truth provenance does not match the observation file"));
    }
    let gt_cams = camera_poses(gt)?;
    let est_cams: BTreeMap<&str, Pose> = est
        .cameras
        .iter()
        .map(|c| Ok((c.view_id.as_str(), pose_from_record(&c.pose, "camera")?)))
        .collect::<Result<_, CliError>>()?;
    let gt_objects: BTreeMap<usize, Pose> = gt
        .objects
        .iter()
        .map(|o| Ok((o.id, pose_from_record(&o.pose, "object")?)))
        .collect::<Result<_, CliError>>()?;

    let (mut models, mut diameters, mut gts, mut before, mut after): (Vec<&PointSet>, Vec<f64>, Vec<Pose>, Vec<Pose>, Vec<Pose>) =
        Default::default();
    for o in &est.objects {
        let model = db.get(&o.label).ok_or_else(|| config_err(format!("unknown label '{}'", o.label)))?;
        let t_p = pose_from_record(&o.pose, "object")?;
        for m in &o.members {
            let c = obs
                .candidates
                .get(m.candidate)
                .ok_or_else(|| config_err(format!("member candidate {} out of range", m.candidate)))?;
            let Some(src) = gt.provenance[m.candidate] else { continue };
            let (Some(cam), Some(gt_cam)) = (est_cams.get(m.view_id.as_str()), gt_cams.get(&m.view_id)) else {
                return Err(config_err(format!("member view '{}' missing", m.view_id)));
            };
            let src_pose = gt_objects.get(&src).ok_or_else(|| config_err(format!("unknown object {src}")))?;
            models.push(&model.points);
            diameters.push(model.diameter);
            gts.push(gt_cam.inverse().compose(src_pose));
            before.push(c.pose);
            after.push(cam.inverse().compose(&t_p));
        }
    }
    Ok(compare_refinement(&models, &diameters, &gts, &before, &after))
}

pub fn run(a: &Args) -> Result<(), CliError> {
    let db = load_models(&a.models)?;
    let gt: GroundTruthFile = read_json(&a.ground_truth)?;
    let est: EstimateFile = read_json(&a.estimate)?;
    let gts = ground_truth_poses(&gt, &db)?;
    let preds = predictions(&est, &db, &gt)?;
    let report = evaluate(&preds, &gts, &db);
    let refinement = match &a.observations {
        Some(p) => Some(refinement_table(&est, &gt, &load_observations(p, &db)?, &db)?),
        None => None,
    };
    let file = MetricsFile {
        config: json!({
            "models": path_str(&a.models),
            "ground_truth": path_str(&a.ground_truth),
            "estimate": path_str(&a.estimate),
            "observations": a.observations.as_deref().map(path_str),
        }),
        report,
        refinement,
    };
    print!("{}", report::metrics_table(&file));
    if let Some(out) = &a.out {
        write_json(out, &file)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
