//! The full multi-view solve: score filtering, two-view matching, physical
//! object extraction, scene initialization, refinement, 3D NMS and
//! per-camera output.

use std::time::{Duration, Instant};

use log::info;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::evaluation::{nms_3d, NmsEntry, NMS_RADIUS};
use crate::matching::{build_match_graph, extract_physical_objects, MatchGraph, MatchParams, PhysicalObject};
use crate::refinement::{
    express_in_camera_frames, initialize_scene, refine, CameraFrameObject, RefineConfig,
    RefineReport, SceneState,
};
use crate::scene_io::{
    kept_by_score, pose_to_record, CameraRecord, EstimateFile, EstimatedObjectRecord, MemberRecord,
    ModelDb, PredictionRecord, SceneObservations, SolveStats, DEFAULT_MIN_SCORE,
};
use crate::seeding::rng_for;
use crate::symmetry::{SymmetryError, DEFAULT_ANGLES_PER_AXIS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub min_score: f64,
    pub symmetry_angles: usize,
    pub nms_radius: f64,
    pub matching: MatchParams,
    pub refine: RefineConfig,
    /// Overrides the seeds of `matching` and `refine`.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            min_score: DEFAULT_MIN_SCORE,
            symmetry_angles: DEFAULT_ANGLES_PER_AXIS,
            nms_radius: NMS_RADIUS,
            matching: MatchParams::default(),
            refine: RefineConfig::default(),
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::Config(m));
        if !(0.0..=1.0).contains(&self.min_score) {
            return bad("min_score must lie in [0, 1]".into());
        }
        if self.symmetry_angles == 0 {
            return bad("symmetry_angles must be positive".into());
        }
        if !(self.nms_radius > 0.0 && self.nms_radius.is_finite()) {
            return bad("nms_radius must be positive".into());
        }
        self.matching
            .validate()
            .map_err(|e| SolveError::Config(e.to_string()))?;
        self.refine.validate().map_err(SolveError::Config)
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    /// No physical object was recovered; the statistics gathered so far are kept.
    #[error("no physical object could be recovered")]
    NoScene(Box<SolveStats>),
}

/// Everything produced by [`solve`]. Candidate indices inside `graph` and
/// `objects` refer to `observations` (the score-filtered input); `kept`
/// maps them back to input indices.
#[derive(Debug, Clone)]
pub struct Solution {
    pub observations: SceneObservations,
    pub kept: Vec<usize>,
    pub graph: MatchGraph,
    /// Objects after initialization and NMS, sorted by id.
    pub objects: Vec<PhysicalObject>,
    pub initial_state: SceneState,
    pub refinement: RefineReport,
    /// Refined objects in every camera where they project inside the image.
    pub predictions: Vec<CameraFrameObject>,
    pub stats: SolveStats,
    pub timings: Vec<(&'static str, Duration)>,
}

impl Solution {
    pub fn state(&self) -> &SceneState {
        &self.refinement.state
    }

    pub fn to_estimate_file(&self, config: serde_json::Value) -> EstimateFile {
        let state = self.state();
        EstimateFile {
            config,
            stats: self.stats.clone(),
            cameras: state
                .cameras
                .iter()
                .map(|(v, p)| CameraRecord {
                    view_id: v.clone(),
                    pose: pose_to_record(p),
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| EstimatedObjectRecord {
                    id: o.id,
                    label: o.label.clone(),
                    pose: pose_to_record(&state.objects[&o.id]),
                    score: o.score,
                    members: o
                        .members
                        .iter()
                        .map(|m| MemberRecord {
                            view_id: m.view_id.clone(),
                            candidate: self.kept[m.candidate],
                        })
                        .collect(),
                })
                .collect(),
            predictions: self
                .predictions
                .iter()
                .map(|p| PredictionRecord {
                    view_id: p.view_id.clone(),
                    object_id: p.object_id,
                    label: p.label.clone(),
                    score: p.score,
                    pose: pose_to_record(&p.pose),
                })
                .collect(),
        }
    }
}

/// Runs every stage. Fails with [`SolveError::NoScene`] when matching
/// yields no physical object.
pub fn solve(db: &ModelDb, obs: &SceneObservations, cfg: &SolveConfig) -> Result<Solution, SolveError> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, Duration)>| {
        let now = Instant::now();
        timings.push((name, now - clock));
        clock = now;
    };

    let catalog = Catalog::new(db, cfg.symmetry_angles)?;
    lap("catalog", &mut timings);

    let kept = kept_by_score(obs, cfg.min_score);
    let filtered = SceneObservations {
        views: obs.views.clone(),
        candidates: kept.iter().map(|&i| obs.candidates[i].clone()).collect(),
    };
    lap("filter", &mut timings);

    let params = MatchParams {
        seed: cfg.seed,
        ..cfg.matching
    };
    let graph = build_match_graph(&filtered, &catalog, &params);
    lap("matching", &mut timings);
    let extracted = extract_physical_objects(&graph);
    lap("extraction", &mut timings);

    let mut stats = SolveStats {
        candidates_in: obs.candidates.len(),
        candidates_after_filter: filtered.candidates.len(),
        accepted_view_pairs: graph.hypotheses.len(),
        edges: graph.edges.len(),
        components: extracted.len(),
        inliers: 0,
        disconnected_views: Vec::new(),
        objects_after_nms: 0,
        initial_loss: 0.0,
        final_loss: 0.0,
        lm_iterations: 0,
    };
    if extracted.is_empty() {
        return Err(SolveError::NoScene(Box::new(stats)));
    }

    let init = initialize_scene(
        &extracted,
        &graph.hypotheses,
        &filtered,
        &mut rng_for(cfg.seed, &["initialize"]),
    );
    lap("initialization", &mut timings);
    stats.disconnected_views = init.disconnected_views.clone();
    stats.inliers = init.objects.iter().map(|o| o.members.len()).sum();

    let refine_cfg = RefineConfig {
        seed: cfg.seed,
        ..cfg.refine.clone()
    };
    let report = refine(&init.state, &init.objects, &filtered, &catalog, &refine_cfg);
    lap("refinement", &mut timings);
    stats.initial_loss = report.initial_loss;
    stats.final_loss = report.final_loss;
    stats.lm_iterations = report.iterations;

    let entries: Vec<NmsEntry> = init
        .objects
        .iter()
        .map(|o| NmsEntry {
            id: o.id,
            position: Point3::from(report.state.objects[&o.id].translation),
            score: o.score,
        })
        .collect();
    let survivors = nms_3d(&entries, cfg.nms_radius);
    let objects: Vec<PhysicalObject> = init
        .objects
        .into_iter()
        .filter(|o| survivors.binary_search(&o.id).is_ok())
        .collect();
    stats.objects_after_nms = objects.len();
    lap("nms", &mut timings);

    let predictions = express_in_camera_frames(&report.state, &objects)
        .into_iter()
        .filter(|p| {
            let k = &filtered.view(&p.view_id).expect("state views come from input").intrinsics;
            let t = Point3::from(p.pose.translation);
            t.z > 0.0 && k.contains(&k.project_unchecked(&t))
        })
        .collect();
    lap("output", &mut timings);

    info!(
        "solve: {} candidates, {} edges, {} objects, loss {:.4} -> {:.4}",
        stats.candidates_after_filter, stats.edges, stats.objects_after_nms, stats.initial_loss, stats.final_loss
    );
    Ok(Solution {
        observations: filtered,
        kept,
        graph,
        objects,
        initial_state: init.state,
        refinement: report,
        predictions,
        stats,
        timings,
    })
}
