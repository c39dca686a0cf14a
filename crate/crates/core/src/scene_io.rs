//! Object database, views and candidates, plus the JSON files exchanged by
//! the pipeline: `models.json`, `observations.json`, `ground_truth.json` and
//! `estimate.json`. The field-level schema is documented in `docs/file-formats.md`.
//!
//! Units are meters and pixels throughout. Poses are 4×4 row-major
//! homogeneous matrices whose bottom row must be `(0, 0, 0, 1)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, PointSet, Pose};
use crate::symmetry::{SymmetryAxis, SymmetrySpec};

/// Tolerance applied to homogeneous-matrix validation on load.
pub const POSE_TOLERANCE: f64 = 1e-9;

/// Plausible object diameters, meters. Millimeter inputs fall outside.
pub const MIN_DIAMETER: f64 = 0.01;
pub const MAX_DIAMETER: f64 = 2.0;

/// Detection score threshold; candidates must score strictly above it.
pub const DEFAULT_MIN_SCORE: f64 = 0.3;

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("candidate {index} references unknown label '{label}'")]
    UnknownLabel { index: usize, label: String },
    #[error("candidate {index} references unknown view '{view_id}'")]
    UnknownView { index: usize, view_id: String },
}

pub type Result<T> = std::result::Result<T, SceneIoError>;

/// A labeled rigid object: model-frame points, diameter and symmetries.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub label: String,
    pub points: PointSet,
    pub diameter: f64,
    pub symmetries: SymmetrySpec,
}

impl ObjectModel {
    /// Checks every model invariant, naming the model in the error.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SceneIoError::Invariant(format!("model '{}': {msg}", self.label)));
        if self.points.len() < 4 {
            return fail(format!("needs at least 4 points, has {}", self.points.len()));
        }
        if !(self.diameter > 0.0) || !self.diameter.is_finite() {
            return fail(format!("diameter must be positive, got {}", self.diameter));
        }
        if !(MIN_DIAMETER..=MAX_DIAMETER).contains(&self.diameter) {
            return fail(format!(
                "diameter {} m outside [{MIN_DIAMETER}, {MAX_DIAMETER}] m (inputs must be in meters)",
                self.diameter
            ));
        }
        let extent = self.points.max_pairwise_distance();
        if self.diameter < extent * (1.0 - 1e-6) {
            return fail(format!(
                "diameter {} smaller than point extent {extent}",
                self.diameter
            ));
        }
        let flatness = self.points.min_covariance_eigenvalue();
        if !(flatness > 1e-10 * self.diameter * self.diameter) {
            return fail("points are coplanar (rank-deficient covariance)".into());
        }
        for (i, axis) in self.symmetries.continuous_axes.iter().enumerate() {
            if (axis.axis.norm() - 1.0).abs() > 1e-9 {
                return fail(format!("symmetry axis {i} is not unit length"));
            }
        }
        Ok(())
    }
}

/// Models keyed by label, iterated in label order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelDb {
    models: BTreeMap<String, ObjectModel>,
}

impl ModelDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_models(models: impl IntoIterator<Item = ObjectModel>) -> Result<Self> {
        let mut db = Self::new();
        for m in models {
            db.insert(m)?;
        }
        Ok(db)
    }

    /// Adds a validated model; duplicate labels are a schema error.
    pub fn insert(&mut self, model: ObjectModel) -> Result<()> {
        model.validate()?;
        if self.models.contains_key(&model.label) {
            return Err(SceneIoError::Schema(format!(
                "duplicate model label '{}'",
                model.label
            )));
        }
        self.models.insert(model.label.clone(), model);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&ObjectModel> {
        self.models.get(label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.models.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectModel> {
        self.models.values()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub view_id: String,
    pub intrinsics: CameraIntrinsics,
}

/// A single-view object hypothesis: pose of the object in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub view_id: String,
    pub label: String,
    pub score: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneObservations {
    pub views: Vec<View>,
    pub candidates: Vec<Candidate>,
}

impl SceneObservations {
    pub fn view(&self, view_id: &str) -> Option<&View> {
        self.views.iter().find(|v| v.view_id == view_id)
    }

    /// Candidate indices belonging to `view_id`, ascending.
    pub fn candidates_in_view(&self, view_id: &str) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.view_id == view_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// View ids in lexicographic order.
    pub fn sorted_view_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.views.iter().map(|v| v.view_id.clone()).collect();
        ids.sort();
        ids
    }

    /// Checks view uniqueness and candidate cross-references against `db`.
    pub fn validate(&self, db: &ModelDb) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.views {
            if !seen.insert(v.view_id.as_str()) {
                return Err(SceneIoError::Schema(format!(
                    "duplicate view id '{}'",
                    v.view_id
                )));
            }
            v.intrinsics
                .validate()
                .map_err(|e| SceneIoError::Invariant(format!("view '{}': {e}", v.view_id)))?;
        }
        for (index, c) in self.candidates.iter().enumerate() {
            if !seen.contains(c.view_id.as_str()) {
                return Err(SceneIoError::UnknownView {
                    index,
                    view_id: c.view_id.clone(),
                });
            }
            if !db.contains(&c.label) {
                return Err(SceneIoError::UnknownLabel {
                    index,
                    label: c.label.clone(),
                });
            }
            if !(c.pose.translation.z > 0.0) {
                return Err(SceneIoError::Invariant(format!(
                    "candidate {index}: translation z = {} must be positive",
                    c.pose.translation.z
                )));
            }
            if !(0.0..=1.0).contains(&c.score) {
                return Err(SceneIoError::Invariant(format!(
                    "candidate {index}: score {} outside [0, 1]",
                    c.score
                )));
            }
        }
        Ok(())
    }
}

/// Indices of candidates scoring strictly above `min_score`.
pub fn kept_by_score(obs: &SceneObservations, min_score: f64) -> Vec<usize> {
    obs.candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.score > min_score)
        .map(|(i, _)| i)
        .collect()
}

/// Keeps candidates with `score > min_score`; views are untouched.
pub fn filter_by_score(obs: &SceneObservations, min_score: f64) -> SceneObservations {
    SceneObservations {
        views: obs.views.clone(),
        candidates: kept_by_score(obs, min_score)
            .into_iter()
            .map(|i| obs.candidates[i].clone())
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Wire records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRecord {
    pub axis: [f64; 3],
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryRecord {
    #[serde(default)]
    pub discrete: Vec<Vec<f64>>,
    #[serde(default)]
    pub axes: Vec<AxisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub label: String,
    pub points: Vec<f64>,
    pub diameter: f64,
    #[serde(default)]
    pub symmetries: SymmetryRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsFile {
    pub models: Vec<ModelRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl From<CameraIntrinsics> for IntrinsicsRecord {
    fn from(k: CameraIntrinsics) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

impl From<IntrinsicsRecord> for CameraIntrinsics {
    fn from(r: IntrinsicsRecord) -> Self {
        CameraIntrinsics {
            fx: r.fx,
            fy: r.fy,
            cx: r.cx,
            cy: r.cy,
            width: r.width,
            height: r.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewRecord {
    pub view_id: String,
    pub intrinsics: IntrinsicsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub view_id: String,
    pub label: String,
    pub score: f64,
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationsFile {
    pub views: Vec<ViewRecord>,
    pub candidates: Vec<CandidateRecord>,
}

/// Camera pose in the world frame (`T_C`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub view_id: String,
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberRecord {
    pub view_id: String,
    /// Index into the input observation file's candidate list.
    pub candidate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatedObjectRecord {
    pub id: usize,
    pub label: String,
    /// World-frame pose `T_P`.
    pub pose: Vec<f64>,
    /// Sum of member detection scores.
    pub score: f64,
    pub members: Vec<MemberRecord>,
}

/// Object pose expressed in one camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub view_id: String,
    pub object_id: usize,
    pub label: String,
    pub score: f64,
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveStats {
    pub candidates_in: usize,
    pub candidates_after_filter: usize,
    pub accepted_view_pairs: usize,
    pub edges: usize,
    pub components: usize,
    pub inliers: usize,
    pub disconnected_views: Vec<String>,
    pub objects_after_nms: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub lm_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    /// Echo of every parameter that produced this file.
    pub config: serde_json::Value,
    pub stats: SolveStats,
    pub cameras: Vec<CameraRecord>,
    pub objects: Vec<EstimatedObjectRecord>,
    pub predictions: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtViewRecord {
    pub view_id: String,
    pub intrinsics: IntrinsicsRecord,
    /// World-frame camera pose.
    pub camera_pose: Vec<f64>,
    /// Ids of objects visible in this view.
    pub visible: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtObjectRecord {
    pub id: usize,
    pub label: String,
    pub pose: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub config: serde_json::Value,
    pub views: Vec<GtViewRecord>,
    pub objects: Vec<GtObjectRecord>,
    /// Per candidate of `observations.json`: source object id, or null for an outlier.
    pub provenance: Vec<Option<usize>>,
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

pub fn pose_to_record(p: &Pose) -> Vec<f64> {
    p.to_row_major().to_vec()
}

pub fn pose_from_record(values: &[f64], what: &str) -> Result<Pose> {
    if values.len() != 16 {
        return Err(SceneIoError::Schema(format!(
            "{what}: pose must have 16 values, got {}",
            values.len()
        )));
    }
    Pose::from_row_major(values, POSE_TOLERANCE)
        .map_err(|e| SceneIoError::Invariant(format!("{what}: {e}")))
}

impl ModelRecord {
    pub fn from_model(m: &ObjectModel) -> Self {
        ModelRecord {
            label: m.label.clone(),
            points: m.points.to_flat(),
            diameter: m.diameter,
            symmetries: SymmetryRecord {
                discrete: m.symmetries.discrete.iter().map(pose_to_record).collect(),
                axes: m
                    .symmetries
                    .continuous_axes
                    .iter()
                    .map(|a| AxisRecord {
                        axis: [a.axis.x, a.axis.y, a.axis.z],
                        offset: [a.offset.x, a.offset.y, a.offset.z],
                    })
                    .collect(),
            },
        }
    }

    pub fn to_model(&self) -> Result<ObjectModel> {
        let what = format!("model '{}'", self.label);
        let points = PointSet::from_flat(&self.points)
            .map_err(|e| SceneIoError::Invariant(format!("{what}: {e}")))?;
        let discrete = self
            .symmetries
            .discrete
            .iter()
            .enumerate()
            .map(|(i, m)| pose_from_record(m, &format!("{what} discrete symmetry {i}")))
            .collect::<Result<Vec<_>>>()?;
        let mut axes = Vec::with_capacity(self.symmetries.axes.len());
        for (i, a) in self.symmetries.axes.iter().enumerate() {
            let v = Vector3::from(a.axis);
            if (v.norm() - 1.0).abs() > 1e-6 {
                return Err(SceneIoError::Invariant(format!(
                    "{what}: symmetry axis {i} has norm {}, expected 1",
                    v.norm()
                )));
            }
            axes.push(
                SymmetryAxis::new(v, Point3::from(a.offset))
                    .map_err(|e| SceneIoError::Invariant(format!("{what}: {e}")))?,
            );
        }
        let model = ObjectModel {
            label: self.label.clone(),
            points,
            diameter: self.diameter,
            symmetries: SymmetrySpec::new(discrete, axes),
        };
        model.validate()?;
        Ok(model)
    }
}

impl ModelsFile {
    pub fn from_db(db: &ModelDb) -> Self {
        ModelsFile {
            models: db.iter().map(ModelRecord::from_model).collect(),
        }
    }

    pub fn to_db(&self) -> Result<ModelDb> {
        let mut db = ModelDb::new();
        for r in &self.models {
            db.insert(r.to_model()?)?;
        }
        Ok(db)
    }
}

impl ObservationsFile {
    pub fn from_observations(obs: &SceneObservations) -> Self {
        ObservationsFile {
            views: obs
                .views
                .iter()
                .map(|v| ViewRecord {
                    view_id: v.view_id.clone(),
                    intrinsics: v.intrinsics.into(),
                })
                .collect(),
            candidates: obs
                .candidates
                .iter()
                .map(|c| CandidateRecord {
                    view_id: c.view_id.clone(),
                    label: c.label.clone(),
                    score: c.score,
                    pose: pose_to_record(&c.pose),
                })
                .collect(),
        }
    }

    /// Converts and validates against `db`.
    pub fn to_observations(&self, db: &ModelDb) -> Result<SceneObservations> {
        let views = self
            .views
            .iter()
            .map(|v| View {
                view_id: v.view_id.clone(),
                intrinsics: v.intrinsics.into(),
            })
            .collect();
        let candidates = self
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(Candidate {
                    view_id: c.view_id.clone(),
                    label: c.label.clone(),
                    score: c.score,
                    pose: pose_from_record(&c.pose, &format!("candidate {i}"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let obs = SceneObservations { views, candidates };
        obs.validate(db)?;
        Ok(obs)
    }
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

fn classify(e: serde_json::Error) -> SceneIoError {
    match e.classify() {
        serde_json::error::Category::Data => SceneIoError::Schema(e.to_string()),
        _ => SceneIoError::Parse(e.to_string()),
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text)
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(classify)
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("wire records always serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json_string(value)).map_err(|source| SceneIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_models(path: impl AsRef<Path>) -> Result<ModelDb> {
    read_json::<ModelsFile>(path)?.to_db()
}

pub fn save_models(path: impl AsRef<Path>, db: &ModelDb) -> Result<()> {
    write_json(path, &ModelsFile::from_db(db))
}

pub fn load_observations(path: impl AsRef<Path>, db: &ModelDb) -> Result<SceneObservations> {
    read_json::<ObservationsFile>(path)?.to_observations(db)
}

pub fn save_observations(path: impl AsRef<Path>, obs: &SceneObservations) -> Result<()> {
    write_json(path, &ObservationsFile::from_observations(obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn tetra(label: &str) -> ObjectModel {
        ObjectModel {
            label: label.into(),
            points: PointSet::new(vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(0.05, 0.0, 0.0),
                Point3::new(0.0, 0.05, 0.0),
                Point3::new(0.0, 0.0, 0.05),
            ])
            .unwrap(),
            diameter: 0.0708,
            symmetries: SymmetrySpec::none(),
        }
    }

    fn intrinsics() -> IntrinsicsRecord {
        IntrinsicsRecord {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    #[test]
    fn two_models_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("models.json");
        let db = ModelDb::from_models([tetra("a"), tetra("b")]).unwrap();
        save_models(&path, &db).unwrap();
        let loaded = load_models(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded, db);
    }

    #[test]
    fn duplicate_label_is_schema_error() {
        let file = ModelsFile {
            models: vec![
                ModelRecord::from_model(&tetra("dup")),
                ModelRecord::from_model(&tetra("dup")),
            ],
        };
        match file.to_db() {
            Err(SceneIoError::Schema(msg)) => assert!(msg.contains("dup")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_points_is_invariant_error() {
        let mut r = ModelRecord::from_model(&tetra("empty"));
        r.points.clear();
        assert!(matches!(r.to_model(), Err(SceneIoError::Invariant(_))));
    }

    #[test]
    fn model_invariants() {
        let mut m = tetra("x");
        m.diameter = 0.0;
        assert!(m.validate().is_err());
        m.diameter = 0.05; // below the point extent
        assert!(m.validate().is_err());
        m.diameter = 70.8; // millimeters by mistake
        assert!(m.validate().is_err());
        let mut flat = tetra("flat");
        flat.points = PointSet::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.05, 0.0, 0.0),
            Point3::new(0.0, 0.05, 0.0),
            Point3::new(0.05, 0.05, 0.0),
        ])
        .unwrap();
        flat.diameter = 0.08;
        assert!(flat.validate().is_err());
    }

    #[test]
    fn malformed_and_missing_fields() {
        assert!(matches!(
            parse_json::<ModelsFile>("{\"models\": ["),
            Err(SceneIoError::Parse(_))
        ));
        assert!(matches!(
            parse_json::<ModelsFile>("{\"models\": [{\"label\": \"a\"}]}"),
            Err(SceneIoError::Schema(_))
        ));
    }

    fn observations_file(n_views: usize, per_view: usize) -> ObservationsFile {
        let views: Vec<ViewRecord> = (0..n_views)
            .map(|i| ViewRecord {
                view_id: format!("v{i}"),
                intrinsics: intrinsics(),
            })
            .collect();
        let mut candidates = Vec::new();
        for v in &views {
            for j in 0..per_view {
                let pose = Pose::from_translation(Vector3::new(0.01 * j as f64, 0.0, 1.0));
                candidates.push(CandidateRecord {
                    view_id: v.view_id.clone(),
                    label: "a".into(),
                    score: 0.9,
                    pose: pose_to_record(&pose),
                });
            }
        }
        ObservationsFile { views, candidates }
    }

    #[test]
    fn observations_examples() {
        let db = ModelDb::from_models([tetra("a")]).unwrap();
        let obs = observations_file(4, 6).to_observations(&db).unwrap();
        assert_eq!(obs.candidates.len(), 24);

        let mut f = observations_file(1, 1);
        f.candidates[0].label = "zzz".into();
        assert!(matches!(
            f.to_observations(&db),
            Err(SceneIoError::UnknownLabel { index: 0, .. })
        ));

        let mut f = observations_file(1, 1);
        f.candidates[0].view_id = "nope".into();
        assert!(matches!(
            f.to_observations(&db),
            Err(SceneIoError::UnknownView { index: 0, .. })
        ));

        let mut f = observations_file(1, 1);
        f.candidates[0].pose[11] = -1.0;
        assert!(matches!(f.to_observations(&db), Err(SceneIoError::Invariant(_))));

        let mut f = observations_file(1, 1);
        f.candidates[0].pose[15] = 0.5;
        assert!(matches!(f.to_observations(&db), Err(SceneIoError::Invariant(_))));
    }

    #[test]
    fn filter_by_score_examples() {
        let db = ModelDb::from_models([tetra("a")]).unwrap();
        let mut obs = observations_file(1, 3).to_observations(&db).unwrap();
        for (c, s) in obs.candidates.iter_mut().zip([0.2, 0.3, 0.31]) {
            c.score = s;
        }
        let kept = filter_by_score(&obs, DEFAULT_MIN_SCORE);
        assert_eq!(kept.candidates.len(), 1);
        assert_eq!(kept.candidates[0].score, 0.31);
        assert_eq!(kept.views, obs.views);

        assert_eq!(filter_by_score(&obs, 0.0), obs);

        let empty = SceneObservations {
            views: obs.views.clone(),
            candidates: vec![],
        };
        assert!(filter_by_score(&empty, 0.3).candidates.is_empty());
    }
}
