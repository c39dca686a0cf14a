//! Synthetic scenes with ground truth, and noisy per-view candidates drawn
//! from them.
//!
//! All randomness comes from the caller's generator. The CLI and the test
//! harness use ChaCha8 seeded through [`crate::seeding`], which gives the same
//! stream on every platform.

pub mod library;

use nalgebra::{Point2, Point3, Unit, UnitQuaternion, Vector3, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::geometry::{CameraIntrinsics, Pose, Rotation3};
use crate::scene_io::{
    pose_to_record, Candidate, GroundTruthFile, GtObjectRecord, GtViewRecord, ModelDb,
    SceneObservations, View,
};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_objects: usize,
    /// Edge length of the cube (centered at the origin) holding object centers.
    pub box_size: f64,
    pub n_views: usize,
    /// Camera distance from the box center, `[min, max]`.
    pub camera_distance_range: [f64; 2],
    pub seed: u64,
    /// Pool the scene's objects are drawn from. Labels are unique per scene
    /// while `n_objects` does not exceed the pool size.
    pub model_labels: Vec<String>,
    pub intrinsics: CameraIntrinsics,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_objects: 6,
            box_size: 0.5,
            n_views: 4,
            camera_distance_range: [1.0, 1.4],
            seed: 0,
            model_labels: library::builtin_models().labels().map(String::from).collect(),
            intrinsics: CameraIntrinsics {
                fx: 600.0,
                fy: 600.0,
                cx: 320.0,
                cy: 240.0,
                width: 640,
                height: 480,
            },
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self, db: &ModelDb) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidScenario(m.to_string()));
        if self.n_objects == 0 {
            return bad("n_objects must be at least 1");
        }
        if self.n_views == 0 {
            return bad("n_views must be at least 1");
        }
        if !(self.box_size > 0.0 && self.box_size.is_finite()) {
            return bad("box_size must be positive");
        }
        let [lo, hi] = self.camera_distance_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("camera_distance_range must satisfy 0 < min <= max");
        }
        if lo <= self.box_size * 3f64.sqrt() / 2.0 {
            return bad("cameras must stay outside the box");
        }
        if self.model_labels.is_empty() {
            return bad("model_labels is empty");
        }
        for l in &self.model_labels {
            if !db.contains(l) {
                return Err(SimulationError::UnknownLabel(l.clone()));
            }
        }
        self.intrinsics
            .validate()
            .map_err(|e| SimulationError::InvalidScenario(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Standard deviation of the rotation-noise angle, degrees.
    pub rot_sigma: f64,
    /// Per-axis translation noise in the camera frame, meters.
    pub trans_sigma: f64,
    /// Additional noise along the optical axis, meters.
    pub depth_sigma_extra: f64,
    pub miss_prob: f64,
    pub outlier_prob: f64,
    pub label_confusion_prob: f64,
    /// Scores of true detections are uniform in this range.
    pub true_score_range: [f64; 2],
    /// Scores of injected outliers are uniform in this range.
    pub outlier_score_range: [f64; 2],
    /// Report true detections at a random symmetric equivalent of the pose,
    /// as a single-view estimator cannot tell them apart.
    pub symmetry_ambiguity: bool,
}

impl NoiseModel {
    /// Exact ground-truth poses, no misses, no outliers.
    pub fn noiseless() -> Self {
        NoiseModel {
            rot_sigma: 0.0,
            trans_sigma: 0.0,
            depth_sigma_extra: 0.0,
            miss_prob: 0.0,
            outlier_prob: 0.0,
            label_confusion_prob: 0.0,
            true_score_range: [0.5, 1.0],
            outlier_score_range: [0.31, 1.0],
            symmetry_ambiguity: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidNoise(m));
        for (name, s) in [
            ("rot_sigma", self.rot_sigma),
            ("trans_sigma", self.trans_sigma),
            ("depth_sigma_extra", self.depth_sigma_extra),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        for (name, p) in [
            ("miss_prob", self.miss_prob),
            ("outlier_prob", self.outlier_prob),
            ("label_confusion_prob", self.label_confusion_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, [lo, hi]) in [
            ("true_score_range", self.true_score_range),
            ("outlier_score_range", self.outlier_score_range),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!("{name} must satisfy 0 <= min <= max <= 1"));
            }
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            rot_sigma: 5.0,
            trans_sigma: 0.005,
            depth_sigma_extra: 0.0,
            miss_prob: 0.2,
            outlier_prob: 0.3,
            ..NoiseModel::noiseless()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub id: usize,
    pub label: String,
    /// Object-to-world.
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtCamera {
    pub view_id: String,
    /// Camera-to-world.
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    pub box_size: f64,
    pub objects: Vec<GtObject>,
    pub cameras: Vec<GtCamera>,
}

impl GroundTruthScene {
    /// `T_CO` of `object` in `camera`.
    pub fn camera_frame_pose(&self, camera: usize, object: usize) -> Pose {
        self.cameras[camera]
            .pose
            .inverse()
            .compose(&self.objects[object].pose)
    }

    /// Center in front of the camera and projecting inside the image.
    pub fn is_visible(&self, camera: usize, object: usize) -> bool {
        let t = self.camera_frame_pose(camera, object).translation;
        let k = &self.cameras[camera].intrinsics;
        t.z > 0.0 && k.contains(&k.project_unchecked(&Point3::from(t)))
    }

    pub fn visible_objects(&self, camera: usize) -> Vec<usize> {
        (0..self.objects.len())
            .filter(|&o| self.is_visible(camera, o))
            .collect()
    }

    pub fn to_file(&self, config: serde_json::Value, provenance: Vec<Option<usize>>) -> GroundTruthFile {
        GroundTruthFile {
            config,
            views: self
                .cameras
                .iter()
                .enumerate()
                .map(|(i, c)| GtViewRecord {
                    view_id: c.view_id.clone(),
                    intrinsics: c.intrinsics.into(),
                    camera_pose: pose_to_record(&c.pose),
                    visible: self.visible_objects(i),
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| GtObjectRecord {
                    id: o.id,
                    label: o.label.clone(),
                    pose: pose_to_record(&o.pose),
                })
                .collect(),
            provenance,
        }
    }
}

/// Zero-padded so that lexicographic order is numeric order.
pub fn view_id(index: usize) -> String {
    format!("v{index:03}")
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3<f64> {
    loop {
        let q: Vector4<f64> = Vector4::from_fn(|_, _| StandardNormal.sample(rng));
        let n = q.norm();
        if n > 1e-6 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q / n)).to_rotation_matrix();
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Unit<Vector3<f64>> {
    loop {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        if v.norm() > 1e-6 {
            return Unit::new_normalize(v);
        }
    }
}

/// Uniform axis, angle `|N(0, sigma)|` (radians).
pub fn rotation_noise<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Rotation3<f64> {
    if sigma == 0.0 {
        return Rotation3::identity();
    }
    let axis = random_unit_vector(rng);
    let angle: f64 = Normal::new(0.0, sigma).expect("sigma is finite").sample(rng);
    Rotation3::from_axis_angle(&axis, angle.abs())
}

/// Camera at `position` whose optical axis passes through `target`, rolled by
/// `roll` radians about that axis. Image y points away from world +z.
pub fn look_at(position: Point3<f64>, target: Point3<f64>, roll: f64) -> Pose {
    let z = (target - position).normalize();
    let up = if z.cross(&Vector3::z()).norm() > 1e-6 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let x = z.cross(&up).normalize();
    let y = z.cross(&x);
    let base = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[x, y, z]));
    let rolled = base * Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
    Pose::new(rolled, position.coords)
}

/// Objects with uniform orientations and centers uniform in the box (bounding
/// spheres kept apart), cameras on the upper hemisphere aimed at the center.
pub fn generate_scene<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    db: &ModelDb,
    rng: &mut R,
) -> Result<GroundTruthScene, SimulationError> {
    cfg.validate(db)?;

    let labels: Vec<String> = if cfg.n_objects <= cfg.model_labels.len() {
        rand::seq::index::sample(rng, cfg.model_labels.len(), cfg.n_objects)
            .into_iter()
            .map(|i| cfg.model_labels[i].clone())
            .collect()
    } else {
        (0..cfg.n_objects)
            .map(|_| cfg.model_labels[rng.random_range(0..cfg.model_labels.len())].clone())
            .collect()
    };

    let half = cfg.box_size / 2.0;
    let mut objects: Vec<GtObject> = Vec::with_capacity(labels.len());
    for (id, label) in labels.into_iter().enumerate() {
        let r = db.get(&label).expect("validated").diameter / 2.0;
        let mut center = Vector3::zeros();
        // rejection sampling; the separation requirement is relaxed if the
        // box is too crowded to satisfy it
        for attempt in 0..1000 {
            center = Vector3::from_fn(|_, _| rng.random_range(-half..=half));
            let slack = if attempt < 500 { 1.0 } else { 0.0 };
            let clear = objects.iter().all(|o| {
                let ro = db.get(&o.label).expect("validated").diameter / 2.0;
                (o.pose.translation - center).norm() >= slack * (r + ro)
            });
            if clear {
                break;
            }
        }
        objects.push(GtObject {
            id,
            label,
            pose: Pose::new(random_rotation(rng), center),
        });
    }

    let [dmin, dmax] = cfg.camera_distance_range;
    let min_elevation_sin = 0.1;
    let cameras = (0..cfg.n_views)
        .map(|i| {
            // uniform on the spherical cap z >= min_elevation_sin
            let z: f64 = rng.random_range(min_elevation_sin..=1.0);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let s: f64 = (1.0 - z * z).sqrt();
            let dir = Vector3::new(s * phi.cos(), s * phi.sin(), z);
            let distance = if dmax > dmin { rng.random_range(dmin..=dmax) } else { dmin };
            let roll = rng.random_range(-10f64..10.0).to_radians();
            GtCamera {
                view_id: view_id(i),
                pose: look_at(Point3::from(dir * distance), Point3::origin(), roll),
                intrinsics: cfg.intrinsics,
            }
        })
        .collect();

    Ok(GroundTruthScene {
        box_size: cfg.box_size,
        objects,
        cameras,
    })
}

/// Noisy candidates for every view. The returned provenance maps each
/// candidate index to its ground-truth object, or `None` for outliers.
pub fn generate_observations<R: Rng + ?Sized>(
    scene: &GroundTruthScene,
    catalog: &Catalog,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<(SceneObservations, Vec<Option<usize>>), SimulationError> {
    noise.validate()?;
    let all_labels: Vec<&str> = catalog.iter().map(|m| m.model.label.as_str()).collect();
    let rot_sigma = noise.rot_sigma.to_radians();
    let trans = Normal::new(0.0, noise.trans_sigma).expect("validated");
    let depth = Normal::new(0.0, noise.depth_sigma_extra).expect("validated");
    let uniform = |rng: &mut R, [lo, hi]: [f64; 2]| if hi > lo { rng.random_range(lo..=hi) } else { lo };

    let mut views = Vec::new();
    let mut candidates = Vec::new();
    let mut provenance = Vec::new();
    for (ci, cam) in scene.cameras.iter().enumerate() {
        views.push(View {
            view_id: cam.view_id.clone(),
            intrinsics: cam.intrinsics,
        });
        let mut in_view: Vec<(Candidate, Option<usize>)> = Vec::new();
        for oi in scene.visible_objects(ci) {
            let object = &scene.objects[oi];
            if rng.random_bool(noise.miss_prob) {
                continue;
            }
            let mut pose = scene.camera_frame_pose(ci, oi);
            if noise.symmetry_ambiguity {
                let group = catalog.model(&object.label).group();
                let s = group.elements()[rng.random_range(0..group.len())];
                pose = pose.compose(&s);
            }
            let r_noise = rotation_noise(rng, rot_sigma);
            let mut t = pose.translation;
            if noise.trans_sigma > 0.0 {
                t += Vector3::from_fn(|_, _| trans.sample(rng));
            }
            if noise.depth_sigma_extra > 0.0 {
                t.z += depth.sample(rng);
            }
            t.z = t.z.max(crate::geometry::DEFAULT_Z_MIN);
            let pose = Pose::new(r_noise * pose.rotation, t);

            let label = if noise.label_confusion_prob > 0.0
                && all_labels.len() > 1
                && rng.random_bool(noise.label_confusion_prob)
            {
                let others: Vec<&str> = all_labels
                    .iter()
                    .copied()
                    .filter(|l| *l != object.label)
                    .collect();
                others[rng.random_range(0..others.len())].to_string()
            } else {
                object.label.clone()
            };
            let score = uniform(rng, noise.true_score_range);
            in_view.push((
                Candidate {
                    view_id: cam.view_id.clone(),
                    label,
                    score,
                    pose,
                },
                Some(oi),
            ));
        }

        let visible = scene.visible_objects(ci).len();
        for _ in 0..visible {
            if !rng.random_bool(noise.outlier_prob) {
                continue;
            }
            let label = all_labels[rng.random_range(0..all_labels.len())].to_string();
            let k = &cam.intrinsics;
            let uv = Point2::new(
                rng.random_range(0.0..k.width as f64),
                rng.random_range(0.0..k.height as f64),
            );
            let center_depth = cam.pose.translation.norm();
            let reach = scene.box_size * 3f64.sqrt() / 2.0;
            let z = rng.random_range((center_depth - reach).max(0.1)..=center_depth + reach);
            let p = k.unproject(&uv, z);
            let score = uniform(rng, noise.outlier_score_range);
            in_view.push((
                Candidate {
                    view_id: cam.view_id.clone(),
                    label,
                    score,
                    pose: Pose::new(random_rotation(rng), p.coords),
                },
                None,
            ));
        }

        // detector output order carries no information
        for i in (1..in_view.len()).rev() {
            let j = rng.random_range(0..=i);
            in_view.swap(i, j);
        }
        for (c, p) in in_view {
            candidates.push(c);
            provenance.push(p);
        }
    }
    Ok((SceneObservations { views, candidates }, provenance))
}
