//! Python bindings. Poses cross the boundary as 4×4 nested lists, files as
//! JSON strings in the same schemas the CLI reads and writes.

use std::collections::BTreeMap;

use cosy::catalog::Catalog;
use cosy::evaluation::{self, GroundTruthPose, PosePrediction};
use cosy::pipeline::{self, SolveConfig, SolveError};
use cosy::scene_io::{self, EstimateFile, GroundTruthFile, ModelsFile, ObservationsFile};
use cosy::seeding::rng_for;
use cosy::simulation::{self, NoiseModel, ScenarioConfig};
use cosy::symmetry::{discretize, symmetric_distance as sym_dist};
use cosy::{ModelDb, Pose, SceneObservations};
use nalgebra::Vector3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pose_from_py(m: Vec<Vec<f64>>) -> PyResult<Pose> {
    if m.len() != 4 || m.iter().any(|r| r.len() != 4) {
        return Err(PyValueError::new_err("pose must be a 4x4 matrix"));
    }
    let flat: Vec<f64> = m.into_iter().flatten().collect();
    scene_io::pose_from_record(&flat, "pose").map_err(value_err)
}

fn pose_to_py(p: &Pose) -> Vec<Vec<f64>> {
    p.to_row_major().chunks(4).map(|r| r.to_vec()).collect()
}

/// Object models with their symmetries.
#[pyclass(name = "Models", frozen)]
struct PyModels {
    db: ModelDb,
}

#[pymethods]
impl PyModels {
    /// The built-in synthetic library.
    #[staticmethod]
    fn builtin() -> Self {
        PyModels { db: simulation::library::builtin_models() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: ModelsFile = scene_io::parse_json(text).map_err(value_err)?;
        Ok(PyModels { db: file.to_db().map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        scene_io::to_json_string(&ModelsFile::from_db(&self.db))
    }

    fn labels(&self) -> Vec<String> {
        self.db.labels().map(String::from).collect()
    }

    fn diameter(&self, label: &str) -> PyResult<f64> {
        self.db.get(label).map(|m| m.diameter).ok_or_else(|| value_err(format!("unknown label '{label}'")))
    }

    fn points(&self, label: &str) -> PyResult<Vec<[f64; 3]>> {
        let m = self.db.get(label).ok_or_else(|| value_err(format!("unknown label '{label}'")))?;
        Ok(m.points.iter().map(|p| [p.x, p.y, p.z]).collect())
    }

    /// Size of the discretized symmetry group.
    #[pyo3(signature = (label, angles_per_axis = 64))]
    fn group_size(&self, label: &str, angles_per_axis: usize) -> PyResult<usize> {
        let m = self.db.get(label).ok_or_else(|| value_err(format!("unknown label '{label}'")))?;
        Ok(discretize(&m.symmetries, angles_per_axis).map_err(value_err)?.len())
    }

    fn __len__(&self) -> usize {
        self.db.len()
    }
}

/// Candidates detected in a set of views.
#[pyclass(name = "Observations", frozen)]
struct PyObservations {
    obs: SceneObservations,
}

#[pymethods]
impl PyObservations {
    #[staticmethod]
    fn from_json(text: &str, models: &PyModels) -> PyResult<Self> {
        let file: ObservationsFile = scene_io::parse_json(text).map_err(value_err)?;
        Ok(PyObservations { obs: file.to_observations(&models.db).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        scene_io::to_json_string(&ObservationsFile::from_observations(&self.obs))
    }

    fn view_ids(&self) -> Vec<String> {
        self.obs.sorted_view_ids()
    }

    /// `(view_id, label, score, pose)` tuples in file order.
    fn candidates(&self) -> Vec<(String, String, f64, Vec<Vec<f64>>)> {
        self.obs
            .candidates
            .iter()
            .map(|c| (c.view_id.clone(), c.label.clone(), c.score, pose_to_py(&c.pose)))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.obs.candidates.len()
    }
}

/// Result of [`solve`].
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    estimate: EstimateFile,
}

#[pymethods]
impl PySolution {
    /// World poses of the reconstructed cameras, by view id.
    fn cameras(&self) -> PyResult<BTreeMap<String, Vec<Vec<f64>>>> {
        self.estimate
            .cameras
            .iter()
            .map(|c| Ok((c.view_id.clone(), pose_to_py(&scene_io::pose_from_record(&c.pose, "camera").map_err(value_err)?))))
            .collect()
    }

    /// `(id, label, world pose, number of views)` per physical object.
    fn objects(&self) -> PyResult<Vec<(usize, String, Vec<Vec<f64>>, usize)>> {
        self.estimate
            .objects
            .iter()
            .map(|o| {
                let p = scene_io::pose_from_record(&o.pose, "object").map_err(value_err)?;
                Ok((o.id, o.label.clone(), pose_to_py(&p), o.members.len()))
            })
            .collect()
    }

    #[getter]
    fn initial_loss(&self) -> f64 {
        self.estimate.stats.initial_loss
    }

    #[getter]
    fn final_loss(&self) -> f64 {
        self.estimate.stats.final_loss
    }

    /// The estimate file, as the CLI writes it.
    fn to_json(&self) -> String {
        scene_io::to_json_string(&self.estimate)
    }
}

/// Runs the full pipeline. Raises `RuntimeError` when no object is found.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (models, observations, seed = 0, min_score = 0.3, inlier_threshold = 0.02, lm_iters = 100, symmetry_angles = 64))]
fn solve(
    py: Python<'_>,
    models: &PyModels,
    observations: &PyObservations,
    seed: u64,
    min_score: f64,
    inlier_threshold: f64,
    lm_iters: usize,
    symmetry_angles: usize,
) -> PyResult<PySolution> {
    let mut cfg = SolveConfig { seed, min_score, symmetry_angles, ..SolveConfig::default() };
    cfg.matching.inlier_threshold = inlier_threshold;
    cfg.refine.max_iterations = lm_iters;
    let echo = serde_json::to_value(&cfg).map_err(value_err)?;
    let result = py.detach(|| pipeline::solve(&models.db, &observations.obs, &cfg));
    match result {
        Ok(s) => Ok(PySolution { estimate: s.to_estimate_file(serde_json::json!({ "solve": echo })) }),
        Err(SolveError::NoScene(stats)) => Err(PyRuntimeError::new_err(format!(
            "no scene: {} candidates, {} edges",
            stats.candidates_in, stats.edges
        ))),
        Err(e) => Err(value_err(e)),
    }
}

/// Generates a scene. Returns `(observations, ground_truth_json)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (models, seed, n_objects = 6, n_views = 4, rot_sigma = 5.0, trans_sigma = 0.005, miss_prob = 0.2, outlier_prob = 0.3))]
fn simulate(
    models: &PyModels,
    seed: u64,
    n_objects: usize,
    n_views: usize,
    rot_sigma: f64,
    trans_sigma: f64,
    miss_prob: f64,
    outlier_prob: f64,
) -> PyResult<(PyObservations, String)> {
    let scenario = ScenarioConfig {
        n_objects,
        n_views,
        seed,
        model_labels: models.db.labels().map(String::from).collect(),
        ..ScenarioConfig::default()
    };
    let noise = NoiseModel { rot_sigma, trans_sigma, miss_prob, outlier_prob, ..NoiseModel::default() };
    let catalog = Catalog::new(&models.db, 64).map_err(value_err)?;
    let scene = simulation::generate_scene(&scenario, &models.db, &mut rng_for(seed, &["scene"])).map_err(value_err)?;
    let (obs, prov) = simulation::generate_observations(&scene, &catalog, &noise, &mut rng_for(seed, &["observations"]))
        .map_err(value_err)?;
    let config = serde_json::json!({ "seed": seed, "scenario": scenario, "noise": noise });
    Ok((PyObservations { obs }, scene_io::to_json_string(&scene.to_file(config, prov))))
}

/// Aggregate metrics of an estimate against ground truth, as a dict of floats.
#[pyfunction]
fn evaluate(models: &PyModels, estimate_json: &str, ground_truth_json: &str) -> PyResult<BTreeMap<String, f64>> {
    let est: EstimateFile = scene_io::parse_json(estimate_json).map_err(value_err)?;
    let gt: GroundTruthFile = scene_io::parse_json(ground_truth_json).map_err(value_err)?;
    let pose = |v: &[f64]| scene_io::pose_from_record(v, "pose").map_err(value_err);
    let mut gts = Vec::new();
    for v in &gt.views {
        let cam = pose(&v.camera_pose)?;
        for id in &v.visible {
            let o = gt.objects.iter().find(|o| o.id == *id).ok_or_else(|| value_err(format!("unknown object {id}")))?;
            gts.push(GroundTruthPose { view_id: v.view_id.clone(), label: o.label.clone(), pose: cam.inverse().compose(&pose(&o.pose)?) });
        }
    }
    let preds = est
        .predictions
        .iter()
        .map(|p| Ok(PosePrediction { view_id: p.view_id.clone(), label: p.label.clone(), score: p.score, pose: pose(&p.pose)? }))
        .collect::<PyResult<Vec<_>>>()?;
    let a = evaluation::evaluate(&preds, &gts, &models.db).aggregate;
    Ok(BTreeMap::from([
        ("add".to_string(), a.add),
        ("adds".to_string(), a.adds),
        ("auc_adds".to_string(), a.auc_adds),
        ("recall_0p1d".to_string(), a.recall_0p1d),
        ("map_adds".to_string(), a.map_adds),
    ]))
}

/// Symmetric distance between two poses of a model, meters.
#[pyfunction]
#[pyo3(signature = (models, label, t1, t2, angles_per_axis = 64))]
fn symmetric_distance(models: &PyModels, label: &str, t1: Vec<Vec<f64>>, t2: Vec<Vec<f64>>, angles_per_axis: usize) -> PyResult<f64> {
    let m = models.db.get(label).ok_or_else(|| value_err(format!("unknown label '{label}'")))?;
    let g = discretize(&m.symmetries, angles_per_axis).map_err(value_err)?;
    Ok(sym_dist(&m.points, &g, &pose_from_py(t1)?, &pose_from_py(t2)?))
}

/// Rotation matrix from its first two (unnormalized) columns.
#[pyfunction]
fn rotation_from_6d(e1: [f64; 3], e2: [f64; 3]) -> PyResult<Vec<Vec<f64>>> {
    let r = cosy::geometry::rotation_from_6d(&Vector3::from(e1), &Vector3::from(e2)).map_err(value_err)?;
    Ok(r.matrix().row_iter().map(|row| row.iter().copied().collect()).collect())
}

/// Area under the accuracy-threshold curve on `[0, max_threshold]`.
#[pyfunction]
#[pyo3(signature = (errors, max_threshold = 0.1))]
fn add_s_auc(errors: Vec<f64>, max_threshold: f64) -> f64 {
    evaluation::add_s_auc(&errors, max_threshold)
}

#[pymodule]
fn cosy_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModels>()?;
    m.add_class::<PyObservations>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_distance, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_from_6d, m)?)?;
    m.add_function(wrap_pyfunction!(add_s_auc, m)?)?;
    Ok(())
}
