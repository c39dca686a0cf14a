//! Object-level bundle adjustment: a global scene is initialized from the
//! two-view relative poses, then camera and object poses are refined jointly
//! by Levenberg-Marquardt on the symmetric truncated reprojection loss.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Point2, Point3, Vector2, Vector6};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::geometry::{retract, skew, CameraIntrinsics, Pose, DEFAULT_Z_MIN};
use crate::matching::{PhysicalObject, TwoViewHypothesis};
use crate::scene_io::SceneObservations;

/// Guards the reweighting against residuals that are already (almost) zero. Pixels.
const MIN_RESIDUAL_NORM: f64 = 1e-6;
/// Damping is clamped to this range; the optimizer gives up once a step is
/// rejected at the upper bound.
const MIN_DAMPING: f64 = 1e-12;
const MAX_DAMPING: f64 = 1e12;
/// Losses below this are treated as converged. Pixels.
const ZERO_LOSS: f64 = 1e-12;

/// World-frame poses of cameras (`T_{C_a}`) and physical objects (`T_{P_n}`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneState {
    pub cameras: BTreeMap<String, Pose>,
    pub objects: BTreeMap<usize, Pose>,
    /// Camera whose pose is held fixed during refinement.
    pub root: Option<String>,
}

impl SceneState {
    /// Applies `g` on the left of every pose.
    pub fn transformed(&self, g: &Pose) -> SceneState {
        SceneState {
            cameras: self
                .cameras
                .iter()
                .map(|(k, p)| (k.clone(), g.compose(p)))
                .collect(),
            objects: self.objects.iter().map(|(k, p)| (*k, g.compose(p))).collect(),
            root: self.root.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Per-point reprojection error cap, pixels.
    pub truncation: f64,
    pub damping_init: f64,
    pub damping_factor: f64,
    /// Stop once an accepted step lowers the loss by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iterations: 100,
            truncation: 25.0,
            damping_init: 1e-4,
            damping_factor: 10.0,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        for (name, v) in [
            ("truncation", self.truncation),
            ("damping_init", self.damping_init),
            ("rel_tol", self.rel_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.damping_factor > 1.0 && self.damping_factor.is_finite()) {
            return Err("damping_factor must be greater than 1".into());
        }
        Ok(())
    }
}

/// Output of [`initialize_scene`].
#[derive(Debug, Clone)]
pub struct Initialization {
    pub state: SceneState,
    /// Input objects restricted to placed views; objects left without a
    /// member are dropped.
    pub objects: Vec<PhysicalObject>,
    /// Views hosting object members that could not be chained to the root.
    pub disconnected_views: Vec<String>,
}

/// Picks a root camera at random among the views of the largest connected
/// component of the view graph (views hosting object members, linked by
/// accepted hypotheses), chains the other cameras to it through the relative
/// poses (at each step using the link with most inliers), and places every
/// object from one of its members chosen at random.
pub fn initialize_scene<R: Rng + ?Sized>(
    objects: &[PhysicalObject],
    hypotheses: &[TwoViewHypothesis],
    obs: &SceneObservations,
    rng: &mut R,
) -> Initialization {
    let member_views: BTreeSet<&str> = objects
        .iter()
        .flat_map(|o| o.members.iter().map(|m| m.view_id.as_str()))
        .collect();
    if member_views.is_empty() {
        return Initialization {
            state: SceneState::default(),
            objects: Vec::new(),
            disconnected_views: Vec::new(),
        };
    }

    // components of the view graph, in sorted view order
    let views: Vec<&str> = member_views.iter().copied().collect();
    let mut component: BTreeMap<&str, usize> = BTreeMap::new();
    let mut components: Vec<Vec<&str>> = Vec::new();
    for &start in &views {
        if component.contains_key(start) {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component.insert(start, id);
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            for h in hypotheses {
                let other = if h.view_a == v {
                    h.view_b.as_str()
                } else if h.view_b == v {
                    h.view_a.as_str()
                } else {
                    continue;
                };
                if member_views.contains(other) && !component.contains_key(other) {
                    component.insert(other, id);
                    members.push(other);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        components.push(members);
    }
    let largest = components
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
        .map(|(i, _)| i)
        .expect("at least one component");
    let reachable = &components[largest];
    let root = reachable[rng.random_range(0..reachable.len())];

    let mut cameras: BTreeMap<String, Pose> = BTreeMap::new();
    cameras.insert(root.to_string(), Pose::identity());
    loop {
        // most-supported link from a placed to an unplaced view
        let mut best: Option<(&TwoViewHypothesis, bool)> = None;
        for h in hypotheses {
            let (a_in, b_in) = (
                cameras.contains_key(&h.view_a),
                cameras.contains_key(&h.view_b),
            );
            let forward = a_in && !b_in && reachable.contains(&h.view_b.as_str());
            let backward = b_in && !a_in && reachable.contains(&h.view_a.as_str());
            if !(forward || backward) {
                continue;
            }
            let better = best.is_none_or(|(b, _)| {
                h.inliers.len() > b.inliers.len()
                    || (h.inliers.len() == b.inliers.len()
                        && h.inlier_distance_sum() < b.inlier_distance_sum())
            });
            if better {
                best = Some((h, forward));
            }
        }
        let Some((h, forward)) = best else { break };
        if forward {
            let t = cameras[&h.view_a].compose(&h.relative_pose);
            cameras.insert(h.view_b.clone(), t);
        } else {
            let t = cameras[&h.view_b].compose(&h.relative_pose.inverse());
            cameras.insert(h.view_a.clone(), t);
        }
    }

    let disconnected_views: Vec<String> = views
        .iter()
        .filter(|v| !cameras.contains_key(**v))
        .map(|v| v.to_string())
        .collect();
    if !disconnected_views.is_empty() {
        warn!(
            "views {:?} are not connected to root {root}; their candidates are dropped",
            disconnected_views
        );
    }

    let mut kept = Vec::new();
    let mut object_poses = BTreeMap::new();
    for o in objects {
        let members: Vec<_> = o
            .members
            .iter()
            .filter(|m| cameras.contains_key(&m.view_id))
            .cloned()
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = &members[rng.random_range(0..members.len())];
        let pose = cameras[&m.view_id].compose(&obs.candidates[m.candidate].pose);
        object_poses.insert(o.id, pose);
        let score = members.iter().map(|m| obs.candidates[m.candidate].score).sum();
        kept.push(PhysicalObject {
            id: o.id,
            label: o.label.clone(),
            members,
            score,
        });
    }

    Initialization {
        state: SceneState {
            cameras,
            objects: object_poses,
            root: Some(root.to_string()),
        },
        objects: kept,
        disconnected_views,
    }
}

/// One (physical object, member candidate) term of the loss, with the
/// candidate-side projections precomputed for every symmetry.
#[derive(Debug, Clone)]
struct Block {
    object: usize,
    view: String,
    candidate: usize,
    label: String,
    intrinsics: CameraIntrinsics,
    /// `π(T_{C_aO} S x)` per symmetry and point; `None` behind the camera.
    measured: Vec<Vec<Option<Point2<f64>>>>,
}

/// Where each pose's 6 increments live in the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    /// Free cameras, sorted by view id.
    pub cameras: Vec<String>,
    /// Objects, sorted by id.
    pub objects: Vec<usize>,
}

impl ParameterLayout {
    pub fn dim(&self) -> usize {
        6 * (self.cameras.len() + self.objects.len())
    }

    pub fn camera_offset(&self, view: &str) -> Option<usize> {
        self.cameras
            .binary_search_by(|c| c.as_str().cmp(view))
            .ok()
            .map(|i| 6 * i)
    }

    pub fn object_offset(&self, id: usize) -> Option<usize> {
        self.objects
            .binary_search(&id)
            .ok()
            .map(|i| 6 * (self.cameras.len() + i))
    }

    /// Left-retracts every free pose by its slice of `delta`.
    pub fn retract(&self, state: &SceneState, delta: &DVector<f64>) -> SceneState {
        let mut out = state.clone();
        for (i, v) in self.cameras.iter().enumerate() {
            let d = Vector6::from_iterator(delta.rows(6 * i, 6).iter().copied());
            let p = out.cameras.get_mut(v).expect("layout camera in state");
            *p = retract(p, &d);
        }
        for (i, o) in self.objects.iter().enumerate() {
            let off = 6 * (self.cameras.len() + i);
            let d = Vector6::from_iterator(delta.rows(off, 6).iter().copied());
            let p = out.objects.get_mut(o).expect("layout object in state");
            *p = retract(p, &d);
        }
        out
    }
}

/// The reprojection problem for a fixed set of physical objects.
pub struct Problem<'a> {
    catalog: &'a Catalog,
    blocks: Vec<Block>,
    truncation: f64,
}

fn project(k: &CameraIntrinsics, q: &Point3<f64>) -> Option<Point2<f64>> {
    k.project_point(q, DEFAULT_Z_MIN)
}

impl<'a> Problem<'a> {
    pub fn new(
        objects: &[PhysicalObject],
        obs: &SceneObservations,
        catalog: &'a Catalog,
        truncation: f64,
    ) -> Problem<'a> {
        let mut specs = Vec::new();
        for o in objects {
            for m in &o.members {
                specs.push((o.id, m.view_id.clone(), m.candidate, o.label.clone()));
            }
        }
        let blocks = specs
            .into_par_iter()
            .map(|(object, view, candidate, label)| {
                let c = &obs.candidates[candidate];
                let k = obs.view(&view).expect("member view exists").intrinsics;
                let pts = &catalog.model(&label).residual;
                let measured = (0..pts.group().len())
                    .map(|s| {
                        pts.transformed(s)
                            .iter()
                            .map(|x| project(&k, &c.pose.transform_point(x)))
                            .collect()
                    })
                    .collect();
                Block {
                    object,
                    view,
                    candidate,
                    label,
                    intrinsics: k,
                    measured,
                }
            })
            .collect();
        Problem {
            catalog,
            blocks,
            truncation,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Free parameters: every camera with at least one block except the
    /// root (or, without a usable root, the first such camera), and every
    /// object with a block.
    pub fn layout(&self, state: &SceneState) -> ParameterLayout {
        let views: BTreeSet<&str> = self.blocks.iter().map(|b| b.view.as_str()).collect();
        let fixed = match &state.root {
            Some(r) if views.contains(r.as_str()) => Some(r.as_str()),
            _ => views.iter().next().copied(),
        };
        ParameterLayout {
            cameras: views
                .iter()
                .filter(|v| Some(**v) != fixed)
                .map(|v| v.to_string())
                .collect(),
            objects: self
                .blocks
                .iter()
                .map(|b| b.object)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }

    fn predicted(&self, state: &SceneState, b: &Block) -> (Vec<Point3<f64>>, Vec<Point3<f64>>) {
        let cam_inv = state.cameras[&b.view].inverse();
        let obj = &state.objects[&b.object];
        let pts = self.catalog.model(&b.label).residual.points();
        let world: Vec<Point3<f64>> = pts.iter().map(|x| obj.transform_point(x)).collect();
        let cam = world.iter().map(|p| cam_inv.transform_point(p)).collect();
        (world, cam)
    }

    fn block_loss_for(&self, b: &Block, cam_pts: &[Point3<f64>], s: usize) -> f64 {
        let tau = self.truncation;
        let sum: f64 = cam_pts
            .iter()
            .zip(&b.measured[s])
            .map(|(q, m)| match (project(&b.intrinsics, q), m) {
                (Some(p), Some(m)) => (p - m).norm().min(tau),
                _ => tau,
            })
            .sum();
        sum / cam_pts.len() as f64
    }

    /// Loss of one block and the symmetry attaining it (lowest index on ties).
    fn block_loss(&self, state: &SceneState, b: &Block) -> (f64, usize) {
        let (_, cam_pts) = self.predicted(state, b);
        let mut best = (f64::INFINITY, 0);
        for s in 0..b.measured.len() {
            let l = self.block_loss_for(b, &cam_pts, s);
            if l < best.0 {
                best = (l, s);
            }
        }
        best
    }

    /// Per-block losses in block order.
    pub fn block_losses(&self, state: &SceneState) -> Vec<f64> {
        self.blocks
            .par_iter()
            .map(|b| self.block_loss(state, b).0)
            .collect()
    }

    /// Loss of the block for `candidate`, if it belongs to the problem.
    pub fn candidate_loss(&self, state: &SceneState, candidate: usize) -> Option<f64> {
        self.blocks
            .iter()
            .find(|b| b.candidate == candidate)
            .map(|b| self.block_loss(state, b).0)
    }

    /// Sum of block losses, reduced serially in block order.
    pub fn total_loss(&self, state: &SceneState) -> f64 {
        self.block_losses(state).iter().sum()
    }

    /// Minimizing symmetry index per block.
    pub fn select_symmetries(&self, state: &SceneState) -> Vec<usize> {
        self.blocks
            .par_iter()
            .map(|b| self.block_loss(state, b).1)
            .collect()
    }

    /// Pixel residuals `π(T_C⁻¹ T_P x) − π(T_CO S x)` of every point that is
    /// in front of the camera and below the truncation, with their
    /// Jacobians w.r.t. the layout's increments. Rows are grouped per block
    /// in block order, two per point; the third output gives the block of
    /// every point.
    pub fn linearize(
        &self,
        state: &SceneState,
        symmetries: &[usize],
        layout: &ParameterLayout,
    ) -> (DVector<f64>, DMatrix<f64>, Vec<usize>) {
        let parts: Vec<Vec<(Vector2<f64>, Vec<(usize, Matrix2x3<f64>, Matrix2x3<f64>)>)>> = self
            .blocks
            .par_iter()
            .zip(symmetries.par_iter())
            .map(|(b, &s)| self.block_terms(state, b, s, layout))
            .collect();
        let rows: usize = parts.iter().map(|p| 2 * p.len()).sum();
        let mut r = DVector::zeros(rows);
        let mut j = DMatrix::zeros(rows, layout.dim());
        let mut owner = Vec::with_capacity(rows / 2);
        let mut row = 0;
        for (bi, terms) in parts.into_iter().enumerate() {
            for (res, jac) in terms {
                r.rows_mut(row, 2).copy_from(&res);
                for (off, jw, jv) in jac {
                    j.view_mut((row, off), (2, 3)).copy_from(&jw);
                    j.view_mut((row, off + 3), (2, 3)).copy_from(&jv);
                }
                owner.push(bi);
                row += 2;
            }
        }
        (r, j, owner)
    }

    #[allow(clippy::type_complexity)]
    fn block_terms(
        &self,
        state: &SceneState,
        b: &Block,
        s: usize,
        layout: &ParameterLayout,
    ) -> Vec<(Vector2<f64>, Vec<(usize, Matrix2x3<f64>, Matrix2x3<f64>)>)> {
        let (world, cam_pts) = self.predicted(state, b);
        let rc_t: Matrix3<f64> = state.cameras[&b.view].rotation.matrix().transpose();
        let cam_off = layout.camera_offset(&b.view);
        let obj_off = layout.object_offset(b.object);
        let k = &b.intrinsics;
        let mut out = Vec::new();
        for ((w, q), m) in world.iter().zip(&cam_pts).zip(&b.measured[s]) {
            let (Some(p), Some(m)) = (project(k, q), m) else {
                continue;
            };
            let res = p - m;
            if res.norm() >= self.truncation {
                continue;
            }
            let z = q.z;
            let dpi = Matrix2x3::new(
                k.fx / z,
                0.0,
                -k.fx * q.x / (z * z),
                0.0,
                k.fy / z,
                -k.fy * q.y / (z * z),
            );
            let wx = skew(&w.coords);
            let mut jac = Vec::with_capacity(2);
            if let Some(off) = cam_off {
                jac.push((off, dpi * rc_t * wx, -dpi * rc_t));
            }
            if let Some(off) = obj_off {
                jac.push((off, -dpi * rc_t * wx, dpi * rc_t));
            }
            out.push((res, jac));
        }
        out
    }
}

/// Loss of `candidate` against `object` in `state`.
pub fn candidate_loss(
    state: &SceneState,
    candidate: usize,
    object: &PhysicalObject,
    obs: &SceneObservations,
    catalog: &Catalog,
    truncation: f64,
) -> f64 {
    let single = PhysicalObject {
        members: object
            .members
            .iter()
            .filter(|m| m.candidate == candidate)
            .cloned()
            .collect(),
        ..object.clone()
    };
    assert!(
        !single.members.is_empty(),
        "candidate {candidate} is not a member of object {}",
        object.id
    );
    Problem::new(&[single], obs, catalog, truncation).total_loss(state)
}

/// Sum of candidate losses over all objects and members.
pub fn total_loss(
    state: &SceneState,
    objects: &[PhysicalObject],
    obs: &SceneObservations,
    catalog: &Catalog,
    truncation: f64,
) -> f64 {
    Problem::new(objects, obs, catalog, truncation).total_loss(state)
}

#[derive(Debug, Clone)]
pub struct RefineReport {
    pub state: SceneState,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Loss after every accepted step, starting with the initial loss.
    pub trace: Vec<f64>,
    /// Linearizations performed.
    pub iterations: usize,
}

/// Levenberg-Marquardt on the truncated (non-squared) reprojection loss.
/// Each iteration re-selects the best symmetry per block, reweights the
/// non-truncated residuals by `1 / (N‖r‖)` so that the Gauss-Newton model
/// matches the L2-norm loss to first order, and tries damped steps until one
/// lowers the true loss. The returned loss never exceeds the initial one.
pub fn refine(
    state: &SceneState,
    objects: &[PhysicalObject],
    obs: &SceneObservations,
    catalog: &Catalog,
    cfg: &RefineConfig,
) -> RefineReport {
    let problem = Problem::new(objects, obs, catalog, cfg.truncation);
    let layout = problem.layout(state);
    let npoints: Vec<f64> = problem
        .blocks
        .iter()
        .map(|b| catalog.model(&b.label).residual.points().len() as f64)
        .collect();

    let mut current = state.clone();
    let mut loss = problem.total_loss(&current);
    let initial_loss = loss;
    let mut trace = vec![loss];
    let mut damping = cfg.damping_init;
    let mut iterations = 0;

    while iterations < cfg.max_iterations && loss > ZERO_LOSS && layout.dim() > 0 {
        iterations += 1;
        let symmetries = problem.select_symmetries(&current);
        let (r, j, owner) = problem.linearize(&current, &symmetries, &layout);
        if r.is_empty() {
            break;
        }

        let n = layout.dim();
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut g = DVector::<f64>::zeros(n);
        for (pt, &bi) in owner.iter().enumerate() {
            let res = r.fixed_rows::<2>(2 * pt);
            let w = 1.0 / (npoints[bi] * res.norm().max(MIN_RESIDUAL_NORM));
            let jp = j.rows(2 * pt, 2);
            h.gemm_tr(w, &jp, &jp, 1.0);
            g.gemv_tr(w, &jp, &res, 1.0);
        }

        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut a = h.clone();
            for i in 0..n {
                a[(i, i)] += damping * h[(i, i)].max(1e-9);
            }
            let step = a.cholesky().map(|c| c.solve(&(-&g)));
            if let Some(delta) = step.filter(|d| d.iter().all(|x| x.is_finite())) {
                let candidate = layout.retract(&current, &delta);
                let new_loss = problem.total_loss(&candidate);
                if new_loss < loss {
                    let decrease = (loss - new_loss) / loss;
                    current = candidate;
                    loss = new_loss;
                    trace.push(loss);
                    damping = (damping / cfg.damping_factor).max(MIN_DAMPING);
                    accepted = true;
                    if decrease < cfg.rel_tol {
                        debug!("refine: relative decrease {decrease:e} below tolerance");
                        iterations = cfg.max_iterations;
                    }
                    break;
                }
            }
            damping *= cfg.damping_factor;
        }
        if !accepted {
            debug!("refine: no decreasing step at damping {damping:e}");
            break;
        }
    }

    debug!("refine: loss {initial_loss:.6} -> {loss:.6} after {iterations} iterations");
    RefineReport {
        state: current,
        initial_loss,
        final_loss: loss,
        trace,
        iterations,
    }
}

/// One physical object expressed in one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrameObject {
    pub view_id: String,
    pub object_id: usize,
    pub label: String,
    /// Sum of member detection scores.
    pub score: f64,
    /// `T_{C_a}⁻¹ · T_{P_n}`.
    pub pose: Pose,
}

/// Every object in every camera of the state, ordered by view then object.
pub fn express_in_camera_frames(
    state: &SceneState,
    objects: &[PhysicalObject],
) -> Vec<CameraFrameObject> {
    let mut sorted: Vec<&PhysicalObject> = objects
        .iter()
        .filter(|o| state.objects.contains_key(&o.id))
        .collect();
    sorted.sort_by_key(|o| o.id);
    let mut out = Vec::new();
    for (view, cam) in &state.cameras {
        let inv = cam.inverse();
        for o in &sorted {
            out.push(CameraFrameObject {
                view_id: view.clone(),
                object_id: o.id,
                label: o.label.clone(),
                score: o.score,
                pose: inv.compose(&state.objects[&o.id]),
            });
        }
    }
    out
}
