//! Object symmetry sets, their discretization into finite groups, and the
//! symmetric distance between two poses of a model.

use nalgebra::{Point3, Unit, Vector3};
use thiserror::Error;

use crate::geometry::{PointSet, Pose, Rotation3};

/// Number of rotation angles sampled around each continuous symmetry axis.
pub const DEFAULT_ANGLES_PER_AXIS: usize = 64;

/// Upper bound on the number of discretized group elements.
pub const DEFAULT_GROUP_CAP: usize = 4096;

/// Two elements are merged when their maximal point displacement over the
/// bounding ball is below this value (meters).
pub const DEDUP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmetryError {
    #[error("symmetry group would have {size} elements, above the cap of {cap}")]
    GroupTooLarge { size: usize, cap: usize },
    #[error("angles_per_axis must be at least 1")]
    NoAngles,
    #[error("symmetry axis {0} has zero length")]
    ZeroAxis(usize),
}

/// A continuous rotational symmetry: rotation about `axis` through `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryAxis {
    pub axis: Unit<Vector3<f64>>,
    pub offset: Point3<f64>,
}

impl SymmetryAxis {
    pub fn new(axis: Vector3<f64>, offset: Point3<f64>) -> Result<Self, SymmetryError> {
        if !(axis.norm() > 0.0) {
            return Err(SymmetryError::ZeroAxis(0));
        }
        Ok(Self {
            axis: Unit::new_normalize(axis),
            offset,
        })
    }

    pub fn through_origin(axis: Vector3<f64>) -> Self {
        Self {
            axis: Unit::new_normalize(axis),
            offset: Point3::origin(),
        }
    }

    /// Rigid motion rotating by `angle` about the axis line.
    pub fn rotation(&self, angle: f64) -> Pose {
        let r = Rotation3::from_axis_angle(&self.axis, angle);
        let o = self.offset.coords;
        Pose::new(r, o - r * o)
    }
}

/// Symmetries of an object: a discrete set of rigid motions (always
/// containing the identity) plus continuous rotational axes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymmetrySpec {
    pub discrete: Vec<Pose>,
    pub continuous_axes: Vec<SymmetryAxis>,
}

impl SymmetrySpec {
    /// No symmetry: only the identity.
    pub fn none() -> Self {
        Self {
            discrete: vec![Pose::identity()],
            continuous_axes: Vec::new(),
        }
    }

    /// Builds a spec, inserting the identity at the front of `discrete` if absent.
    pub fn new(discrete: Vec<Pose>, continuous_axes: Vec<SymmetryAxis>) -> Self {
        let mut spec = Self {
            discrete,
            continuous_axes,
        };
        spec.ensure_identity_first();
        spec
    }

    fn ensure_identity_first(&mut self) {
        match self.discrete.iter().position(is_identity) {
            Some(0) => {}
            Some(i) => {
                let id = self.discrete.remove(i);
                self.discrete.insert(0, id);
            }
            None => self.discrete.insert(0, Pose::identity()),
        }
    }
}

fn is_identity(p: &Pose) -> bool {
    pose_displacement_bound(p, &Pose::identity(), 1.0) < DEDUP_TOLERANCE
}

/// Upper bound on `max_{‖x‖ ≤ radius} ‖a·x − b·x‖`.
fn pose_displacement_bound(a: &Pose, b: &Pose, radius: f64) -> f64 {
    (a.rotation.matrix() - b.rotation.matrix()).norm() * radius
        + (a.translation - b.translation).norm()
}

/// Finite set of symmetries, identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    elements: Vec<Pose>,
}

impl SymmetryGroup {
    pub fn trivial() -> Self {
        Self {
            elements: vec![Pose::identity()],
        }
    }

    /// Wraps an explicit element list; the identity is moved or inserted first.
    pub fn from_elements(elements: Vec<Pose>) -> Self {
        let spec = SymmetrySpec::new(elements, Vec::new());
        Self {
            elements: spec.discrete,
        }
    }

    pub fn elements(&self) -> &[Pose] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.elements.len() > 1
    }

    /// Max deviation from closure: for every pair `(a, b)`, distance from
    /// `a·b` to its nearest element, measured on a ball of `radius`.
    pub fn closure_error(&self, radius: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.elements {
            for b in &self.elements {
                let ab = a.compose(b);
                let nearest = self
                    .elements
                    .iter()
                    .map(|e| pose_displacement_bound(&ab, e, radius))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(nearest);
            }
        }
        worst
    }
}

/// Discretizes `spec` with a unit bounding radius and the default cap.
pub fn discretize(
    spec: &SymmetrySpec,
    angles_per_axis: usize,
) -> Result<SymmetryGroup, SymmetryError> {
    discretize_with(spec, angles_per_axis, DEFAULT_GROUP_CAP, 1.0)
}

/// Elements are `d · rot(axis_i, 2πk/n)` for every discrete `d`, axis `i`
/// and `k < n`, deduplicated on a ball of `radius` meters.
pub fn discretize_with(
    spec: &SymmetrySpec,
    angles_per_axis: usize,
    cap: usize,
    radius: f64,
) -> Result<SymmetryGroup, SymmetryError> {
    if angles_per_axis == 0 {
        return Err(SymmetryError::NoAngles);
    }
    let mut discrete = spec.discrete.clone();
    if discrete.first().is_none_or(|d| !is_identity(d)) {
        discrete = SymmetrySpec::new(discrete, Vec::new()).discrete;
    }
    let per_discrete = if spec.continuous_axes.is_empty() {
        1
    } else {
        spec.continuous_axes.len() * angles_per_axis
    };
    let size = discrete.len() * per_discrete;
    if size > cap {
        return Err(SymmetryError::GroupTooLarge { size, cap });
    }

    let mut rotations = Vec::with_capacity(per_discrete);
    if spec.continuous_axes.is_empty() {
        rotations.push(Pose::identity());
    } else {
        for axis in &spec.continuous_axes {
            for k in 0..angles_per_axis {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / angles_per_axis as f64;
                rotations.push(axis.rotation(angle));
            }
        }
    }

    let tol = DEDUP_TOLERANCE;
    let radius = radius.max(f64::MIN_POSITIVE);
    let mut elements: Vec<Pose> = Vec::with_capacity(size);
    for d in &discrete {
        for r in &rotations {
            let candidate = d.compose(r);
            let duplicate = elements
                .iter()
                .any(|e| pose_displacement_bound(e, &candidate, radius) < tol);
            if !duplicate {
                elements.push(candidate);
            }
        }
    }
    Ok(SymmetryGroup { elements })
}

/// Which norm measures the pointwise displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointNorm {
    L2,
    L1,
}

impl PointNorm {
    #[inline]
    fn apply(self, v: &Vector3<f64>) -> f64 {
        match self {
            PointNorm::L2 => v.norm(),
            PointNorm::L1 => v.x.abs() + v.y.abs() + v.z.abs(),
        }
    }
}

/// Model points paired with a symmetry group, with `S·x` cached for every
/// element. This is what the matching and refinement hot loops consume.
#[derive(Debug, Clone)]
pub struct SymmetricPoints {
    points: PointSet,
    group: SymmetryGroup,
    transformed: Vec<Vec<Point3<f64>>>,
}

impl SymmetricPoints {
    pub fn new(points: PointSet, group: SymmetryGroup) -> Self {
        let transformed = group
            .elements()
            .iter()
            .map(|s| points.iter().map(|x| s.transform_point(x)).collect())
            .collect();
        Self {
            points,
            group,
            transformed,
        }
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    /// `S·x` for the element at `index`.
    pub fn transformed(&self, index: usize) -> &[Point3<f64>] {
        &self.transformed[index]
    }

    /// `(argmin index, min distance)` of the symmetric distance.
    pub fn best(&self, t1: &Pose, t2: &Pose, norm: PointNorm) -> (usize, f64) {
        self.best_below(t1, t2, norm, f64::INFINITY)
            .expect("an unbounded search always finds an element")
    }

    /// Like [`Self::best`], restricted to distances strictly below `bound`.
    /// Elements are abandoned as soon as their partial sum exceeds the best so far.
    pub fn best_below(
        &self,
        t1: &Pose,
        t2: &Pose,
        norm: PointNorm,
        bound: f64,
    ) -> Option<(usize, f64)> {
        let n = self.points.len() as f64;
        let target: Vec<Point3<f64>> = self.points.iter().map(|x| t2.transform_point(x)).collect();
        let mut best_index = None;
        let mut best_sum = bound * n;
        'elements: for (index, sx) in self.transformed.iter().enumerate() {
            let mut sum = 0.0;
            for (s, y) in sx.iter().zip(&target) {
                sum += norm.apply(&(t1.transform_point(s) - y));
                if sum > best_sum {
                    continue 'elements;
                }
            }
            if sum < best_sum || (best_index.is_none() && bound.is_infinite()) {
                best_sum = sum;
                best_index = Some(index);
            }
        }
        best_index.map(|i| (i, best_sum / n))
    }

    pub fn distance(&self, t1: &Pose, t2: &Pose) -> f64 {
        self.best(t1, t2, PointNorm::L2).1
    }
}

/// `min_S (1/|X|) Σ ‖t1·S·x − t2·x‖₂`.
pub fn symmetric_distance(points: &PointSet, group: &SymmetryGroup, t1: &Pose, t2: &Pose) -> f64 {
    SymmetricPoints::new(points.clone(), group.clone()).distance(t1, t2)
}

/// The group element attaining [`symmetric_distance`]; lowest index wins ties.
pub fn best_symmetry(points: &PointSet, group: &SymmetryGroup, t1: &Pose, t2: &Pose) -> Pose {
    let sp = SymmetricPoints::new(points.clone(), group.clone());
    let (index, _) = sp.best(t1, t2, PointNorm::L2);
    group.elements()[index]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rz(theta: f64) -> Pose {
        Pose::from_rotation(Rotation3::from_axis_angle(&Vector3::z_axis(), theta))
    }

    fn rx(theta: f64) -> Pose {
        Pose::from_rotation(Rotation3::from_axis_angle(&Vector3::x_axis(), theta))
    }

    fn square_points() -> PointSet {
        // 4-fold symmetric about z, full rank
        let mut pts = Vec::new();
        for k in 0..4 {
            let a = FRAC_PI_2 * k as f64 + 0.3;
            pts.push(Point3::new(0.05 * a.cos(), 0.05 * a.sin(), 0.02));
            pts.push(Point3::new(0.03 * a.cos(), 0.03 * a.sin(), -0.04));
        }
        PointSet::new(pts).unwrap()
    }

    fn four_fold() -> SymmetryGroup {
        SymmetryGroup::from_elements((0..4).map(|k| rz(FRAC_PI_2 * k as f64)).collect())
    }

    #[test]
    fn discretize_examples() {
        let g = discretize(&SymmetrySpec::none(), 64).unwrap();
        assert_eq!(g.len(), 1);

        let axis = SymmetrySpec::new(vec![], vec![SymmetryAxis::through_origin(Vector3::z())]);
        let g = discretize(&axis, 64).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.elements()[0], Pose::identity());

        let flip = SymmetrySpec::new(
            vec![Pose::identity(), rx(PI)],
            vec![SymmetryAxis::through_origin(Vector3::z())],
        );
        let g = discretize(&flip, 64).unwrap();
        // brute-force enumeration of the 128 products, deduplicated pairwise
        let mut all = Vec::new();
        for d in [Pose::identity(), rx(PI)] {
            for k in 0..64 {
                all.push(d.compose(&rz(2.0 * PI * k as f64 / 64.0)));
            }
        }
        let mut distinct: Vec<Pose> = Vec::new();
        for p in all {
            if !distinct
                .iter()
                .any(|q| (q.to_matrix() - p.to_matrix()).amax() < 1e-9)
            {
                distinct.push(p);
            }
        }
        assert_eq!(distinct.len(), 128);
        assert_eq!(g.len(), 128);
        assert!(g.closure_error(1.0) < 1e-9);
    }

    #[test]
    fn discretize_dedups_rotation_along_axis() {
        // a 180° turn about the continuous axis itself adds nothing
        let spec = SymmetrySpec::new(
            vec![Pose::identity(), rz(PI)],
            vec![SymmetryAxis::through_origin(Vector3::z())],
        );
        assert_eq!(discretize(&spec, 64).unwrap().len(), 64);
    }

    #[test]
    fn discretize_errors() {
        let spec = SymmetrySpec::new(
            vec![Pose::identity(), rx(PI)],
            vec![
                SymmetryAxis::through_origin(Vector3::z()),
                SymmetryAxis::through_origin(Vector3::x()),
            ],
        );
        assert_eq!(
            discretize_with(&spec, 64, 200, 1.0),
            Err(SymmetryError::GroupTooLarge { size: 256, cap: 200 })
        );
        assert_eq!(discretize(&spec, 0), Err(SymmetryError::NoAngles));
    }

    #[test]
    fn offset_axis_fixes_its_line() {
        let axis = SymmetryAxis::new(Vector3::z(), Point3::new(0.1, 0.0, 0.0)).unwrap();
        let r = axis.rotation(1.0);
        let on_axis = Point3::new(0.1, 0.0, 0.7);
        assert!((r.transform_point(&on_axis) - on_axis).norm() < 1e-15);
    }

    #[test]
    fn symmetric_distance_examples() {
        let pts = square_points();
        let g = four_fold();
        let t1 = Pose::new(Rotation3::from_euler_angles(0.1, 0.2, 0.3), Vector3::new(0.0, 0.1, 0.8));
        assert_eq!(symmetric_distance(&pts, &g, &t1, &t1), 0.0);
        for s in g.elements() {
            let t2 = t1.compose(s);
            assert!(symmetric_distance(&pts, &g, &t1, &t2) < 1e-12);
        }

        // centered symmetric set, 1 cm translation: identity attains ‖t‖
        let centered = PointSet::new(vec![
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(-0.1, 0.0, 0.0),
            Point3::new(0.0, 0.1, 0.05),
            Point3::new(0.0, -0.1, -0.05),
        ])
        .unwrap();
        let t2 = Pose::from_translation(Vector3::new(0.01, 0.0, 0.0));
        let d = symmetric_distance(&centered, &g, &Pose::identity(), &t2);
        assert!((d - 0.01).abs() < 1e-15);
    }

    #[test]
    fn best_symmetry_examples() {
        let pts = square_points();
        let g = four_fold();
        let t1 = Pose::new(Rotation3::from_euler_angles(0.1, 0.2, 0.3), Vector3::new(0.0, 0.1, 0.8));
        assert_eq!(best_symmetry(&pts, &g, &t1, &t1), Pose::identity());
        let s = best_symmetry(&pts, &g, &t1, &t1.compose(&rz(FRAC_PI_2)));
        assert_eq!(s, g.elements()[1]);

        // noisy target near the 180° element: brute-force scan agrees
        let noisy = t1
            .compose(&rz(PI))
            .compose(&Pose::new(
                Rotation3::from_euler_angles(0.02, -0.01, 0.03),
                Vector3::new(0.001, 0.0, -0.002),
            ));
        let (mut scan_index, mut scan_best) = (0, f64::INFINITY);
        for (i, e) in g.elements().iter().enumerate() {
            let mut sum = 0.0;
            for x in &pts {
                sum += (t1.transform_point(&e.transform_point(x)) - noisy.transform_point(x)).norm();
            }
            if sum < scan_best {
                scan_best = sum;
                scan_index = i;
            }
        }
        assert_eq!(scan_index, 2);
        assert_eq!(best_symmetry(&pts, &g, &t1, &noisy), g.elements()[2]);
    }

    #[test]
    fn l1_norm_dominates_l2() {
        let pts = square_points();
        let g = four_fold();
        let sp = SymmetricPoints::new(pts, g);
        let t1 = Pose::identity();
        let t2 = Pose::new(Rotation3::from_euler_angles(0.2, 0.0, 0.1), Vector3::new(0.01, 0.02, 0.0));
        let l1 = sp.best(&t1, &t2, PointNorm::L1).1;
        let l2 = sp.best(&t1, &t2, PointNorm::L2).1;
        assert!(l1 >= l2 && l1 <= 3f64.sqrt() * l2 + 1e-15);
    }
}
