//! Rigid transforms, pinhole projection and the rotation parametrizations
//! shared by matching, refinement and the single-view kernels.
//!
//! Rotations are stored as matrices. All types are plain values.

use nalgebra::{Matrix3, Matrix4, Point2, Point3, Vector3, Vector6};
use thiserror::Error;

pub use nalgebra::Rotation3;

/// Default minimal depth (meters) accepted by [`project`].
pub const DEFAULT_Z_MIN: f64 = 1e-3;

/// Norm below which a 6D rotation basis is considered degenerate.
pub const DEGENERATE_BASIS_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {index} is behind the camera (z = {z})")]
    BehindCamera { index: usize, z: f64 },
    #[error("degenerate rotation basis: {0}")]
    DegenerateBasis(&'static str),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid point set: {0}")]
    InvalidPointSet(String),
    #[error("invalid homogeneous matrix: {0}")]
    InvalidMatrix(String),
}

/// Rigid transform in SE(3): `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Homogeneous product `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.inverse();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_points(&self, pts: &PointSet) -> PointSet {
        PointSet(pts.iter().map(|p| self.transform_point(p)).collect())
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
        out
    }

    /// Parses a row-major 4×4 homogeneous matrix. The bottom row must be
    /// `(0, 0, 0, 1)` and the rotation block orthonormal with det +1, both to `tol`.
    pub fn from_row_major(values: &[f64], tol: f64) -> Result<Pose, GeometryError> {
        if values.len() != 16 {
            return Err(GeometryError::InvalidMatrix(format!(
                "expected 16 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidMatrix("non-finite entry".into()));
        }
        let bottom = [values[12], values[13], values[14], values[15]];
        let expected = [0.0, 0.0, 0.0, 1.0];
        if bottom
            .iter()
            .zip(expected.iter())
            .any(|(a, b)| (a - b).abs() > tol)
        {
            return Err(GeometryError::InvalidMatrix(format!(
                "bottom row {bottom:?} is not (0, 0, 0, 1)"
            )));
        }
        let r = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
            values[10],
        );
        check_rotation(&r, tol)?;
        Ok(Pose::new(
            Rotation3::from_matrix_unchecked(r),
            Vector3::new(values[3], values[7], values[11]),
        ))
    }

    /// Projects the rotation block back onto SO(3) (polar decomposition).
    pub fn orthonormalized(&self) -> Pose {
        let r = Rotation3::from_matrix_eps(self.rotation.matrix(), 1e-15, 100, self.rotation);
        Pose::new(r, self.translation)
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Checks `RᵀR = I` and `det R = +1` to `tol`.
pub fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<(), GeometryError> {
    let err = (r.transpose() * r - Matrix3::identity()).amax();
    if err > tol {
        return Err(GeometryError::InvalidMatrix(format!(
            "rotation block not orthonormal (max |RᵀR - I| = {err:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(GeometryError::InvalidMatrix(format!(
            "rotation determinant {det} != 1"
        )));
    }
    Ok(())
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn inverse(t: &Pose) -> Pose {
    t.inverse()
}

pub fn transform_points(t: &Pose, pts: &PointSet) -> PointSet {
    t.transform_points(pts)
}

/// Geodesic angle (radians) between two rotations.
pub fn rotation_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let rel = a.inverse() * b;
    let cos = ((rel.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos()
}

/// Non-empty ordered set of finite 3D points, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet(Vec<Point3<f64>>);

impl PointSet {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::InvalidPointSet("empty".into()));
        }
        if let Some(i) = points
            .iter()
            .position(|p| !p.coords.iter().all(|v| v.is_finite()))
        {
            return Err(GeometryError::InvalidPointSet(format!(
                "point {i} has non-finite coordinates"
            )));
        }
        Ok(Self(points))
    }

    pub fn from_flat(values: &[f64]) -> Result<Self, GeometryError> {
        if !values.len().is_multiple_of(3) {
            return Err(GeometryError::InvalidPointSet(format!(
                "flat coordinate array length {} is not a multiple of 3",
                values.len()
            )));
        }
        Self::new(
            values
                .chunks_exact(3)
                .map(|c| Point3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3<f64>> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum = self
            .0
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / self.0.len() as f64)
    }

    /// Largest distance of any point from the origin of the model frame.
    pub fn radius(&self) -> f64 {
        self.0.iter().map(|p| p.coords.norm()).fold(0.0, f64::max)
    }

    /// Maximum pairwise distance (brute force).
    pub fn max_pairwise_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.0.iter().enumerate() {
            for b in &self.0[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// Smallest eigenvalue of the point covariance; zero for coplanar sets.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        let c = self.centroid();
        let mut cov = Matrix3::zeros();
        for p in &self.0 {
            let d = p - c;
            cov += d * d.transpose();
        }
        cov /= self.0.len() as f64;
        cov.symmetric_eigenvalues().min()
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a Point3<f64>;
    type IntoIter = std::slice::Iter<'a, Point3<f64>>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Pinhole intrinsics. Pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(
                "non-finite principal point".into(),
            ));
        }
        Ok(())
    }

    /// Projects a single camera-frame point without a depth check.
    #[inline]
    pub fn project_unchecked(&self, p: &Point3<f64>) -> Point2<f64> {
        Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    /// Projects a single camera-frame point; `None` if `z ≤ z_min`.
    #[inline]
    pub fn project_point(&self, p: &Point3<f64>, z_min: f64) -> Option<Point2<f64>> {
        (p.z > z_min).then(|| self.project_unchecked(p))
    }

    /// Back-projects a pixel at the given depth.
    pub fn unproject(&self, uv: &Point2<f64>, depth: f64) -> Point3<f64> {
        Point3::new(
            (uv.x - self.cx) / self.fx * depth,
            (uv.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    pub fn contains(&self, uv: &Point2<f64>) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x < self.width as f64 && uv.y < self.height as f64
    }
}

/// Projects camera-frame points with the default depth cutoff.
pub fn project(
    k: &CameraIntrinsics,
    pts_camera_frame: &PointSet,
) -> Result<Vec<Point2<f64>>, GeometryError> {
    project_with_cutoff(k, pts_camera_frame, DEFAULT_Z_MIN)
}

pub fn project_with_cutoff(
    k: &CameraIntrinsics,
    pts_camera_frame: &PointSet,
    z_min: f64,
) -> Result<Vec<Point2<f64>>, GeometryError> {
    pts_camera_frame
        .iter()
        .enumerate()
        .map(|(index, p)| {
            k.project_point(p, z_min)
                .ok_or(GeometryError::BehindCamera { index, z: p.z })
        })
        .collect()
}

/// Rotation from two 3-vectors by Gram-Schmidt: columns `(e1', e2', e3')` with
/// `e1' = e1/‖e1‖`, `e3' ∝ e1' × e2`, `e2' = e3' × e1'`.
pub fn rotation_from_6d(
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
) -> Result<Rotation3<f64>, GeometryError> {
    let n1 = e1.norm();
    if !(n1 > DEGENERATE_BASIS_EPS) {
        return Err(GeometryError::DegenerateBasis("first vector has zero norm"));
    }
    let c1 = e1 / n1;
    let cross = c1.cross(e2);
    let n3 = cross.norm();
    if !(n3 > DEGENERATE_BASIS_EPS) {
        return Err(GeometryError::DegenerateBasis("vectors are parallel"));
    }
    let c3 = cross / n3;
    let c2 = c3.cross(&c1);
    Ok(Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        c1, c2, c3,
    ])))
}

/// First two columns of a rotation, the inverse of [`rotation_from_6d`].
pub fn rotation_to_6d(r: &Rotation3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let m = r.matrix();
    (m.column(0).into_owned(), m.column(1).into_owned())
}

/// Rotation exponential map (Rodrigues).
pub fn exp_so3(omega: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::new(*omega)
}

/// Left retraction used by the optimizer: `delta = (ω, v)` maps `T` to
/// `[Exp(ω) | v] · T`.
pub fn retract(t: &Pose, delta: &Vector6<f64>) -> Pose {
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    let increment = Pose::new(exp_so3(&omega), v);
    increment.compose(t)
}

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
