//! Geometry of the single-view render-and-compare refiner: crop cameras,
//! the pose update and its inverse, the canonical coarse input pose and the
//! symmetric disentangled loss. No network is involved.

use nalgebra::{Point2, Vector3};

use crate::geometry::{
    rotation_from_6d, rotation_to_6d, CameraIntrinsics, GeometryError, PointSet, Pose,
    DEFAULT_Z_MIN,
};
use crate::symmetry::{PointNorm, SymmetricPoints};

/// Width of the crop fed to the refiner, pixels.
pub const CROP_WIDTH: f64 = 320.0;
/// Width over height of the crop.
pub const CROP_ASPECT: f64 = 4.0 / 3.0;
/// Bounding boxes are enlarged by this factor before cropping.
pub const CROP_PADDING: f64 = 1.4;

/// Network outputs: image-space translation (pixels in the crop), relative
/// depth, and a 6D rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
}

impl UpdateParams {
    pub fn identity() -> Self {
        UpdateParams {
            vx: 0.0,
            vy: 0.0,
            vz: 1.0,
            e1: Vector3::x(),
            e2: Vector3::y(),
        }
    }
}

/// Pinhole camera of the cropped and resized image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Crop box in the source image, `[x0, y0, x1, y1]`, pixels.
    pub bbox: [f64; 4],
    /// Source pixels to crop pixels.
    pub scale: f64,
}

impl CropCamera {
    /// Source pixel to crop pixel.
    pub fn map(&self, uv: &Point2<f64>) -> Point2<f64> {
        Point2::new(
            (uv.x - self.bbox[0]) * self.scale,
            (uv.y - self.bbox[1]) * self.scale,
        )
    }

    pub fn project(&self, p: &nalgebra::Point3<f64>) -> Point2<f64> {
        Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

/// Crop around the projected model, padded and widened to `aspect`, resized
/// to [`CROP_WIDTH`] pixels wide.
pub fn crop_from_pose(
    t: &Pose,
    points: &PointSet,
    k: &CameraIntrinsics,
    aspect: f64,
) -> Result<CropCamera, GeometryError> {
    let (mut umin, mut vmin) = (f64::INFINITY, f64::INFINITY);
    let (mut umax, mut vmax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (index, x) in points.iter().enumerate() {
        let p = t.transform_point(x);
        let uv = k
            .project_point(&p, DEFAULT_Z_MIN)
            .ok_or(GeometryError::BehindCamera { index, z: p.z })?;
        umin = umin.min(uv.x);
        umax = umax.max(uv.x);
        vmin = vmin.min(uv.y);
        vmax = vmax.max(uv.y);
    }
    let (cu, cv) = ((umin + umax) / 2.0, (vmin + vmax) / 2.0);
    let mut w = (umax - umin) * CROP_PADDING;
    let mut h = (vmax - vmin) * CROP_PADDING;
    if w > aspect * h {
        h = w / aspect;
    } else {
        w = h * aspect;
    }
    let (x0, y0) = (cu - w / 2.0, cv - h / 2.0);
    let scale = CROP_WIDTH / w;
    Ok(CropCamera {
        fx: k.fx * scale,
        fy: k.fy * scale,
        cx: (k.cx - x0) * scale,
        cy: (k.cy - y0) * scale,
        bbox: [x0, y0, x0 + w, y0 + h],
        scale,
    })
}

/// `x' = (v_x/f_x + x/z)·z'`, `y' = (v_y/f_y + y/z)·z'`, `z' = v_z·z`, `R' = R·R_k`.
pub fn apply_update(
    t_k: &Pose,
    p: &UpdateParams,
    crop: &CropCamera,
) -> Result<Pose, GeometryError> {
    let r = rotation_from_6d(&p.e1, &p.e2)?;
    let [x, y, z] = [t_k.translation.x, t_k.translation.y, t_k.translation.z];
    let z1 = p.vz * z;
    let x1 = (p.vx / crop.fx + x / z) * z1;
    let y1 = (p.vy / crop.fy + y / z) * z1;
    Ok(Pose::new(r * t_k.rotation, Vector3::new(x1, y1, z1)))
}

/// The parameters that take `t_k` exactly to `t_gt`.
pub fn target_update(t_k: &Pose, t_gt: &Pose, crop: &CropCamera) -> UpdateParams {
    let (a, b) = (t_k.translation, t_gt.translation);
    let r = t_gt.rotation * t_k.rotation.inverse();
    let (e1, e2) = rotation_to_6d(&r);
    UpdateParams {
        vx: crop.fx * (b.x / b.z - a.x / a.z),
        vy: crop.fy * (b.y / b.z - a.y / a.z),
        vz: b.z / a.z,
        e1,
        e2,
    }
}

/// The three loss terms and their sum, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisentangledLoss {
    pub xy: f64,
    pub depth: f64,
    pub rotation: f64,
}

impl DisentangledLoss {
    pub fn total(&self) -> f64 {
        self.xy + self.depth + self.rotation
    }
}

/// Each term swaps one block of the target parameters for the prediction
/// and measures the L1 symmetric distance of the result to `t_gt`.
pub fn disentangled_loss(
    t_k: &Pose,
    p: &UpdateParams,
    t_gt: &Pose,
    model: &SymmetricPoints,
    crop: &CropCamera,
) -> Result<DisentangledLoss, GeometryError> {
    let target = target_update(t_k, t_gt, crop);
    let term = |q: UpdateParams| -> Result<f64, GeometryError> {
        let pose = apply_update(t_k, &q, crop)?;
        Ok(model.best(&pose, t_gt, PointNorm::L1).1)
    };
    Ok(DisentangledLoss {
        xy: term(UpdateParams {
            vx: p.vx,
            vy: p.vy,
            ..target
        })?,
        depth: term(UpdateParams { vz: p.vz, ..target })?,
        rotation: term(UpdateParams {
            e1: p.e1,
            e2: p.e2,
            ..target
        })?,
    })
}

/// Coarse input pose: identity rotation, 1 m deep, centered on the box.
/// `bbox = [x0, y0, x1, y1]` in pixels.
pub fn canonical_init(bbox: [f64; 4], k: &CameraIntrinsics) -> Pose {
    let center = Point2::new((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0);
    Pose::from_translation(k.unproject(&center, 1.0).coords)
}
