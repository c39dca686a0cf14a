//! Built-in synthetic object models. Every symmetric model's point set is
//! exactly invariant under its discretized group (rings carry 64 points,
//! matching the default number of angles per axis).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Point3, Vector3};

use crate::geometry::{PointSet, Pose, Rotation3};
use crate::scene_io::{ModelDb, ObjectModel};
use crate::symmetry::{SymmetryAxis, SymmetrySpec};

const RING: usize = 64;

fn rot(axis: Vector3<f64>, angle: f64) -> Pose {
    Pose::from_rotation(Rotation3::from_axis_angle(
        &nalgebra::Unit::new_normalize(axis),
        angle,
    ))
}

/// Points on the surface of an axis-aligned box centered at the origin,
/// `n` samples per edge direction; symmetric under all coordinate sign flips.
fn box_surface(size: [f64; 3], n: usize) -> Vec<Point3<f64>> {
    let h = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let grid = |half: f64| -> Vec<f64> {
        (0..n)
            .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
            .collect()
    };
    let (gx, gy, gz) = (grid(h[0]), grid(h[1]), grid(h[2]));
    let mut pts = Vec::new();
    for s in [-1.0, 1.0] {
        for &y in &gy {
            for &z in &gz {
                pts.push(Point3::new(s * h[0], y, z));
            }
        }
        for &x in &gx[1..n - 1] {
            for &z in &gz {
                pts.push(Point3::new(x, s * h[1], z));
            }
        }
        for &x in &gx[1..n - 1] {
            for &y in &gy[1..n - 1] {
                pts.push(Point3::new(x, y, s * h[2]));
            }
        }
    }
    pts
}

fn ring(radius: f64, z: f64, count: usize, phase: f64) -> Vec<Point3<f64>> {
    (0..count)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / count as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), z)
        })
        .collect()
}

fn model(label: &str, points: Vec<Point3<f64>>, symmetries: SymmetrySpec) -> ObjectModel {
    let points = PointSet::new(points).expect("library points are valid");
    // exact extent; small margin keeps the diameter invariant robust to rounding
    let diameter = points.max_pairwise_distance() * (1.0 + 1e-9);
    ObjectModel {
        label: label.to_string(),
        points,
        diameter,
        symmetries,
    }
}

fn box_symmetries() -> SymmetrySpec {
    SymmetrySpec::new(
        vec![
            Pose::identity(),
            rot(Vector3::x(), PI),
            rot(Vector3::y(), PI),
            rot(Vector3::z(), PI),
        ],
        vec![],
    )
}

fn square_prism_symmetries() -> SymmetrySpec {
    let mut discrete = Vec::new();
    for flip in [Pose::identity(), rot(Vector3::x(), PI)] {
        for k in 0..4 {
            discrete.push(flip.compose(&rot(Vector3::z(), FRAC_PI_2 * k as f64)));
        }
    }
    SymmetrySpec::new(discrete, vec![])
}

fn axis_z() -> SymmetryAxis {
    SymmetryAxis::through_origin(Vector3::z())
}

/// Cylinder of radius `r` and height `h` with closed caps.
fn cylinder(r: f64, h: f64) -> Vec<Point3<f64>> {
    let mut pts = Vec::new();
    for z in [-h / 2.0, -h / 6.0, h / 6.0, h / 2.0] {
        pts.extend(ring(r, z, RING, 0.0));
    }
    for z in [-h / 2.0, h / 2.0] {
        pts.extend(ring(r / 2.0, z, RING, 0.0));
    }
    pts
}

/// Irregular asymmetric blob: a box with a protruding arm and a knob.
fn l_shape(body: [f64; 3], arm: [f64; 3], arm_offset: Vector3<f64>, knob: Point3<f64>) -> Vec<Point3<f64>> {
    let mut pts = box_surface(body, 5);
    pts.extend(
        box_surface(arm, 4)
            .into_iter()
            .map(|p| p + arm_offset),
    );
    pts.push(knob);
    pts
}

/// All built-in models, keyed by label.
pub fn builtin_models() -> ModelDb {
    let mut models = vec![
        model("sugar_box", box_surface([0.045, 0.095, 0.175], 6), box_symmetries()),
        model("cracker_box", box_surface([0.06, 0.16, 0.21], 6), box_symmetries()),
        model("square_prism", box_surface([0.07, 0.07, 0.12], 6), square_prism_symmetries()),
        model(
            "can",
            cylinder(0.034, 0.10),
            SymmetrySpec::new(vec![Pose::identity(), rot(Vector3::x(), PI)], vec![axis_z()]),
        ),
    ];

    // bowl: rings of growing radius, symmetric about z only
    let mut bowl = Vec::new();
    for (i, (r, z)) in [(0.03, -0.025), (0.055, -0.01), (0.075, 0.01), (0.08, 0.025)]
        .into_iter()
        .enumerate()
    {
        bowl.extend(ring(r, z, RING, if i % 2 == 0 { 0.0 } else { PI / RING as f64 }));
    }
    models.push(model("bowl", bowl, SymmetrySpec::new(vec![], vec![axis_z()])));

    // bottle: cone-like, symmetric about z only
    let mut bottle = Vec::new();
    for (r, z) in [(0.035, -0.09), (0.035, -0.03), (0.03, 0.03), (0.015, 0.07), (0.012, 0.09)] {
        bottle.extend(ring(r, z, RING, 0.0));
    }
    models.push(model("bottle", bottle, SymmetrySpec::new(vec![], vec![axis_z()])));

    // mug: cylinder with a handle
    let mut mug = cylinder(0.04, 0.09);
    for k in 0..9 {
        let a = -FRAC_PI_2 + PI * k as f64 / 8.0;
        mug.push(Point3::new(0.04 + 0.025 * a.cos(), 0.0, 0.03 * a.sin()));
    }
    models.push(model("mug", mug, SymmetrySpec::none()));

    models.push(model(
        "drill",
        l_shape(
            [0.05, 0.07, 0.18],
            [0.04, 0.12, 0.04],
            Vector3::new(0.0, 0.09, 0.06),
            Point3::new(0.03, -0.04, -0.09),
        ),
        SymmetrySpec::none(),
    ));
    models.push(model(
        "clamp",
        l_shape(
            [0.03, 0.12, 0.08],
            [0.03, 0.03, 0.09],
            Vector3::new(0.0, -0.045, 0.08),
            Point3::new(0.02, 0.06, 0.05),
        ),
        SymmetrySpec::none(),
    ));

    // wedge: scalene triangular prism
    let tri = [(0.0, 0.0), (0.09, 0.0), (0.02, 0.05)];
    let mut wedge = Vec::new();
    for z in [-0.04, -0.0133, 0.0133, 0.04] {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            for k in 0..6 {
                let t = k as f64 / 6.0;
                wedge.push(Point3::new(
                    a.0 + t * (b.0 - a.0) - 0.037,
                    a.1 + t * (b.1 - a.1) - 0.017,
                    z,
                ));
            }
        }
    }
    models.push(model("wedge", wedge, SymmetrySpec::none()));

    ModelDb::from_models(models).expect("builtin models satisfy invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;

    #[test]
    fn symmetric_models_are_invariant_under_their_group() {
        let db = builtin_models();
        assert!(db.len() >= 8);
        let catalog = Catalog::new(&db, 64).unwrap();
        for pm in catalog.iter() {
            let pts = pm.model.points.points();
            for s in pm.group().elements() {
                for p in pts {
                    let q = s.transform_point(p);
                    let nearest = pts.iter().map(|x| (x - q).norm()).fold(f64::INFINITY, f64::min);
                    assert!(nearest < 1e-12, "{} not invariant", pm.model.label);
                }
            }
            assert!(pm.group().closure_error(pm.model.points.radius()) < 1e-9);
        }
        assert_eq!(catalog.model("can").group().len(), 128);
        assert_eq!(catalog.model("bowl").group().len(), 64);
        assert_eq!(catalog.model("square_prism").group().len(), 8);
        assert_eq!(catalog.model("sugar_box").group().len(), 4);
        assert_eq!(catalog.model("mug").group().len(), 1);
    }
}
