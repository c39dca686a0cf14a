#![allow(dead_code)]

use cosy::catalog::Catalog;
use cosy::scene_io::{Candidate, ModelDb, SceneObservations, View};
use cosy::simulation::{library, look_at, random_rotation, view_id};
use cosy::{CameraIntrinsics, Pose};
use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn db() -> ModelDb {
    library::builtin_models()
}

pub fn catalog() -> Catalog {
    Catalog::new(&db(), 64).unwrap()
}

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A hand-built scene: world object poses and camera poses.
pub struct Rig {
    pub labels: Vec<String>,
    pub objects: Vec<Pose>,
    pub cameras: Vec<Pose>,
}

impl Rig {
    /// `n_objects` distinct labels spread in a 40 cm box, `n_views` cameras
    /// about 1.2 m away looking at the origin.
    pub fn random(n_objects: usize, n_views: usize, seed: u64) -> Rig {
        let mut r = rng(seed);
        let db = db();
        let all: Vec<String> = db.labels().map(String::from).collect();
        assert!(n_objects <= all.len());
        let picked = rand::seq::index::sample(&mut r, all.len(), n_objects);
        let labels = picked.into_iter().map(|i| all[i].clone()).collect();
        let objects = (0..n_objects)
            .map(|_| {
                let t = Vector3::from_fn(|_, _| r.random_range(-0.2..0.2));
                Pose::new(random_rotation(&mut r), t)
            })
            .collect();
        let cameras = (0..n_views)
            .map(|_| {
                let phi: f64 = r.random_range(0.0..std::f64::consts::TAU);
                let z: f64 = r.random_range(0.3..0.9);
                let s = (1.0 - z * z).sqrt();
                let p = Point3::new(s * phi.cos(), s * phi.sin(), z) * 1.2;
                look_at(p, Point3::origin(), r.random_range(-0.1..0.1))
            })
            .collect();
        Rig {
            labels,
            objects,
            cameras,
        }
    }

    pub fn camera_frame(&self, view: usize, object: usize) -> Pose {
        self.cameras[view].inverse().compose(&self.objects[object])
    }

    /// Relative pose `T_{C_a C_b}`.
    pub fn relative(&self, a: usize, b: usize) -> Pose {
        self.cameras[a].inverse().compose(&self.cameras[b])
    }

    /// Observations where view `v` sees exactly `seen[v]` (object indices,
    /// in that order), at their exact poses with score 0.9.
    pub fn observe(&self, seen: &[Vec<usize>]) -> SceneObservations {
        let mut obs = SceneObservations {
            views: Vec::new(),
            candidates: Vec::new(),
        };
        for (v, objs) in seen.iter().enumerate() {
            obs.views.push(View {
                view_id: view_id(v),
                intrinsics: intrinsics(),
            });
            for &o in objs {
                obs.candidates.push(Candidate {
                    view_id: view_id(v),
                    label: self.labels[o].clone(),
                    score: 0.9,
                    pose: self.camera_frame(v, o),
                });
            }
        }
        obs
    }

    pub fn observe_all(&self) -> SceneObservations {
        let all: Vec<usize> = (0..self.objects.len()).collect();
        self.observe(&vec![all; self.cameras.len()])
    }
}

pub fn pose_close(a: &Pose, b: &Pose, tol: f64) -> bool {
    (a.rotation.matrix() - b.rotation.matrix()).norm() < tol
        && (a.translation - b.translation).norm() < tol
}
