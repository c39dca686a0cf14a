//! Multi-view, multi-object 6D pose scene reconstruction.
//!
//! Given per-view object pose candidates (label, score, camera-frame pose)
//! and a database of object models with their symmetries, the pipeline
//!
//! 1. matches candidates across every pair of views with a symmetry-aware
//!    RANSAC over candidate pairs ([`matching`]),
//! 2. groups matched candidates into physical objects (connected components),
//! 3. jointly refines camera and object poses by minimizing a truncated,
//!    symmetry-aware object reprojection loss with Levenberg-Marquardt
//!    ([`refinement`]).
//!
//! [`evaluation`] provides ADD / ADD-S style metrics and 3D NMS,
//! [`simulation`] generates synthetic scenes with ground truth, and
//! [`singleview`] holds the geometric kernels of an iterative single-view
//! pose refiner (crop camera, pose update and its inverse, disentangled loss).

pub mod catalog;
pub mod evaluation;
pub mod geometry;
pub mod matching;
pub mod pipeline;
pub mod refinement;
pub mod scene_io;
pub mod seeding;
pub mod simulation;
pub mod singleview;
pub mod symmetry;

pub use geometry::{CameraIntrinsics, PointSet, Pose, Rotation3};
pub use scene_io::{Candidate, ModelDb, ObjectModel, SceneObservations, View};
pub use symmetry::{SymmetryGroup, SymmetrySpec};
