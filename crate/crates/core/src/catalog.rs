//! Per-label precomputation: discretized symmetry groups and cached `S·x`
//! point sets for the matching and refinement loops.

use std::collections::BTreeMap;

use rand::seq::index::sample;

use crate::geometry::PointSet;
use crate::scene_io::{ModelDb, ObjectModel};
use crate::seeding::rng_for;
use crate::symmetry::{
    discretize_with, SymmetricPoints, SymmetryError, SymmetryGroup, DEFAULT_GROUP_CAP,
};

/// Cap on model points used for reprojection residuals.
pub const MAX_RESIDUAL_POINTS: usize = 500;

#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub model: ObjectModel,
    /// All model points with the discretized group.
    pub full: SymmetricPoints,
    /// At most [`MAX_RESIDUAL_POINTS`] points, same group.
    pub residual: SymmetricPoints,
}

impl PreparedModel {
    pub fn group(&self) -> &SymmetryGroup {
        self.full.group()
    }

    pub fn is_symmetric(&self) -> bool {
        self.full.group().is_symmetric()
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    models: BTreeMap<String, PreparedModel>,
    angles_per_axis: usize,
}

impl Catalog {
    pub fn new(db: &ModelDb, angles_per_axis: usize) -> Result<Self, SymmetryError> {
        let mut models = BTreeMap::new();
        for m in db.iter() {
            let group = discretize_with(
                &m.symmetries,
                angles_per_axis,
                DEFAULT_GROUP_CAP,
                m.points.radius(),
            )?;
            let residual_points = subsample(&m.points, MAX_RESIDUAL_POINTS, &m.label);
            models.insert(
                m.label.clone(),
                PreparedModel {
                    model: m.clone(),
                    full: SymmetricPoints::new(m.points.clone(), group.clone()),
                    residual: SymmetricPoints::new(residual_points, group),
                },
            );
        }
        Ok(Self {
            models,
            angles_per_axis,
        })
    }

    pub fn get(&self, label: &str) -> Option<&PreparedModel> {
        self.models.get(label)
    }

    /// Panics on unknown labels; callers validate observations against the db first.
    pub fn model(&self, label: &str) -> &PreparedModel {
        self.models
            .get(label)
            .unwrap_or_else(|| panic!("label '{label}' missing from catalog"))
    }

    pub fn angles_per_axis(&self) -> usize {
        self.angles_per_axis
    }

    pub fn iter(&self) -> impl Iterator<Item = &PreparedModel> {
        self.models.values()
    }
}

/// Deterministic uniform subsample (order preserved), seeded by `label`.
pub fn subsample(points: &PointSet, max: usize, label: &str) -> PointSet {
    if points.len() <= max {
        return points.clone();
    }
    let mut rng = rng_for(0, &["subsample", label]);
    let mut idx = sample(&mut rng, points.len(), max).into_vec();
    idx.sort_unstable();
    PointSet::new(idx.into_iter().map(|i| points.points()[i]).collect())
        .expect("subsample of a valid point set is valid")
}
