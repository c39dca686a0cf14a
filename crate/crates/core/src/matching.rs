//! Cross-view candidate matching.
//!
//! For every pair of views a RANSAC over pairs of same-label candidate pairs
//! hypothesizes the relative camera pose; one pair fixes the pose, the other
//! selects the object symmetry. Inliers are candidate pairs whose symmetric
//! distance under the hypothesis is below a threshold. Accepted inlier pairs
//! across all view pairs form a graph whose connected components are the
//! physical objects of the scene.

use std::collections::BTreeMap;

use log::debug;
use petgraph::unionfind::UnionFind;
use rand::seq::index::sample;
use rayon::prelude::*;
use thiserror::Error;

use crate::catalog::Catalog;
use crate::geometry::Pose;
use crate::scene_io::SceneObservations;
use crate::seeding::rng_for;
use crate::symmetry::PointNorm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("candidate pairs share a candidate: {0:?} and {1:?}")]
    DegeneratePairs(CandidatePair, CandidatePair),
    #[error("candidate pair {0:?} has mismatched labels")]
    LabelMismatch(CandidatePair),
    #[error("invalid match parameters: {0}")]
    InvalidParams(String),
}

/// Indices into `SceneObservations::candidates`: `a` in the first view, `b` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidatePair {
    pub a: usize,
    pub b: usize,
}

impl CandidatePair {
    pub fn new(a: usize, b: usize) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchParams {
    /// Inlier threshold on the symmetric distance, meters.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.02,
            max_iterations: 2000,
            min_inliers: 3,
            seed: 0,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.inlier_threshold > 0.0) {
            return Err(MatchError::InvalidParams(
                "inlier threshold must be positive".into(),
            ));
        }
        if self.min_inliers < 3 {
            return Err(MatchError::InvalidParams("min_inliers must be >= 3".into()));
        }
        if self.max_iterations == 0 {
            return Err(MatchError::InvalidParams(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Inlier pair with its symmetric distance under the hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inlier {
    pub pair: CandidatePair,
    pub distance: f64,
}

/// Best relative pose found for one pair of views.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewHypothesis {
    pub view_a: String,
    pub view_b: String,
    /// `T_{C_a C_b}`: maps camera-b coordinates into camera a.
    pub relative_pose: Pose,
    pub inliers: Vec<Inlier>,
    pub generating_pairs: (CandidatePair, CandidatePair),
    /// Number of pair-of-pairs hypotheses scored.
    pub hypotheses_evaluated: usize,
}

impl TwoViewHypothesis {
    pub fn inlier_distance_sum(&self) -> f64 {
        self.inliers.iter().map(|i| i.distance).sum()
    }
}

/// Same-label candidate pairs between two views, lexicographic in `(a, b)`.
pub fn label_consistent_pairs(
    view_a: &str,
    view_b: &str,
    obs: &SceneObservations,
) -> Vec<CandidatePair> {
    let in_a = obs.candidates_in_view(view_a);
    let in_b = obs.candidates_in_view(view_b);
    let mut pairs = Vec::new();
    for &a in &in_a {
        for &b in &in_b {
            if obs.candidates[a].label == obs.candidates[b].label {
                pairs.push(CandidatePair::new(a, b));
            }
        }
    }
    pairs
}

/// Every unordered pair of label-consistent pairs that shares no candidate,
/// in lexicographic order. The first element anchors the pose.
pub fn enumerate_hypotheses(
    view_a: &str,
    view_b: &str,
    obs: &SceneObservations,
) -> Vec<(CandidatePair, CandidatePair)> {
    let pairs = label_consistent_pairs(view_a, view_b, obs);
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        for q in &pairs[i + 1..] {
            if p.a != q.a && p.b != q.b {
                out.push((*p, *q));
            }
        }
    }
    out
}

/// `T_{C_aC_b} = T_{C_aO_α} · S* · T_{C_bO_β}⁻¹`, with `S*` from the group
/// of `pair1`'s label chosen to best align `pair2`'s candidates.
pub fn relative_pose_from_pairs(
    pair1: CandidatePair,
    pair2: CandidatePair,
    obs: &SceneObservations,
    catalog: &Catalog,
) -> Result<Pose, MatchError> {
    Ok(relative_pose_with_symmetry(pair1, pair2, obs, catalog)?.0)
}

/// As [`relative_pose_from_pairs`], also returning the index of `S*` in the group.
pub fn relative_pose_with_symmetry(
    pair1: CandidatePair,
    pair2: CandidatePair,
    obs: &SceneObservations,
    catalog: &Catalog,
) -> Result<(Pose, usize), MatchError> {
    if pair1.a == pair2.a || pair1.b == pair2.b {
        return Err(MatchError::DegeneratePairs(pair1, pair2));
    }
    let c = &obs.candidates;
    for p in [pair1, pair2] {
        if c[p.a].label != c[p.b].label {
            return Err(MatchError::LabelMismatch(p));
        }
    }
    let anchor = catalog.model(&c[pair1.a].label);
    let second = &catalog.model(&c[pair2.a].label).full;

    let t_a_alpha = c[pair1.a].pose;
    let t_b_beta_inv = c[pair1.b].pose.inverse();
    let t_a_gamma = c[pair2.a].pose;
    let t_b_delta = c[pair2.b].pose;

    let mut best = (0usize, f64::INFINITY);
    for (index, s) in anchor.group().elements().iter().enumerate() {
        let t_ab = t_a_alpha.compose(s).compose(&t_b_beta_inv);
        let moved = t_ab.compose(&t_b_delta);
        if let Some((_, d)) = second.best_below(&t_a_gamma, &moved, PointNorm::L2, best.1) {
            best = (index, d);
        }
    }
    let s = anchor.group().elements()[best.0];
    Ok((t_a_alpha.compose(&s).compose(&t_b_beta_inv), best.0))
}

/// For each view-a candidate, the closest same-label view-b candidate under
/// `t_ab`; kept if closer than `threshold`. Proposals are then accepted in
/// ascending distance so that every candidate appears at most once.
pub fn count_inliers(
    t_ab: &Pose,
    candidates_a: &[usize],
    candidates_b: &[usize],
    obs: &SceneObservations,
    catalog: &Catalog,
    threshold: f64,
) -> Vec<Inlier> {
    let c = &obs.candidates;
    let mut proposals = Vec::new();
    for &a in candidates_a {
        let model = &catalog.model(&c[a].label).full;
        let mut best: Option<(usize, f64)> = None;
        for &b in candidates_b {
            if c[b].label != c[a].label {
                continue;
            }
            let bound = best.map_or(threshold, |(_, d)| d);
            let moved = t_ab.compose(&c[b].pose);
            if let Some((_, d)) = model.best_below(&c[a].pose, &moved, PointNorm::L2, bound) {
                best = Some((b, d));
            }
        }
        if let Some((b, distance)) = best {
            proposals.push(Inlier {
                pair: CandidatePair::new(a, b),
                distance,
            });
        }
    }
    proposals.sort_by(|x, y| {
        x.distance
            .total_cmp(&y.distance)
            .then(x.pair.cmp(&y.pair))
    });
    let mut used_b = Vec::new();
    let mut inliers = Vec::new();
    for p in proposals {
        if !used_b.contains(&p.pair.b) {
            used_b.push(p.pair.b);
            inliers.push(p);
        }
    }
    inliers.sort_by_key(|i| i.pair);
    inliers
}

/// Scores every hypothesis (or a seeded uniform sample without replacement
/// when there are more than `max_iterations`) and keeps the one with most
/// inliers; ties go to the smaller inlier distance sum, then to the
/// lexicographically first generating pairs. `None` below `min_inliers`.
pub fn two_view_ransac(
    view_a: &str,
    view_b: &str,
    obs: &SceneObservations,
    catalog: &Catalog,
    params: &MatchParams,
) -> Option<TwoViewHypothesis> {
    let all = enumerate_hypotheses(view_a, view_b, obs);
    let selected: Vec<(CandidatePair, CandidatePair)> = if all.len() <= params.max_iterations {
        all
    } else {
        let mut rng = rng_for(params.seed, &["ransac", view_a, view_b]);
        let mut idx = sample(&mut rng, all.len(), params.max_iterations).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i]).collect()
    };

    let in_a = obs.candidates_in_view(view_a);
    let in_b = obs.candidates_in_view(view_b);
    let mut best: Option<(Pose, Vec<Inlier>, f64, (CandidatePair, CandidatePair))> = None;
    for &(p, q) in &selected {
        let t_ab = relative_pose_from_pairs(p, q, obs, catalog)
            .expect("enumerated hypotheses are non-degenerate");
        let inliers = count_inliers(&t_ab, &in_a, &in_b, obs, catalog, params.inlier_threshold);
        let sum: f64 = inliers.iter().map(|i| i.distance).sum();
        let better = match &best {
            None => true,
            Some((_, bi, bs, _)) => {
                inliers.len() > bi.len() || (inliers.len() == bi.len() && sum < *bs)
            }
        };
        if better {
            best = Some((t_ab, inliers, sum, (p, q)));
        }
    }

    let (relative_pose, inliers, _, generating_pairs) = best?;
    debug!(
        "views {view_a}-{view_b}: {} hypotheses, best has {} inliers",
        selected.len(),
        inliers.len()
    );
    (inliers.len() >= params.min_inliers).then(|| TwoViewHypothesis {
        view_a: view_a.to_string(),
        view_b: view_b.to_string(),
        relative_pose,
        inliers,
        generating_pairs,
        hypotheses_evaluated: selected.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub view_id: String,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub pair: CandidatePair,
    pub distance: f64,
    /// Index into `MatchGraph::hypotheses` of the view pair that produced it.
    pub hypothesis: usize,
}

/// Candidates as vertices, accepted inlier pairs as edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Accepted two-view hypotheses, in lexicographic view-pair order.
    pub hypotheses: Vec<TwoViewHypothesis>,
}

impl MatchGraph {
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges
            .iter()
            .any(|e| (e.pair.a == u && e.pair.b == v) || (e.pair.a == v && e.pair.b == u))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.pair.a == v || e.pair.b == v)
            .count()
    }
}

/// Runs [`two_view_ransac`] on every unordered view pair (sorted view ids)
/// and unions the accepted inliers. View pairs are processed in parallel;
/// each has its own seeded generator, so the result does not depend on the
/// thread count.
pub fn build_match_graph(
    obs: &SceneObservations,
    catalog: &Catalog,
    params: &MatchParams,
) -> MatchGraph {
    let views = obs.sorted_view_ids();
    let mut view_pairs = Vec::new();
    for (i, a) in views.iter().enumerate() {
        for b in &views[i + 1..] {
            view_pairs.push((a.clone(), b.clone()));
        }
    }
    let results: Vec<Option<TwoViewHypothesis>> = view_pairs
        .par_iter()
        .map(|(a, b)| two_view_ransac(a, b, obs, catalog, params))
        .collect();

    let hypotheses: Vec<TwoViewHypothesis> = results.into_iter().flatten().collect();
    let edges = hypotheses
        .iter()
        .enumerate()
        .flat_map(|(h, hyp)| {
            hyp.inliers.iter().map(move |i| Edge {
                pair: i.pair,
                distance: i.distance,
                hypothesis: h,
            })
        })
        .collect();
    let vertices = obs
        .candidates
        .iter()
        .map(|c| Vertex {
            view_id: c.view_id.clone(),
            label: c.label.clone(),
            score: c.score,
        })
        .collect();
    MatchGraph {
        vertices,
        edges,
        hypotheses,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub view_id: String,
    pub candidate: usize,
}

/// A connected component of the match graph: one real object seen in
/// several views, at most once per view.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalObject {
    pub id: usize,
    pub label: String,
    /// Sorted by candidate index.
    pub members: Vec<Member>,
    /// Sum of member detection scores.
    pub score: f64,
}

impl PhysicalObject {
    pub fn member_in_view(&self, view_id: &str) -> Option<usize> {
        self.members
            .iter()
            .find(|m| m.view_id == view_id)
            .map(|m| m.candidate)
    }
}

/// Drops isolated vertices and turns each connected component into a
/// physical object. When a component holds several candidates from one
/// view, only the highest-scoring one (lowest index on ties) is kept.
pub fn extract_physical_objects(graph: &MatchGraph) -> Vec<PhysicalObject> {
    let n = graph.vertices.len();
    let mut uf = UnionFind::<usize>::new(n);
    let mut touched = vec![false; n];
    for e in &graph.edges {
        uf.union(e.pair.a, e.pair.b);
        touched[e.pair.a] = true;
        touched[e.pair.b] = true;
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in (0..n).filter(|&v| touched[v]) {
        components.entry(uf.find(v)).or_default().push(v);
    }

    let mut objects = Vec::new();
    for members in components.into_values() {
        let label = &graph.vertices[members[0]].label;
        assert!(
            members.iter().all(|&m| &graph.vertices[m].label == label),
            "connected component mixes labels"
        );
        let mut per_view: BTreeMap<&str, usize> = BTreeMap::new();
        for &m in &members {
            let v = &graph.vertices[m];
            per_view
                .entry(v.view_id.as_str())
                .and_modify(|cur| {
                    if v.score > graph.vertices[*cur].score {
                        *cur = m;
                    }
                })
                .or_insert(m);
        }
        let mut kept: Vec<usize> = per_view.into_values().collect();
        if kept.len() < 2 {
            continue;
        }
        kept.sort_unstable();
        objects.push(PhysicalObject {
            id: 0,
            label: label.clone(),
            score: kept.iter().map(|&m| graph.vertices[m].score).sum(),
            members: kept
                .into_iter()
                .map(|m| Member {
                    view_id: graph.vertices[m].view_id.clone(),
                    candidate: m,
                })
                .collect(),
        });
    }
    objects.sort_by(|x, y| {
        x.label
            .cmp(&y.label)
            .then(x.members[0].candidate.cmp(&y.members[0].candidate))
    });
    for (id, o) in objects.iter_mut().enumerate() {
        o.id = id;
    }
    objects
}
