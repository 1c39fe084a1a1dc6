//! Edge bundle generation, validation and indexing.
//!
//! A bundle is a collection of disconnected, validated forward rollouts —
//! the multi-query discretization of the robot's state and control spaces.
//! Generation is Monte Carlo propagation: random start states, random step
//! counts, and velocity commands re-sampled per constant-velocity segment so
//! a single edge varies its controls over its duration.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::check::{validate_rollout, RejectReason};
use crate::collision::WorldModel;
use crate::dynamics::{Limits, RobotModel};
use crate::kdtree::KdTree;
use crate::{rng, Error, JointVector, Result};

pub use crate::persist::{load_bundle, save_bundle};

/// Below this edge count the θ-neighborhood index falls back to a linear
/// scan.
pub const KD_TREE_MIN_EDGES: usize = 256;

/// One validated rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: u64,
    /// Start state, rad.
    pub q0: JointVector,
    /// Commanded velocity sequence, rad/s.
    pub controls: Vec<JointVector>,
    /// Integration step, seconds.
    pub dt: f64,
    /// End state reached by propagating `controls` from `q0`.
    pub qf: JointVector,
    /// Probability that a θ-perturbed start keeps endpoint error under θ/2.
    /// 0 until analyzed.
    pub p_lazy_prop: f64,
    /// Probability that a θ-perturbed rollout collides. 1 until analyzed.
    pub p_collision: f64,
}

impl Edge {
    /// Total duration dt · len(controls), seconds.
    pub fn duration(&self) -> f64 {
        self.dt * self.controls.len() as f64
    }

    /// Joint-space arclength of the rollout. With explicit-Euler velocity
    /// integration this depends only on the commands.
    pub fn arclength(&self) -> f64 {
        self.dt * self.controls.iter().map(|c| c.norm()).sum::<f64>()
    }
}

/// Parameters of Monte Carlo edge generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Number of accepted edges in the bundle.
    pub n_edges: usize,
    /// Step-count range (inclusive) for the sampled duration.
    pub steps_min: usize,
    pub steps_max: usize,
    /// Steps per constant-velocity segment; commands are re-sampled at every
    /// segment boundary.
    pub segment_len: usize,
    /// Integration step, seconds.
    pub dt: f64,
    pub rng_seed: u64,
    /// Continuity bound on commanded velocity jumps, rad/s².
    pub max_accel_jump: f64,
    /// Generation fails after `attempt_budget_factor · n_edges` rejected
    /// attempts on any single edge ordinal.
    #[serde(default = "default_attempt_budget_factor")]
    pub attempt_budget_factor: usize,
}

pub fn default_attempt_budget_factor() -> usize {
    100
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_min < 1 || self.steps_min > self.steps_max {
            return Err(Error::InvalidParameter(
                "steps range must satisfy 1 <= steps_min <= steps_max".into(),
            ));
        }
        if self.segment_len < 1 {
            return Err(Error::InvalidParameter("segment_len must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        Ok(())
    }
}

/// Perturbation-analysis parameters recorded in bundle metadata once the
/// bundle has been annotated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationInfo {
    pub p: usize,
    pub theta: f64,
    pub rng_seed: u64,
}

/// Provenance metadata carried by a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMetadata {
    pub schema_version: u32,
    pub rng_seed: u64,
    /// SHA-256 over the canonical robot + limits config.
    pub robot_digest: [u8; 32],
    /// SHA-256 over the canonical world config.
    pub world_digest: [u8; 32],
    pub generation: GenerationConfig,
    pub annotation: Option<AnnotationInfo>,
}

/// The edge bundle: edges, θ-neighborhood index over start states, and
/// provenance metadata.
#[derive(Debug, Clone)]
pub struct EdgeBundle {
    edges: Vec<Edge>,
    theta: f64,
    metadata: BundleMetadata,
    index: Option<KdTree>,
}

impl PartialEq for EdgeBundle {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges && self.theta == other.theta && self.metadata == other.metadata
    }
}

impl EdgeBundle {
    pub fn new(edges: Vec<Edge>, theta: f64, metadata: BundleMetadata) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        let index = if edges.len() >= KD_TREE_MIN_EDGES {
            Some(KdTree::build(edges.iter().map(|e| e.q0.clone()).collect()))
        } else {
            None
        };
        Ok(EdgeBundle { edges, theta, metadata, index })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: u64) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn metadata(&self) -> &BundleMetadata {
        &self.metadata
    }

    pub fn is_annotated(&self) -> bool {
        self.metadata.annotation.is_some()
    }

    /// Replace per-edge probabilities; used by the perturbation stage.
    pub fn with_probabilities(
        mut self,
        probs: Vec<(f64, f64)>,
        info: AnnotationInfo,
    ) -> Result<Self> {
        if probs.len() != self.edges.len() {
            return Err(Error::InvalidParameter(
                "probability list length must equal edge count".into(),
            ));
        }
        for (edge, (lazy, coll)) in self.edges.iter_mut().zip(probs) {
            edge.p_lazy_prop = lazy;
            edge.p_collision = coll;
        }
        self.metadata.annotation = Some(info);
        Ok(self)
    }

    /// All edge ids whose start state lies within `theta` of `q`, ascending
    /// by distance with ties broken by id.
    pub fn neighbors(&self, q: &JointVector, theta: f64) -> Vec<u64> {
        assert!(theta > 0.0, "theta must be positive");
        let mut ids: Vec<u64> = match &self.index {
            Some(tree) => tree.within_radius(q, theta).into_iter().map(|i| i as u64).collect(),
            None => self
                .edges
                .iter()
                .filter(|e| (&e.q0 - q).norm() <= theta)
                .map(|e| e.id)
                .collect(),
        };
        ids.sort_by(|&a, &b| {
            let da = (&self.edges[a as usize].q0 - q).norm();
            let db = (&self.edges[b as usize].q0 - q).norm();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        ids
    }

    /// Neighbors at the bundle's own θ.
    pub fn neighbors_at_theta(&self, q: &JointVector) -> Vec<u64> {
        self.neighbors(q, self.theta)
    }
}

/// Default neighborhood radius, dependent on the state-space dimension.
pub fn default_theta(dof: usize) -> f64 {
    0.35 * (dof as f64).sqrt()
}

/// One Monte Carlo generation attempt.
///
/// Draws a start state uniform over the joint limits, a step count uniform
/// over `[steps_min, steps_max]`, and per-segment velocity commands uniform
/// over the velocity limits, then validates the rollout against all three
/// check classes. Probabilities are initialized pessimistically
/// (`p_lazy_prop = 0`, `p_collision = 1`) until the bundle is analyzed.
pub fn generate_edge(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    config: &GenerationConfig,
    rng: &mut impl Rng,
) -> Result<std::result::Result<Edge, RejectReason>> {
    let m = model.dof();
    let q0 = JointVector::from_fn(m, |i, _| rng.random_range(limits.q_min[i]..=limits.q_max[i]));
    let steps = rng.random_range(config.steps_min..=config.steps_max);
    let mut controls = Vec::with_capacity(steps);
    while controls.len() < steps {
        let v = JointVector::from_fn(m, |i, _| {
            rng.random_range(limits.dq_min[i]..=limits.dq_max[i])
        });
        let seg = config.segment_len.min(steps - controls.len());
        for _ in 0..seg {
            controls.push(v.clone());
        }
    }
    // The start-collision draw order is fixed: q0 and controls are always
    // consumed from the stream so rejected attempts stay reproducible.
    match validate_rollout(
        model,
        world,
        limits,
        &q0,
        &controls,
        config.dt,
        config.max_accel_jump,
        None,
    )? {
        Ok(rollout) => Ok(Ok(Edge {
            id: 0,
            q0,
            controls,
            dt: config.dt,
            qf: rollout.terminal().clone(),
            p_lazy_prop: 0.0,
            p_collision: 1.0,
        })),
        Err(reason) => Ok(Err(reason)),
    }
}

/// Build a bundle of exactly `config.n_edges` accepted edges.
///
/// Edge ordinals map to independent RNG substreams of `config.rng_seed`, so
/// the result is identical regardless of the parallel schedule.
pub fn build_bundle(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    config: &GenerationConfig,
    theta: f64,
    robot_digest: [u8; 32],
    world_digest: [u8; 32],
) -> Result<EdgeBundle> {
    config.validate()?;
    if config.n_edges < 1 {
        return Err(Error::InvalidParameter("n_edges must be >= 1".into()));
    }
    let budget = config.attempt_budget_factor.saturating_mul(config.n_edges).max(1);

    let results: Vec<Result<(Edge, HashMap<RejectReason, usize>)>> = (0..config.n_edges as u64)
        .into_par_iter()
        .map(|ordinal| {
            let mut rng = rng::substream(config.rng_seed, ordinal);
            let mut rejections: HashMap<RejectReason, usize> = HashMap::new();
            for _ in 0..budget {
                match generate_edge(model, world, limits, config, &mut rng)? {
                    Ok(mut edge) => {
                        edge.id = ordinal;
                        return Ok((edge, rejections));
                    }
                    Err(reason) => *rejections.entry(reason).or_default() += 1,
                }
            }
            let diagnostics = format_rejections(&rejections);
            Err(Error::AttemptBudgetExhausted { attempts: budget, diagnostics })
        })
        .collect();

    let mut edges = Vec::with_capacity(config.n_edges);
    for r in results {
        edges.push(r?.0);
    }

    EdgeBundle::new(
        edges,
        theta,
        BundleMetadata {
            schema_version: crate::persist::SCHEMA_VERSION,
            rng_seed: config.rng_seed,
            robot_digest,
            world_digest,
            generation: config.clone(),
            annotation: None,
        },
    )
}

fn format_rejections(rejections: &HashMap<RejectReason, usize>) -> String {
    let mut entries: Vec<(&'static str, usize)> =
        rejections.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    entries.sort();
    entries
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Re-run every check an edge was accepted under. Used by the persistence
/// layer and the revalidation test suites.
pub fn revalidate_edge(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    max_accel_jump: f64,
    edge: &Edge,
) -> Result<bool> {
    let validated = validate_rollout(
        model,
        world,
        limits,
        &edge.q0,
        &edge.controls,
        edge.dt,
        max_accel_jump,
        None,
    )?;
    Ok(match validated {
        Ok(rollout) => (rollout.terminal() - &edge.qf).norm() <= 1e-9,
        Err(_) => false,
    })
}
