//! Per-edge perturbation analysis.
//!
//! Each edge is re-propagated from starts disturbed uniformly over the
//! θ-ball. The fraction of valid (collision-free, dynamically feasible)
//! trials whose end-state error stays strictly under θ/2 estimates
//! P_lazy_prop; the fraction of all trials whose rollout collides estimates
//! P_collision.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{AnnotationInfo, Edge, EdgeBundle};
use crate::check::{validate_rollout, RejectReason};
use crate::collision::WorldModel;
use crate::dynamics::{Limits, RobotModel};
use crate::{rng, Error, JointVector, Result};

/// Parameters of the perturbation analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Perturbations per edge.
    pub p: usize,
    /// Neighborhood radius, rad.
    pub theta: f64,
    pub rng_seed: u64,
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidParameter("p must be >= 1".into()));
        }
        if !(self.theta > 0.0) {
            return Err(Error::InvalidParameter("theta must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome counts and estimates for one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationReport {
    pub p_total: usize,
    /// Trials that were collision-free and dynamically feasible.
    pub p_valid: usize,
    /// Trials whose perturbed rollout collided.
    pub n_collide: usize,
    /// Valid trials with end-state error strictly under θ/2.
    pub n_within_half_theta: usize,
    /// Largest observed end-state error, rad.
    pub max_end_error: f64,
    /// n_within_half_theta / p_valid (0 when p_valid = 0).
    pub p_lazy_prop: f64,
    /// n_collide / p_total.
    pub p_collision: f64,
}

/// Sample a disturbance uniform over the volume of the θ-ball, excluding the
/// origin. Rejection sampling from the bounding cube.
fn sample_disturbance(dof: usize, theta: f64, rng: &mut impl Rng) -> JointVector {
    loop {
        let d = JointVector::from_fn(dof, |_, _| rng.random_range(-theta..=theta));
        let n = d.norm();
        if n <= theta && n > 0.0 {
            return d;
        }
    }
}

/// Run `config.p` perturbation trials on one edge.
pub fn analyze_edge(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    max_accel_jump: f64,
    edge: &Edge,
    config: &PerturbationConfig,
    rng: &mut impl Rng,
) -> Result<PerturbationReport> {
    config.validate()?;
    let dof = model.dof();
    let mut p_valid = 0usize;
    let mut n_collide = 0usize;
    let mut n_within = 0usize;
    let mut max_end_error = 0.0f64;

    for _ in 0..config.p {
        let delta = sample_disturbance(dof, config.theta, rng);
        let q0 = &edge.q0 + &delta;
        let outcome = validate_rollout(
            model,
            world,
            limits,
            &q0,
            &edge.controls,
            edge.dt,
            max_accel_jump,
            None,
        )?;
        match outcome {
            Ok(rollout) => {
                let err = (rollout.terminal() - &edge.qf).norm();
                max_end_error = max_end_error.max(err);
                p_valid += 1;
                // Strict threshold keeps chained lazy drift at or under θ.
                if err < config.theta / 2.0 {
                    n_within += 1;
                }
            }
            Err(RejectReason::StartInCollision) | Err(RejectReason::RolloutCollision) => {
                n_collide += 1;
            }
            // Dynamically infeasible but collision-free: counts toward
            // p_total only.
            Err(_) => {}
        }
    }

    Ok(PerturbationReport {
        p_total: config.p,
        p_valid,
        n_collide,
        n_within_half_theta: n_within,
        max_end_error,
        p_lazy_prop: if p_valid > 0 { n_within as f64 / p_valid as f64 } else { 0.0 },
        p_collision: n_collide as f64 / config.p as f64,
    })
}

/// Analyze every edge and write the probabilities back into the bundle.
///
/// Deterministic: edge id `i` uses the (rng_seed, i) substream regardless of
/// the parallel schedule.
pub fn annotate_bundle(
    bundle: EdgeBundle,
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    config: &PerturbationConfig,
) -> Result<(EdgeBundle, Vec<PerturbationReport>)> {
    config.validate()?;
    let max_accel_jump = bundle.metadata().generation.max_accel_jump;
    let reports: Vec<Result<PerturbationReport>> = bundle
        .edges()
        .par_iter()
        .map(|edge| {
            let mut rng = rng::substream(config.rng_seed, edge.id);
            analyze_edge(model, world, limits, max_accel_jump, edge, config, &mut rng)
        })
        .collect();
    let reports: Vec<PerturbationReport> = reports.into_iter().collect::<Result<_>>()?;
    let probs = reports.iter().map(|r| (r.p_lazy_prop, r.p_collision)).collect();
    let info = AnnotationInfo { p: config.p, theta: config.theta, rng_seed: config.rng_seed };
    let bundle = bundle.with_probabilities(probs, info)?;
    Ok((bundle, reports))
}
