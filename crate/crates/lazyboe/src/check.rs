//! Shared edge validation: the three check classes (collision, state/torque
//! limits, continuity) applied to a forward rollout.
//!
//! Every consumer of a rollout — bundle generation, perturbation analysis,
//! the planners and the end-to-end revalidation of returned trajectories —
//! goes through [`validate_rollout`], so a stored edge re-propagated from a
//! different state is judged by exactly the same rules it was generated
//! under.

use crate::collision::{rollout_in_collision, state_in_collision, WorldModel};
use crate::dynamics::{propagate, Limits, RobotModel, Rollout};
use crate::{JointVector, Result};

/// Why a candidate rollout was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    StartInCollision,
    /// A state, velocity or implied acceleration left its limits.
    LimitViolation,
    TorqueViolation,
    /// A commanded velocity jump exceeded `max_accel_jump`.
    ContinuityViolation,
    RolloutCollision,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::StartInCollision => "start_in_collision",
            RejectReason::LimitViolation => "limit_violation",
            RejectReason::TorqueViolation => "torque_violation",
            RejectReason::ContinuityViolation => "continuity_violation",
            RejectReason::RolloutCollision => "rollout_collision",
        }
    }
}

/// Continuity check: the jump between consecutive commanded velocities
/// (including the jump from `prev_velocity`, when given) must satisfy
/// ‖q̇_{k+1} − q̇_k‖∞ / dt ≤ max_accel_jump.
pub fn continuity_ok(
    controls: &[JointVector],
    dt: f64,
    max_accel_jump: f64,
    prev_velocity: Option<&JointVector>,
) -> bool {
    let bound = max_accel_jump * dt;
    if let (Some(prev), Some(first)) = (prev_velocity, controls.first()) {
        if (first - prev).amax() > bound {
            return false;
        }
    }
    controls.windows(2).all(|w| (&w[1] - &w[0]).amax() <= bound)
}

/// Propagate `controls` from `q0` and run all three check classes.
///
/// `prev_velocity` is the velocity the system carried into this rollout
/// (`None` means at rest); it feeds both the first-step acceleration and the
/// continuity check, so chained per-segment validation agrees exactly with
/// validating the concatenated control sequence end to end.
///
/// Returns `Ok(Err(reason))` for a well-posed but invalid rollout and
/// `Ok(Ok(rollout))` when all checks pass.
pub fn validate_rollout(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    q0: &JointVector,
    controls: &[JointVector],
    dt: f64,
    max_accel_jump: f64,
    prev_velocity: Option<&JointVector>,
) -> Result<std::result::Result<Rollout, RejectReason>> {
    if state_in_collision(model, world, q0)? {
        return Ok(Err(RejectReason::StartInCollision));
    }
    let rollout = propagate(model, limits, q0, controls, dt, prev_velocity)?;
    let report = rollout.limit_report;
    if !(report.q_ok && report.dq_ok && report.ddq_ok) {
        return Ok(Err(RejectReason::LimitViolation));
    }
    if !report.tau_ok {
        return Ok(Err(RejectReason::TorqueViolation));
    }
    if !continuity_ok(controls, dt, max_accel_jump, prev_velocity) {
        return Ok(Err(RejectReason::ContinuityViolation));
    }
    if rollout_in_collision(model, world, &rollout.states)? {
        return Ok(Err(RejectReason::RolloutCollision));
    }
    Ok(Ok(rollout))
}
