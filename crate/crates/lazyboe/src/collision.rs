//! Geometric collision checking of the planar arm.
//!
//! Links are capsules (segments inflated by `link_radius`), obstacles are
//! static discs. Environmental collision is capsule-vs-disc, self-collision
//! is capsule-vs-capsule between non-adjacent links. All tests use exact
//! closest-distance math; no broadphase.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotModel;
use crate::{check_dim, JointVector, Result};

/// A static disc obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

/// The static planning environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub obstacles: Vec<Disc>,
    /// Capsule half-width applied to every link, meters.
    pub link_radius: f64,
    /// Maximum joint-space step (rad, per joint) between interpolants when
    /// checking a rollout.
    #[serde(default = "default_collision_resolution")]
    pub collision_resolution: f64,
}

pub fn default_collision_resolution() -> f64 {
    0.05
}

impl WorldModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.link_radius > 0.0) {
            return Err(crate::Error::InvalidParameter("link_radius must be positive".into()));
        }
        if !(self.collision_resolution > 0.0) {
            return Err(crate::Error::InvalidParameter(
                "collision_resolution must be positive".into(),
            ));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(crate::Error::InvalidParameter(format!(
                    "obstacle {i}: radius must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Workspace placement of every link segment (joint_i to joint_{i+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPose {
    pub segments: Vec<(Vector2<f64>, Vector2<f64>)>,
}

/// Planar joint positions with the base at the origin; angle i is measured
/// relative to link i-1.
pub fn forward_kinematics(model: &RobotModel, q: &JointVector) -> Result<LinkPose> {
    let m = model.dof();
    check_dim(m, q.len())?;
    let mut segments = Vec::with_capacity(m);
    let mut p = Vector2::zeros();
    let mut phi = 0.0;
    for i in 0..m {
        phi += q[i];
        let next = p + model.link_length[i] * Vector2::new(phi.cos(), phi.sin());
        segments.push((p, next));
        p = next;
    }
    Ok(LinkPose { segments })
}

/// Distance from point `p` to segment `ab`.
pub fn point_segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

/// Closest distance between segments `ab` and `cd`.
pub fn segment_segment_distance(
    a: Vector2<f64>,
    b: Vector2<f64>,
    c: Vector2<f64>,
    d: Vector2<f64>,
) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn orient(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>) -> f64 {
    (b - a).perp(&(c - a))
}

fn on_segment(a: Vector2<f64>, b: Vector2<f64>, p: Vector2<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True iff any link capsule intersects an obstacle disc or any pair of
/// non-adjacent link capsules intersect.
pub fn state_in_collision(model: &RobotModel, world: &WorldModel, q: &JointVector) -> Result<bool> {
    let pose = forward_kinematics(model, q)?;
    Ok(pose_in_collision(world, &pose))
}

fn pose_in_collision(world: &WorldModel, pose: &LinkPose) -> bool {
    let r = world.link_radius;
    for &(a, b) in &pose.segments {
        for o in &world.obstacles {
            let c = Vector2::new(o.center[0], o.center[1]);
            if point_segment_distance(c, a, b) < r + o.radius {
                return true;
            }
        }
    }
    // Links sharing a joint always touch; only |i - j| >= 2 counts.
    let m = pose.segments.len();
    for i in 0..m {
        for j in i + 2..m {
            let (a, b) = pose.segments[i];
            let (c, d) = pose.segments[j];
            if segment_segment_distance(a, b, c, d) < 2.0 * r {
                return true;
            }
        }
    }
    false
}

/// True iff any state along the linearly interpolated rollout is in
/// collision, sampled at a per-joint step of at most
/// `world.collision_resolution`.
pub fn rollout_in_collision(
    model: &RobotModel,
    world: &WorldModel,
    states: &[JointVector],
) -> Result<bool> {
    rollout_in_collision_at(model, world, states, world.collision_resolution)
}

/// Same as [`rollout_in_collision`] with an explicit resolution.
pub fn rollout_in_collision_at(
    model: &RobotModel,
    world: &WorldModel,
    states: &[JointVector],
    resolution: f64,
) -> Result<bool> {
    assert!(!states.is_empty(), "states must be non-empty");
    if state_in_collision(model, world, &states[0])? {
        return Ok(true);
    }
    for w in states.windows(2) {
        let delta = &w[1] - &w[0];
        let span = delta.amax();
        let steps = (span / resolution).ceil().max(1.0) as usize;
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let q = &w[0] + &delta * t;
            if state_in_collision(model, world, &q)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
