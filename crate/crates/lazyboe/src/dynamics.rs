//! Euler-Lagrange dynamics of a planar n-link revolute manipulator.
//!
//! The torque model is `τ = M(q)q̈ + C(q, q̇)q̇ + g(q) + f(q̇)` with a
//! symmetric positive-definite inertia matrix `M`, Christoffel-symbol
//! Coriolis matrix `C`, gravity vector `g` and viscous-plus-Coulomb joint
//! friction `f`. Joint angles are relative (angle i is measured against
//! link i-1), q = 0 lays the arm flat along +x, and gravity pulls in -y.

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::{check_dim, Error, JointVector, Result};

/// Kinematic and inertial parameters of the arm. One entry per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    /// Link lengths in meters.
    pub link_length: Vec<f64>,
    /// Link masses in kg.
    pub link_mass: Vec<f64>,
    /// Distance from the proximal joint to the link center of mass, meters.
    pub com_offset: Vec<f64>,
    /// Rotational inertia about each link's center of mass, kg·m².
    pub link_inertia: Vec<f64>,
    /// Viscous friction coefficients, N·m·s/rad.
    pub viscous_friction: Vec<f64>,
    /// Coulomb friction magnitudes, N·m.
    pub coulomb_friction: Vec<f64>,
    /// Gravitational acceleration, m/s². 9.81 by default; 0 disables gravity.
    pub gravity: f64,
}

impl RobotModel {
    /// Degrees of freedom.
    pub fn dof(&self) -> usize {
        self.link_length.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dof();
        if m == 0 {
            return Err(Error::InvalidParameter("robot must have at least one link".into()));
        }
        for (name, v) in [
            ("link_mass", &self.link_mass),
            ("com_offset", &self.com_offset),
            ("link_inertia", &self.link_inertia),
            ("viscous_friction", &self.viscous_friction),
            ("coulomb_friction", &self.coulomb_friction),
        ] {
            check_dim(m, v.len()).map_err(|_| {
                Error::InvalidParameter(format!("{name} must have {m} entries"))
            })?;
        }
        for i in 0..m {
            if !(self.link_length[i] > 0.0) || !(self.link_mass[i] > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "link {i}: lengths and masses must be positive"
                )));
            }
            if !(0.0..=self.link_length[i]).contains(&self.com_offset[i]) {
                return Err(Error::InvalidParameter(format!(
                    "link {i}: com_offset must lie within [0, link_length]"
                )));
            }
            if self.link_inertia[i] < 0.0
                || self.viscous_friction[i] < 0.0
                || self.coulomb_friction[i] < 0.0
            {
                return Err(Error::InvalidParameter(format!(
                    "link {i}: inertia and friction coefficients must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Elementwise bounds on states, controls, accelerations and torques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    pub dq_min: Vec<f64>,
    pub dq_max: Vec<f64>,
    pub ddq_min: Vec<f64>,
    pub ddq_max: Vec<f64>,
    pub tau_min: Vec<f64>,
    pub tau_max: Vec<f64>,
}

impl Limits {
    pub fn validate(&self, dof: usize) -> Result<()> {
        for (name, lo, hi) in [
            ("q", &self.q_min, &self.q_max),
            ("dq", &self.dq_min, &self.dq_max),
            ("ddq", &self.ddq_min, &self.ddq_max),
            ("tau", &self.tau_min, &self.tau_max),
        ] {
            check_dim(dof, lo.len())?;
            check_dim(dof, hi.len())?;
            for i in 0..dof {
                if !(lo[i] < hi[i]) {
                    return Err(Error::InvalidParameter(format!(
                        "{name} limits: min must be strictly below max at joint {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn q_in_limits(&self, q: &JointVector) -> bool {
        within(q, &self.q_min, &self.q_max)
    }

    pub fn dq_in_limits(&self, dq: &JointVector) -> bool {
        within(dq, &self.dq_min, &self.dq_max)
    }

    pub fn ddq_in_limits(&self, ddq: &JointVector) -> bool {
        within(ddq, &self.ddq_min, &self.ddq_max)
    }

    pub fn tau_in_limits(&self, tau: &JointVector) -> bool {
        within(tau, &self.tau_min, &self.tau_max)
    }
}

fn within(v: &JointVector, lo: &[f64], hi: &[f64]) -> bool {
    v.iter()
        .zip(lo.iter().zip(hi))
        .all(|(x, (l, h))| *x >= *l && *x <= *h)
}

/// Center-of-mass kinematics shared by the inertia, Coriolis and gravity
/// terms.
///
/// `jac[i][j]` is ∂p_i/∂q_j (j ≤ i) for the COM position p_i of link i, and
/// `usum[i][j]` the matching radial sum so that ∂²p_i/∂q_j∂q_l equals
/// `-usum[i][max(j, l)]`.
struct ComKinematics {
    jac: Vec<Vec<Vector2<f64>>>,
    usum: Vec<Vec<Vector2<f64>>>,
    com_y: Vec<f64>,
}

impl ComKinematics {
    fn new(model: &RobotModel, q: &JointVector) -> Self {
        let m = model.dof();
        let mut phi = Vec::with_capacity(m);
        let mut acc = 0.0;
        for i in 0..m {
            acc += q[i];
            phi.push(acc);
        }
        let u: Vec<Vector2<f64>> = phi.iter().map(|p| Vector2::new(p.cos(), p.sin())).collect();
        let v: Vec<Vector2<f64>> = phi.iter().map(|p| Vector2::new(-p.sin(), p.cos())).collect();

        let mut jac = Vec::with_capacity(m);
        let mut usum = Vec::with_capacity(m);
        let mut com_y = Vec::with_capacity(m);
        let mut joint_y = 0.0;
        for i in 0..m {
            let r = model.com_offset[i];
            com_y.push(joint_y + r * u[i].y);
            joint_y += model.link_length[i] * u[i].y;

            // Descending recurrence: row[j] = row[j+1] + L_j * dir(phi_j).
            let mut jrow = vec![Vector2::zeros(); i + 1];
            let mut urow = vec![Vector2::zeros(); i + 1];
            jrow[i] = r * v[i];
            urow[i] = r * u[i];
            for j in (0..i).rev() {
                jrow[j] = jrow[j + 1] + model.link_length[j] * v[j];
                urow[j] = urow[j + 1] + model.link_length[j] * u[j];
            }
            jac.push(jrow);
            usum.push(urow);
        }
        ComKinematics { jac, usum, com_y }
    }
}

/// Joint inertia matrix M(q). Symmetric positive definite.
pub fn inertia_matrix(model: &RobotModel, q: &JointVector) -> Result<DMatrix<f64>> {
    let m = model.dof();
    check_dim(m, q.len())?;
    let kin = ComKinematics::new(model, q);
    let mut mat = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in j..m {
            let mut s = 0.0;
            for i in k..m {
                s += model.link_mass[i] * kin.jac[i][j].dot(&kin.jac[i][k]);
                s += model.link_inertia[i];
            }
            mat[(j, k)] = s;
            mat[(k, j)] = s;
        }
    }
    Ok(mat)
}

/// Partial derivatives ∂M/∂q_l, one matrix per joint.
fn inertia_gradient(model: &RobotModel, kin: &ComKinematics) -> Vec<DMatrix<f64>> {
    let m = model.link_length.len();
    let mut grads = vec![DMatrix::zeros(m, m); m];
    for l in 0..m {
        for j in 0..m {
            for k in j..m {
                let mut s = 0.0;
                for i in j.max(k).max(l)..m {
                    let wjl = -kin.usum[i][j.max(l)];
                    let wkl = -kin.usum[i][k.max(l)];
                    s += model.link_mass[i]
                        * (wjl.dot(&kin.jac[i][k]) + kin.jac[i][j].dot(&wkl));
                }
                grads[l][(j, k)] = s;
                grads[l][(k, j)] = s;
            }
        }
    }
    grads
}

/// Coriolis/centrifugal matrix C(q, q̇) built from the Christoffel symbols of
/// the inertia matrix, so that Ṁ - 2C is skew-symmetric.
pub fn coriolis_matrix(model: &RobotModel, q: &JointVector, dq: &JointVector) -> Result<DMatrix<f64>> {
    let m = model.dof();
    check_dim(m, q.len())?;
    check_dim(m, dq.len())?;
    let kin = ComKinematics::new(model, q);
    let grads = inertia_gradient(model, &kin);
    let mut c = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let mut s = 0.0;
            for l in 0..m {
                let christoffel =
                    0.5 * (grads[l][(j, k)] + grads[k][(j, l)] - grads[j][(k, l)]);
                s += christoffel * dq[l];
            }
            c[(j, k)] = s;
        }
    }
    Ok(c)
}

/// Coriolis/centrifugal torque C(q, q̇)q̇.
pub fn coriolis_vector(model: &RobotModel, q: &JointVector, dq: &JointVector) -> Result<JointVector> {
    Ok(coriolis_matrix(model, q, dq)? * dq)
}

/// Torque needed to hold configuration q statically (friction ignored).
pub fn gravity_vector(model: &RobotModel, q: &JointVector) -> Result<JointVector> {
    let m = model.dof();
    check_dim(m, q.len())?;
    let kin = ComKinematics::new(model, q);
    let mut g = JointVector::zeros(m);
    for j in 0..m {
        let mut s = 0.0;
        for i in j..m {
            s += model.link_mass[i] * model.gravity * kin.jac[i][j].y;
        }
        g[j] = s;
    }
    Ok(g)
}

/// Gravitational potential energy, zero at y = 0.
pub fn potential_energy(model: &RobotModel, q: &JointVector) -> Result<f64> {
    let m = model.dof();
    check_dim(m, q.len())?;
    let kin = ComKinematics::new(model, q);
    Ok((0..m)
        .map(|i| model.link_mass[i] * model.gravity * kin.com_y[i])
        .sum())
}

/// Joint friction torque: viscous·q̇ + coulomb·sign(q̇), with sign(0) = 0.
pub fn friction_vector(model: &RobotModel, dq: &JointVector) -> Result<JointVector> {
    let m = model.dof();
    check_dim(m, dq.len())?;
    let mut f = JointVector::zeros(m);
    for i in 0..m {
        let s = if dq[i] > 0.0 {
            1.0
        } else if dq[i] < 0.0 {
            -1.0
        } else {
            0.0
        };
        f[i] = model.viscous_friction[i] * dq[i] + model.coulomb_friction[i] * s;
    }
    Ok(f)
}

/// Inverse dynamics: τ = M(q)q̈ + C(q, q̇)q̇ + g(q) + f(q̇).
pub fn inverse_dynamics(
    model: &RobotModel,
    q: &JointVector,
    dq: &JointVector,
    ddq: &JointVector,
) -> Result<JointVector> {
    let m = model.dof();
    check_dim(m, ddq.len())?;
    let tau = inertia_matrix(model, q)? * ddq
        + coriolis_vector(model, q, dq)?
        + gravity_vector(model, q)?
        + friction_vector(model, dq)?;
    Ok(tau)
}

/// Elementwise limit verdicts for a propagated rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimitReport {
    pub q_ok: bool,
    pub dq_ok: bool,
    pub ddq_ok: bool,
    pub tau_ok: bool,
}

impl LimitReport {
    pub fn all_ok(&self) -> bool {
        self.q_ok && self.dq_ok && self.ddq_ok && self.tau_ok
    }
}

/// A forward rollout of a commanded velocity sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Visited states, `controls.len() + 1` entries starting at q0.
    pub states: Vec<JointVector>,
    /// Backward-difference accelerations, one per control step.
    pub accelerations: Vec<JointVector>,
    /// Inverse-dynamics torques, one per control step.
    pub torques: Vec<JointVector>,
    /// Integration step, seconds.
    pub dt: f64,
    /// Total duration dt · len(controls), seconds.
    pub duration: f64,
    /// Limit verdicts against the `Limits` passed to `propagate`.
    pub limit_report: LimitReport,
}

impl Rollout {
    pub fn terminal(&self) -> &JointVector {
        self.states.last().expect("rollout has at least one state")
    }
}

/// Explicit-Euler propagation of a velocity command sequence:
/// q_{k+1} = q_k + dt·q̇_k, with the tracked command assumed exact within a
/// step. Accelerations are backward differences of the command sequence with
/// `prev_velocity` (at rest when `None`) before the first step, so the
/// spin-up torque of the first step is counted. Torque feasibility is
/// verified a posteriori via inverse dynamics.
pub fn propagate(
    model: &RobotModel,
    limits: &Limits,
    q0: &JointVector,
    controls: &[JointVector],
    dt: f64,
    prev_velocity: Option<&JointVector>,
) -> Result<Rollout> {
    let m = model.dof();
    check_dim(m, q0.len())?;
    if controls.is_empty() {
        return Err(Error::InvalidParameter("controls must be non-empty".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    for c in controls {
        check_dim(m, c.len())?;
    }
    if let Some(v) = prev_velocity {
        check_dim(m, v.len())?;
    }

    let n = controls.len();
    let mut states = Vec::with_capacity(n + 1);
    let mut accelerations = Vec::with_capacity(n);
    let mut torques = Vec::with_capacity(n);
    states.push(q0.clone());

    let rest = JointVector::zeros(m);
    let mut report = LimitReport {
        q_ok: limits.q_in_limits(q0),
        dq_ok: true,
        ddq_ok: true,
        tau_ok: true,
    };

    for (k, dq) in controls.iter().enumerate() {
        let q = states[k].clone();
        let prev = if k == 0 {
            prev_velocity.unwrap_or(&rest)
        } else {
            &controls[k - 1]
        };
        let ddq = (dq - prev) / dt;
        let tau = inverse_dynamics(model, &q, dq, &ddq)?;
        let next = &q + dq * dt;
        if next.iter().any(|x| !x.is_finite()) || tau.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("propagate"));
        }

        report.q_ok &= limits.q_in_limits(&next);
        report.dq_ok &= limits.dq_in_limits(dq);
        report.ddq_ok &= limits.ddq_in_limits(&ddq);
        report.tau_ok &= limits.tau_in_limits(&tau);

        accelerations.push(ddq);
        torques.push(tau);
        states.push(next);
    }

    Ok(Rollout {
        states,
        accelerations,
        torques,
        dt,
        duration: dt * n as f64,
        limit_report: report,
    })
}
