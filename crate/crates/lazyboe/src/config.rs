//! Run configuration: a single TOML file with robot, world, limits,
//! generation, perturbation, planner and benchmark sections.
//!
//! The robot+limits and world sections are canonically serialized and
//! SHA-256 digested; bundles record both digests so a bundle can only be
//! used with the configuration it was built for.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{default_theta, GenerationConfig};
use crate::collision::{Disc, WorldModel};
use crate::dynamics::{Limits, RobotModel};
use crate::perturbation::PerturbationConfig;
use crate::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Planner knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSection {
    /// Neighborhood radius θ, rad. Defaults to 0.35·√dof.
    pub theta: Option<f64>,
    /// Goal region radius, rad.
    pub goal_radius: f64,
    /// Greedy share of the expansion-node mixture.
    pub greedy_prob: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection { theta: None, goal_radius: 0.25, greedy_prob: 0.9 }
    }
}

/// Perturbation-analysis knobs. `theta` falls back to the planner θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSection {
    pub p: usize,
    pub theta: Option<f64>,
    pub rng_seed: u64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        PerturbationSection { p: 500, theta: None, rng_seed: 2 }
    }
}

/// Benchmark sweep parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSection {
    pub n_problems: usize,
    /// Per-run wall-clock budget, seconds.
    pub time_budget: f64,
    pub rng_seed: u64,
    /// Planners to sweep.
    pub planners: Vec<PlannerKind>,
    /// Optional deterministic budget: when set, planners stop after this
    /// many iterations instead of on the wall clock.
    pub budget_iterations: Option<u64>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            n_problems: 20,
            time_budget: 10.0,
            rng_seed: 3,
            planners: PlannerKind::ALL.to_vec(),
            budget_iterations: None,
        }
    }
}

/// Planner selector used by the CLI and the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannerKind {
    #[serde(rename = "lazyboe")]
    LazyBoe,
    #[serde(rename = "boe")]
    Boe,
    #[serde(rename = "rrt")]
    Rrt,
    #[serde(rename = "sst0.5")]
    SstHalf,
    #[serde(rename = "sst1")]
    SstOne,
    #[serde(rename = "sst2")]
    SstTwo,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 6] = [
        PlannerKind::LazyBoe,
        PlannerKind::Boe,
        PlannerKind::Rrt,
        PlannerKind::SstHalf,
        PlannerKind::SstOne,
        PlannerKind::SstTwo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::LazyBoe => "lazyboe",
            PlannerKind::Boe => "boe",
            PlannerKind::Rrt => "rrt",
            PlannerKind::SstHalf => "sst0.5",
            PlannerKind::SstOne => "sst1",
            PlannerKind::SstTwo => "sst2",
        }
    }

    /// SST pruning-to-selection ratio, if this is an SST variant.
    pub fn sst_ratio(&self) -> Option<f64> {
        match self {
            PlannerKind::SstHalf => Some(0.5),
            PlannerKind::SstOne => Some(1.0),
            PlannerKind::SstTwo => Some(2.0),
            _ => None,
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lazyboe" => Ok(PlannerKind::LazyBoe),
            "boe" => Ok(PlannerKind::Boe),
            "rrt" => Ok(PlannerKind::Rrt),
            "sst0.5" => Ok(PlannerKind::SstHalf),
            "sst1" => Ok(PlannerKind::SstOne),
            "sst2" => Ok(PlannerKind::SstTwo),
            other => Err(Error::Config(format!(
                "unknown planner '{other}' (expected lazyboe|boe|rrt|sst0.5|sst1|sst2)"
            ))),
        }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub robot: RobotModel,
    pub world: WorldModel,
    pub limits: Limits,
    pub generation: GenerationConfig,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {})",
                self.schema_version, CONFIG_SCHEMA_VERSION
            )));
        }
        self.robot.validate()?;
        self.world.validate()?;
        self.limits.validate(self.robot.dof())?;
        self.generation.validate()?;
        if !(self.planner.goal_radius > 0.0) {
            return Err(Error::Config("planner.goal_radius must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.planner.greedy_prob) {
            return Err(Error::Config("planner.greedy_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// θ used for bundle neighborhoods.
    pub fn theta(&self) -> f64 {
        self.planner.theta.unwrap_or_else(|| default_theta(self.robot.dof()))
    }

    /// Fully-resolved perturbation config.
    pub fn perturbation_config(&self) -> PerturbationConfig {
        PerturbationConfig {
            p: self.perturbation.p,
            theta: self.perturbation.theta.unwrap_or_else(|| self.theta()),
            rng_seed: self.perturbation.rng_seed,
        }
    }

    /// SHA-256 over the canonical robot + limits serialization.
    pub fn robot_digest(&self) -> [u8; 32] {
        #[derive(Serialize)]
        struct RobotAndLimits<'a> {
            robot: &'a RobotModel,
            limits: &'a Limits,
        }
        digest_of(&RobotAndLimits { robot: &self.robot, limits: &self.limits })
    }

    /// SHA-256 over the canonical world serialization.
    pub fn world_digest(&self) -> [u8; 32] {
        digest_of(&self.world)
    }

    /// Desk-scale defaults: 3-link arm, 4 disc obstacles, 20 problems, 10 s
    /// budget.
    pub fn default_desk_scale() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            robot: RobotModel {
                link_length: vec![0.45, 0.40, 0.30],
                link_mass: vec![2.0, 1.5, 1.0],
                com_offset: vec![0.225, 0.20, 0.15],
                link_inertia: vec![0.03375, 0.02, 0.0075],
                viscous_friction: vec![0.6, 0.4, 0.2],
                coulomb_friction: vec![0.3, 0.2, 0.1],
                gravity: 9.81,
            },
            world: WorldModel {
                obstacles: vec![
                    Disc { center: [0.70, 0.45], radius: 0.08 },
                    Disc { center: [-0.55, 0.60], radius: 0.08 },
                    Disc { center: [0.05, -0.80], radius: 0.08 },
                    Disc { center: [-0.65, -0.45], radius: 0.08 },
                ],
                link_radius: 0.04,
                collision_resolution: 0.05,
            },
            limits: Limits {
                q_min: vec![-std::f64::consts::PI; 3],
                q_max: vec![std::f64::consts::PI; 3],
                dq_min: vec![-1.0; 3],
                dq_max: vec![1.0; 3],
                ddq_min: vec![-120.0; 3],
                ddq_max: vec![120.0; 3],
                tau_min: vec![-150.0, -80.0, -40.0],
                tau_max: vec![150.0, 80.0, 40.0],
            },
            generation: GenerationConfig {
                n_edges: 4000,
                steps_min: 8,
                steps_max: 25,
                segment_len: 10,
                dt: 0.02,
                rng_seed: 1,
                max_accel_jump: 120.0,
                attempt_budget_factor: 100,
            },
            perturbation: PerturbationSection::default(),
            planner: PlannerSection::default(),
            benchmark: BenchmarkSection::default(),
        }
    }
}

fn digest_of<T: Serialize>(value: &T) -> [u8; 32] {
    let canonical = toml::to_string(value).expect("digest serialization");
    Sha256::digest(canonical.as_bytes()).into()
}
