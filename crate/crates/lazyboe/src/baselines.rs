//! Reference kinodynamic planners: RRT, SST and the non-lazy bundle search.
//!
//! All baselines share the dynamics, collision and cost infrastructure, and
//! every returned trajectory passes the same independent end-to-end
//! revalidation as the lazy planner. RRT and SST use the classic
//! piecewise-constant single-velocity extension rather than the bundle's
//! segmented sequences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{EdgeBundle, GenerationConfig};
use crate::check::validate_rollout;
use crate::collision::WorldModel;
use crate::dynamics::{Limits, RobotModel};
use crate::planner::{
    plan_with_options, trajectory_from_rollout, Budget, PlanOutcome, PlannerOptions, Query,
    SearchStats, Trajectory,
};
use crate::{rng, JointVector, Result};

/// SST radii. The benchmark variants use pruning_radius = ratio ·
/// selection_radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SstConfig {
    pub selection_radius: f64,
    pub pruning_radius: f64,
}

impl SstConfig {
    pub fn from_ratio(selection_radius: f64, ratio: f64) -> Self {
        SstConfig { selection_radius, pruning_radius: ratio * selection_radius }
    }
}

const GOAL_BIAS: f64 = 0.05;

struct BaselineNode {
    state: JointVector,
    parent: Option<u32>,
    /// Constant velocity command and its step count.
    control: Option<(JointVector, usize)>,
    cost: f64,
    /// SST: still part of the search tree.
    pruned: bool,
    /// SST: eligible for selection (a witness representative).
    active: bool,
    children: u32,
}

fn sample_state(limits: &Limits, rng: &mut impl Rng) -> JointVector {
    JointVector::from_fn(limits.q_min.len(), |i, _| {
        rng.random_range(limits.q_min[i]..=limits.q_max[i])
    })
}

fn sample_control(limits: &Limits, rng: &mut impl Rng) -> JointVector {
    JointVector::from_fn(limits.dq_min.len(), |i, _| {
        rng.random_range(limits.dq_min[i]..=limits.dq_max[i])
    })
}

/// Re-simulate the path to `node` from the query start and build a
/// trajectory when everything checks out.
fn revalidate_path(
    nodes: &[BaselineNode],
    node: u32,
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    gen: &GenerationConfig,
    query: &Query,
) -> Result<Option<Trajectory>> {
    let mut chain = Vec::new();
    let mut cur = node;
    loop {
        let n = &nodes[cur as usize];
        match (&n.control, n.parent) {
            (Some((v, steps)), Some(p)) => {
                chain.push((v.clone(), *steps));
                cur = p;
            }
            _ => break,
        }
    }
    chain.reverse();
    let mut controls = Vec::new();
    for (v, steps) in chain {
        for _ in 0..steps {
            controls.push(v.clone());
        }
    }
    if controls.is_empty() {
        return Ok(None);
    }
    let outcome = validate_rollout(
        model,
        world,
        limits,
        &query.start,
        &controls,
        gen.dt,
        gen.max_accel_jump,
        None,
    )?;
    Ok(match outcome {
        Ok(rollout) if query.goal.contains(rollout.terminal()) => {
            Some(trajectory_from_rollout(&rollout.states, &controls, gen.dt))
        }
        _ => None,
    })
}

fn trivial_outcome(query: &Query, started: std::time::Instant) -> PlanOutcome {
    let m = query.start.len();
    PlanOutcome {
        trajectories: vec![Trajectory {
            waypoints: vec![crate::planner::Waypoint {
                time: 0.0,
                q: query.start.clone(),
                dq: JointVector::zeros(m),
            }],
            cost: 0.0,
        }],
        time_to_first: Some(started.elapsed().as_secs_f64()),
        stats: SearchStats::default(),
    }
}

/// Classic kinodynamic RRT. Terminates at the first goal-reaching node.
pub fn plan_rrt(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    gen: &GenerationConfig,
    query: &Query,
    budget: Option<Budget>,
) -> Result<PlanOutcome> {
    let started = std::time::Instant::now();
    if query.goal.contains(&query.start) {
        return Ok(trivial_outcome(query, started));
    }
    let budget = budget.unwrap_or(Budget::Seconds(query.time_budget));
    let mut rng = rng::stream(query.rng_seed);
    let mut stats = SearchStats::default();
    let mut nodes = vec![BaselineNode {
        state: query.start.clone(),
        parent: None,
        control: None,
        cost: 0.0,
        pruned: false,
        active: true,
        children: 0,
    }];

    loop {
        match budget {
            Budget::Seconds(s) => {
                if started.elapsed().as_secs_f64() >= s {
                    break;
                }
            }
            Budget::Iterations(n) => {
                if stats.iterations >= n {
                    break;
                }
            }
        }
        stats.iterations += 1;

        let target = if rng.random::<f64>() < GOAL_BIAS {
            query.goal.center.clone()
        } else {
            sample_state(limits, &mut rng)
        };
        let nearest = (0..nodes.len())
            .min_by(|&a, &b| {
                let da = (&nodes[a].state - &target).norm();
                let db = (&nodes[b].state - &target).norm();
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
            .unwrap() as u32;

        let v = sample_control(limits, &mut rng);
        let steps = rng.random_range(gen.steps_min..=gen.steps_max);
        let controls = vec![v.clone(); steps];
        let v_prev = incoming_velocity(&nodes, nearest);
        stats.simulations += 1;
        let outcome = validate_rollout(
            model,
            world,
            limits,
            &nodes[nearest as usize].state,
            &controls,
            gen.dt,
            gen.max_accel_jump,
            v_prev.as_ref(),
        )?;
        if let Ok(rollout) = outcome {
            let state = rollout.terminal().clone();
            let cost = nodes[nearest as usize].cost + rollout_arclength(&rollout.states);
            let id = nodes.len() as u32;
            nodes.push(BaselineNode {
                state,
                parent: Some(nearest),
                control: Some((v, steps)),
                cost,
                pruned: false,
                active: true,
                children: 0,
            });
            if query.goal.contains(&nodes[id as usize].state) {
                if let Some(traj) =
                    revalidate_path(&nodes, id, model, world, limits, gen, query)?
                {
                    stats.tree_nodes = nodes.len() as u64;
                    stats.active_nodes = nodes.len() as u64;
                    stats.iterations_to_first = stats.iterations;
                    stats.simulations_to_first = stats.simulations;
                    return Ok(PlanOutcome {
                        time_to_first: Some(started.elapsed().as_secs_f64()),
                        trajectories: vec![traj],
                        stats,
                    });
                }
            }
        }
    }
    stats.tree_nodes = nodes.len() as u64;
    stats.active_nodes = nodes.len() as u64;
    Ok(PlanOutcome { trajectories: Vec::new(), time_to_first: None, stats })
}

fn incoming_velocity(nodes: &[BaselineNode], id: u32) -> Option<JointVector> {
    nodes[id as usize].control.as_ref().map(|(v, _)| v.clone())
}

fn rollout_arclength(states: &[JointVector]) -> f64 {
    states.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// SST: best-near selection inside `selection_radius`, witness-dominance
/// pruning inside `pruning_radius`. Anytime.
pub fn plan_sst(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    gen: &GenerationConfig,
    query: &Query,
    sst: &SstConfig,
    budget: Option<Budget>,
) -> Result<PlanOutcome> {
    assert!(sst.selection_radius > 0.0 && sst.pruning_radius > 0.0);
    let started = std::time::Instant::now();
    if query.goal.contains(&query.start) {
        return Ok(trivial_outcome(query, started));
    }
    let budget = budget.unwrap_or(Budget::Seconds(query.time_budget));
    let mut rng = rng::stream(query.rng_seed);
    let mut stats = SearchStats::default();
    let mut nodes = vec![BaselineNode {
        state: query.start.clone(),
        parent: None,
        control: None,
        cost: 0.0,
        pruned: false,
        active: true,
        children: 0,
    }];
    // Witness set: (state, representative node).
    let mut witnesses: Vec<(JointVector, u32)> = vec![(query.start.clone(), 0)];
    let mut trajectories = Vec::new();
    let mut time_to_first = None;

    loop {
        match budget {
            Budget::Seconds(s) => {
                if started.elapsed().as_secs_f64() >= s {
                    break;
                }
            }
            Budget::Iterations(n) => {
                if stats.iterations >= n {
                    break;
                }
            }
        }
        stats.iterations += 1;

        let target = if rng.random::<f64>() < GOAL_BIAS {
            query.goal.center.clone()
        } else {
            sample_state(limits, &mut rng)
        };
        // Best-near: cheapest active node within the selection radius, else
        // the nearest active node.
        let mut best: Option<u32> = None;
        let mut nearest: Option<(u32, f64)> = None;
        for (i, n) in nodes.iter().enumerate() {
            if n.pruned || !n.active {
                continue;
            }
            let d = (&n.state - &target).norm();
            if d <= sst.selection_radius {
                if best.map_or(true, |b| n.cost < nodes[b as usize].cost) {
                    best = Some(i as u32);
                }
            }
            if nearest.map_or(true, |(_, nd)| d < nd) {
                nearest = Some((i as u32, d));
            }
        }
        let selected = match best.or(nearest.map(|(i, _)| i)) {
            Some(s) => s,
            None => break,
        };

        let v = sample_control(limits, &mut rng);
        let steps = rng.random_range(gen.steps_min..=gen.steps_max);
        let controls = vec![v.clone(); steps];
        let v_prev = incoming_velocity(&nodes, selected);
        stats.simulations += 1;
        let outcome = validate_rollout(
            model,
            world,
            limits,
            &nodes[selected as usize].state,
            &controls,
            gen.dt,
            gen.max_accel_jump,
            v_prev.as_ref(),
        )?;
        let rollout = match outcome {
            Ok(r) => r,
            Err(_) => continue,
        };
        let state = rollout.terminal().clone();
        let cost = nodes[selected as usize].cost + rollout_arclength(&rollout.states);

        // Witness dominance.
        let witness = witnesses
            .iter()
            .enumerate()
            .filter(|(_, (w, _))| (w - &state).norm() <= sst.pruning_radius)
            .min_by(|(_, (wa, _)), (_, (wb, _))| {
                (wa - &state).norm().partial_cmp(&(wb - &state).norm()).unwrap()
            })
            .map(|(i, _)| i);

        let accept = match witness {
            None => true,
            Some(w) => cost < nodes[witnesses[w].1 as usize].cost,
        };
        if !accept {
            continue;
        }

        let id = nodes.len() as u32;
        nodes.push(BaselineNode {
            state,
            parent: Some(selected),
            control: Some((v, steps)),
            cost,
            pruned: false,
            active: true,
            children: 0,
        });
        nodes[selected as usize].children += 1;

        match witness {
            None => witnesses.push((nodes[id as usize].state.clone(), id)),
            Some(w) => {
                let old = witnesses[w].1;
                witnesses[w].1 = id;
                nodes[old as usize].active = false;
                // Prune inactive leaves upward.
                let mut cur = old;
                while !nodes[cur as usize].active
                    && nodes[cur as usize].children == 0
                    && !nodes[cur as usize].pruned
                {
                    nodes[cur as usize].pruned = true;
                    match nodes[cur as usize].parent {
                        Some(p) => {
                            nodes[p as usize].children -= 1;
                            cur = p;
                        }
                        None => break,
                    }
                }
            }
        }

        if query.goal.contains(&nodes[id as usize].state) {
            if let Some(traj) = revalidate_path(&nodes, id, model, world, limits, gen, query)? {
                // Anytime recording: strictly improving costs only.
                if trajectories.last().is_none_or(|b: &Trajectory| traj.cost < b.cost) {
                    if time_to_first.is_none() {
                        time_to_first = Some(started.elapsed().as_secs_f64());
                        stats.iterations_to_first = stats.iterations;
                        stats.simulations_to_first = stats.simulations;
                    }
                    trajectories.push(traj);
                }
            }
        }
    }
    stats.tree_nodes = nodes.len() as u64;
    stats.active_nodes = nodes.iter().filter(|n| !n.pruned && n.active).count() as u64;
    Ok(PlanOutcome { trajectories, time_to_first, stats })
}

/// The non-lazy bundle-of-edges baseline: identical search skeleton to the
/// lazy planner with laziness disabled and pure greedy node selection.
pub fn plan_boe(
    bundle: &EdgeBundle,
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    query: &Query,
    budget: Option<Budget>,
) -> Result<PlanOutcome> {
    plan_with_options(
        bundle,
        model,
        world,
        limits,
        query,
        PlannerOptions { greedy_prob: 1.0, lazy: false },
        budget,
    )
}
