//! Lazy search over the annotated edge bundle.
//!
//! The search grows a tree from the query start. Each iteration picks an
//! open node (greedy by distance-to-goal with a small uniform mixture),
//! fetches bundle edges whose start states lie within θ of the node, and
//! either attaches one lazily by its stored endpoint (with probability
//! P_select) or simulates it immediately. Lazy chains are realized — real
//! simulation from the actual states — once the heuristic stops improving,
//! the chain reaches the goal region, or a real propagation is requested on
//! a lazy tip. Every returned trajectory passes an independent end-to-end
//! re-simulation.

use std::collections::BinaryHeap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{Edge, EdgeBundle};
use crate::check::{validate_rollout, RejectReason};
use crate::collision::{state_in_collision, WorldModel};
use crate::dynamics::{Limits, RobotModel};
use crate::{rng, Error, JointVector, Result};

/// Joint-space goal ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalRegion {
    pub center: JointVector,
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, q: &JointVector) -> bool {
        (q - &self.center).norm() <= self.radius
    }
}

/// One planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub start: JointVector,
    pub goal: GoalRegion,
    /// Wall-clock budget, seconds.
    pub time_budget: f64,
    pub rng_seed: u64,
}

/// Search budget. Wall-clock for benchmarking, iteration counts for
/// bit-reproducible runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Seconds(f64),
    Iterations(u64),
}

/// Timed, collision-free joint trajectory from start into the goal region.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    /// Joint-space arclength, rad.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub time: f64,
    pub q: JointVector,
    pub dq: JointVector,
}

/// Search knobs shared by LazyBoE and the non-lazy bundle search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerOptions {
    /// Probability of expanding the least-h open node; otherwise uniform.
    pub greedy_prob: f64,
    /// Enables lazy attachment by P_select. Disabled for the BoE baseline.
    pub lazy: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions { greedy_prob: 0.9, lazy: true }
    }
}

/// Counters describing one search run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub iterations: u64,
    /// Real dynamics simulations (immediate or during realization).
    pub simulations: u64,
    /// Counters frozen when the first solution was recorded.
    pub iterations_to_first: u64,
    pub simulations_to_first: u64,
    pub lazy_attachments: u64,
    pub realizations: u64,
    pub realize_failures: u64,
    /// Tree size at the end of the run.
    pub tree_nodes: u64,
    /// Nodes still part of the tree (SST: witness representatives).
    pub active_nodes: u64,
}

/// Result of an anytime run.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// Every recorded trajectory, in discovery order.
    pub trajectories: Vec<Trajectory>,
    /// Wall-clock seconds until the first recorded trajectory.
    pub time_to_first: Option<f64>,
    pub stats: SearchStats,
}

impl PlanOutcome {
    pub fn best_cost(&self) -> Option<f64> {
        self.trajectories.iter().map(|t| t.cost).fold(None, |acc, c| {
            Some(acc.map_or(c, |a: f64| a.min(c)))
        })
    }
}

/// Probability of attaching an edge lazily: (1 − P_collision) · P_lazy_prop.
pub fn p_select(edge: &Edge) -> f64 {
    ((1.0 - edge.p_collision) * edge.p_lazy_prop).clamp(0.0, 1.0)
}

/// Lazy-chain termination: the newest heuristic value exceeds its
/// predecessor, or the newest state reached the goal region.
pub fn should_terminate_lazy(h_chain: &[f64], newest: &JointVector, goal: &GoalRegion) -> bool {
    let n = h_chain.len();
    if n >= 2 && h_chain[n - 1] > h_chain[n - 2] {
        return true;
    }
    goal.contains(newest)
}

/// Why realization of a lazy chain failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealizeFailure {
    Collision,
    LimitViolation,
    TorqueViolation,
    /// Realized terminal state drifted more than θ from the stored endpoint.
    ConsistencyViolation,
}

impl From<RejectReason> for RealizeFailure {
    fn from(r: RejectReason) -> Self {
        match r {
            RejectReason::StartInCollision | RejectReason::RolloutCollision => {
                RealizeFailure::Collision
            }
            RejectReason::LimitViolation | RejectReason::ContinuityViolation => {
                RealizeFailure::LimitViolation
            }
            RejectReason::TorqueViolation => RealizeFailure::TorqueViolation,
        }
    }
}

/// Outcome of realizing a lazy chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizeOutcome {
    /// Node ids realized, anchor side first.
    pub realized: Vec<u32>,
    /// Set when the chain was truncated; `realized` then holds the nodes
    /// that survived.
    pub failure: Option<RealizeFailure>,
}

struct Node {
    state: JointVector,
    parent: Option<u32>,
    /// Incoming bundle edge.
    edge: Option<u32>,
    lazy: bool,
    alive: bool,
    cost: f64,
    h: f64,
    /// Neighbor edges not yet expanded at this node; None until first
    /// expansion.
    candidates: Option<Vec<u32>>,
    children: Vec<u32>,
    open: bool,
    /// Position in the open list while open.
    open_pos: usize,
}

#[derive(Copy, Clone)]
struct HeapEntry {
    h: f64,
    id: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse for least-h, ties by id.
        self.h
            .total_cmp(&other.h)
            .then(self.id.cmp(&other.id))
            .reverse()
    }
}

/// The LazyBoE search state. Exposed so tests can drive attachment and
/// realization directly; normal use is [`plan`].
pub struct Search<'a> {
    bundle: &'a EdgeBundle,
    model: &'a RobotModel,
    world: &'a WorldModel,
    limits: &'a Limits,
    goal: GoalRegion,
    start: JointVector,
    options: PlannerOptions,
    nodes: Vec<Node>,
    open_list: Vec<u32>,
    heap: BinaryHeap<HeapEntry>,
    rng: ChaCha8Rng,
    pub stats: SearchStats,
    solutions: Vec<Trajectory>,
    time_to_first: Option<f64>,
    started: Instant,
}

impl<'a> Search<'a> {
    pub fn new(
        bundle: &'a EdgeBundle,
        model: &'a RobotModel,
        world: &'a WorldModel,
        limits: &'a Limits,
        query: &Query,
        options: PlannerOptions,
    ) -> Result<Self> {
        if !(query.goal.radius > 0.0) {
            return Err(Error::InvalidParameter("goal radius must be positive".into()));
        }
        if !limits.q_in_limits(&query.start) {
            return Err(Error::InvalidParameter("query start violates joint limits".into()));
        }
        if state_in_collision(model, world, &query.start)? {
            return Err(Error::InvalidParameter("query start is in collision".into()));
        }
        let mut search = Search {
            bundle,
            model,
            world,
            limits,
            goal: query.goal.clone(),
            start: query.start.clone(),
            options,
            nodes: Vec::new(),
            open_list: Vec::new(),
            heap: BinaryHeap::new(),
            rng: rng::stream(query.rng_seed),
            stats: SearchStats::default(),
            solutions: Vec::new(),
            time_to_first: None,
            started: Instant::now(),
        };
        let h = (&query.start - &query.goal.center).norm();
        search.nodes.push(Node {
            state: query.start.clone(),
            parent: None,
            edge: None,
            lazy: false,
            alive: true,
            cost: 0.0,
            h,
            candidates: None,
            children: Vec::new(),
            open: false,
            open_pos: usize::MAX,
        });
        if search.goal.contains(&query.start) {
            // Degenerate query: the start already satisfies the goal.
            search.record_trivial_solution();
        } else {
            search.open(0);
        }
        Ok(search)
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn node_state(&self, id: u32) -> &JointVector {
        &self.nodes[id as usize].state
    }

    pub fn node_is_lazy(&self, id: u32) -> bool {
        self.nodes[id as usize].lazy
    }

    pub fn node_is_alive(&self, id: u32) -> bool {
        self.nodes[id as usize].alive
    }

    pub fn node_cost(&self, id: u32) -> f64 {
        self.nodes[id as usize].cost
    }

    pub fn solutions(&self) -> &[Trajectory] {
        &self.solutions
    }

    fn open(&mut self, id: u32) {
        let node = &mut self.nodes[id as usize];
        debug_assert!(!node.open);
        node.open = true;
        node.open_pos = self.open_list.len();
        let h = node.h;
        self.open_list.push(id);
        self.heap.push(HeapEntry { h, id });
    }

    fn close(&mut self, id: u32) {
        let node = &mut self.nodes[id as usize];
        if !node.open {
            return;
        }
        node.open = false;
        let pos = node.open_pos;
        node.open_pos = usize::MAX;
        self.open_list.swap_remove(pos);
        if let Some(&moved) = self.open_list.get(pos) {
            self.nodes[moved as usize].open_pos = pos;
        }
        // Heap entries are removed lazily during peeks.
    }

    fn heap_peek(&mut self) -> Option<u32> {
        while let Some(&entry) = self.heap.peek() {
            let node = &self.nodes[entry.id as usize];
            if node.alive && node.open && node.h == entry.h {
                return Some(entry.id);
            }
            self.heap.pop();
        }
        None
    }

    /// Attach `edge_id` under `parent` lazily: the child takes the stored
    /// endpoint as its state without simulation.
    pub fn attach_lazy_edge(&mut self, parent: u32, edge_id: u32) -> u32 {
        let edge = self.bundle.edge(edge_id as u64);
        let state = edge.qf.clone();
        let h = (&state - &self.goal.center).norm();
        let cost = self.nodes[parent as usize].cost + edge.arclength();
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            state,
            parent: Some(parent),
            edge: Some(edge_id),
            lazy: true,
            alive: true,
            cost,
            h,
            candidates: None,
            children: Vec::new(),
            open: false,
            open_pos: usize::MAX,
        });
        self.nodes[parent as usize].children.push(id);
        self.stats.lazy_attachments += 1;
        id
    }

    fn incoming_velocity(&self, id: u32) -> Option<&JointVector> {
        let node = &self.nodes[id as usize];
        node.edge
            .map(|e| self.bundle.edge(e as u64).controls.last().expect("edges are non-empty"))
    }

    /// Realize the lazy chain ending at `tip`: re-propagate each stored
    /// control sequence from the actual current state, anchor side first.
    /// Each realized segment must pass all three check classes and end
    /// within θ of the stored endpoint. On failure the chain is truncated at
    /// the last valid node and the failing subtree is discarded.
    pub fn realize_chain(&mut self, tip: u32) -> Result<RealizeOutcome> {
        let mut chain = Vec::new();
        let mut cur = tip;
        while self.nodes[cur as usize].lazy {
            chain.push(cur);
            cur = self.nodes[cur as usize].parent.expect("lazy node has a parent");
        }
        chain.reverse();
        self.stats.realizations += 1;

        let theta = self.bundle.theta();
        let max_jump = self.bundle.metadata().generation.max_accel_jump;
        let mut realized = Vec::new();
        let bundle = self.bundle;
        for &id in &chain {
            let parent = self.nodes[id as usize].parent.expect("chain node has a parent");
            let edge_id = self.nodes[id as usize].edge.expect("chain node has an edge");
            let edge = bundle.edge(edge_id as u64);
            let start = self.nodes[parent as usize].state.clone();
            let v_prev = self.incoming_velocity(parent).cloned();
            self.stats.simulations += 1;
            let outcome = validate_rollout(
                self.model,
                self.world,
                self.limits,
                &start,
                &edge.controls,
                edge.dt,
                max_jump,
                v_prev.as_ref(),
            )?;
            let failure = match outcome {
                Err(reason) => Some(RealizeFailure::from(reason)),
                Ok(rollout) => {
                    let terminal = rollout.terminal().clone();
                    if (&terminal - &edge.qf).norm() > theta {
                        Some(RealizeFailure::ConsistencyViolation)
                    } else {
                        let parent_cost = self.nodes[parent as usize].cost;
                        let node = &mut self.nodes[id as usize];
                        node.state = terminal;
                        node.lazy = false;
                        node.cost = parent_cost + edge.arclength();
                        node.h = (&node.state - &self.goal.center).norm();
                        let (h, open) = (node.h, node.open);
                        if open {
                            self.heap.push(HeapEntry { h, id });
                        }
                        realized.push(id);
                        if self.goal.contains(&self.nodes[id as usize].state) {
                            self.record_solution(id)?;
                            self.close(id);
                        } else if !self.nodes[id as usize].open
                            && self.nodes[id as usize].candidates.is_none()
                        {
                            // Chain tips realized on termination were never
                            // opened; they join the frontier now.
                            self.open(id);
                        }
                        None
                    }
                }
            };
            if let Some(kind) = failure {
                self.stats.realize_failures += 1;
                self.kill_subtree(id);
                return Ok(RealizeOutcome { realized, failure: Some(kind) });
            }
        }
        Ok(RealizeOutcome { realized, failure: None })
    }

    fn kill_subtree(&mut self, id: u32) {
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            self.nodes[n as usize].alive = false;
            self.close(n);
            stack.extend(self.nodes[n as usize].children.iter().copied());
        }
    }

    fn record_trivial_solution(&mut self) {
        let m = self.start.len();
        let traj = Trajectory {
            waypoints: vec![Waypoint {
                time: 0.0,
                q: self.start.clone(),
                dq: JointVector::zeros(m),
            }],
            cost: 0.0,
        };
        self.push_solution(traj);
    }

    /// Anytime recording: only strictly improving costs are kept, so the
    /// solution sequence is monotone and stays small.
    fn push_solution(&mut self, traj: Trajectory) {
        if let Some(best) = self.solutions.last() {
            if traj.cost >= best.cost {
                return;
            }
        }
        if self.time_to_first.is_none() {
            self.time_to_first = Some(self.started.elapsed().as_secs_f64());
            self.stats.iterations_to_first = self.stats.iterations;
            self.stats.simulations_to_first = self.stats.simulations;
        }
        self.solutions.push(traj);
    }

    /// Independent end-to-end revalidation of the path to `id`, recording a
    /// trajectory when it passes.
    fn record_solution(&mut self, id: u32) -> Result<()> {
        let mut edge_ids = Vec::new();
        let mut cur = id;
        while let Some(parent) = self.nodes[cur as usize].parent {
            edge_ids.push(self.nodes[cur as usize].edge.expect("non-root node has an edge"));
            cur = parent;
        }
        edge_ids.reverse();
        let mut controls = Vec::new();
        let mut dt = None;
        for e in &edge_ids {
            let edge = self.bundle.edge(*e as u64);
            controls.extend(edge.controls.iter().cloned());
            dt = Some(edge.dt);
        }
        let dt = dt.expect("solution path has at least one edge");
        let max_jump = self.bundle.metadata().generation.max_accel_jump;
        let outcome = validate_rollout(
            self.model,
            self.world,
            self.limits,
            &self.start,
            &controls,
            dt,
            max_jump,
            None,
        )?;
        if let Ok(rollout) = outcome {
            if self.goal.contains(rollout.terminal()) {
                self.push_solution(trajectory_from_rollout(&rollout.states, &controls, dt));
            }
        }
        Ok(())
    }

    fn candidates_initialized(&mut self, id: u32) -> bool {
        if self.nodes[id as usize].candidates.is_none() {
            let neighbors: Vec<u32> = self
                .bundle
                .neighbors_at_theta(&self.nodes[id as usize].state)
                .into_iter()
                .map(|e| e as u32)
                .collect();
            self.nodes[id as usize].candidates = Some(neighbors);
        }
        !self.nodes[id as usize].candidates.as_ref().unwrap().is_empty()
    }

    /// One expansion step. Returns false when the open set is exhausted.
    pub fn step(&mut self) -> Result<bool> {
        self.stats.iterations += 1;
        // Expansion node: greedy by h with a uniform mixture.
        let use_greedy = self.rng.random::<f64>() < self.options.greedy_prob;
        let node_id = if use_greedy {
            match self.heap_peek() {
                Some(id) => id,
                None => return Ok(false),
            }
        } else {
            if self.open_list.is_empty() {
                return Ok(false);
            }
            let idx = self.rng.random_range(0..self.open_list.len());
            self.open_list[idx]
        };

        if !self.candidates_initialized(node_id) {
            self.close(node_id);
            return Ok(true);
        }
        let edge_id = {
            let cands = self.nodes[node_id as usize].candidates.as_mut().unwrap();
            let idx = self.rng.random_range(0..cands.len());
            let e = cands.swap_remove(idx);
            if cands.is_empty() {
                self.close(node_id);
            }
            e
        };

        let bundle = self.bundle;
        let edge = bundle.edge(edge_id as u64);
        let ps = if self.options.lazy { p_select(edge) } else { 0.0 };
        let lazy_draw = self.rng.random::<f64>();

        if lazy_draw < ps {
            let parent_h = self.nodes[node_id as usize].h;
            let child = self.attach_lazy_edge(node_id, edge_id);
            let child_h = self.nodes[child as usize].h;
            let child_state = self.nodes[child as usize].state.clone();
            if should_terminate_lazy(&[parent_h, child_h], &child_state, &self.goal) {
                self.realize_chain(child)?;
            } else {
                self.open(child);
            }
        } else {
            // Real propagation requested; a lazy tip is realized first.
            if self.nodes[node_id as usize].lazy {
                self.realize_chain(node_id)?;
                if !self.nodes[node_id as usize].alive || self.nodes[node_id as usize].lazy {
                    return Ok(true);
                }
            }
            let start = self.nodes[node_id as usize].state.clone();
            let v_prev = self.incoming_velocity(node_id).cloned();
            let max_jump = self.bundle.metadata().generation.max_accel_jump;
            self.stats.simulations += 1;
            let outcome = validate_rollout(
                self.model,
                self.world,
                self.limits,
                &start,
                &edge.controls,
                edge.dt,
                max_jump,
                v_prev.as_ref(),
            )?;
            if let Ok(rollout) = outcome {
                let state = rollout.terminal().clone();
                let h = (&state - &self.goal.center).norm();
                let cost = self.nodes[node_id as usize].cost + edge.arclength();
                let id = self.nodes.len() as u32;
                self.nodes.push(Node {
                    state,
                    parent: Some(node_id),
                    edge: Some(edge_id),
                    lazy: false,
                    alive: true,
                    cost,
                    h,
                    candidates: None,
                    children: Vec::new(),
                    open: false,
                    open_pos: usize::MAX,
                });
                self.nodes[node_id as usize].children.push(id);
                if self.goal.contains(&self.nodes[id as usize].state) {
                    self.record_solution(id)?;
                } else {
                    self.open(id);
                }
            }
            // A failed edge is dropped at this node only; other nodes may
            // still select it.
        }
        Ok(true)
    }

    /// Run until the budget expires or the open set is exhausted.
    pub fn run(&mut self, budget: Budget) -> Result<PlanOutcome> {
        self.started = Instant::now();
        loop {
            match budget {
                Budget::Seconds(s) => {
                    if self.started.elapsed().as_secs_f64() >= s {
                        break;
                    }
                }
                Budget::Iterations(n) => {
                    if self.stats.iterations >= n {
                        break;
                    }
                }
            }
            if !self.step()? {
                break;
            }
        }
        self.stats.tree_nodes = self.nodes.len() as u64;
        self.stats.active_nodes = self.nodes.iter().filter(|n| n.alive).count() as u64;
        Ok(PlanOutcome {
            trajectories: self.solutions.clone(),
            time_to_first: self.time_to_first,
            stats: self.stats,
        })
    }
}

/// Build a timed trajectory from a validated rollout.
pub(crate) fn trajectory_from_rollout(
    states: &[JointVector],
    controls: &[JointVector],
    dt: f64,
) -> Trajectory {
    let m = states[0].len();
    let mut waypoints = Vec::with_capacity(states.len());
    let mut cost = 0.0;
    for (k, q) in states.iter().enumerate() {
        if k > 0 {
            cost += (q - &states[k - 1]).norm();
        }
        let dq = controls.get(k).cloned().unwrap_or_else(|| JointVector::zeros(m));
        waypoints.push(Waypoint { time: k as f64 * dt, q: q.clone(), dq });
    }
    Trajectory { waypoints, cost }
}

/// Anytime LazyBoE planning over an annotated bundle.
pub fn plan(
    bundle: &EdgeBundle,
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    query: &Query,
) -> Result<PlanOutcome> {
    plan_with_options(bundle, model, world, limits, query, PlannerOptions::default(), None)
}

/// LazyBoE with explicit options and an optional budget override.
pub fn plan_with_options(
    bundle: &EdgeBundle,
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    query: &Query,
    options: PlannerOptions,
    budget: Option<Budget>,
) -> Result<PlanOutcome> {
    if options.lazy && !bundle.is_empty() && !bundle.is_annotated() {
        return Err(Error::InvalidParameter(
            "lazy planning requires an annotated bundle".into(),
        ));
    }
    let mut search = Search::new(bundle, model, world, limits, query, options)?;
    search.run(budget.unwrap_or(Budget::Seconds(query.time_budget)))
}
