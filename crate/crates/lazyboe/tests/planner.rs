//! Lazy search: selection math, lazy-chain realization fixtures, and
//! soundness of returned trajectories.

use lazyboe::bundle::{
    build_bundle, BundleMetadata, Edge, EdgeBundle, GenerationConfig,
};
use lazyboe::collision::{state_in_collision, Disc, WorldModel};
use lazyboe::config::RunConfig;
use lazyboe::dynamics::{Limits, RobotModel};
use lazyboe::perturbation::{annotate_bundle, PerturbationConfig};
use lazyboe::planner::{
    p_select, plan_with_options, should_terminate_lazy, Budget, GoalRegion, PlannerOptions,
    Query, RealizeFailure, Search,
};
use lazyboe::JointVector;

fn vec1(x: f64) -> JointVector {
    JointVector::from_vec(vec![x])
}

fn one_link() -> RobotModel {
    RobotModel {
        link_length: vec![1.0],
        link_mass: vec![1.0],
        com_offset: vec![0.5],
        link_inertia: vec![0.02],
        viscous_friction: vec![0.3],
        coulomb_friction: vec![0.1],
        gravity: 0.0,
    }
}

fn open_limits() -> Limits {
    Limits {
        q_min: vec![-10.0],
        q_max: vec![10.0],
        dq_min: vec![-2.0],
        dq_max: vec![2.0],
        ddq_min: vec![-1e9],
        ddq_max: vec![1e9],
        tau_min: vec![-1e9],
        tau_max: vec![1e9],
    }
}

fn empty_world() -> WorldModel {
    WorldModel { obstacles: vec![], link_radius: 0.03, collision_resolution: 0.05 }
}

/// Hand-built single-joint bundle with fully controlled edges.
fn fixture_bundle(edges: Vec<Edge>, theta: f64) -> EdgeBundle {
    let generation = GenerationConfig {
        n_edges: edges.len(),
        steps_min: 1,
        steps_max: 100,
        segment_len: 100,
        dt: 0.02,
        rng_seed: 0,
        max_accel_jump: f64::INFINITY,
        attempt_budget_factor: 100,
    };
    EdgeBundle::new(
        edges,
        theta,
        BundleMetadata {
            schema_version: 1,
            rng_seed: 0,
            robot_digest: [0; 32],
            world_digest: [0; 32],
            generation,
            annotation: None,
        },
    )
    .unwrap()
}

/// Constant-velocity 1-dof edge.
fn edge1(id: u64, q0: f64, v: f64, steps: usize) -> Edge {
    let dt = 0.02;
    Edge {
        id,
        q0: vec1(q0),
        controls: vec![vec1(v); steps],
        dt,
        qf: vec1(q0 + v * dt * steps as f64),
        p_lazy_prop: 0.5,
        p_collision: 0.0,
    }
}

fn query1(start: f64, goal: f64, radius: f64, seed: u64) -> Query {
    Query {
        start: vec1(start),
        goal: GoalRegion { center: vec1(goal), radius },
        time_budget: 1.0,
        rng_seed: seed,
    }
}

#[test]
fn p_select_formula_and_clamp() {
    let mut e = edge1(0, 0.0, 0.5, 10);
    e.p_lazy_prop = 0.5;
    e.p_collision = 0.2;
    assert!((p_select(&e) - 0.4).abs() < 1e-12);
    e.p_collision = 1.0;
    assert_eq!(p_select(&e), 0.0);
    e.p_collision = 0.0;
    e.p_lazy_prop = 1.0;
    assert_eq!(p_select(&e), 1.0);
}

#[test]
fn lazy_termination_rule() {
    let goal = GoalRegion { center: vec1(5.0), radius: 0.1 };
    // h got worse: terminate.
    assert!(should_terminate_lazy(&[1.0, 1.2], &vec1(0.0), &goal));
    // h improving and not at goal: continue.
    assert!(!should_terminate_lazy(&[1.2, 1.0], &vec1(0.0), &goal));
    assert!(!should_terminate_lazy(&[1.0], &vec1(0.0), &goal));
    // At the goal: terminate regardless of the h trend.
    assert!(should_terminate_lazy(&[1.2, 1.0], &vec1(4.95), &goal));
}

#[test]
fn realization_is_translation_invariant() {
    // Edge from 0 to 0.5; query starts at 0.1. The realized state is the
    // stored endpoint shifted by exactly the start offset.
    let bundle = fixture_bundle(vec![edge1(0, 0.0, 0.5, 50)], 0.35);
    let model = one_link();
    let world = empty_world();
    let limits = open_limits();
    let query = query1(0.1, 5.0, 0.1, 1);
    let mut search =
        Search::new(&bundle, &model, &world, &limits, &query, PlannerOptions::default())
            .unwrap();
    let child = search.attach_lazy_edge(search.root(), 0);
    assert!(search.node_is_lazy(child));
    assert_eq!(search.stats.lazy_attachments, 1);

    let out = search.realize_chain(child).unwrap();
    assert_eq!(out.failure, None);
    assert_eq!(out.realized, vec![child]);
    assert!(!search.node_is_lazy(child));
    assert!(search.node_is_alive(child));
    assert!((search.node_state(child)[0] - 0.6).abs() < 1e-9);
    assert!((search.node_cost(child) - 0.5).abs() < 1e-9);
    assert_eq!(search.stats.realizations, 1);
    assert_eq!(search.stats.simulations, 1);
}

#[test]
fn chained_realization_is_anchor_first() {
    // Two stacked edges: 0 -> 0.5 -> 1.0, start offset 0.1. Both nodes must
    // realize, each shifted by the offset.
    let bundle =
        fixture_bundle(vec![edge1(0, 0.0, 0.5, 50), edge1(1, 0.5, 0.5, 50)], 0.35);
    let model = one_link();
    let world = empty_world();
    let limits = open_limits();
    let query = query1(0.1, 5.0, 0.1, 1);
    let mut search =
        Search::new(&bundle, &model, &world, &limits, &query, PlannerOptions::default())
            .unwrap();
    let a = search.attach_lazy_edge(search.root(), 0);
    let b = search.attach_lazy_edge(a, 1);
    let out = search.realize_chain(b).unwrap();
    assert_eq!(out.failure, None);
    assert_eq!(out.realized, vec![a, b]);
    assert!((search.node_state(a)[0] - 0.6).abs() < 1e-9);
    assert!((search.node_state(b)[0] - 1.1).abs() < 1e-9);
}

#[test]
fn realization_truncates_on_limit_violation() {
    // Tight q_max: the shifted rollout leaves the limits, so realization
    // fails and the subtree dies.
    let bundle = fixture_bundle(vec![edge1(0, 0.0, 0.5, 50)], 0.35);
    let model = one_link();
    let world = empty_world();
    let mut limits = open_limits();
    limits.q_max = vec![0.55];
    let query = query1(0.1, 5.0, 0.1, 1);
    let mut search =
        Search::new(&bundle, &model, &world, &limits, &query, PlannerOptions::default())
            .unwrap();
    let child = search.attach_lazy_edge(search.root(), 0);
    let out = search.realize_chain(child).unwrap();
    assert_eq!(out.failure, Some(RealizeFailure::LimitViolation));
    assert!(out.realized.is_empty());
    assert!(!search.node_is_alive(child));
    assert_eq!(search.stats.realize_failures, 1);
}

#[test]
fn realization_truncates_on_collision() {
    // Obstacle at link angle ~0.55 rad: the shifted sweep 0.1 -> 0.6 crosses
    // it although the stored sweep 0.0 -> 0.5 does not.
    let bundle = fixture_bundle(vec![edge1(0, 0.0, 0.5, 50)], 0.35);
    let model = one_link();
    let world = WorldModel {
        obstacles: vec![Disc { center: [0.55f64.cos(), 0.55f64.sin()], radius: 0.01 }],
        link_radius: 0.02,
        collision_resolution: 0.01,
    };
    let limits = open_limits();
    assert!(!lazyboe::collision::rollout_in_collision(
        &model,
        &world,
        &[vec1(0.0), vec1(0.5)]
    )
    .unwrap());
    let query = query1(0.1, 5.0, 0.1, 1);
    let mut search =
        Search::new(&bundle, &model, &world, &limits, &query, PlannerOptions::default())
            .unwrap();
    let child = search.attach_lazy_edge(search.root(), 0);
    let out = search.realize_chain(child).unwrap();
    assert_eq!(out.failure, Some(RealizeFailure::Collision));
    assert!(!search.node_is_alive(child));
}

#[test]
fn goal_chain_records_a_revalidated_solution() {
    let bundle = fixture_bundle(vec![edge1(0, 0.0, 0.5, 50)], 0.35);
    let model = one_link();
    let world = empty_world();
    let limits = open_limits();
    let query = query1(0.1, 0.6, 0.05, 1);
    let mut search =
        Search::new(&bundle, &model, &world, &limits, &query, PlannerOptions::default())
            .unwrap();
    let child = search.attach_lazy_edge(search.root(), 0);
    search.realize_chain(child).unwrap();
    assert_eq!(search.solutions().len(), 1);
    let traj = &search.solutions()[0];
    assert!((traj.cost - 0.5).abs() < 1e-9);
    assert!((traj.waypoints.first().unwrap().q[0] - 0.1).abs() < 1e-12);
    assert!((traj.waypoints.last().unwrap().q[0] - 0.6).abs() < 1e-9);
}

#[test]
fn trivial_query_yields_zero_cost_solution() {
    let bundle = fixture_bundle(vec![edge1(0, 0.0, 0.5, 10)], 0.35);
    let model = one_link();
    let world = empty_world();
    let limits = open_limits();
    let query = query1(0.0, 0.0, 0.1, 1);
    let out = plan_with_options(
        &bundle,
        &model,
        &world,
        &limits,
        &query,
        PlannerOptions { greedy_prob: 1.0, lazy: false },
        Some(Budget::Iterations(10)),
    )
    .unwrap();
    assert_eq!(out.trajectories.len(), 1);
    assert_eq!(out.trajectories[0].cost, 0.0);
    assert!(out.time_to_first.is_some());
}

#[test]
fn invalid_queries_are_rejected() {
    let bundle = fixture_bundle(vec![edge1(0, 0.0, 0.5, 10)], 0.35);
    let model = one_link();
    let limits = open_limits();

    // Start outside the joint limits.
    let world = empty_world();
    let query = query1(20.0, 0.0, 0.1, 1);
    assert!(Search::new(&bundle, &model, &world, &limits, &query, PlannerOptions::default())
        .is_err());

    // Start in collision.
    let blocked = WorldModel {
        obstacles: vec![Disc { center: [0.5, 0.0], radius: 0.2 }],
        link_radius: 0.03,
        collision_resolution: 0.05,
    };
    let query = query1(0.0, 1.0, 0.1, 1);
    assert!(
        Search::new(&bundle, &model, &blocked, &limits, &query, PlannerOptions::default())
            .is_err()
    );

    // Lazy planning demands an annotated bundle.
    let query = query1(0.0, 1.0, 0.1, 1);
    assert!(plan_with_options(
        &bundle,
        &model,
        &world,
        &limits,
        &query,
        PlannerOptions::default(),
        Some(Budget::Iterations(10)),
    )
    .is_err());
}

#[test]
fn open_set_exhaustion_terminates_early() {
    // Empty bundle: the root has no candidates, so the search stops on its
    // own well before the iteration budget.
    let bundle = fixture_bundle(vec![], 0.35);
    let model = one_link();
    let world = empty_world();
    let limits = open_limits();
    let query = query1(0.0, 1.0, 0.1, 1);
    let out = plan_with_options(
        &bundle,
        &model,
        &world,
        &limits,
        &query,
        PlannerOptions::default(),
        Some(Budget::Iterations(1_000_000)),
    )
    .unwrap();
    assert!(out.trajectories.is_empty());
    assert!(out.stats.iterations < 10);
}

fn desk_annotated(n_edges: usize) -> (RunConfig, EdgeBundle) {
    let mut cfg = RunConfig::default_desk_scale();
    cfg.generation.n_edges = n_edges;
    let bundle = build_bundle(
        &cfg.robot,
        &cfg.world,
        &cfg.limits,
        &cfg.generation,
        cfg.theta(),
        cfg.robot_digest(),
        cfg.world_digest(),
    )
    .unwrap();
    let pc = PerturbationConfig { p: 40, theta: cfg.theta(), rng_seed: 2 };
    let (bundle, _) = annotate_bundle(bundle, &cfg.robot, &cfg.world, &cfg.limits, &pc).unwrap();
    (cfg, bundle)
}

#[test]
fn iteration_budget_runs_are_deterministic() {
    let (cfg, bundle) = desk_annotated(600);
    let query = Query {
        start: JointVector::from_vec(vec![0.3, -0.4, 0.2]),
        goal: GoalRegion {
            center: JointVector::from_vec(vec![-0.8, 0.5, -0.3]),
            radius: 0.35,
        },
        time_budget: 10.0,
        rng_seed: 77,
    };
    let run = || {
        plan_with_options(
            &bundle,
            &cfg.robot,
            &cfg.world,
            &cfg.limits,
            &query,
            PlannerOptions::default(),
            Some(Budget::Iterations(4000)),
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.trajectories.len(), b.trajectories.len());
    for (ta, tb) in a.trajectories.iter().zip(&b.trajectories) {
        assert_eq!(ta.cost, tb.cost);
        assert_eq!(ta.waypoints.len(), tb.waypoints.len());
    }
}

#[test]
fn solutions_are_sound_and_monotone() {
    // One-hop style problems: start at a stored edge origin, goal at its
    // endpoint. Each returned trajectory must start at the query start, end
    // inside the goal, be collision-free, have a consistent cost, and costs
    // must strictly improve.
    let (cfg, bundle) = desk_annotated(800);
    let mut found = 0;
    for k in 0..10 {
        let e = &bundle.edges()[k * 37];
        if state_in_collision(&cfg.robot, &cfg.world, &e.q0).unwrap() {
            continue;
        }
        let query = Query {
            start: e.q0.clone(),
            goal: GoalRegion { center: e.qf.clone(), radius: 0.3 },
            time_budget: 10.0,
            rng_seed: 1000 + k as u64,
        };
        let out = plan_with_options(
            &bundle,
            &cfg.robot,
            &cfg.world,
            &cfg.limits,
            &query,
            PlannerOptions::default(),
            Some(Budget::Iterations(20_000)),
        )
        .unwrap();
        let mut prev_cost = f64::INFINITY;
        for traj in &out.trajectories {
            found += 1;
            assert!(traj.cost < prev_cost, "anytime costs must strictly improve");
            prev_cost = traj.cost;
            let first = traj.waypoints.first().unwrap();
            let last = traj.waypoints.last().unwrap();
            assert!((&first.q - &query.start).norm() < 1e-9);
            assert!(query.goal.contains(&last.q));
            let mut arclength = 0.0;
            for w in traj.waypoints.windows(2) {
                arclength += (&w[1].q - &w[0].q).norm();
            }
            assert!((arclength - traj.cost).abs() < 1e-9);
            for w in &traj.waypoints {
                assert!(!state_in_collision(&cfg.robot, &cfg.world, &w.q).unwrap());
                for i in 0..3 {
                    assert!(w.q[i] >= cfg.limits.q_min[i] - 1e-9);
                    assert!(w.q[i] <= cfg.limits.q_max[i] + 1e-9);
                }
            }
        }
    }
    assert!(found > 0, "no solution on any of the 10 one-hop problems");
}
