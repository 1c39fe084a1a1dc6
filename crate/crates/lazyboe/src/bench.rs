//! Benchmark harness: problem generation, metric collection, significance
//! testing and report emission.
//!
//! Metrics per (planner, problem): time to initial solution, final solution
//! cost (joint-space arclength), success, and number of solutions. Central
//! tendencies are compared by median, which is more robust under the skewed
//! timing distributions these planners produce. Bundle build and annotation
//! are excluded from all timings; they are the amortized one-time cost.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rand::Rng;

use crate::baselines::{plan_rrt, plan_sst, SstConfig};
use crate::bundle::EdgeBundle;
use crate::collision::{state_in_collision, WorldModel};
use crate::config::{PlannerKind, RunConfig};
use crate::dynamics::{Limits, RobotModel};
use crate::planner::{plan_with_options, Budget, GoalRegion, PlannerOptions, Query};
use crate::stats::{mann_whitney_u, mean, median, SignificanceResult};
use crate::{rng, Error, JointVector, Result};

/// Result of one (planner, problem) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub planner: PlannerKind,
    pub problem_id: usize,
    pub seed: u64,
    pub success: bool,
    /// Seconds; absent on failure.
    pub time_to_initial_solution: Option<f64>,
    /// Arclength of the best solution; absent on failure.
    pub final_cost: Option<f64>,
    pub n_solutions: usize,
}

impl BenchmarkRecord {
    /// The record invariant: success ⇔ n_solutions ≥ 1 ⇔ time present.
    pub fn invariant_holds(&self) -> bool {
        self.success == (self.n_solutions >= 1)
            && self.success == self.time_to_initial_solution.is_some()
            && self.success == self.final_cost.is_some()
    }
}

const PROBLEM_ATTEMPT_BUDGET: usize = 10_000;

/// Generate `n` planning problems: collision-free, in-limit start and goal
/// centers with goal ≠ start. Deterministic per seed.
pub fn generate_problems(
    model: &RobotModel,
    world: &WorldModel,
    limits: &Limits,
    n: usize,
    goal_radius: f64,
    time_budget: f64,
    seed: u64,
) -> Result<Vec<Query>> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let mut rng = rng::stream(seed);
    let m = model.dof();
    let sample_free = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<JointVector> {
        for _ in 0..PROBLEM_ATTEMPT_BUDGET {
            let q = JointVector::from_fn(m, |i, _| {
                rng.random_range(limits.q_min[i]..=limits.q_max[i])
            });
            if !state_in_collision(model, world, &q)? {
                return Ok(q);
            }
        }
        Err(Error::AttemptBudgetExhausted {
            attempts: PROBLEM_ATTEMPT_BUDGET,
            diagnostics: "could not sample a collision-free state".into(),
        })
    };
    let mut problems = Vec::with_capacity(n);
    for i in 0..n {
        let start = sample_free(&mut rng)?;
        let center = loop {
            let c = sample_free(&mut rng)?;
            if c != start {
                break c;
            }
        };
        problems.push(Query {
            start,
            goal: GoalRegion { center, radius: goal_radius },
            time_budget,
            rng_seed: seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64),
        });
    }
    Ok(problems)
}

/// Dispatch one planner on one problem.
pub fn run_planner(
    kind: PlannerKind,
    bundle: &EdgeBundle,
    config: &RunConfig,
    query: &Query,
    budget: Option<Budget>,
) -> Result<crate::planner::PlanOutcome> {
    let model = &config.robot;
    let world = &config.world;
    let limits = &config.limits;
    match kind {
        PlannerKind::LazyBoe => plan_with_options(
            bundle,
            model,
            world,
            limits,
            query,
            PlannerOptions { greedy_prob: config.planner.greedy_prob, lazy: true },
            budget,
        ),
        PlannerKind::Boe => crate::baselines::plan_boe(bundle, model, world, limits, query, budget),
        PlannerKind::Rrt => plan_rrt(model, world, limits, &config.generation, query, budget),
        PlannerKind::SstHalf | PlannerKind::SstOne | PlannerKind::SstTwo => {
            let ratio = kind.sst_ratio().unwrap();
            let sst = SstConfig::from_ratio(config.theta(), ratio);
            plan_sst(model, world, limits, &config.generation, query, &sst, budget)
        }
    }
}

/// Run every planner on every problem sequentially. Panics inside a planner
/// are captured as failed records and never abort the sweep. RRT terminates
/// on its first solution by construction; the others run out the budget.
pub fn run_benchmark(
    planners: &[PlannerKind],
    problems: &[Query],
    bundle: &EdgeBundle,
    config: &RunConfig,
    budget: Option<Budget>,
) -> Vec<BenchmarkRecord> {
    let mut records = Vec::with_capacity(planners.len() * problems.len());
    for &kind in planners {
        for (problem_id, query) in problems.iter().enumerate() {
            // Distinct planner runs on the same problem get distinct seeds.
            let mut q = query.clone();
            q.rng_seed = query.rng_seed ^ ((kind as u64 + 1) << 48);
            let outcome = catch_unwind(AssertUnwindSafe(|| {
                run_planner(kind, bundle, config, &q, budget)
            }));
            let record = match outcome {
                Ok(Ok(out)) => {
                    let n_solutions = out.trajectories.len();
                    BenchmarkRecord {
                        planner: kind,
                        problem_id,
                        seed: q.rng_seed,
                        success: n_solutions >= 1,
                        time_to_initial_solution: out.time_to_first,
                        final_cost: out.best_cost(),
                        n_solutions,
                    }
                }
                // Planner error or panic: a failed record.
                _ => BenchmarkRecord {
                    planner: kind,
                    problem_id,
                    seed: q.rng_seed,
                    success: false,
                    time_to_initial_solution: None,
                    final_cost: None,
                    n_solutions: 0,
                },
            };
            records.push(record);
        }
    }
    records
}

/// The three comparison metrics taken from records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TimeToInitialSolution,
    FinalCost,
    NSolutions,
}

impl Metric {
    pub const ALL: [Metric; 3] =
        [Metric::TimeToInitialSolution, Metric::FinalCost, Metric::NSolutions];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::TimeToInitialSolution => "time_to_initial_solution",
            Metric::FinalCost => "final_cost",
            Metric::NSolutions => "n_solutions",
        }
    }

    /// Metric sample over records of one planner. Failed runs are excluded
    /// from time and cost samples; they contribute n_solutions = 0.
    pub fn sample(&self, records: &[&BenchmarkRecord]) -> Vec<f64> {
        match self {
            Metric::TimeToInitialSolution => {
                records.iter().filter_map(|r| r.time_to_initial_solution).collect()
            }
            Metric::FinalCost => records.iter().filter_map(|r| r.final_cost).collect(),
            Metric::NSolutions => records.iter().map(|r| r.n_solutions as f64).collect(),
        }
    }
}

fn by_planner(records: &[BenchmarkRecord]) -> BTreeMap<&'static str, Vec<&BenchmarkRecord>> {
    let mut map: BTreeMap<&'static str, Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.planner.as_str()).or_default().push(r);
    }
    map
}

/// One pairwise significance entry.
#[derive(Debug, Clone)]
pub struct SignificanceRow {
    pub metric: &'static str,
    pub planner_a: String,
    pub planner_b: String,
    pub result: SignificanceResult,
}

/// Mann-Whitney comparisons of the first planner against every other, per
/// metric. Pairs with an empty sample on either side are skipped.
pub fn significance_table(records: &[BenchmarkRecord]) -> Vec<SignificanceRow> {
    let groups = by_planner(records);
    let mut names: Vec<&&str> = groups.keys().collect();
    // LazyBoE first when present.
    names.sort_by_key(|n| (**n != "lazyboe", **n));
    let mut rows = Vec::new();
    let Some(&&first) = names.first() else { return rows };
    for &&other in names.iter().skip(1) {
        for metric in Metric::ALL {
            let a = metric.sample(&groups[first]);
            let b = metric.sample(&groups[other]);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            if let Ok(result) = mann_whitney_u(&a, &b) {
                rows.push(SignificanceRow {
                    metric: metric.name(),
                    planner_a: first.to_string(),
                    planner_b: other.to_string(),
                    result,
                });
            }
        }
    }
    rows
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// Raw records CSV.
pub fn records_csv(records: &[BenchmarkRecord]) -> String {
    let mut s = String::from(
        "planner,problem_id,seed,success,time_to_initial_solution,final_cost,n_solutions\n",
    );
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.planner,
            r.problem_id,
            r.seed,
            r.success,
            fmt_opt(r.time_to_initial_solution),
            fmt_opt(r.final_cost),
            r.n_solutions
        ));
    }
    s
}

/// Parse a records CSV produced by [`records_csv`].
pub fn parse_records_csv(s: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in s.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Format(format!("records csv line {}: bad field count", lineno + 1)));
        }
        let parse_opt = |f: &str| -> Result<Option<f64>> {
            if f.is_empty() {
                Ok(None)
            } else {
                f.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::Format(format!("records csv line {}: {e}", lineno + 1)))
            }
        };
        records.push(BenchmarkRecord {
            planner: fields[0].parse()?,
            problem_id: fields[1]
                .parse()
                .map_err(|e| Error::Format(format!("records csv line {}: {e}", lineno + 1)))?,
            seed: fields[2]
                .parse()
                .map_err(|e| Error::Format(format!("records csv line {}: {e}", lineno + 1)))?,
            success: fields[3] == "true",
            time_to_initial_solution: parse_opt(fields[4])?,
            final_cost: parse_opt(fields[5])?,
            n_solutions: fields[6]
                .parse()
                .map_err(|e| Error::Format(format!("records csv line {}: {e}", lineno + 1)))?,
        });
    }
    Ok(records)
}

/// Per-planner summary CSV (median and mean per metric, success rate).
pub fn summary_csv(records: &[BenchmarkRecord]) -> String {
    let groups = by_planner(records);
    let mut s = String::from(
        "planner,n_runs,success_rate,median_time,mean_time,median_cost,mean_cost,\
         median_n_solutions,mean_n_solutions\n",
    );
    for (name, recs) in &groups {
        let n = recs.len();
        let successes = recs.iter().filter(|r| r.success).count();
        let time = Metric::TimeToInitialSolution.sample(recs);
        let cost = Metric::FinalCost.sample(recs);
        let sols = Metric::NSolutions.sample(recs);
        s.push_str(&format!(
            "{},{},{:.4},{},{},{},{},{},{}\n",
            name,
            n,
            successes as f64 / n as f64,
            fmt_opt(median(&time)),
            fmt_opt(mean(&time)),
            fmt_opt(median(&cost)),
            fmt_opt(mean(&cost)),
            fmt_opt(median(&sols)),
            fmt_opt(mean(&sols)),
        ));
    }
    s
}

/// Significance table CSV.
pub fn significance_csv(rows: &[SignificanceRow]) -> String {
    let mut s = String::from("metric,planner_a,planner_b,u_statistic,p_value,marker\n");
    for row in rows {
        s.push_str(&format!(
            "{},{},{},{:.4},{:.6},{}\n",
            row.metric,
            row.planner_a,
            row.planner_b,
            row.result.u_statistic,
            row.result.p_value,
            row.result.marker
        ));
    }
    s
}

/// Static SVG box plot of one metric across planners.
pub fn boxplot_svg(records: &[BenchmarkRecord], metric: Metric) -> String {
    let groups = by_planner(records);
    let width = 120 * groups.len().max(1) + 80;
    let height = 360;
    let plot_top = 30.0;
    let plot_bottom = height as f64 - 50.0;

    let samples: Vec<(&str, Vec<f64>)> = groups
        .iter()
        .map(|(name, recs)| (*name, metric.sample(recs)))
        .collect();
    let all: Vec<f64> = samples.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let (lo, hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let (lo, hi) = if all.is_empty() || lo == hi { (0.0, 1.0f64.max(hi)) } else { (lo, hi) };
    let y = |v: f64| plot_bottom - (v - lo) / (hi - lo) * (plot_bottom - plot_top);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"10\" y=\"18\">{}</text>\n",
        metric.name()
    );
    for (i, (name, sample)) in samples.iter().enumerate() {
        let cx = 80.0 + 120.0 * i as f64 + 40.0;
        svg.push_str(&format!(
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\">{name}</text>\n",
            height - 20
        ));
        if sample.is_empty() {
            continue;
        }
        let mut v = sample.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let i0 = pos.floor() as usize;
            let frac = pos - i0 as f64;
            if i0 + 1 < v.len() { v[i0] * (1.0 - frac) + v[i0 + 1] * frac } else { v[i0] }
        };
        let (min, q1, med, q3, max) = (v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]);
        let half = 30.0;
        svg.push_str(&format!(
            "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"black\"/>\n",
            y(min),
            y(max)
        ));
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
            cx - half,
            y(q3),
            2.0 * half,
            (y(q1) - y(q3)).max(1.0)
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            cx - half,
            y(med),
            cx + half,
            y(med)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"10\" y=\"{}\" font-size=\"10\">min {lo:.3}</text>\n\
         <text x=\"10\" y=\"{}\" font-size=\"10\">max {hi:.3}</text>\n</svg>\n",
        plot_bottom, plot_top
    ));
    svg
}

/// Write records, summary, significance table and box plots into `out_dir`.
pub fn emit_report(
    records: &[BenchmarkRecord],
    significance: &[SignificanceRow],
    out_dir: &Path,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("emit_report: no records".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let write = |name: &str, content: &str| -> Result<()> {
        let mut f = std::fs::File::create(out_dir.join(name))?;
        f.write_all(content.as_bytes())?;
        Ok(())
    };
    write("records.csv", &records_csv(records))?;
    write("summary.csv", &summary_csv(records))?;
    write("significance.csv", &significance_csv(significance))?;
    write("box_time_to_initial_solution.svg", &boxplot_svg(records, Metric::TimeToInitialSolution))?;
    write("box_final_cost.svg", &boxplot_svg(records, Metric::FinalCost))?;
    write("box_n_solutions.svg", &boxplot_svg(records, Metric::NSolutions))?;
    Ok(())
}
