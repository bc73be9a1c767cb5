//! Shared helpers for integration tests: random instance generation and
//! brute-force reference solvers kept independent of the library internals.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tornado_plan::geometry::{segment_cover_feasible, CoverOutcome, PathLength, Rect};
use tornado_plan::model::{
    Instance, Location, Money, RetrofitPlan, TornadoScenario, SCHEMA_VERSION,
};
use tornado_plan::second_stage::solve_q;

/// Random two-strategy / two-plan instance with points scattered in a box.
/// All monetary values are whole cents so reference comparisons stay exact.
pub fn random_instance(n: usize, rng: &mut ChaCha8Rng) -> Instance {
    let points: Vec<(f64, f64)> =
        (0..n).map(|_| (rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0))).collect();
    let delta = rng.gen_range(0.3..1.2);
    let length = if rng.gen_bool(0.3) {
        PathLength::Infinite
    } else {
        PathLength::Finite(rng.gen_range(1.0..8.0))
    };
    let budget = Money(rng.gen_range(0..60) * 100);
    instance_from_parts(points, delta, length, budget, rng)
}

pub fn instance_from_parts(
    points: Vec<(f64, f64)>,
    delta: f64,
    length: PathLength,
    budget: Money,
    rng: &mut ChaCha8Rng,
) -> Instance {
    let n = points.len();
    let g: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..2)
                .map(|s| {
                    let g0 = rng.gen_range(10.0..100.0f64) / (s + 1) as f64;
                    let g1 = rng.gen_range(0.0..g0);
                    vec![g0, g1]
                })
                .collect()
        })
        .collect();
    let c: Vec<Vec<Vec<Money>>> = (0..n)
        .map(|_| (0..2).map(|_| vec![Money::ZERO, Money(rng.gen_range(1..40) * 100)]).collect())
        .collect();
    let d: Vec<Vec<Money>> =
        (0..n).map(|_| vec![Money::ZERO, Money(rng.gen_range(1..40) * 100)]).collect();
    Instance {
        schema_version: SCHEMA_VERSION,
        locations: points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Location {
                id: format!("l{i}"),
                x,
                y,
                population: 200.0,
                area_m2: 100.0,
            })
            .collect(),
        n_strategies: 2,
        n_plans: 2,
        w: vec![vec![0.0; 2]; n],
        d_cents: d,
        g,
        c_cents: c,
        budget_cents: budget,
        delta,
        length,
        rect: Rect::new(-10.0, 10.0, -10.0, 10.0),
    }
}

/// All realizable coverage scenarios of an instance, found by enumerating
/// coverage vectors and keeping those the geometry check certifies.
pub fn realizable_scenarios(instance: &Instance) -> Vec<TornadoScenario> {
    let n = instance.n_locations();
    (0u32..(1 << n))
        .filter_map(|mask| {
            let z: Vec<bool> = (0..n).map(|l| mask >> l & 1 == 1).collect();
            TornadoScenario::new(z, instance).ok()
        })
        .collect()
}

/// Worst-case second-stage value by full enumeration of coverage vectors.
pub fn phi_oracle(plan: &RetrofitPlan, instance: &Instance) -> f64 {
    phi_over_scenarios(plan, instance, &realizable_scenarios(instance))
}

pub fn phi_over_scenarios(
    plan: &RetrofitPlan,
    instance: &Instance,
    scenarios: &[TornadoScenario],
) -> f64 {
    scenarios
        .iter()
        .map(|s| solve_q(s, plan, instance).expect("recourse solvable").objective)
        .fold(0.0, f64::max)
}

/// Full two-stage optimum by enumerating every strategy vector within budget
/// and taking the oracle worst case for each.
pub fn two_stage_oracle(instance: &Instance) -> (f64, Vec<usize>) {
    let n = instance.n_locations();
    let ns = instance.n_strategies;
    let scenarios = realizable_scenarios(instance);
    let mut best = (f64::INFINITY, vec![0; n]);
    let mut s_of = vec![0usize; n];
    loop {
        if let Ok(plan) = RetrofitPlan::new(s_of.clone(), instance) {
            let first: f64 = (0..n).map(|l| instance.w[l][plan.strategy(l)]).sum();
            let value = first + phi_over_scenarios(&plan, instance, &scenarios);
            if value < best.0 - 1e-12 {
                best = (value, s_of.clone());
            }
        }
        // Next strategy vector in mixed radix.
        let mut carry = 0;
        while carry < n {
            s_of[carry] += 1;
            if s_of[carry] < ns {
                break;
            }
            s_of[carry] = 0;
            carry += 1;
        }
        if carry == n {
            break;
        }
    }
    best
}

/// Best line-coverage count over a dense sweep of normal directions: for a
/// fixed direction the best achievable count is the largest set of center
/// projections inside a sliding window of width 2*delta.
pub fn sweep_max_stabbed(points: &[(f64, f64)], delta: f64, angles: usize) -> usize {
    let mut best = 0;
    for a in 0..angles {
        let theta = std::f64::consts::PI * a as f64 / angles as f64;
        let (nx, ny) = (theta.cos(), theta.sin());
        let mut proj: Vec<f64> = points.iter().map(|&(x, y)| nx * x + ny * y).collect();
        proj.sort_by(f64::total_cmp);
        let mut hi = 0;
        for lo in 0..proj.len() {
            while hi < proj.len() && proj[hi] - proj[lo] <= 2.0 * delta - 1e-9 {
                hi += 1;
            }
            best = best.max(hi - lo);
        }
    }
    best
}

/// True iff some infinite line lies within `delta` of all points, decided by
/// a dense sweep over normal directions (exact per direction).
pub fn sweep_line_coverable(points: &[(f64, f64)], delta: f64, angles: usize) -> bool {
    for a in 0..angles {
        let theta = std::f64::consts::PI * a as f64 / angles as f64;
        let (nx, ny) = (theta.cos(), theta.sin());
        let proj: Vec<f64> = points.iter().map(|&(x, y)| nx * x + ny * y).collect();
        let span = proj.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            - proj.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if span <= 2.0 * delta {
            return true;
        }
    }
    false
}

/// Feasibility decision for a point set as used by the oracles, mapping the
/// inconclusive status to infeasible the same way the solver does.
pub fn cover_feasible(instance: &Instance, indices: &[usize]) -> bool {
    let centers: Vec<_> = indices
        .iter()
        .map(|&l| tornado_plan::geometry::Point2D::new(instance.locations[l].x, instance.locations[l].y))
        .collect();
    matches!(
        segment_cover_feasible(&centers, instance.delta, instance.length, &instance.rect),
        CoverOutcome::Feasible(_)
    )
}
