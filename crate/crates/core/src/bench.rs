//! Policy comparison harness: random retrofit baselines, random tornado
//! simulation against a fixed plan, and budget sweeps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ccg::{self, CcgError, CcgOptions};
use crate::dbc::{solve_phi, PhiOptions};
use crate::geometry::{PathLength, Point2D, SegmentPath};
use crate::model::{Instance, ModelError, Money, RetrofitPlan, TornadoScenario};
use crate::second_stage::solve_q;

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub average: f64,
    pub maximum: f64,
    pub minimum: f64,
    pub std_dev: f64,
    pub replications: usize,
    pub seed: u64,
}

impl SimulationSummary {
    pub fn csv_header() -> &'static str {
        "average,maximum,minimum,std_dev,replications,seed"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.average, self.maximum, self.minimum, self.std_dev, self.replications, self.seed
        )
    }

    fn from_samples(samples: &[f64], seed: u64) -> SimulationSummary {
        assert!(!samples.is_empty());
        let n = samples.len() as f64;
        let average = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - average).powi(2)).sum::<f64>() / n;
        SimulationSummary {
            average,
            maximum: samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            minimum: samples.iter().cloned().fold(f64::INFINITY, f64::min),
            std_dev: var.sqrt(),
            replications: samples.len(),
            seed,
        }
    }
}

/// Random baseline: draw (location, strategy) pairs uniformly and accept each
/// if it still fits in the retrofit share of the budget; unaffordable draws
/// are skipped, with an attempt cap to guarantee termination.
pub fn random_retrofit(instance: &Instance, budget_fraction: f64, seed: u64) -> RetrofitPlan {
    assert!((0.0..=1.0).contains(&budget_fraction));
    let allot = Money((instance.budget_cents.0 as f64 * budget_fraction).floor() as i64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nl = instance.n_locations();
    let mut s_of = vec![0usize; nl];
    let mut spent = Money::ZERO;
    if instance.n_strategies > 1 {
        let attempts = 50 * nl.max(1);
        for _ in 0..attempts {
            let l = rng.gen_range(0..nl);
            let s = rng.gen_range(1..instance.n_strategies);
            let delta_cost = instance.d_cents[l][s] - instance.d_cents[l][s_of[l]];
            if spent + delta_cost <= allot {
                spent = spent + delta_cost;
                s_of[l] = s;
            }
        }
    }
    RetrofitPlan::new(s_of, instance).expect("stays within the full budget by construction")
}

/// Worst-case value of a plan: first-stage dislocation plus the exact
/// worst-tornado second stage.
pub fn evaluate_worst_case(
    plan: &RetrofitPlan,
    instance: &Instance,
    phi_options: &PhiOptions,
) -> Result<f64, ModelError> {
    let sub = solve_phi(plan, instance, phi_options)?;
    Ok(plan.first_stage_dislocation(instance) + sub.phi)
}

/// How the simulated tornado length is drawn when the instance length is
/// finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthSampling {
    /// Always the maximum length.
    Fixed,
    /// Uniform between zero and the maximum.
    Uniform,
}

/// Samples `n` random tornado segments (uniform first endpoint inside the
/// rectangle, uniform direction), derives coverage by the distance rule, and
/// evaluates the plan's recovery response to each.
pub fn simulate_random_tornadoes(
    plan: &RetrofitPlan,
    instance: &Instance,
    n: usize,
    seed: u64,
    sampling: LengthSampling,
) -> Result<SimulationSummary, ModelError> {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_cost = plan.first_stage_dislocation(instance);
    let rect = &instance.rect;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let e0 = Point2D::new(
            rng.gen_range(rect.x_min..=rect.x_max),
            rng.gen_range(rect.y_min..=rect.y_max),
        );
        let max_len = match instance.length {
            PathLength::Finite(e) => e,
            // Unbounded instances get a diagonal-length path: anything
            // longer cannot cover more of the rectangle.
            PathLength::Infinite => rect.diagonal(),
        };
        let len = match sampling {
            LengthSampling::Fixed => max_len,
            LengthSampling::Uniform => rng.gen_range(0.0..=max_len),
        };
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        let e1 = rect.clamp(&Point2D::new(e0.x + len * ang.cos(), e0.y + len * ang.sin()));
        let scenario = TornadoScenario::from_segment(SegmentPath::new(e0, e1), instance);
        let q = solve_q(&scenario, plan, instance)?;
        samples.push(w_cost + q.objective);
    }
    Ok(SimulationSummary::from_samples(&samples, seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub budget_cents: Money,
    pub v: f64,
}

/// Solves the full problem at each budget; the optimal worst case can only
/// improve as the budget grows, which is asserted.
pub fn budget_sweep(
    instance: &Instance,
    budgets: &[Money],
    options: &CcgOptions,
) -> Result<Vec<SweepPoint>, CcgError> {
    let mut out = Vec::with_capacity(budgets.len());
    let mut last: Option<(Money, f64)> = None;
    for &budget in budgets {
        if let Some((prev_b, _)) = last {
            assert!(budget >= prev_b, "budgets must be ascending");
        }
        let mut inst = instance.clone();
        inst.budget_cents = budget;
        let report = ccg::solve(&inst, options)?;
        if let Some((_, prev_v)) = last {
            assert!(
                report.v <= prev_v + crate::ccg::GAP_EPS,
                "optimal value increased with budget: {} -> {}",
                prev_v,
                report.v
            );
        }
        last = Some((budget, report.v));
        out.push(SweepPoint { budget_cents: budget, v: report.v });
    }
    Ok(out)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("budget_cents,v\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.budget_cents.0, p.v));
    }
    out
}
