//! Exact recovery-assignment solver: for a fixed retrofit plan and coverage
//! vector, pick one recovery plan per hit location minimizing total
//! dislocation under the residual budget. Unhit locations contribute nothing
//! and take the free do-nothing plan.
//!
//! Small residual budgets are solved by a dynamic program over integer cents;
//! larger ones by best-first branch-and-bound with a fractional greedy bound.
//! Ties are broken toward the lexicographically smallest plan vector.

use crate::model::{Instance, ModelError, Money, RetrofitPlan, TornadoScenario};

/// Second-stage solution: one plan per location, its dislocation total over
/// hit locations, and the recovery spend.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RecoveryAssignment {
    pub p_of: Vec<usize>,
    pub objective: f64,
    pub spend: Money,
}

const DP_BUDGET_CAP_CENTS: i64 = 10_000_000;

pub fn solve_q(
    scenario: &TornadoScenario,
    plan: &RetrofitPlan,
    instance: &Instance,
) -> Result<RecoveryAssignment, ModelError> {
    let residual = plan.residual_budget(instance);
    if residual < Money::ZERO {
        return Err(ModelError::OverBudget {
            cost: plan.retrofit_cost(instance),
            budget: instance.budget_cents,
        });
    }
    let hit: Vec<usize> = scenario.active_indices();
    let mut p_of = vec![0usize; instance.n_locations()];
    if hit.is_empty() {
        return Ok(RecoveryAssignment { p_of, objective: 0.0, spend: Money::ZERO });
    }

    // Per hit location: candidate (cost, dislocation) per plan, with
    // unaffordable singleton plans kept — plan 0 is always free, so each
    // location has at least one option.
    let choices: Vec<(usize, Vec<(Money, f64)>)> = hit
        .iter()
        .map(|&l| {
            let s = plan.strategy(l);
            let opts = (0..instance.n_plans)
                .map(|p| (instance.c_cents[l][s][p], instance.g[l][s][p]))
                .collect();
            (l, opts)
        })
        .collect();

    let (picks, objective, spend) = if residual.0 <= DP_BUDGET_CAP_CENTS {
        solve_dp(&choices, residual)
    } else {
        solve_bb(&choices, residual)
    };
    for (k, &(l, _)) in choices.iter().enumerate() {
        p_of[l] = picks[k];
    }
    Ok(RecoveryAssignment { p_of, objective, spend })
}

/// Exact DP over the cent budget. Processes locations right-to-left so a
/// forward reconstruction can choose the lowest plan index whenever the
/// remaining optimum is unaffected, yielding the lexicographically smallest
/// optimal plan vector.
fn solve_dp(choices: &[(usize, Vec<(Money, f64)>)], residual: Money) -> (Vec<usize>, f64, Money) {
    // Only cost values that are reachable matter; cap the table at residual.
    let cap = residual.0 as usize;
    let n = choices.len();
    // best[k][b] = min dislocation over locations k.. with budget b.
    let mut layers: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    layers.push(vec![0.0; cap + 1]);
    for (_, opts) in choices.iter().rev() {
        let prev = layers.last().expect("seeded with base layer");
        let mut cur = vec![f64::INFINITY; cap + 1];
        for b in 0..=cap {
            for &(cost, g) in opts {
                let c = cost.0;
                if c >= 0 && (c as usize) <= b {
                    let v = g + prev[b - c as usize];
                    if v < cur[b] {
                        cur[b] = v;
                    }
                }
            }
        }
        layers.push(cur);
    }
    layers.reverse(); // layers[k] now corresponds to suffix starting at k

    let mut picks = vec![0usize; n];
    let mut b = cap;
    let mut spend = 0i64;
    let mut objective = 0.0f64;
    for (k, (_, opts)) in choices.iter().enumerate() {
        let target = layers[k][b];
        // Lowest plan index achieving the suffix optimum. The comparison is
        // exact: both sides are sums of the same float terms.
        let mut chosen = None;
        for (p, &(cost, g)) in opts.iter().enumerate() {
            let c = cost.0;
            if c >= 0 && (c as usize) <= b && g + layers[k + 1][b - c as usize] == target {
                chosen = Some((p, c, g));
                break;
            }
        }
        let (p, c, g) =
            chosen.expect("DP reconstruction always finds the minimizing option");
        picks[k] = p;
        b -= c as usize;
        spend += c;
        objective += g;
    }
    (picks, objective, Money(spend))
}

/// Depth-first branch-and-bound in location order, trying plans in ascending
/// index so the first incumbent at any objective value is lexicographically
/// smallest; pruning is strict-only to preserve that property.
fn solve_bb(choices: &[(usize, Vec<(Money, f64)>)], residual: Money) -> (Vec<usize>, f64, Money) {
    // Greedy fractional bound on the remaining suffix: start from everyone at
    // plan 0 and buy dislocation savings at the best rate first, allowing a
    // fractional last purchase. Relaxing one-plan-per-location to "any subset
    // of single upgrades" only loosens the bound, so it stays valid.
    let n = choices.len();
    let base_suffix: Vec<f64> = {
        let mut acc = vec![0.0; n + 1];
        for k in (0..n).rev() {
            acc[k] = acc[k + 1] + choices[k].1[0].1;
        }
        acc
    };
    // (rate, cost, saving) per affordable upgrade, per suffix — sorted by rate
    // descending once globally; bound scans suffix members.
    let mut upgrades: Vec<(usize, i64, f64)> = Vec::new();
    for (k, (_, opts)) in choices.iter().enumerate() {
        let g0 = opts[0].1;
        let mut best: Option<(i64, f64)> = None;
        for &(cost, g) in &opts[1..] {
            let save = g0 - g;
            if save > 0.0 && cost.0 > 0 {
                let better = match best {
                    None => true,
                    Some((bc, bs)) => save / cost.0 as f64 > bs / bc as f64,
                };
                if better {
                    best = Some((cost.0, save));
                }
            } else if save > 0.0 && cost.0 == 0 {
                best = Some((0, f64::INFINITY)); // free improvement
            }
        }
        if let Some((c, s)) = best {
            upgrades.push((k, c, s));
        }
    }

    let lower_bound = |k: usize, budget: i64| -> f64 {
        let mut items: Vec<(f64, i64, f64)> = upgrades
            .iter()
            .filter(|&&(i, _, _)| i >= k)
            .map(|&(_, c, s)| {
                if c == 0 {
                    (f64::INFINITY, 0, s)
                } else {
                    (s / c as f64, c, s)
                }
            })
            .collect();
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut remaining = budget as f64;
        let mut saved = 0.0;
        for (_, c, s) in items {
            if c == 0 {
                saved += s;
            } else if c as f64 <= remaining {
                remaining -= c as f64;
                saved += s;
            } else {
                saved += s * remaining / c as f64;
                break;
            }
        }
        base_suffix[k] - saved
    };

    let mut best_obj = f64::INFINITY;
    let mut best_picks = vec![0usize; n];
    let mut best_spend = 0i64;
    let mut picks = vec![0usize; n];

    fn dfs(
        k: usize,
        obj: f64,
        spent: i64,
        budget: i64,
        choices: &[(usize, Vec<(Money, f64)>)],
        lower_bound: &dyn Fn(usize, i64) -> f64,
        picks: &mut Vec<usize>,
        best_obj: &mut f64,
        best_picks: &mut Vec<usize>,
        best_spend: &mut i64,
    ) {
        if k == choices.len() {
            if obj < *best_obj {
                *best_obj = obj;
                *best_picks = picks.clone();
                *best_spend = spent;
            }
            return;
        }
        if obj + lower_bound(k, budget - spent) >= *best_obj {
            // Strict pruning only: equal-bound nodes may still hold an
            // equal-objective, lexicographically smaller completion — but the
            // first-found incumbent is already lexicographically smallest
            // because plans are tried in ascending index.
            if obj + lower_bound(k, budget - spent) > *best_obj {
                return;
            }
        }
        for (p, &(cost, g)) in choices[k].1.iter().enumerate() {
            if spent + cost.0 <= budget {
                picks[k] = p;
                dfs(
                    k + 1,
                    obj + g,
                    spent + cost.0,
                    budget,
                    choices,
                    lower_bound,
                    picks,
                    best_obj,
                    best_picks,
                    best_spend,
                );
            }
        }
        picks[k] = 0;
    }

    dfs(
        0,
        0.0,
        0,
        residual.0,
        choices,
        &lower_bound,
        &mut picks,
        &mut best_obj,
        &mut best_picks,
        &mut best_spend,
    );
    (best_picks, best_obj, Money(best_spend))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PathLength, Rect};
    use crate::model::{Instance, Location, SCHEMA_VERSION};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance_with(
        g: Vec<Vec<Vec<f64>>>,
        c: Vec<Vec<Vec<Money>>>,
        budget: Money,
    ) -> Instance {
        let n = g.len();
        let n_strategies = g[0].len();
        let n_plans = g[0][0].len();
        Instance {
            schema_version: SCHEMA_VERSION,
            locations: (0..n)
                .map(|i| Location {
                    id: format!("l{i}"),
                    x: i as f64 * 0.1,
                    y: 0.0,
                    population: 1000.0,
                    area_m2: 100.0,
                })
                .collect(),
            n_strategies,
            n_plans,
            w: vec![vec![0.0; n_strategies]; n],
            d_cents: vec![vec![Money::ZERO; n_strategies]; n],
            g,
            c_cents: c,
            budget_cents: budget,
            delta: 1.0,
            length: PathLength::Infinite,
            rect: Rect::new(-10.0, 10.0, -10.0, 10.0),
        }
    }

    fn hit_all(instance: &Instance) -> TornadoScenario {
        TornadoScenario { z: vec![true; instance.n_locations()], witness: None }
    }

    #[test]
    fn no_coverage_means_zero() {
        let inst = instance_with(
            vec![vec![vec![100.0, 40.0]]],
            vec![vec![vec![Money::ZERO, Money(10_00)]]],
            Money(10_00),
        );
        let f = RetrofitPlan::do_nothing(&inst);
        let sc = TornadoScenario::none(&inst);
        let r = solve_q(&sc, &f, &inst).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.spend, Money::ZERO);
        assert!(r.p_of.iter().all(|&p| p == 0));
    }

    #[test]
    fn affordable_improvement_taken() {
        let inst = instance_with(
            vec![vec![vec![100.0, 40.0]]],
            vec![vec![vec![Money::ZERO, Money(10_00)]]],
            Money(10_00),
        );
        let f = RetrofitPlan::do_nothing(&inst);
        let r = solve_q(&hit_all(&inst), &f, &inst).unwrap();
        assert_eq!(r.p_of, vec![1]);
        assert_eq!(r.objective, 40.0);
        assert_eq!(r.spend, Money(10_00));
    }

    #[test]
    fn unaffordable_improvement_skipped() {
        let inst = instance_with(
            vec![vec![vec![100.0, 40.0]]],
            vec![vec![vec![Money::ZERO, Money(10_01)]]],
            Money(10_00),
        );
        let f = RetrofitPlan::do_nothing(&inst);
        let r = solve_q(&hit_all(&inst), &f, &inst).unwrap();
        assert_eq!(r.p_of, vec![0]);
        assert_eq!(r.objective, 100.0);
    }

    fn random_case(rng: &mut ChaCha8Rng, n: usize) -> Instance {
        let g: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| {
                let g0 = rng.gen_range(10.0..100.0f64);
                let g1 = rng.gen_range(0.0..g0);
                vec![vec![g0, g1]]
            })
            .collect();
        let c: Vec<Vec<Vec<Money>>> = (0..n)
            .map(|_| vec![vec![Money::ZERO, Money(rng.gen_range(1..50) * 100)]])
            .collect();
        let budget = Money(rng.gen_range(0..120) * 100);
        instance_with(g, c, budget)
    }

    fn brute_force(inst: &Instance) -> (f64, Money) {
        let n = inst.n_locations();
        let mut best = (f64::INFINITY, Money::ZERO);
        for mask in 0u32..(1 << n) {
            let mut obj = 0.0;
            let mut cost = 0i64;
            for l in 0..n {
                let p = ((mask >> l) & 1) as usize;
                obj += inst.g[l][0][p];
                cost += inst.c_cents[l][0][p].0;
            }
            if cost <= inst.budget_cents.0 && obj < best.0 {
                best = (obj, Money(cost));
            }
        }
        best
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let inst = random_case(&mut rng, 8);
            let f = RetrofitPlan::do_nothing(&inst);
            let r = solve_q(&hit_all(&inst), &f, &inst).unwrap();
            let (obj, _) = brute_force(&inst);
            assert_eq!(r.objective, obj);
            assert!(r.spend <= inst.budget_cents);
        }
    }

    #[test]
    fn dp_and_bb_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let inst = random_case(&mut rng, 10);
            let f = RetrofitPlan::do_nothing(&inst);
            let sc = hit_all(&inst);
            let choices: Vec<(usize, Vec<(Money, f64)>)> = (0..inst.n_locations())
                .map(|l| {
                    (
                        l,
                        (0..inst.n_plans)
                            .map(|p| (inst.c_cents[l][0][p], inst.g[l][0][p]))
                            .collect(),
                    )
                })
                .collect();
            let dp = solve_dp(&choices, inst.budget_cents);
            let bb = solve_bb(&choices, inst.budget_cents);
            assert_eq!(dp.1, bb.1, "objectives differ");
            assert_eq!(dp.0, bb.0, "tie-broken plan vectors differ");
            let r = solve_q(&sc, &f, &inst).unwrap();
            assert_eq!(r.objective, dp.1);
        }
    }

    #[test]
    fn budget_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..30 {
            let mut inst = random_case(&mut rng, 6);
            let sc = hit_all(&inst);
            let mut prev = f64::INFINITY;
            for b in [0, 20_00, 40_00, 80_00, 160_00] {
                inst.budget_cents = Money(b);
                let f = RetrofitPlan::do_nothing(&inst);
                let r = solve_q(&sc, &f, &inst).unwrap();
                assert!(r.objective <= prev + 1e-12);
                prev = r.objective;
            }
        }
    }

    #[test]
    fn dropping_coverage_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let inst = random_case(&mut rng, 6);
            let f = RetrofitPlan::do_nothing(&inst);
            let full = solve_q(&hit_all(&inst), &f, &inst).unwrap();
            for drop in 0..inst.n_locations() {
                let mut z = vec![true; inst.n_locations()];
                z[drop] = false;
                let sc = TornadoScenario { z, witness: None };
                let r = solve_q(&sc, &f, &inst).unwrap();
                assert!(r.objective <= full.objective + 1e-12);
            }
        }
    }

    #[test]
    fn lexicographic_tie_break() {
        // Two symmetric locations; budget affords exactly one upgrade and
        // both give the same saving — the smaller location index upgrades
        // only if that yields the lexicographically smaller vector. With
        // equal objectives [1,0] and [0,1], [0,1] is smaller.
        let inst = instance_with(
            vec![
                vec![vec![50.0, 30.0]],
                vec![vec![50.0, 30.0]],
            ],
            vec![
                vec![vec![Money::ZERO, Money(10_00)]],
                vec![vec![Money::ZERO, Money(10_00)]],
            ],
            Money(10_00),
        );
        let f = RetrofitPlan::do_nothing(&inst);
        let r = solve_q(&hit_all(&inst), &f, &inst).unwrap();
        assert_eq!(r.p_of, vec![0, 1]);
        assert_eq!(r.objective, 80.0);
    }
}
