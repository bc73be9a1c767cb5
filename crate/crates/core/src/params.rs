//! Parameter pipeline: turns damage-state probabilities, repair-time
//! distributions, and building-block data into the dislocation and cost
//! tensors of a solvable instance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal};
use thiserror::Error;

use crate::geometry::{PathLength, Point2D, Rect};
use crate::model::{Instance, Location, Money, SCHEMA_VERSION};

/// Default replacement cost rate (USD per square meter).
pub const DEFAULT_ALPHA_USD_PER_M2: f64 = 862.0;
/// Default damage-cost fractions for Minor, Moderate, Extensive, Complete.
pub const DEFAULT_DAMAGE_FRACTIONS: [f64; 4] = [0.005, 0.023, 0.117, 0.234];

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("strategy {strategy}: damage probabilities sum to {sum}, not 1")]
    ProbSum { strategy: usize, sum: f64 },
    #[error("damage fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("damage-state count mismatch: {what} has {got}, expected {want}")]
    StateCount { what: &'static str, got: usize, want: usize },
    #[error("invalid lognormal parameters (median {median}, log-std {log_std})")]
    BadLognormal { median: f64, log_std: f64 },
    #[error("do-nothing multiplier {mu} puts dislocation outside [{lo}, {hi}]")]
    BadMultiplier { mu: f64, lo: f64, hi: f64 },
    #[error("k-means needs k <= {blocks} blocks, got k = {k}")]
    TooManyClusters { k: usize, blocks: usize },
    #[error("instance assembly: {0}")]
    Assembly(String),
}

/// Repair-time distribution of one damage state: lognormal with the given
/// median (days) and log-standard-deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairTime {
    pub median_days: f64,
    pub log_std: f64,
}

impl RepairTime {
    /// Probability that the repair is still unfinished after `horizon` days.
    pub fn prob_unfinished(&self, horizon: f64) -> Result<f64, ParamsError> {
        if !(self.median_days > 0.0) || !(self.log_std > 0.0) {
            return Err(ParamsError::BadLognormal {
                median: self.median_days,
                log_std: self.log_std,
            });
        }
        let dist = LogNormal::new(self.median_days.ln(), self.log_std).map_err(|_| {
            ParamsError::BadLognormal { median: self.median_days, log_std: self.log_std }
        })?;
        Ok(1.0 - dist.cdf(horizon))
    }
}

/// Per-strategy damage distributions plus the shared repair-time and cost
/// parameters. Damage states are ordered lightest to heaviest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragilityConfig {
    pub damage_states: Vec<String>,
    /// `damage_probs[s][d]` = probability of damage state d under strategy s.
    pub damage_probs: Vec<Vec<f64>>,
    pub repair_times: Vec<RepairTime>,
    pub horizon_days: f64,
    pub alpha_usd_per_m2: f64,
    pub damage_fractions: Vec<f64>,
    /// Retrofit cost per square meter for each strategy (0 for do-nothing).
    pub retrofit_cost_usd_per_m2: Vec<f64>,
}

impl FragilityConfig {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let nd = self.damage_states.len();
        if self.repair_times.len() != nd {
            return Err(ParamsError::StateCount {
                what: "repair_times",
                got: self.repair_times.len(),
                want: nd,
            });
        }
        if self.damage_fractions.len() != nd {
            return Err(ParamsError::StateCount {
                what: "damage_fractions",
                got: self.damage_fractions.len(),
                want: nd,
            });
        }
        if !(self.horizon_days > 0.0) {
            return Err(ParamsError::BadHorizon(self.horizon_days));
        }
        for &r in &self.damage_fractions {
            if !(0.0..=1.0).contains(&r) {
                return Err(ParamsError::BadFraction(r));
            }
        }
        for (s, probs) in self.damage_probs.iter().enumerate() {
            if probs.len() != nd {
                return Err(ParamsError::StateCount {
                    what: "damage_probs",
                    got: probs.len(),
                    want: nd,
                });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ParamsError::ProbSum { strategy: s, sum });
            }
        }
        Ok(())
    }

    pub fn n_strategies(&self) -> usize {
        self.damage_probs.len()
    }

    pub fn from_json(text: &str) -> Result<FragilityConfig, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Expected dislocation after recovery for one strategy: the population times
/// the chance that, conditioned on the realized damage state, the repair is
/// still unfinished at the horizon.
pub fn dislocation_after_recovery(
    cfg: &FragilityConfig,
    strategy: usize,
    population: f64,
) -> Result<f64, ParamsError> {
    cfg.validate()?;
    let mut p_dislocated = 0.0;
    for (d, &p_damage) in cfg.damage_probs[strategy].iter().enumerate() {
        p_dislocated += p_damage * cfg.repair_times[d].prob_unfinished(cfg.horizon_days)?;
    }
    Ok(population * p_dislocated)
}

/// Expected recovery cost for one strategy: replacement rate times area times
/// the damage-weighted cost fraction.
pub fn recovery_cost(
    cfg: &FragilityConfig,
    strategy: usize,
    area_m2: f64,
) -> Result<f64, ParamsError> {
    cfg.validate()?;
    let frac: f64 = cfg.damage_probs[strategy]
        .iter()
        .zip(&cfg.damage_fractions)
        .map(|(&p, &r)| p * r)
        .sum();
    Ok(cfg.alpha_usd_per_m2 * area_m2 * frac)
}

/// Dislocation when no recovery is performed, interpolated between the
/// after-recovery value and the full population. `mu = None` takes the
/// midpoint; an explicit multiplier is applied as `mu * g1` and must land in
/// `[g1, population]`.
pub fn do_nothing_dislocation(
    g1: f64,
    population: f64,
    mu: Option<f64>,
) -> Result<f64, ParamsError> {
    assert!(g1 <= population + 1e-9, "recovered dislocation exceeds population");
    match mu {
        None => Ok(0.5 * (g1 + population)),
        Some(mu) => {
            let g0 = mu * g1;
            if g0 < g1 - 1e-9 || g0 > population + 1e-9 {
                return Err(ParamsError::BadMultiplier { mu, lo: g1, hi: population });
            }
            Ok(g0.clamp(g1, population))
        }
    }
}

/// Raw building block before clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBlock {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub population: f64,
    pub area_m2: f64,
}

/// Lloyd's k-means on block coordinates with population-weighted centroids;
/// clusters aggregate population and area. Empty clusters are re-seeded at
/// the block farthest from its centroid. Deterministic for a fixed seed.
pub fn cluster_blocks(
    blocks: &[RawBlock],
    k: usize,
    seed: u64,
) -> Result<Vec<Location>, ParamsError> {
    if k == 0 || k > blocks.len() {
        return Err(ParamsError::TooManyClusters { k, blocks: blocks.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point2D> = blocks.iter().map(|b| Point2D::new(b.x, b.y)).collect();

    // Seed centers with distinct random blocks.
    let mut idx: Vec<usize> = (0..blocks.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut centers: Vec<Point2D> = idx[..k].iter().map(|&i| pts[i]).collect();
    let mut assign = vec![0usize; blocks.len()];

    for _round in 0..200 {
        let mut changed = false;
        for (i, p) in pts.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| p.dist(&centers[a]).total_cmp(&p.dist(&centers[b])))
                .expect("k >= 1");
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut weight = vec![0.0f64; k];
        let mut sx = vec![0.0f64; k];
        let mut sy = vec![0.0f64; k];
        for (i, b) in blocks.iter().enumerate() {
            // Weight by population, with a floor so empty blocks still count.
            let w = b.population.max(1e-9);
            weight[assign[i]] += w;
            sx[assign[i]] += w * b.x;
            sy[assign[i]] += w * b.y;
        }
        for c in 0..k {
            if weight[c] > 0.0 {
                centers[c] = Point2D::new(sx[c] / weight[c], sy[c] / weight[c]);
            } else {
                // Re-seed at the block farthest from its current centroid.
                let far = (0..blocks.len())
                    .max_by(|&a, &b| {
                        pts[a]
                            .dist(&centers[assign[a]])
                            .total_cmp(&pts[b].dist(&centers[assign[b]]))
                    })
                    .expect("blocks nonempty");
                centers[c] = pts[far];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..blocks.len()).filter(|&i| assign[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let population: f64 = members.iter().map(|&i| blocks[i].population).sum();
        let area: f64 = members.iter().map(|&i| blocks[i].area_m2).sum();
        out.push(Location {
            id: format!("cluster{c}"),
            x: centers[c].x,
            y: centers[c].y,
            population,
            area_m2: area,
        });
    }
    Ok(out)
}

/// Within-cluster sum of squared distances for a clustering of `blocks`.
pub fn clustering_sse(blocks: &[RawBlock], locations: &[Location]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let p = Point2D::new(b.x, b.y);
            locations
                .iter()
                .map(|l| p.dist(&Point2D::new(l.x, l.y)).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Assembles a full instance from clustered locations and a fragility
/// config: two-plan recovery (do-nothing vs full recovery), per-strategy
/// dislocation/cost tensors, zero first-stage dislocation.
pub fn assemble_instance(
    locations: Vec<Location>,
    cfg: &FragilityConfig,
    budget: Money,
    delta: f64,
    length: PathLength,
    do_nothing_mu: Option<f64>,
) -> Result<Instance, ParamsError> {
    cfg.validate()?;
    let ns = cfg.n_strategies();
    if cfg.retrofit_cost_usd_per_m2.len() != ns {
        return Err(ParamsError::StateCount {
            what: "retrofit_cost_usd_per_m2",
            got: cfg.retrofit_cost_usd_per_m2.len(),
            want: ns,
        });
    }
    if locations.is_empty() {
        return Err(ParamsError::Assembly("no locations".into()));
    }
    let n = locations.len();
    let mut g = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for loc in &locations {
        let mut g_l = Vec::with_capacity(ns);
        let mut c_l = Vec::with_capacity(ns);
        let mut d_l = Vec::with_capacity(ns);
        for s in 0..ns {
            let g1 = dislocation_after_recovery(cfg, s, loc.population)?;
            let g0 = do_nothing_dislocation(g1, loc.population, do_nothing_mu)?;
            let c1 = recovery_cost(cfg, s, loc.area_m2)?;
            g_l.push(vec![g0, g1]);
            c_l.push(vec![Money::ZERO, Money::from_dollars(c1)]);
            d_l.push(if s == 0 {
                Money::ZERO
            } else {
                Money::from_dollars(cfg.retrofit_cost_usd_per_m2[s] * loc.area_m2)
            });
        }
        g.push(g_l);
        c.push(c_l);
        d.push(d_l);
    }

    // Rectangle: bounding box of the locations padded by delta plus a margin
    // so witness endpoints have room.
    let pad = delta + 1.0;
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for l in &locations {
        x0 = x0.min(l.x);
        x1 = x1.max(l.x);
        y0 = y0.min(l.y);
        y1 = y1.max(l.y);
    }
    let rect = Rect::new(x0 - pad, x1 + pad, y0 - pad, y1 + pad);

    Ok(Instance {
        schema_version: SCHEMA_VERSION,
        locations,
        n_strategies: ns,
        n_plans: 2,
        w: vec![vec![0.0; ns]; n],
        d_cents: d,
        g,
        c_cents: c,
        budget_cents: budget,
        delta,
        length,
        rect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_cfg(p_heavy: f64) -> FragilityConfig {
        FragilityConfig {
            damage_states: vec!["Light".into(), "Heavy".into()],
            damage_probs: vec![vec![1.0 - p_heavy, p_heavy]],
            repair_times: vec![
                RepairTime { median_days: 1.0, log_std: 0.1 },
                RepairTime { median_days: 10_000.0, log_std: 0.1 },
            ],
            horizon_days: 90.0,
            alpha_usd_per_m2: DEFAULT_ALPHA_USD_PER_M2,
            damage_fractions: vec![0.01, 0.5],
            retrofit_cost_usd_per_m2: vec![0.0],
        }
    }

    #[test]
    fn never_finished_means_full_dislocation() {
        let cfg = two_state_cfg(1.0);
        let g = dislocation_after_recovery(&cfg, 0, 250.0).unwrap();
        assert!((g - 250.0).abs() < 1e-6);
    }

    #[test]
    fn instant_repair_means_zero() {
        let cfg = two_state_cfg(0.0);
        let g = dislocation_after_recovery(&cfg, 0, 250.0).unwrap();
        assert!(g < 1e-6);
    }

    #[test]
    fn half_half_mix_is_convex_combination() {
        // With unfinished probabilities 0.2 and 0.8 at equal damage mass the
        // result is 0.5 of the population. Pick medians hitting those
        // probabilities: P[T > h] = 1 - CDF(h).
        let mut cfg = two_state_cfg(0.5);
        // Solve medians from the standard normal quantile: ln(h/median) =
        // z * log_std with z the 0.8 / 0.2 quantiles.
        let z80 = 0.8416212335729143f64; // Phi(z) = 0.8
        let h = cfg.horizon_days;
        cfg.repair_times[0] =
            RepairTime { median_days: h * (-z80 * 0.25).exp(), log_std: 0.25 };
        cfg.repair_times[1] =
            RepairTime { median_days: h * (z80 * 0.25).exp(), log_std: 0.25 };
        let p0 = cfg.repair_times[0].prob_unfinished(h).unwrap();
        let p1 = cfg.repair_times[1].prob_unfinished(h).unwrap();
        assert!((p0 - 0.2).abs() < 1e-9);
        assert!((p1 - 0.8).abs() < 1e-9);
        let g = dislocation_after_recovery(&cfg, 0, 100.0).unwrap();
        assert!((g - 50.0).abs() < 1e-7);
    }

    #[test]
    fn dislocation_decreases_with_horizon() {
        let cfg = FragilityConfig {
            repair_times: vec![
                RepairTime { median_days: 30.0, log_std: 0.5 },
                RepairTime { median_days: 120.0, log_std: 0.5 },
            ],
            ..two_state_cfg(0.4)
        };
        let mut prev = f64::INFINITY;
        for h in [10.0, 30.0, 90.0, 365.0] {
            let mut c = cfg.clone();
            c.horizon_days = h;
            let g = dislocation_after_recovery(&c, 0, 100.0).unwrap();
            assert!(g <= prev + 1e-12);
            prev = g;
        }
    }

    #[test]
    fn cost_examples() {
        let mut cfg = two_state_cfg(0.0);
        cfg.damage_fractions = vec![0.005, 0.234];
        // All mass on the lightest state.
        let c = recovery_cost(&cfg, 0, 100.0).unwrap();
        assert!((c - 0.005 * DEFAULT_ALPHA_USD_PER_M2 * 100.0).abs() < 1e-9);
        assert_eq!(recovery_cost(&cfg, 0, 0.0).unwrap(), 0.0);

        // Uniform damage distribution: mean fraction.
        cfg.damage_probs = vec![vec![0.5, 0.5]];
        let c = recovery_cost(&cfg, 0, 100.0).unwrap();
        let mean = (0.005 + 0.234) / 2.0;
        assert!((c - mean * DEFAULT_ALPHA_USD_PER_M2 * 100.0).abs() < 1e-9);
    }

    #[test]
    fn do_nothing_interpolation() {
        assert_eq!(do_nothing_dislocation(100.0, 100.0, None).unwrap(), 100.0);
        assert_eq!(do_nothing_dislocation(0.0, 100.0, None).unwrap(), 50.0);
        assert_eq!(do_nothing_dislocation(40.0, 100.0, None).unwrap(), 70.0);
        assert_eq!(do_nothing_dislocation(40.0, 100.0, Some(2.0)).unwrap(), 80.0);
        assert!(matches!(
            do_nothing_dislocation(40.0, 100.0, Some(3.0)),
            Err(ParamsError::BadMultiplier { .. })
        ));
        assert!(matches!(
            do_nothing_dislocation(40.0, 100.0, Some(0.5)),
            Err(ParamsError::BadMultiplier { .. })
        ));
    }

    #[test]
    fn dominance_of_lighter_damage() {
        let weak = two_state_cfg(0.6);
        let strong = two_state_cfg(0.2);
        let g_weak = dislocation_after_recovery(&weak, 0, 100.0).unwrap();
        let g_strong = dislocation_after_recovery(&strong, 0, 100.0).unwrap();
        assert!(g_strong <= g_weak);
        let c_weak = recovery_cost(&weak, 0, 100.0).unwrap();
        let c_strong = recovery_cost(&strong, 0, 100.0).unwrap();
        assert!(c_strong <= c_weak);
    }

    fn random_blocks(n: usize, seed: u64) -> Vec<RawBlock> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| RawBlock {
                id: format!("b{i}"),
                x: rng.gen_range(-10.0..10.0),
                y: rng.gen_range(-10.0..10.0),
                population: rng.gen_range(1.0..500.0),
                area_m2: rng.gen_range(50.0..5000.0),
            })
            .collect()
    }

    #[test]
    fn k_equals_n_is_identity_partition() {
        let blocks = random_blocks(6, 1);
        let locs = cluster_blocks(&blocks, 6, 7).unwrap();
        assert_eq!(locs.len(), 6);
        let mut pops: Vec<i64> = locs.iter().map(|l| l.population as i64).collect();
        let mut want: Vec<i64> = blocks.iter().map(|b| b.population as i64).collect();
        pops.sort_unstable();
        want.sort_unstable();
        assert_eq!(pops, want);
    }

    #[test]
    fn separated_clouds_split_correctly() {
        let mut blocks = random_blocks(10, 2);
        for (i, b) in blocks.iter_mut().enumerate() {
            let cx = if i < 5 { -50.0 } else { 50.0 };
            b.x = cx + b.x * 0.1;
            b.y *= 0.1;
        }
        let locs = cluster_blocks(&blocks, 2, 3).unwrap();
        assert_eq!(locs.len(), 2);
        let mut xs: Vec<f64> = locs.iter().map(|l| l.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs[0] < -40.0 && xs[1] > 40.0);
        let total: f64 = locs.iter().map(|l| l.population).sum();
        let want: f64 = blocks.iter().map(|b| b.population).sum();
        assert!((total - want).abs() < 1e-9);
    }

    #[test]
    fn clustering_beats_worst_random_restart() {
        let blocks = random_blocks(50, 4);
        let chosen = cluster_blocks(&blocks, 5, 0).unwrap();
        let chosen_sse = clustering_sse(&blocks, &chosen);
        let worst = (1..=20)
            .map(|s| clustering_sse(&blocks, &cluster_blocks(&blocks, 5, s).unwrap()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(chosen_sse <= worst + 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let blocks = random_blocks(30, 5);
        let a = cluster_blocks(&blocks, 4, 99).unwrap();
        let b = cluster_blocks(&blocks, 4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn assembled_instance_validates() {
        let cfg = FragilityConfig {
            damage_states: vec!["Light".into(), "Heavy".into()],
            damage_probs: vec![vec![0.6, 0.4], vec![0.9, 0.1]],
            repair_times: vec![
                RepairTime { median_days: 20.0, log_std: 0.4 },
                RepairTime { median_days: 200.0, log_std: 0.4 },
            ],
            horizon_days: 90.0,
            alpha_usd_per_m2: DEFAULT_ALPHA_USD_PER_M2,
            damage_fractions: vec![0.01, 0.2],
            retrofit_cost_usd_per_m2: vec![0.0, 25.0],
        };
        let blocks = random_blocks(12, 6);
        let locs = cluster_blocks(&blocks, 4, 1).unwrap();
        let inst = assemble_instance(
            locs,
            &cfg,
            Money::from_dollars(1_000_000.0),
            0.5,
            PathLength::Finite(5.0),
            None,
        )
        .unwrap();
        assert!(inst.validate().is_empty(), "{:?}", inst.validate());
        // Strategy 1 shifts damage mass to the light state: dominance in
        // both dislocation and recovery cost.
        for l in 0..inst.n_locations() {
            assert!(inst.g[l][1][1] <= inst.g[l][0][1]);
            assert!(inst.g[l][1][0] <= inst.g[l][0][0]);
            assert!(inst.c_cents[l][1][1] <= inst.c_cents[l][0][1]);
            assert!(inst.g[l][0][1] <= inst.g[l][0][0]);
        }
    }
}
