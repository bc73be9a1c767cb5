//! Worst-case tornado subproblem: for a fixed retrofit plan, maximize over
//! realizable coverage vectors the minimum achievable dislocation. Solved by
//! branch-and-cut over the coverage indicators with two lazy cut families:
//! conflict cuts forbidding uncoverable active sets, and recourse cuts
//! bounding the value by one feasible recovery vector.

use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::geometry::{
    infeasible_pairs, infeasible_triples, segment_cover_feasible_with, CoverConfig, CoverOutcome,
    Point2D, SegmentPath,
};
use crate::model::{Instance, ModelError, RetrofitPlan, TornadoScenario};
use crate::second_stage::{solve_q, RecoveryAssignment};

/// Subproblem strategy, ordered from rawest to most decomposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// No upfront conflict cuts; infeasible coverages are excluded one vector
    /// at a time.
    Org,
    /// Upfront pair/triple conflict cuts; lazy exclusion still per vector.
    Avc,
    /// Upfront pair/triple cuts plus lazy subset conflict cuts on the active
    /// set, the full decomposition.
    Dec,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s.to_ascii_uppercase().as_str() {
            "ORG" => Ok(Mode::Org),
            "AVC" => Ok(Mode::Avc),
            "DEC" => Ok(Mode::Dec),
            other => Err(format!("unknown mode {other:?} (expected ORG, AVC, or DEC)")),
        }
    }
}

/// Relaxation used for node bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeBound {
    /// LP over the pooled cuts (tighter; default).
    Lp,
    /// Sum of per-location maxima over plans (cheaper, looser).
    Combinatorial,
}

/// A conflict cut `sum(z[ones]) - sum(z[zeros]) <= |ones| - 1`. Subset cuts
/// have empty `zeros`; no-good cuts list every location on one side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictCut {
    pub ones: Vec<usize>,
    pub zeros: Vec<usize>,
}

impl ConflictCut {
    fn satisfied(&self, z: &[bool]) -> bool {
        let on = self.ones.iter().filter(|&&l| z[l]).count() as i64;
        let off = self.zeros.iter().filter(|&&l| z[l]).count() as i64;
        on - off <= self.ones.len() as i64 - 1
    }
}

/// Pooled cuts for one subproblem solve. Conflict cuts depend only on the
/// geometry, so they may be carried across retrofit plans; recourse cuts are
/// plan-specific and must be cleared when the plan changes.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    pub conflicts: Vec<ConflictCut>,
    /// Each entry holds per-location dislocation coefficients of one feasible
    /// recovery vector for the current plan.
    pub recourse: Vec<Vec<f64>>,
    pub n_pair_cuts: usize,
    pub n_triple_cuts: usize,
    pub n_lazy_conflicts: usize,
}

impl CutPool {
    /// Drops plan-specific content, keeping the geometric conflict cuts.
    pub fn clear_recourse(&mut self) {
        self.recourse.clear();
    }
}

/// Seeds the pool: conflict cuts from pair/triple geometry (skipped in raw
/// mode) and one recourse vector from the no-coverage recovery problem.
pub fn init_cut_pool(
    plan: &RetrofitPlan,
    instance: &Instance,
    mode: Mode,
) -> Result<CutPool, ModelError> {
    let mut pool = CutPool::default();
    if mode != Mode::Org {
        let points: Vec<Point2D> = instance.points();
        for pair in infeasible_pairs(&points, instance.delta, instance.length) {
            pool.conflicts.push(ConflictCut { ones: vec![pair.0, pair.1], zeros: vec![] });
            pool.n_pair_cuts += 1;
        }
        for t in infeasible_triples(&points, instance.delta) {
            pool.conflicts.push(ConflictCut { ones: vec![t.0, t.1, t.2], zeros: vec![] });
            pool.n_triple_cuts += 1;
        }
    }
    let baseline = solve_q(&TornadoScenario::none(instance), plan, instance)?;
    pool.recourse.push(recourse_coeffs(&baseline, plan, instance));
    Ok(pool)
}

/// Per-location dislocation of a recovery vector under the current plan:
/// the coefficient of each coverage indicator in the recourse cut.
fn recourse_coeffs(r: &RecoveryAssignment, plan: &RetrofitPlan, instance: &Instance) -> Vec<f64> {
    (0..instance.n_locations())
        .map(|l| instance.g[l][plan.strategy(l)][r.p_of[l]])
        .collect()
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Feasible { q_value: f64, assignment: RecoveryAssignment, witness: Option<SegmentPath> },
    ConflictCut(ConflictCut),
    RecourseCut { coeffs: Vec<f64>, q_value: f64 },
}

/// Memoized coverage-feasibility oracle keyed by active set. `Ok(witness)`
/// means coverable; `Err(inconclusive)` distinguishes a certified refutation
/// from a conservative one.
pub struct CoverCache {
    cache: BTreeMap<Vec<usize>, Result<Option<SegmentPath>, bool>>,
    cover_cfg: CoverConfig,
    pub inconclusive_count: usize,
}

impl CoverCache {
    pub fn new(cover_cfg: CoverConfig) -> Self {
        CoverCache { cache: BTreeMap::new(), cover_cfg, inconclusive_count: 0 }
    }

    pub fn check(
        &mut self,
        active: &[usize],
        instance: &Instance,
    ) -> Result<Option<SegmentPath>, bool> {
        if active.is_empty() {
            return Ok(None);
        }
        if let Some(hit) = self.cache.get(active) {
            return hit.clone();
        }
        let pts: Vec<Point2D> =
            active.iter().map(|&l| instance.locations[l].point()).collect();
        let outcome = segment_cover_feasible_with(
            &pts,
            instance.delta,
            instance.length,
            &instance.rect,
            &self.cover_cfg,
        );
        let entry = match outcome {
            CoverOutcome::Feasible(seg) => Ok(Some(seg)),
            CoverOutcome::Infeasible => Err(false),
            CoverOutcome::Inconclusive => {
                self.inconclusive_count += 1;
                Err(true)
            }
        };
        self.cache.insert(active.to_vec(), entry.clone());
        entry
    }
}

/// One separation round for an integral candidate: geometry first, then the
/// recourse problem. `eta_tol` guards against cutting on float noise.
pub fn separate(
    eta: f64,
    z: &[bool],
    plan: &RetrofitPlan,
    instance: &Instance,
    mode: Mode,
    cache: &mut CoverCache,
) -> Result<Verdict, ModelError> {
    let active: Vec<usize> =
        z.iter().enumerate().filter(|(_, &on)| on).map(|(l, _)| l).collect();
    match cache.check(&active, instance) {
        Ok(witness) => {
            let scenario = TornadoScenario { z: z.to_vec(), witness: witness.clone() };
            let assignment = solve_q(&scenario, plan, instance)?;
            if eta > assignment.objective + 1e-9 {
                let coeffs = recourse_coeffs(&assignment, plan, instance);
                Ok(Verdict::RecourseCut { coeffs, q_value: assignment.objective })
            } else {
                Ok(Verdict::Feasible { q_value: assignment.objective, assignment, witness })
            }
        }
        Err(_inconclusive) => {
            let cut = match mode {
                Mode::Dec => ConflictCut { ones: active, zeros: vec![] },
                Mode::Org | Mode::Avc => ConflictCut {
                    ones: active,
                    zeros: z
                        .iter()
                        .enumerate()
                        .filter(|(_, &on)| !on)
                        .map(|(l, _)| l)
                        .collect(),
                },
            };
            Ok(Verdict::ConflictCut(cut))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubproblemResult {
    pub z_star: TornadoScenario,
    pub phi: f64,
    pub assignment: RecoveryAssignment,
    pub n_pair_cuts: usize,
    pub n_triple_cuts: usize,
    pub n_lazy_conflict_cuts: usize,
    pub n_recourse_cuts: usize,
    pub node_count: usize,
    pub inconclusive_count: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct PhiOptions {
    pub mode: Mode,
    pub node_bound: NodeBound,
    pub cover_cfg: CoverConfig,
    pub trace_path: Option<std::path::PathBuf>,
}

impl Default for PhiOptions {
    fn default() -> Self {
        PhiOptions {
            mode: Mode::Dec,
            node_bound: NodeBound::Lp,
            cover_cfg: CoverConfig::default(),
            trace_path: None,
        }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    /// Coverage indicators forced so far: (location, value).
    fixes: Vec<(usize, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.depth == other.depth
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on the maximization bound; ties prefer deeper nodes.
        self.bound.total_cmp(&other.bound).then(self.depth.cmp(&other.depth))
    }
}

pub fn solve_phi(
    plan: &RetrofitPlan,
    instance: &Instance,
    options: &PhiOptions,
) -> Result<SubproblemResult, ModelError> {
    let mut pool = init_cut_pool(plan, instance, options.mode)?;
    solve_phi_with_pool(plan, instance, options, &mut pool)
}

/// Variant that reuses a caller-owned cut pool: conflict cuts survive across
/// plans, recourse content is rebuilt here.
pub fn solve_phi_with_pool(
    plan: &RetrofitPlan,
    instance: &Instance,
    options: &PhiOptions,
    pool: &mut CutPool,
) -> Result<SubproblemResult, ModelError> {
    let start = Instant::now();
    let nl = instance.n_locations();
    pool.clear_recourse();
    let baseline = solve_q(&TornadoScenario::none(instance), plan, instance)?;
    pool.recourse.push(recourse_coeffs(&baseline, plan, instance));

    let mut cache = CoverCache::new(options.cover_cfg.clone());
    let mut trace = options
        .trace_path
        .as_ref()
        .map(std::fs::File::create)
        .transpose()
        .map_err(ModelError::Io)?;
    let log = |file: &mut Option<std::fs::File>, node: usize, bound: f64, action: &str| {
        if let Some(f) = file {
            let _ = writeln!(f, "{{\"node\":{node},\"bound\":{bound},\"action\":\"{action}\"}}");
        }
    };

    // Per-location ceiling on dislocation given the plan; caps eta.
    let g_max: Vec<f64> = (0..nl)
        .map(|l| {
            let s = plan.strategy(l);
            instance.g[l][s].iter().cloned().fold(0.0f64, f64::max)
        })
        .collect();
    let eta_ub: f64 = g_max.iter().sum();

    // Incumbent: the empty coverage is always realizable and worth 0.
    let mut best_phi = 0.0f64;
    let mut best_scenario = TornadoScenario::none(instance);
    let mut best_assignment = solve_q(&best_scenario, plan, instance)?;
    let mut node_count = 0usize;

    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: eta_ub, depth: 0, fixes: Vec::new() });

    while let Some(node) = heap.pop() {
        if node.bound <= best_phi + 1e-9 {
            log(&mut trace, node_count, node.bound, "prune");
            continue;
        }
        node_count += 1;

        let mut lo = vec![0.0f64; nl];
        let mut hi = vec![1.0f64; nl];
        for &(l, v) in &node.fixes {
            lo[l] = if v { 1.0 } else { 0.0 };
            hi[l] = lo[l];
        }

        // Re-solve the node relaxation until the candidate either branches
        // or survives separation; every added cut tightens the same node.
        let mut last_recourse_z: Option<Vec<bool>> = None;
        loop {
            let relax = match options.node_bound {
                NodeBound::Lp => node_lp(&lo, &hi, eta_ub, pool),
                NodeBound::Combinatorial => node_combinatorial(&lo, &hi, &g_max, pool),
            };
            let Some((bound, zx)) = relax else {
                log(&mut trace, node_count, f64::NEG_INFINITY, "infeasible");
                break;
            };
            debug_assert!(
                bound <= node.bound + 1e-6,
                "node bound increased down the branch: {bound} > {}",
                node.bound
            );
            if bound <= best_phi + 1e-9 {
                log(&mut trace, node_count, bound, "prune");
                break;
            }
            let fractional = zx
                .iter()
                .enumerate()
                .filter(|(_, &v)| (v - v.round()).abs() > 1e-6)
                .max_by(|a, b| {
                    let fa = (a.1 - a.1.round()).abs();
                    let fb = (b.1 - b.1.round()).abs();
                    fa.partial_cmp(&fb).unwrap().then(b.0.cmp(&a.0))
                });
            if let Some((l, _)) = fractional {
                let mut down = node.fixes.clone();
                down.push((l, false));
                let mut up = node.fixes.clone();
                up.push((l, true));
                heap.push(Node { bound, depth: node.depth + 1, fixes: down });
                heap.push(Node { bound, depth: node.depth + 1, fixes: up });
                log(&mut trace, node_count, bound, "branch");
                break;
            }

            let z: Vec<bool> = zx.iter().map(|&v| v > 0.5).collect();
            match separate(bound, &z, plan, instance, options.mode, &mut cache)? {
                Verdict::ConflictCut(cut) => {
                    debug_assert!(!cut.satisfied(&z));
                    pool.conflicts.push(cut);
                    pool.n_lazy_conflicts += 1;
                    log(&mut trace, node_count, bound, "conflict_cut");
                }
                Verdict::RecourseCut { coeffs, q_value } => {
                    // Guard against a tolerance stalemate where the relaxation
                    // keeps landing on the same coverage without closing the
                    // gap to its exact value; the incumbent already holds it.
                    let repeated = last_recourse_z.as_deref() == Some(z.as_slice());
                    last_recourse_z = Some(z.clone());
                    pool.recourse.push(coeffs);
                    log(&mut trace, node_count, bound, "recourse_cut");
                    // The candidate coverage itself is realizable: its exact
                    // value is a valid incumbent regardless of the bound.
                    if q_value > best_phi {
                        let scenario = TornadoScenario {
                            z: z.clone(),
                            witness: cache.check(&active_of(&z), instance).ok().flatten(),
                        };
                        best_assignment = solve_q(&scenario, plan, instance)?;
                        best_phi = q_value;
                        best_scenario = scenario;
                        log(&mut trace, node_count, q_value, "incumbent");
                    }
                    if repeated {
                        log(&mut trace, node_count, q_value, "stalled");
                        break;
                    }
                }
                Verdict::Feasible { q_value, assignment, witness } => {
                    if q_value > best_phi {
                        best_phi = q_value;
                        best_scenario = TornadoScenario { z: z.clone(), witness };
                        best_assignment = assignment;
                        log(&mut trace, node_count, q_value, "incumbent");
                    }
                    break;
                }
            }
        }
    }

    Ok(SubproblemResult {
        z_star: best_scenario,
        phi: best_phi,
        assignment: best_assignment,
        n_pair_cuts: pool.n_pair_cuts,
        n_triple_cuts: pool.n_triple_cuts,
        n_lazy_conflict_cuts: pool.n_lazy_conflicts,
        n_recourse_cuts: pool.recourse.len(),
        node_count,
        inconclusive_count: cache.inconclusive_count,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn active_of(z: &[bool]) -> Vec<usize> {
    z.iter().enumerate().filter(|(_, &on)| on).map(|(l, _)| l).collect()
}

/// LP node relaxation: maximize eta subject to the pooled recourse and
/// conflict cuts over boxed coverage variables. Returns (bound, z values).
fn node_lp(lo: &[f64], hi: &[f64], eta_ub: f64, pool: &CutPool) -> Option<(f64, Vec<f64>)> {
    let nl = lo.len();
    // Variable layout: z_0..z_{nl-1}, eta.
    let mut c = vec![0.0; nl + 1];
    c[nl] = -1.0; // minimize -eta
    let mut rows: Vec<(Vec<f64>, i8, f64)> = Vec::new();
    for coeffs in &pool.recourse {
        let mut row = vec![0.0; nl + 1];
        for (l, &g) in coeffs.iter().enumerate() {
            row[l] = -g;
        }
        row[nl] = 1.0;
        rows.push((row, -1, 0.0)); // eta - sum g z <= 0
    }
    for cut in &pool.conflicts {
        let mut row = vec![0.0; nl + 1];
        for &l in &cut.ones {
            row[l] = 1.0;
        }
        for &l in &cut.zeros {
            row[l] = -1.0;
        }
        rows.push((row, -1, cut.ones.len() as f64 - 1.0));
    }
    let mut lo_all = lo.to_vec();
    let mut hi_all = hi.to_vec();
    lo_all.push(0.0);
    hi_all.push(eta_ub);
    let sol = crate::milp::solve_lp(&c, &rows, &lo_all, &hi_all);
    match sol.status {
        crate::milp::LpStatus::Optimal => Some((-sol.objective, sol.x[..nl].to_vec())),
        _ => None,
    }
}

/// Cheap combinatorial relaxation: every location not fixed off may
/// contribute its per-location maximum; integral candidate sets all such
/// locations on (respecting no LP structure, so conflict cuts are enforced
/// by rejecting violated candidates and branching on a violated cut member).
fn node_combinatorial(
    lo: &[f64],
    hi: &[f64],
    g_max: &[f64],
    pool: &CutPool,
) -> Option<(f64, Vec<f64>)> {
    let nl = lo.len();
    let z: Vec<f64> = (0..nl).map(|l| if hi[l] > 0.5 { 1.0 } else { 0.0 }).collect();
    let zb: Vec<bool> = z.iter().map(|&v| v > 0.5).collect();
    let bound: f64 = (0..nl).filter(|&l| hi[l] > 0.5).map(|l| g_max[l]).sum();
    // The recourse pool also bounds eta at the candidate's coverage.
    let recourse_bound = pool
        .recourse
        .iter()
        .map(|coeffs| (0..nl).filter(|&l| hi[l] > 0.5).map(|l| coeffs[l]).sum::<f64>())
        .fold(bound, f64::min);
    if let Some(cut) = pool.conflicts.iter().find(|cut| !cut.satisfied(&zb)) {
        // Present a fractional value on a free cut member to force a branch.
        if let Some(&l) = cut.ones.iter().find(|&&l| lo[l] < 0.5 && hi[l] > 0.5) {
            let mut zf = z;
            zf[l] = 0.5;
            return Some((recourse_bound, zf));
        }
        return None; // fully fixed and violated
    }
    Some((recourse_bound, z))
}
