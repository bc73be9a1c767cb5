//! Neutral mixed-integer linear model representation with an embedded exact
//! branch-and-bound solver and a file-based bridge to external solvers.

mod lpfile;
mod simplex;

pub use lpfile::{export_lp, import_solution, LpFileError};
pub use simplex::{solve_lp, LpSolution, LpStatus};

use std::collections::BinaryHeap;

use thiserror::Error;

pub const DEFAULT_BINARY_CAP: usize = 5000;
const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    fn code(&self) -> i8 {
        match self {
            RowSense::Le => -1,
            RowSense::Eq => 0,
            RowSense::Ge => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Sparse row: (variable index, coefficient).
    pub terms: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    /// Sparse objective: (variable index, coefficient).
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("model references variable {0} out of range")]
    BadIndex(usize),
    #[error("non-finite coefficient on variable {0}")]
    NonFinite(usize),
    #[error("model has {got} binaries; embedded cap is {cap} — needs external solver")]
    NeedsExternal { got: usize, cap: usize },
    #[error("model is infeasible")]
    Infeasible,
    #[error("model is unbounded")]
    Unbounded,
    #[error("lp file: {0}")]
    LpFile(#[from] LpFileError),
    #[error("solver bridge: {0}")]
    Bridge(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        MilpModel { sense, variables: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(Variable { name: name.into(), kind: VarKind::Binary, lo: 0.0, hi: 1.0 });
        self.variables.len() - 1
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> usize {
        self.variables.push(Variable { name: name.into(), kind: VarKind::Continuous, lo, hi });
        self.variables.len() - 1
    }

    pub fn set_objective_term(&mut self, var: usize, coeff: f64) {
        if let Some(t) = self.objective.iter_mut().find(|(v, _)| *v == var) {
            t.1 += coeff;
        } else {
            self.objective.push((var, coeff));
        }
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint { name: name.into(), terms, sense, rhs });
    }

    pub fn n_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn check(&self) -> Result<(), MilpError> {
        let n = self.variables.len();
        for &(v, coeff) in &self.objective {
            if v >= n {
                return Err(MilpError::BadIndex(v));
            }
            if !coeff.is_finite() {
                return Err(MilpError::NonFinite(v));
            }
        }
        for c in &self.constraints {
            for &(v, coeff) in &c.terms {
                if v >= n {
                    return Err(MilpError::BadIndex(v));
                }
                if !coeff.is_finite() {
                    return Err(MilpError::NonFinite(v));
                }
            }
        }
        Ok(())
    }

    fn dense_objective_min(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        let flip = if self.sense == Sense::Maximize { -1.0 } else { 1.0 };
        for &(v, coeff) in &self.objective {
            c[v] += flip * coeff;
        }
        c
    }

    fn dense_rows(&self) -> Vec<(Vec<f64>, i8, f64)> {
        self.constraints
            .iter()
            .map(|con| {
                let mut row = vec![0.0; self.variables.len()];
                for &(v, coeff) in &con.terms {
                    row[v] += coeff;
                }
                (row, con.sense.code(), con.rhs)
            })
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, coeff)| coeff * x[v]).sum()
    }

    /// LP relaxation (integrality dropped), in the model's own sense.
    pub fn solve_relaxation(&self) -> Result<LpSolution, MilpError> {
        self.check()?;
        let lo: Vec<f64> = self.variables.iter().map(|v| v.lo).collect();
        let hi: Vec<f64> = self.variables.iter().map(|v| v.hi).collect();
        let sol = solve_lp(&self.dense_objective_min(), &self.dense_rows(), &lo, &hi);
        match sol.status {
            LpStatus::Optimal => {
                let objective =
                    if self.sense == Sense::Maximize { -sol.objective } else { sol.objective };
                Ok(LpSolution { status: LpStatus::Optimal, x: sol.x, objective })
            }
            LpStatus::Infeasible => Err(MilpError::Infeasible),
            LpStatus::Unbounded => Err(MilpError::Unbounded),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub node_count: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub binary_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { binary_cap: DEFAULT_BINARY_CAP }
    }
}

struct Node {
    /// Bound in minimization terms (lower is better).
    bound: f64,
    depth: usize,
    /// Tightened bounds on binaries: (var, lo, hi).
    fixes: Vec<(usize, f64, f64)>,
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
        // BinaryHeap is a max-heap; best bound = smallest minimization bound.
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.depth.cmp(&self.depth))
    }
}

/// Exact branch-and-bound: best-bound node order, branching on the most
/// fractional binary with lowest-index tie-break.
pub fn solve_embedded(
    model: &MilpModel,
    options: &SolveOptions,
) -> Result<MilpSolution, MilpError> {
    model.check()?;
    let nb = model.n_binaries();
    if nb > options.binary_cap {
        return Err(MilpError::NeedsExternal { got: nb, cap: options.binary_cap });
    }

    let c_min = model.dense_objective_min();
    let rows = model.dense_rows();
    let base_lo: Vec<f64> = model.variables.iter().map(|v| v.lo).collect();
    let base_hi: Vec<f64> = model.variables.iter().map(|v| v.hi).collect();
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();

    let mut heap = BinaryHeap::new();
    let mut best: Option<(f64, Vec<f64>)> = None; // minimization incumbent
    let mut node_count = 0usize;

    heap.push(Node { bound: f64::NEG_INFINITY, depth: 0, fixes: Vec::new() });
    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &best {
            if node.bound >= *inc - 1e-9 {
                continue; // cannot beat the incumbent
            }
        }
        node_count += 1;
        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        for &(v, l, h) in &node.fixes {
            lo[v] = l;
            hi[v] = h;
        }
        let sol = solve_lp(&c_min, &rows, &lo, &hi);
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(MilpError::Unbounded),
            LpStatus::Optimal => {}
        }
        // Bound sanity: a child LP can never beat its parent's bound.
        debug_assert!(
            sol.objective >= node.bound - 1e-6,
            "child LP bound {} below parent bound {}",
            sol.objective,
            node.bound
        );
        if let Some((inc, _)) = &best {
            if sol.objective >= *inc - 1e-9 {
                continue;
            }
        }

        // Most fractional binary, ties to the lowest index.
        let mut branch: Option<(usize, f64)> = None;
        for &v in &binaries {
            let frac = (sol.x[v] - sol.x[v].round()).abs();
            if frac > INT_TOL && branch.as_ref().map_or(true, |&(_, bf)| frac > bf + 1e-12) {
                branch = Some((v, frac));
            }
        }
        match branch {
            None => {
                // Integral: snap binaries and record the incumbent.
                let mut x = sol.x.clone();
                for &v in &binaries {
                    x[v] = x[v].round();
                }
                let obj = (0..x.len()).map(|j| c_min[j] * x[j]).sum::<f64>();
                if best.as_ref().map_or(true, |(inc, _)| obj < *inc) {
                    best = Some((obj, x));
                }
            }
            Some((v, _)) => {
                let mut down = node.fixes.clone();
                down.push((v, 0.0, 0.0));
                let mut up = node.fixes;
                up.push((v, 1.0, 1.0));
                heap.push(Node { bound: sol.objective, depth: node.depth + 1, fixes: down });
                heap.push(Node { bound: sol.objective, depth: node.depth + 1, fixes: up });
            }
        }
    }

    let (obj_min, x) = best.ok_or(MilpError::Infeasible)?;
    let objective = if model.sense == Sense::Maximize { -obj_min } else { obj_min };
    Ok(MilpSolution { x, objective, node_count })
}

/// Runs an external solver through a command template containing `{in}` and
/// `{out}` placeholders, then reads back the solution file.
pub fn solve_external(
    model: &MilpModel,
    command_template: &str,
    workdir: &std::path::Path,
) -> Result<MilpSolution, MilpError> {
    model.check()?;
    let in_path = workdir.join("model.lp");
    let out_path = workdir.join("model.sol");
    export_lp(model, &in_path)?;
    let cmd = command_template
        .replace("{in}", &in_path.to_string_lossy())
        .replace("{out}", &out_path.to_string_lossy());
    let status = std::process::Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .status()
        .map_err(|e| MilpError::Bridge(format!("failed to launch {cmd:?}: {e}")))?;
    if !status.success() {
        return Err(MilpError::Bridge(format!("solver command exited with {status}")));
    }
    let parsed = import_solution(&std::fs::read_to_string(&out_path)?)?;
    let mut x = vec![0.0; model.variables.len()];
    for (name, value) in &parsed.values {
        let idx = model
            .variables
            .iter()
            .position(|v| &v.name == name)
            .ok_or_else(|| MilpError::Bridge(format!("unknown variable {name:?} in solution")))?;
        x[idx] = *value;
    }
    let objective = parsed.objective.unwrap_or_else(|| model.objective_value(&x));
    Ok(MilpSolution { x, objective, node_count: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fractional_cap_rounds_down() {
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_binary("x");
        m.set_objective_term(x, 1.0);
        m.add_constraint("cap", vec![(x, 1.0)], RowSense::Le, 0.5);
        let sol = solve_embedded(&m, &SolveOptions::default()).unwrap();
        assert_eq!(sol.x[x], 0.0);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn two_variable_knapsack() {
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_binary("x");
        let y = m.add_binary("y");
        m.set_objective_term(x, 3.0);
        m.set_objective_term(y, 2.0);
        m.add_constraint("w", vec![(x, 2.0), (y, 2.0)], RowSense::Le, 3.0);
        let sol = solve_embedded(&m, &SolveOptions::default()).unwrap();
        assert_eq!((sol.x[x], sol.x[y]), (1.0, 0.0));
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn size_cap_reported() {
        let mut m = MilpModel::new(Sense::Minimize);
        for i in 0..4 {
            m.add_binary(format!("b{i}"));
        }
        let err = solve_embedded(&m, &SolveOptions { binary_cap: 3 }).unwrap_err();
        assert!(matches!(err, MilpError::NeedsExternal { got: 4, cap: 3 }));
    }

    #[test]
    fn infeasible_binary_model() {
        let mut m = MilpModel::new(Sense::Minimize);
        let x = m.add_binary("x");
        m.add_constraint("lo", vec![(x, 1.0)], RowSense::Ge, 0.4);
        m.add_constraint("hi", vec![(x, 1.0)], RowSense::Le, 0.6);
        assert!(matches!(solve_embedded(&m, &SolveOptions::default()), Err(MilpError::Infeasible)));
    }

    fn random_model(rng: &mut ChaCha8Rng, nb: usize) -> MilpModel {
        let mut m = MilpModel::new(if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize });
        for i in 0..nb {
            let v = m.add_binary(format!("b{i}"));
            m.set_objective_term(v, rng.gen_range(-5.0..5.0f64));
        }
        for r in 0..3 {
            let terms: Vec<(usize, f64)> =
                (0..nb).map(|v| (v, rng.gen_range(-3.0..3.0f64))).collect();
            let rhs = rng.gen_range(-2.0..(nb as f64));
            m.add_constraint(format!("r{r}"), terms, RowSense::Le, rhs);
        }
        m
    }

    fn enumerate_best(m: &MilpModel) -> Option<f64> {
        let nb = m.variables.len();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << nb) {
            let x: Vec<f64> = (0..nb).map(|v| ((mask >> v) & 1) as f64).collect();
            let feasible = m.constraints.iter().all(|c| {
                let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v]).sum();
                match c.sense {
                    RowSense::Le => lhs <= c.rhs + 1e-9,
                    RowSense::Ge => lhs >= c.rhs - 1e-9,
                    RowSense::Eq => (lhs - c.rhs).abs() <= 1e-9,
                }
            });
            if feasible {
                let obj = m.objective_value(&x);
                best = Some(match (best, m.sense) {
                    (None, _) => obj,
                    (Some(b), Sense::Maximize) => b.max(obj),
                    (Some(b), Sense::Minimize) => b.min(obj),
                });
            }
        }
        best
    }

    #[test]
    fn random_models_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..200 {
            let m = random_model(&mut rng, 10);
            let brute = enumerate_best(&m);
            match solve_embedded(&m, &SolveOptions::default()) {
                Ok(sol) => {
                    let expect = brute.expect("solver found a solution, brute must too");
                    assert!(
                        (sol.objective - expect).abs() < 1e-6,
                        "trial {trial}: solver {} vs enumeration {}",
                        sol.objective,
                        expect
                    );
                }
                Err(MilpError::Infeasible) => assert!(brute.is_none(), "trial {trial}"),
                Err(e) => panic!("trial {trial}: {e}"),
            }
        }
    }

    #[test]
    fn relaxation_bounds_the_integer_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let m = random_model(&mut rng, 8);
            let Ok(sol) = solve_embedded(&m, &SolveOptions::default()) else { continue };
            let relax = m.solve_relaxation().unwrap();
            match m.sense {
                Sense::Maximize => assert!(relax.objective >= sol.objective - 1e-6),
                Sense::Minimize => assert!(relax.objective <= sol.objective + 1e-6),
            }
        }
    }

    #[test]
    fn mixed_integer_continuous() {
        // max 2x + t s.t. t <= 3x, t <= 2, x binary.
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_binary("x");
        let t = m.add_continuous("t", 0.0, f64::INFINITY);
        m.set_objective_term(x, 2.0);
        m.set_objective_term(t, 1.0);
        m.add_constraint("link", vec![(t, 1.0), (x, -3.0)], RowSense::Le, 0.0);
        m.add_constraint("cap", vec![(t, 1.0)], RowSense::Le, 2.0);
        let sol = solve_embedded(&m, &SolveOptions::default()).unwrap();
        assert!((sol.objective - 4.0).abs() < 1e-8);
        assert_eq!(sol.x[x], 1.0);
        assert!((sol.x[t] - 2.0).abs() < 1e-8);
    }
}
