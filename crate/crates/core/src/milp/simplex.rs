//! Bounded-variable primal simplex on a dense tableau. Two-phase with
//! artificial variables; Dantzig pricing with a Bland's-rule fallback to rule
//! out cycling. Built for the small, well-scaled models this crate produces.

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const REFRESH_EVERY: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values for the original (structural) variables only.
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Minimize `c.x` over `rows` (each `(coeffs, sense, rhs)` with sense -1 for
/// <=, 0 for =, 1 for >=) subject to `lo <= x <= hi` (entries may be
/// infinite).
pub fn solve_lp(
    c: &[f64],
    rows: &[(Vec<f64>, i8, f64)],
    lo: &[f64],
    hi: &[f64],
) -> LpSolution {
    let n_struct = c.len();
    let m = rows.len();
    // Layout: structural | slack (one per row) | artificial (one per row).
    let n_slack = m;
    let n = n_struct + n_slack + m;

    // Row equilibration: dividing each row by its largest coefficient keeps
    // the elimination stable when constraint magnitudes span many orders.
    let scaled: Vec<(Vec<f64>, i8, f64)> = rows
        .iter()
        .map(|(coeffs, sense, rhs)| {
            let s = coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if s > 0.0 {
                (coeffs.iter().map(|v| v / s).collect(), *sense, rhs / s)
            } else {
                (coeffs.clone(), *sense, *rhs)
            }
        })
        .collect();
    let rows = &scaled;

    let mut a = vec![vec![0.0; n]; m];
    let mut b = vec![0.0; m];
    let mut lo_all = vec![0.0; n];
    let mut hi_all = vec![0.0; n];
    lo_all[..n_struct].copy_from_slice(lo);
    hi_all[..n_struct].copy_from_slice(hi);
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        assert_eq!(coeffs.len(), n_struct);
        a[i][..n_struct].copy_from_slice(coeffs);
        b[i] = *rhs;
        let sj = n_struct + i;
        a[i][sj] = 1.0;
        match sense {
            -1 => {
                lo_all[sj] = 0.0;
                hi_all[sj] = f64::INFINITY;
            }
            0 => {
                lo_all[sj] = 0.0;
                hi_all[sj] = 0.0;
            }
            1 => {
                lo_all[sj] = f64::NEG_INFINITY;
                hi_all[sj] = 0.0;
            }
            _ => panic!("sense must be -1, 0, or 1"),
        }
    }

    // Nonbasic start: every structural/slack variable at a finite bound.
    let mut x = vec![0.0; n];
    for j in 0..n_struct + n_slack {
        x[j] = if lo_all[j].is_finite() {
            lo_all[j]
        } else if hi_all[j].is_finite() {
            hi_all[j]
        } else {
            0.0
        };
    }
    // Artificial per row absorbs the residual with a positive value.
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let resid: f64 = b[i] - (0..n_struct + n_slack).map(|j| a[i][j] * x[j]).sum::<f64>();
        let aj = n_struct + n_slack + i;
        a[i][aj] = if resid >= 0.0 { 1.0 } else { -1.0 };
        lo_all[aj] = 0.0;
        hi_all[aj] = f64::INFINITY;
        x[aj] = resid.abs();
        basis.push(aj);
    }

    let mut st = Tableau {
        a,
        b,
        lo: lo_all,
        hi: hi_all,
        basis,
        x,
        tab: Vec::new(),
        beta: Vec::new(),
        n,
        m,
    };
    st.refresh();

    // Phase 1: drive the artificials to zero.
    let mut c1 = vec![0.0; n];
    for j in n_struct + n_slack..n {
        c1[j] = 1.0;
    }
    match st.optimize(&c1) {
        PhaseOutcome::Done => {}
        PhaseOutcome::Unbounded => unreachable!("phase 1 objective is bounded below by 0"),
    }
    let infeas: f64 = (n_struct + n_slack..n).map(|j| st.x[j]).sum();
    if infeas > FEAS_TOL {
        return LpSolution { status: LpStatus::Infeasible, x: Vec::new(), objective: 0.0 };
    }
    // Pin the artificials at zero for phase 2.
    for j in n_struct + n_slack..n {
        st.lo[j] = 0.0;
        st.hi[j] = 0.0;
        st.x[j] = 0.0;
    }
    st.refresh();

    let mut c2 = vec![0.0; n];
    c2[..n_struct].copy_from_slice(c);
    match st.optimize(&c2) {
        PhaseOutcome::Done => {}
        PhaseOutcome::Unbounded => {
            return LpSolution { status: LpStatus::Unbounded, x: Vec::new(), objective: 0.0 }
        }
    }
    let objective: f64 = (0..n_struct).map(|j| c[j] * st.x[j]).sum();
    LpSolution { status: LpStatus::Optimal, x: st.x[..n_struct].to_vec(), objective }
}

enum PhaseOutcome {
    Done,
    Unbounded,
}

struct Tableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    basis: Vec<usize>,
    x: Vec<f64>,
    /// Dense `B^{-1} A`.
    tab: Vec<Vec<f64>>,
    /// Current basic-variable values (mirror of `x` at basis positions).
    beta: Vec<f64>,
    n: usize,
    m: usize,
}

impl Tableau {
    /// Recomputes `tab = B^{-1} A` and basic values from scratch by Gaussian
    /// elimination; called at start and periodically to shed drift. If
    /// accumulated drift let a dependent column into the basis, the basis is
    /// repaired on the spot by swapping in a nonbasic column that still has a
    /// usable pivot in the remaining rows.
    fn refresh(&mut self) {
        // Build [B | A] and eliminate to [I | B^{-1}A].
        let m = self.m;
        let n = self.n;
        let mut aug = vec![vec![0.0; m + n]; m];
        for i in 0..m {
            for (k, &bj) in self.basis.iter().enumerate() {
                aug[i][k] = self.a[i][bj];
            }
            aug[i][m..].copy_from_slice(&self.a[i]);
        }
        for col in 0..m {
            let mut piv = (col..m)
                .max_by(|&r1, &r2| aug[r1][col].abs().total_cmp(&aug[r2][col].abs()))
                .expect("rows remain");
            if aug[piv][col].abs() <= PIVOT_TOL {
                // Basis column `col` is (numerically) dependent on the ones
                // already eliminated. Replace it with the nonbasic column
                // carrying the largest pivot in the rows still to process,
                // preferring columns that are not fixed at a single value.
                let is_basic = self.basic_mask();
                let mut best: Option<(bool, f64, usize, usize)> = None;
                for j in 0..n {
                    if is_basic[j] {
                        continue;
                    }
                    for r in col..m {
                        let mag = aug[r][m + j].abs();
                        if mag <= PIVOT_TOL {
                            continue;
                        }
                        let free = self.lo[j] < self.hi[j];
                        let key = (free, mag, r, j);
                        if best.map_or(true, |(bf, bm_, _, _)| (free, mag) > (bf, bm_)) {
                            best = Some(key);
                        }
                    }
                }
                let (_, _, r, j) = best.expect("constraint matrix has full row rank");
                self.basis[col] = j;
                for row in aug.iter_mut() {
                    row[col] = row[m + j];
                }
                piv = r;
            }
            aug.swap(col, piv);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[r][col];
                    if f != 0.0 {
                        for k in 0..m + n {
                            aug[r][k] -= f * aug[col][k];
                        }
                    }
                }
            }
        }
        self.tab = aug.into_iter().map(|row| row[m..].to_vec()).collect();
        // Basic values solve B beta = b - N x_N at the current nonbasic point.
        let mut beta = vec![0.0; m];
        let is_basic = self.basic_mask();
        for i in 0..m {
            let mut rhs_i = self.b[i];
            for j in 0..self.n {
                if !is_basic[j] {
                    rhs_i -= self.a[i][j] * self.x[j];
                }
            }
            beta[i] = rhs_i;
        }
        let mut bm = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for (k, &bj) in self.basis.iter().enumerate() {
                bm[i][k] = self.a[i][bj];
            }
            bm[i][m] = beta[i];
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&r1, &r2| bm[r1][col].abs().total_cmp(&bm[r2][col].abs()))
                .expect("rows remain");
            bm.swap(col, piv);
            let p = bm[col][col];
            for v in bm[col].iter_mut() {
                *v /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = bm[r][col];
                    if f != 0.0 {
                        for k in 0..=m {
                            bm[r][k] -= f * bm[col][k];
                        }
                    }
                }
            }
        }
        self.beta = (0..m).map(|i| bm[i][m]).collect();
        for i in 0..m {
            self.x[self.basis[i]] = self.beta[i];
        }
    }

    fn basic_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n];
        for &j in &self.basis {
            mask[j] = true;
        }
        mask
    }

    fn optimize(&mut self, c: &[f64]) -> PhaseOutcome {
        let bland_after = 20 * (self.n + self.m);
        let mut iter = 0usize;
        // Optimality must be confirmed on a freshly refactorized tableau;
        // otherwise drift in `tab` can hide an improving column.
        let mut verified = false;
        loop {
            iter += 1;
            if iter % REFRESH_EVERY == 0 {
                self.refresh();
                verified = true;
            }
            let bland = iter > bland_after;
            let is_basic = self.basic_mask();

            // Reduced costs d_j = c_j - c_B . tab[:,j].
            let cb: Vec<f64> = self.basis.iter().map(|&j| c[j]).collect();
            let mut entering: Option<(usize, f64, f64)> = None; // (j, |d|, dir)
            for j in 0..self.n {
                if is_basic[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d: f64 = c[j] - (0..self.m).map(|i| cb[i] * self.tab[i][j]).sum::<f64>();
                let at_lo = self.x[j] <= self.lo[j] + FEAS_TOL;
                let at_hi = self.x[j] >= self.hi[j] - FEAS_TOL;
                let dir = if d < -COST_TOL && (at_lo || (!at_lo && !at_hi)) {
                    1.0
                } else if d > COST_TOL && (at_hi || (!at_lo && !at_hi)) {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, d.abs(), dir));
                    break;
                }
                if entering.as_ref().map_or(true, |&(_, best, _)| d.abs() > best) {
                    entering = Some((j, d.abs(), dir));
                }
            }
            let Some((q, _, dir)) = entering else {
                if verified {
                    return PhaseOutcome::Done;
                }
                self.refresh();
                verified = true;
                continue;
            };
            verified = false;

            // Ratio test: how far can x_q move in direction `dir`?
            let own_limit = if dir > 0.0 { self.hi[q] - self.x[q] } else { self.x[q] - self.lo[q] };
            let mut delta = own_limit;
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let t = self.tab[i][q] * dir;
                if t.abs() <= PIVOT_TOL {
                    continue;
                }
                // Basic value moves by -t * delta.
                let (bound, room) = if t > 0.0 {
                    (self.lo[self.basis[i]], self.beta[i] - self.lo[self.basis[i]])
                } else {
                    (self.hi[self.basis[i]], self.hi[self.basis[i]] - self.beta[i])
                };
                if !bound.is_finite() {
                    continue;
                }
                let lim = (room / t.abs()).max(0.0);
                let better = lim < delta - 1e-12
                    || (lim < delta + 1e-12
                        && leave.map_or(true, |r| {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                self.tab[i][q].abs() > self.tab[r][q].abs()
                            }
                        }));
                if better {
                    delta = lim;
                    leave = Some(i);
                }
            }
            if !delta.is_finite() {
                return PhaseOutcome::Unbounded;
            }

            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.x[q] += dir * delta;
                    for i in 0..self.m {
                        self.beta[i] -= dir * delta * self.tab[i][q];
                        self.x[self.basis[i]] = self.beta[i];
                    }
                }
                Some(r) if delta >= own_limit - 1e-12 && own_limit < delta + 1e-12 => {
                    // Tie with own bound: prefer the flip, no basis change.
                    let _ = r;
                    self.x[q] += dir * own_limit;
                    for i in 0..self.m {
                        self.beta[i] -= dir * own_limit * self.tab[i][q];
                        self.x[self.basis[i]] = self.beta[i];
                    }
                }
                Some(r) => {
                    // Pivot: q enters, basis[r] leaves at the bound it hit.
                    self.x[q] += dir * delta;
                    for i in 0..self.m {
                        if i != r {
                            self.beta[i] -= dir * delta * self.tab[i][q];
                            self.x[self.basis[i]] = self.beta[i];
                        }
                    }
                    let leaving = self.basis[r];
                    let t = self.tab[r][q] * dir;
                    self.x[leaving] = if t > 0.0 { self.lo[leaving] } else { self.hi[leaving] };

                    let piv = self.tab[r][q];
                    for v in self.tab[r].iter_mut() {
                        *v /= piv;
                    }
                    for i in 0..self.m {
                        if i != r {
                            let f = self.tab[i][q];
                            if f != 0.0 {
                                for k in 0..self.n {
                                    self.tab[i][k] -= f * self.tab[r][k];
                                }
                            }
                        }
                    }
                    self.basis[r] = q;
                    self.beta[r] = self.x[q];
                }
            }
        }
    }
}
