//! Bounded revised simplex with an explicit dense basis inverse.
//!
//! Every row `i` gets a slack `s_i` so that `a_i x + s_i = b_i`, with
//! `s_i >= 0` for `<=`, `s_i <= 0` for `>=` and `s_i = 0` for `=` rows.
//! Duals follow the minimisation convention `y = c_B B^-1`, so `<=` rows have
//! `y <= 0` and `>=` rows have `y >= 0` at optimality.

use log::{debug, trace};

use crate::{LinearProgram, LpError, Sense, Tolerances};

const REFACTOR_EVERY: usize = 100;
const DEGENERATE_BEFORE_BLAND: usize = 50;
const SINGULAR_PIVOT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// A simplex basis over structural columns followed by row slacks.
///
/// A basis from a smaller model can seed a solve of an extended model: new
/// columns start nonbasic and new rows start with their slack basic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Basis {
    num_cols: usize,
    num_rows: usize,
    status: Vec<VarStatus>,
    head: Vec<usize>,
}

impl Basis {
    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn column_status(&self, col: usize) -> VarStatus {
        self.status[col]
    }

    pub fn slack_status(&self, row: usize) -> VarStatus {
        self.status[self.num_cols + row]
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values; meaningful only when optimal.
    pub x: Vec<f64>,
    /// One dual value per row.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
}

impl LpSolution {
    /// `b'y` plus the bound contributions of the reduced costs.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut obj: f64 = lp
            .rows
            .iter()
            .zip(&self.duals)
            .map(|(r, y)| r.rhs * y)
            .sum();
        for (j, col) in lp.cols.iter().enumerate() {
            let d = self.reduced_costs[j];
            if d > 0.0 && col.lower.is_finite() {
                obj += d * col.lower;
            } else if d < 0.0 && col.upper.is_finite() {
                obj += d * col.upper;
            } else if d != 0.0 {
                obj += d * self.x[j];
            }
        }
        obj
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_warm(lp, None, &Tolerances::default())
}

pub fn solve_lp_warm(
    lp: &LinearProgram,
    warm: Option<&Basis>,
    tol: &Tolerances,
) -> Result<LpSolution, LpError> {
    let lower: Vec<f64> = lp.cols.iter().map(|c| c.lower).collect();
    let upper: Vec<f64> = lp.cols.iter().map(|c| c.upper).collect();
    solve_with_bounds(lp, &lower, &upper, warm, tol)
}

/// Solves `lp` with column bounds replaced by `lower`/`upper`.
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    warm: Option<&Basis>,
    tol: &Tolerances,
) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(lp, lower, upper, warm, *tol);
    let status = s.run()?;
    Ok(s.into_solution(status))
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    /// Column-major inverse: `binv[k * m + i]` is `(B^-1)[i][k]`.
    binv: Vec<f64>,
    since_refactor: usize,
    /// Exact bounds while the working bounds are perturbed.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    /// Exact costs while the dual simplex runs on perturbed ones.
    saved_cost: Option<Vec<f64>>,
    perturbed_once: bool,
    iterations: usize,
    max_iterations: usize,
    tol: Tolerances,
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(
        lp: &'a LinearProgram,
        lower: &[f64],
        upper: &[f64],
        warm: Option<&Basis>,
        tol: Tolerances,
    ) -> Self {
        let n = lp.cols.len();
        let m = lp.rows.len();
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        lb.extend_from_slice(lower);
        ub.extend_from_slice(upper);
        for row in &lp.rows {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        let mut cost: Vec<f64> = lp.cols.iter().map(|c| c.cost).collect();
        cost.resize(n + m, 0.0);
        let rhs = lp.rows.iter().map(|r| r.rhs).collect();

        let mut s = Self {
            lp,
            n,
            m,
            lb,
            ub,
            cost,
            rhs,
            status: Vec::new(),
            head: Vec::new(),
            x: vec![0.0; n + m],
            binv: Vec::new(),
            since_refactor: 0,
            saved_bounds: None,
            saved_cost: None,
            perturbed_once: false,
            iterations: 0,
            max_iterations: 20_000 + 50 * (n + m),
            tol,
        };
        s.init_basis(warm);
        s
    }

    fn default_status(&self, j: usize) -> VarStatus {
        if self.lb[j].is_finite() {
            VarStatus::AtLower
        } else if self.ub[j].is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn init_basis(&mut self, warm: Option<&Basis>) {
        let (n, m) = (self.n, self.m);
        self.status = (0..n).map(|j| self.default_status(j)).collect();
        self.status.extend(std::iter::repeat_n(VarStatus::Basic, m));
        self.head = (n..n + m).collect();

        if let Some(b) = warm.filter(|b| b.num_cols <= n && b.num_rows <= m) {
            let map = |j: usize| {
                if j < b.num_cols {
                    j
                } else {
                    n + (j - b.num_cols)
                }
            };
            let mut head = Vec::with_capacity(m);
            let mut status = vec![VarStatus::AtLower; n + m];
            for j in 0..n {
                status[j] = self.default_status(j);
            }
            for (j, &st) in b.status.iter().enumerate() {
                status[map(j)] = st;
            }
            for &j in &b.head {
                head.push(map(j));
            }
            for i in b.num_rows..m {
                status[n + i] = VarStatus::Basic;
                head.push(n + i);
            }
            // Nonbasic slacks inherited from the old basis keep their status.
            self.status = status;
            self.head = head;
        }

        for j in 0..n + m {
            self.status[j] = match self.status[j] {
                VarStatus::Basic => VarStatus::Basic,
                VarStatus::AtLower if self.lb[j].is_finite() => VarStatus::AtLower,
                VarStatus::AtUpper if self.ub[j].is_finite() => VarStatus::AtUpper,
                VarStatus::Free if !self.lb[j].is_finite() && !self.ub[j].is_finite() => {
                    VarStatus::Free
                }
                _ => self.default_status(j),
            };
            self.x[j] = self.nonbasic_value(j);
        }
        self.refactor();
        self.compute_xb();
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lb[j],
            VarStatus::AtUpper => self.ub[j],
            _ => 0.0,
        }
    }

    fn entries(&self, j: usize) -> ColIter<'_> {
        if j < self.n {
            ColIter::Sparse(self.lp.cols[j].entries.iter())
        } else {
            ColIter::Unit(Some(j - self.n))
        }
    }

    fn dot_col(&self, v: &[f64], j: usize) -> f64 {
        self.entries(j).map(|(i, a)| v[i] * a).sum()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (i, a) in self.entries(j) {
            let col = &self.binv[i * m..(i + 1) * m];
            for (o, b) in out.iter_mut().zip(col) {
                *o += a * b;
            }
        }
        out
    }

    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|i| {
                self.binv[i * m..(i + 1) * m]
                    .iter()
                    .zip(cb)
                    .map(|(b, c)| b * c)
                    .sum()
            })
            .collect()
    }

    fn binv_row(&self, r: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.binv[i * self.m + r]).collect()
    }

    fn pivot_update(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let p = col[r] / ar;
            if p != 0.0 {
                for (c, a) in col.iter_mut().zip(alpha) {
                    *c -= a * p;
                }
            }
            col[r] = p;
        }
        self.since_refactor += 1;
    }

    /// Rebuilds the inverse from scratch; dependent basic columns are
    /// swapped for slacks.
    fn refactor(&mut self) {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            self.binv.clear();
            return;
        }
        // e accumulates the row operations, row-major.
        let mut e = vec![0.0; m * m];
        for i in 0..m {
            e[i * m + i] = 1.0;
        }
        let mut used = vec![false; m];
        let mut pivot_row = vec![usize::MAX; m];
        let mut deferred = Vec::new();

        let transform = |e: &[f64], j: usize, s: &Self| -> Vec<f64> {
            let mut w = vec![0.0; m];
            for (i, a) in s.entries(j) {
                for (r, wr) in w.iter_mut().enumerate() {
                    *wr += e[r * m + i] * a;
                }
            }
            w
        };
        let eliminate = |e: &mut [f64], w: &[f64], p: usize| {
            let inv = 1.0 / w[p];
            for c in 0..m {
                e[p * m + c] *= inv;
            }
            for r in 0..m {
                if r != p && w[r] != 0.0 {
                    let f = w[r];
                    for c in 0..m {
                        e[r * m + c] -= f * e[p * m + c];
                    }
                }
            }
        };

        for k in 0..m {
            let w = transform(&e, self.head[k], self);
            let best = (0..m)
                .filter(|&r| !used[r])
                .max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()).then(b.cmp(&a)));
            match best {
                Some(p) if w[p].abs() > SINGULAR_PIVOT => {
                    eliminate(&mut e, &w, p);
                    used[p] = true;
                    pivot_row[k] = p;
                }
                _ => deferred.push(k),
            }
        }

        for k in deferred {
            let mut choice = None;
            let mut best_mag = 0.0;
            for i in 0..m {
                let j = self.n + i;
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                for r in (0..m).filter(|&r| !used[r]) {
                    let v = e[r * m + i].abs();
                    if v > best_mag {
                        best_mag = v;
                        choice = Some((i, r));
                    }
                }
            }
            let (i, p) = choice.expect("some slack completes a singular basis");
            let old = self.head[k];
            debug!("refactor: replacing dependent basic variable {old} by slack {i}");
            self.status[old] = if self.lb[old].is_finite()
                && (!self.ub[old].is_finite()
                    || (self.x[old] - self.lb[old]).abs() <= (self.x[old] - self.ub[old]).abs())
            {
                VarStatus::AtLower
            } else if self.ub[old].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::Free
            };
            self.x[old] = self.nonbasic_value(old);
            let j = self.n + i;
            self.head[k] = j;
            self.status[j] = VarStatus::Basic;
            let w: Vec<f64> = (0..m).map(|r| e[r * m + i]).collect();
            eliminate(&mut e, &w, p);
            used[p] = true;
            pivot_row[k] = p;
        }

        self.binv = vec![0.0; m * m];
        for k in 0..m {
            let p = pivot_row[k];
            for c in 0..m {
                self.binv[c * m + k] = e[p * m + c];
            }
        }
    }

    fn compute_xb(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n + m {
            if self.status[j] != VarStatus::Basic {
                let v = self.nonbasic_value(j);
                self.x[j] = v;
                if v != 0.0 {
                    for (i, a) in self.entries(j) {
                        r[i] -= a * v;
                    }
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &ri) in r.iter().enumerate() {
            if ri != 0.0 {
                let col = &self.binv[i * m..(i + 1) * m];
                for (x, b) in xb.iter_mut().zip(col) {
                    *x += b * ri;
                }
            }
        }
        for k in 0..m {
            self.x[self.head[k]] = xb[k];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lb[j] - self.tol.feasibility {
            self.lb[j] - x
        } else if x > self.ub[j] + self.tol.feasibility {
            x - self.ub[j]
        } else {
            0.0
        }
    }

    fn primal_feasible(&self) -> bool {
        self.head.iter().all(|&j| self.infeasibility(j) == 0.0)
    }

    fn phase2_duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.btran(&cb)
    }

    /// Moves boxed nonbasic variables to the bound matching their reduced cost
    /// sign; returns false if some other nonbasic is dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.phase2_duals();
        let opt = self.tol.optimality.max(1e-9);
        let mut flips = Vec::new();
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic {
                continue;
            }
            let d = self.cost[j] - self.dot_col(&y, j);
            let boxed = self.lb[j].is_finite() && self.ub[j].is_finite();
            match st {
                VarStatus::AtLower if d < -opt => {
                    if boxed {
                        flips.push((j, VarStatus::AtUpper));
                    } else {
                        return false;
                    }
                }
                VarStatus::AtUpper if d > opt => {
                    if boxed {
                        flips.push((j, VarStatus::AtLower));
                    } else {
                        return false;
                    }
                }
                VarStatus::Free if d.abs() > opt => return false,
                _ => {}
            }
        }
        for (j, st) in flips {
            self.status[j] = st;
        }
        self.compute_xb();
        true
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        if !self.primal_feasible() && self.make_dual_feasible() {
            match self.dual()? {
                Outcome::Optimal => {}
                Outcome::Infeasible => {
                    // Confirmed by phase 1 below, which starts from this basis.
                    trace!("dual simplex reports primal infeasibility");
                }
                Outcome::Unbounded => unreachable!("dual simplex never reports unboundedness"),
            }
            if let Some(cost) = self.saved_cost.take() {
                self.cost = cost;
            }
        }
        Ok(match self.primal()? {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Unbounded => LpStatus::Unbounded,
        })
    }

    fn bump(&mut self) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
            self.compute_xb();
        }
        Ok(())
    }

    /// Widens every non-fixed bound by a small amount that differs per
    /// variable, so that stalled degenerate vertices become proper ones.
    fn perturb(&mut self) {
        self.saved_bounds = Some((self.lb.clone(), self.ub.clone()));
        self.perturbed_once = true;
        for j in 0..self.n + self.m {
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let frac = spread(j);
            let delta = |b: f64| 1e-6 * (1.0 + frac) * (1.0 + b.abs());
            if self.lb[j].is_finite() {
                self.lb[j] -= delta(self.lb[j]);
            }
            if self.ub[j].is_finite() {
                self.ub[j] += delta(self.ub[j]);
            }
        }
        self.compute_xb();
        debug!(
            "perturbed bounds after stalling at iteration {}",
            self.iterations
        );
    }

    /// Moves nonbasic costs away from zero reduced cost, keeping the basis
    /// dual feasible.
    fn perturb_cost(&mut self) {
        self.saved_cost = Some(self.cost.clone());
        for j in 0..self.n + self.m {
            let dir = match self.status[j] {
                _ if self.lb[j] == self.ub[j] => continue,
                VarStatus::AtLower => 1.0,
                VarStatus::AtUpper => -1.0,
                _ => continue,
            };
            let c = self.cost[j];
            self.cost[j] += dir * 1e-6 * (1.0 + spread(j)) * (1.0 + c.abs());
        }
        debug!(
            "perturbed costs after dual stalling at iteration {}",
            self.iterations
        );
    }

    /// Restores the exact bounds; returns false if none were perturbed.
    fn unperturb(&mut self) -> bool {
        let Some((lb, ub)) = self.saved_bounds.take() else {
            return false;
        };
        self.lb = lb;
        self.ub = ub;
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.status[j] = match self.status[j] {
                    VarStatus::AtUpper if !self.ub[j].is_finite() => self.default_status(j),
                    VarStatus::AtLower if !self.lb[j].is_finite() => self.default_status(j),
                    st => st,
                };
            }
        }
        self.refactor();
        self.compute_xb();
        true
    }

    fn primal(&mut self) -> Result<Outcome, LpError> {
        let (n, m) = (self.n, self.m);
        let feas = self.tol.feasibility;
        let opt = self.tol.optimality;
        let mut degenerate = 0usize;
        let mut unbounded_retry = false;
        loop {
            self.bump()?;
            let mut cb = vec![0.0; m];
            let mut phase1 = false;
            for k in 0..m {
                let j = self.head[k];
                if self.x[j] < self.lb[j] - feas {
                    cb[k] = -1.0;
                    phase1 = true;
                } else if self.x[j] > self.ub[j] + feas {
                    cb[k] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for k in 0..m {
                    cb[k] = self.cost[self.head[k]];
                }
            }
            let y = self.btran(&cb);
            if degenerate > DEGENERATE_BEFORE_BLAND && !self.perturbed_once {
                self.perturb();
                degenerate = 0;
                continue;
            }
            let bland = degenerate > DEGENERATE_BEFORE_BLAND;

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..n + m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_col(&y, j);
                let dir = match st {
                    VarStatus::AtLower if d < -opt => 1.0,
                    VarStatus::AtUpper if d > opt => -1.0,
                    VarStatus::Free if d.abs() > opt => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir, d));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                    entering = Some((j, dir, d));
                }
            }

            let Some((q, dir, _)) = entering else {
                if self.since_refactor > 0 {
                    self.refactor();
                    self.compute_xb();
                    continue;
                }
                if self.unperturb() {
                    degenerate = 0;
                    continue;
                }
                return Ok(if phase1 {
                    Outcome::Infeasible
                } else {
                    Outcome::Optimal
                });
            };

            let alpha = self.ftran(q);
            let leave = self.primal_ratio(&alpha, dir, bland);
            let flip = self.ub[q] - self.lb[q];
            match leave {
                Some((r, theta, to_upper)) if theta < flip => {
                    let jr = self.head[r];
                    self.x[q] += dir * theta;
                    for k in 0..m {
                        self.x[self.head[k]] -= dir * theta * alpha[k];
                    }
                    self.x[jr] = if to_upper { self.ub[jr] } else { self.lb[jr] };
                    self.status[jr] = if to_upper && self.lb[jr] != self.ub[jr] {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.status[q] = VarStatus::Basic;
                    self.head[r] = q;
                    self.pivot_update(r, &alpha);
                    degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
                }
                _ if flip.is_finite() => {
                    for k in 0..m {
                        self.x[self.head[k]] -= dir * flip * alpha[k];
                    }
                    self.status[q] = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                    degenerate = 0;
                }
                _ => {
                    if phase1 || !unbounded_retry {
                        // Numerical trouble or a stale inverse; rebuild once.
                        unbounded_retry = true;
                        self.refactor();
                        self.compute_xb();
                        continue;
                    }
                    if self.unperturb() {
                        continue;
                    }
                    return Ok(Outcome::Unbounded);
                }
            }
        }
    }

    /// Harris two-pass ratio test. Returns (position, step, leaves at upper).
    fn primal_ratio(&self, alpha: &[f64], dir: f64, bland: bool) -> Option<(usize, f64, bool)> {
        let feas = self.tol.feasibility;
        let piv = self.tol.pivot;
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (k, &a) in alpha.iter().enumerate() {
            if a.abs() < piv {
                continue;
            }
            let j = self.head[k];
            let rate = -dir * a;
            let xj = self.x[j];
            let (dist, to_upper) = if rate < 0.0 {
                if xj > self.ub[j] + feas {
                    (xj - self.ub[j], true)
                } else if xj < self.lb[j] - feas || !self.lb[j].is_finite() {
                    continue;
                } else {
                    ((xj - self.lb[j]).max(0.0), false)
                }
            } else if xj < self.lb[j] - feas {
                (self.lb[j] - xj, false)
            } else if xj > self.ub[j] + feas || !self.ub[j].is_finite() {
                continue;
            } else {
                ((self.ub[j] - xj).max(0.0), true)
            };
            cands.push((k, dist / rate.abs(), (dist + feas) / rate.abs(), to_upper));
        }
        if cands.is_empty() {
            return None;
        }
        if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            return cands
                .iter()
                .filter(|c| c.1 <= min + 1e-12)
                .min_by_key(|c| self.head[c.0])
                .map(|c| (c.0, c.1, c.3));
        }
        let harris = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        cands
            .iter()
            .filter(|c| c.1 <= harris)
            .max_by(|a, b| {
                alpha[a.0]
                    .abs()
                    .total_cmp(&alpha[b.0].abs())
                    .then(b.0.cmp(&a.0))
            })
            .map(|c| (c.0, c.1.max(0.0), c.3))
    }

    fn dual(&mut self) -> Result<Outcome, LpError> {
        let (n, m) = (self.n, self.m);
        let piv = self.tol.pivot;
        let opt = self.tol.optimality;
        let mut degenerate = 0usize;
        loop {
            self.bump()?;
            if degenerate > DEGENERATE_BEFORE_BLAND && self.saved_cost.is_none() {
                self.perturb_cost();
                degenerate = 0;
            }
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..m {
                let v = self.infeasibility(self.head[k]);
                if v > 0.0 && leave.is_none_or(|(_, best)| v > best) {
                    leave = Some((k, v));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let jr = self.head[r];
            let going_up = self.x[jr] < self.lb[jr];
            let y = self.phase2_duals();
            let rho = self.binv_row(r);

            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for j in 0..n + m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let a = self.dot_col(&rho, j);
                if a.abs() < piv {
                    continue;
                }
                // x_r moves by -a * dx_j.
                let ok = match st {
                    VarStatus::AtLower => (a < 0.0) == going_up,
                    VarStatus::AtUpper => (a > 0.0) == going_up,
                    _ => true,
                };
                if !ok {
                    continue;
                }
                let d = self.cost[j] - self.dot_col(&y, j);
                let dmag = match st {
                    VarStatus::AtLower => d.max(0.0),
                    VarStatus::AtUpper => (-d).max(0.0),
                    _ => d.abs(),
                };
                cands.push((j, a, dmag / a.abs(), (dmag + opt) / a.abs()));
            }
            if cands.is_empty() {
                if self.since_refactor > 0 {
                    self.refactor();
                    self.compute_xb();
                    continue;
                }
                return Ok(Outcome::Infeasible);
            }
            let harris = cands.iter().map(|c| c.3).fold(f64::INFINITY, f64::min);
            let &(q, _, step, _) = cands
                .iter()
                .filter(|c| c.2 <= harris)
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .expect("nonempty candidate list");

            if step <= opt {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let alpha = self.ftran(q);
            if alpha[r].abs() < piv {
                self.refactor();
                self.compute_xb();
                continue;
            }
            let target = if going_up { self.lb[jr] } else { self.ub[jr] };
            let dq = (self.x[jr] - target) / alpha[r];
            self.x[q] += dq;
            for k in 0..m {
                self.x[self.head[k]] -= dq * alpha[k];
            }
            self.x[jr] = target;
            self.status[jr] = if going_up || self.lb[jr] == self.ub[jr] {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            self.pivot_update(r, &alpha);
        }
    }

    fn into_solution(self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let y = if status == LpStatus::Optimal {
            self.phase2_duals()
        } else {
            vec![0.0; self.m]
        };
        let reduced_costs = (0..n)
            .map(|j| {
                if status == LpStatus::Optimal && self.status[j] != VarStatus::Basic {
                    self.cost[j] - self.dot_col(&y, j)
                } else {
                    0.0
                }
            })
            .collect();
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = match status {
            LpStatus::Optimal => self.lp.objective_value(&x),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        LpSolution {
            status,
            x,
            duals: y,
            reduced_costs,
            objective,
            basis: Basis {
                num_cols: n,
                num_rows: self.m,
                status: self.status,
                head: self.head,
            },
            iterations: self.iterations,
        }
    }
}

enum ColIter<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>),
    Unit(Option<usize>),
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            ColIter::Sparse(it) => it.next().copied(),
            ColIter::Unit(i) => i.take().map(|i| (i, 1.0)),
        }
    }
}

/// Deterministic value in [0, 1) that differs between neighbouring indices.
fn spread(j: usize) -> f64 {
    let h = (j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
    h as f64 / (1u64 << 53) as f64
}
