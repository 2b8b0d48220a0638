//! Dense bounded-variable simplex.
//!
//! Every row gets a `+1` slack whose bounds encode the relation
//! (`≤`: `[0, ∞)`, `≥`: `(−∞, 0]`, `=`: `[0, 0]`). Because the slack block
//! of the tableau is always `B⁻¹`, a right-hand-side change can be pushed
//! through an optimal tableau directly and repaired with the dual simplex;
//! [`DenseSimplex::resolve_with_rhs`] relies on that.
//!
//! Phase 1 adds an artificial only for rows whose slack cannot absorb the
//! initial residual. Pricing is Devex with a Harris ratio test; after a
//! run of degenerate pivots it switches to Bland's rule until the objective
//! moves again. Bland cannot cycle inside a degenerate stretch and every
//! other pivot strictly improves, so the method terminates.

use super::{LinearProgram, LpSolution, LpStatus, Relation, Sense, FEAS_TOL};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub bland_after: usize,
    /// Hard cap on pivots per phase, as a multiple of `rows + cols`.
    pub iteration_factor: usize,
    /// Start in Bland mode (used by tests on degenerate problems).
    pub force_bland: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { bland_after: 50, iteration_factor: 20, force_bland: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColState {
    Basic(usize),
    Lower,
    Upper,
    /// Free nonbasic column held at zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
    Stalled,
}

/// Optimal simplex state that can be re-solved after right-hand-side changes.
#[derive(Debug, Clone)]
pub struct DenseSimplex {
    m: usize,
    n: usize,
    ncols: usize,
    tab: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Minimization-form cost per column (artificials cost 0 in phase 2).
    cost: Vec<f64>,
    dj: Vec<f64>,
    rhs: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    /// Row and sign of each artificial column, in column order.
    artificials: Vec<(usize, f64)>,
    opts: SimplexOptions,
    iterations: usize,
    optimal: bool,
}

impl DenseSimplex {
    /// Cold solve. The returned state can be reused with
    /// [`resolve_with_rhs`](Self::resolve_with_rhs) when the status is optimal.
    pub fn solve(lp: &LinearProgram, opts: SimplexOptions) -> (Self, LpSolution) {
        let mut s = Self::setup(lp, opts);
        let sol = s.run_cold(lp);
        (s, sol)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn setup(lp: &LinearProgram, opts: SimplexOptions) -> Self {
        let m = lp.num_constraints();
        let n = lp.num_vars();
        let sign: f64 = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let rows: Vec<Vec<(usize, f64)>> = lp
            .constraints
            .iter()
            .map(|c| {
                let mut r: Vec<(usize, f64)> = c.coeffs.iter().map(|&(v, a)| (v.0, a)).collect();
                r.sort_by_key(|e| e.0);
                // merge duplicates
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
                for (j, a) in r {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += a,
                        _ => merged.push((j, a)),
                    }
                }
                merged
            })
            .collect();
        let mut lower: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = lp.variables.iter().map(|v| v.upper).collect();
        let mut cost: Vec<f64> = lp.objective.iter().map(|c| sign * c).collect();
        for c in &lp.constraints {
            let (l, u) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
            cost.push(0.0);
        }
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n + m {
            state.push(nonbasic_state(lower[j], upper[j]));
        }
        Self {
            m,
            n,
            ncols: n + m,
            tab: Vec::new(),
            xb: vec![0.0; m],
            basis: vec![0; m],
            state,
            lower,
            upper,
            cost,
            dj: Vec::new(),
            rhs: lp.constraints.iter().map(|c| c.rhs).collect(),
            rows,
            artificials: Vec::new(),
            opts,
            iterations: 0,
            optimal: false,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::Lower => self.lower[j],
            ColState::Upper => self.upper[j],
            ColState::Zero | ColState::Basic(_) => 0.0,
        }
    }

    fn run_cold(&mut self, lp: &LinearProgram) -> LpSolution {
        let m = self.m;
        let n = self.n;
        // Residual with structurals at their starting bounds.
        let mut resid = self.rhs.clone();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                let v = match self.state[j] {
                    ColState::Lower => self.lower[j],
                    ColState::Upper => self.upper[j],
                    _ => 0.0,
                };
                resid[i] -= a * v;
            }
        }
        let mut art_rows = Vec::new();
        let mut art_sign = Vec::new();
        for i in 0..m {
            let s = n + i;
            let (l, u) = (self.lower[s], self.upper[s]);
            if resid[i] >= l - PRIMAL_TOL && resid[i] <= u + PRIMAL_TOL {
                self.state[s] = ColState::Basic(i);
                self.basis[i] = s;
                self.xb[i] = resid[i];
            } else {
                let v = if resid[i] < l { l } else { u };
                self.state[s] = if v == l { ColState::Lower } else { ColState::Upper };
                let r = resid[i] - v;
                art_rows.push(i);
                art_sign.push(if r >= 0.0 { 1.0 } else { -1.0 });
                self.xb[i] = r.abs();
            }
        }
        let n_art = art_rows.len();
        self.ncols = n + m + n_art;
        let nc = self.ncols;
        self.tab = vec![0.0; m * nc];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                self.tab[i * nc + j] = a;
            }
            self.tab[i * nc + n + i] = 1.0;
        }
        for (k, (&i, &sg)) in art_rows.iter().zip(&art_sign).enumerate() {
            let col = n + m + k;
            if sg < 0.0 {
                for v in &mut self.tab[i * nc..(i + 1) * nc] {
                    *v = -*v;
                }
            }
            self.tab[i * nc + col] = 1.0;
            self.basis[i] = col;
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.cost.push(0.0);
            self.state.push(ColState::Basic(i));
            self.artificials.push((i, sg));
        }

        if n_art > 0 {
            let mut phase1 = vec![0.0; nc];
            for c in &mut phase1[n + m..] {
                *c = 1.0;
            }
            self.price(&phase1);
            match self.primal() {
                Outcome::Optimal => {}
                Outcome::Unbounded | Outcome::Infeasible => {
                    return LpSolution::failed(LpStatus::NumericFailure, self.iterations)
                }
                Outcome::Stalled => return LpSolution::failed(LpStatus::NumericFailure, self.iterations),
            }
            let infeas: f64 = (0..m).filter(|&i| self.basis[i] >= n + m).map(|i| self.xb[i]).sum();
            let bscale = 1.0f64.max(self.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            if infeas > FEAS_TOL * bscale {
                return LpSolution::failed(LpStatus::Infeasible, self.iterations);
            }
            for j in n + m..nc {
                self.upper[j] = 0.0;
                if self.state[j] != ColState::Lower && !matches!(self.state[j], ColState::Basic(_)) {
                    self.state[j] = ColState::Lower;
                }
            }
            self.drive_out_artificials();
        }

        let cost = self.cost.clone();
        self.price(&cost);
        match self.primal() {
            Outcome::Optimal => {}
            Outcome::Unbounded => return LpSolution::failed(LpStatus::Unbounded, self.iterations),
            Outcome::Infeasible | Outcome::Stalled => {
                return LpSolution::failed(LpStatus::NumericFailure, self.iterations)
            }
        }
        self.finish(lp)
    }

    /// Re-solves after replacing the right-hand sides, starting from the
    /// current optimal basis. Falls back to a cold solve if the warm path
    /// cannot finish.
    pub fn resolve_with_rhs(&mut self, lp: &LinearProgram) -> LpSolution {
        if !self.optimal || lp.num_constraints() != self.m || lp.num_vars() != self.n {
            let (fresh, sol) = Self::solve(lp, self.opts);
            *self = fresh;
            return sol;
        }
        let nc = self.ncols;
        for (k, c) in lp.constraints.iter().enumerate() {
            let delta = c.rhs - self.rhs[k];
            if delta != 0.0 {
                let col = self.n + k;
                for i in 0..self.m {
                    let a = self.tab[i * nc + col];
                    if a != 0.0 {
                        self.xb[i] += a * delta;
                    }
                }
                self.rhs[k] = c.rhs;
            }
        }
        match self.dual() {
            Outcome::Optimal => {
                let sol = self.finish(lp);
                if sol.is_optimal() {
                    return sol;
                }
            }
            // Infeasibility is confirmed by phase 1 of a cold solve.
            Outcome::Infeasible | Outcome::Unbounded | Outcome::Stalled => {}
        }
        let (fresh, sol) = Self::solve(lp, self.opts);
        *self = fresh;
        sol
    }

    fn finish(&mut self, lp: &LinearProgram) -> LpSolution {
        let mut x = self.primal_values();
        if lp.max_violation(&x) > FEAS_TOL {
            // Accumulated round-off: rebuild the tableau from the basis once.
            if self.reinvert() {
                let cost = self.cost.clone();
                self.price(&cost);
                if self.primal() == Outcome::Optimal {
                    x = self.primal_values();
                }
            }
            if lp.max_violation(&x) > FEAS_TOL {
                self.optimal = false;
                return LpSolution::failed(LpStatus::NumericFailure, self.iterations);
            }
        }
        self.optimal = true;
        LpSolution {
            status: LpStatus::Optimal,
            objective_value: lp.objective_at(&x),
            primal: x,
            iterations: self.iterations,
        }
    }

    fn primal_values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| match self.state[j] {
                ColState::Basic(i) => self.xb[i],
                _ => self.nonbasic_value(j),
            })
            .collect()
    }

    /// Reduced costs `d = c − c_B B⁻¹ A` from scratch.
    fn price(&mut self, cost: &[f64]) {
        let nc = self.ncols;
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * nc..(i + 1) * nc];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        self.dj = d;
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let piv = self.tab[r * nc + q];
        let inv = 1.0 / piv;
        let mut nz = Vec::new();
        {
            let row = &mut self.tab[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        nz.push(j);
                    }
                }
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        let eliminate = |target: &mut [f64]| {
            let f = target[q];
            if f != 0.0 {
                for &j in &nz {
                    target[j] -= f * prow[j];
                }
                target[q] = 0.0;
            }
        };
        for chunk in before.chunks_exact_mut(nc) {
            eliminate(chunk);
        }
        for chunk in after.chunks_exact_mut(nc) {
            eliminate(chunk);
        }
        let f = self.dj[q];
        if f != 0.0 {
            for &j in &nz {
                self.dj[j] -= f * prow[j];
            }
            self.dj[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.state[q] = ColState::Basic(r);
        // Caller sets the leaving column's nonbasic state.
        if self.state[leaving] == ColState::Basic(r) {
            self.state[leaving] = nonbasic_state(self.lower[leaving], self.upper[leaving]);
        }
    }

    /// Entering column: first eligible under Bland, otherwise the largest
    /// `d_j² / w_j` with Devex reference weights `w`.
    fn entering(&self, bland: bool, weights: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.is_fixed(j) {
                continue;
            }
            let d = self.dj[j];
            let dir = match self.state[j] {
                ColState::Basic(_) => continue,
                ColState::Lower if d < -DUAL_TOL => 1.0,
                ColState::Upper if d > DUAL_TOL => -1.0,
                ColState::Zero if d.abs() > DUAL_TOL => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d * d / weights[j];
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn primal(&mut self) -> Outcome {
        let nc = self.ncols;
        let limit = self.opts.iteration_factor * (self.m + nc) + 100;
        let mut bland = self.opts.force_bland;
        let mut degenerate = 0usize;
        let mut count = 0usize;
        let mut weights = vec![1.0; nc];
        loop {
            count += 1;
            if count > limit {
                return Outcome::Stalled;
            }
            let Some((q, dir)) = self.entering(bland, &weights) else {
                return Outcome::Optimal;
            };
            // Harris two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                let a = self.tab[i * nc + q];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let b = self.basis[i];
                let lim = if rate < 0.0 {
                    if self.lower[b].is_finite() {
                        (self.xb[i] - self.lower[b] + PRIMAL_TOL) / -rate
                    } else {
                        continue;
                    }
                } else if self.upper[b].is_finite() {
                    (self.upper[b] - self.xb[i] + PRIMAL_TOL) / rate
                } else {
                    continue;
                };
                // A basic value already past its bound (round-off) blocks
                // at zero rather than at a negative step.
                theta_max = theta_max.min(lim.max(0.0));
            }
            let flip = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None;
            if theta_max.is_finite() {
                let mut best_alpha = 0.0;
                let mut best_ratio = f64::INFINITY;
                for i in 0..self.m {
                    let a = self.tab[i * nc + q];
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let rate = -dir * a;
                    let b = self.basis[i];
                    let ratio = if rate < 0.0 {
                        if !self.lower[b].is_finite() {
                            continue;
                        }
                        (self.xb[i] - self.lower[b]) / -rate
                    } else {
                        if !self.upper[b].is_finite() {
                            continue;
                        }
                        (self.upper[b] - self.xb[i]) / rate
                    };
                    let ratio = ratio.max(0.0);
                    if bland {
                        let better = ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && leave.is_some_and(|(r, _)| b < self.basis[r]));
                        if better || leave.is_none() {
                            best_ratio = ratio;
                            leave = Some((i, ratio));
                        }
                    } else if ratio <= theta_max && a.abs() > best_alpha {
                        best_alpha = a.abs();
                        leave = Some((i, ratio));
                    }
                }
            }
            let step = leave.map_or(f64::INFINITY, |(_, t)| t);
            if flip.is_finite() && flip <= step {
                // Bound flip, no basis change.
                for i in 0..self.m {
                    let a = self.tab[i * nc + q];
                    if a != 0.0 {
                        self.xb[i] -= dir * a * flip;
                    }
                }
                self.state[q] = if dir > 0.0 { ColState::Upper } else { ColState::Lower };
                degenerate = 0;
                bland = self.opts.force_bland;
                self.iterations += 1;
                continue;
            }
            let Some((r, theta)) = leave else {
                return Outcome::Unbounded;
            };
            let entering_value = self.nonbasic_value(q) + dir * theta;
            for i in 0..self.m {
                let a = self.tab[i * nc + q];
                if a != 0.0 {
                    self.xb[i] -= dir * a * theta;
                }
            }
            let b = self.basis[r];
            let rate = -dir * self.tab[r * nc + q];
            let leaving_state = if rate < 0.0 { ColState::Lower } else { ColState::Upper };
            self.pivot(r, q);
            self.state[b] = leaving_state;
            self.xb[r] = entering_value;
            self.iterations += 1;
            let wq = weights[q];
            for (j, &a) in self.tab[r * nc..(r + 1) * nc].iter().enumerate() {
                if a != 0.0 && !matches!(self.state[j], ColState::Basic(_)) {
                    weights[j] = weights[j].max(a * a * wq);
                }
            }
            weights[b] = weights[b].max(1.0);
            if theta < 1e-12 {
                degenerate += 1;
                if degenerate >= self.opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = self.opts.force_bland;
            }
        }
    }

    fn dual(&mut self) -> Outcome {
        let nc = self.ncols;
        let limit = self.opts.iteration_factor * (self.m + nc) + 100;
        let mut count = 0usize;
        loop {
            count += 1;
            if count > limit {
                return Outcome::Stalled;
            }
            // Leaving row: largest violation relative to the norm of its
            // row of B⁻¹ (the slack block), i.e. dual steepest edge.
            let mut leave: Option<(usize, f64, f64)> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let b = self.basis[i];
                let (l, u) = (self.lower[b], self.upper[b]);
                let scale = 1.0f64.max(self.xb[i].abs());
                let (viol, target, side) = if self.xb[i] < l - PRIMAL_TOL * scale {
                    (l - self.xb[i], l, -1.0)
                } else if self.xb[i] > u + PRIMAL_TOL * scale {
                    (self.xb[i] - u, u, 1.0)
                } else {
                    continue;
                };
                let inv = &self.tab[i * nc + self.n..i * nc + nc];
                let weight: f64 = inv.iter().map(|v| v * v).sum();
                let score = viol * viol / weight.max(1e-12);
                if score > worst {
                    worst = score;
                    leave = Some((i, target, side));
                }
            }
            let Some((r, target, side)) = leave else {
                return Outcome::Optimal;
            };
            // side = -1: basic below lower, must increase.
            let row = &self.tab[r * nc..(r + 1) * nc];
            let mut best: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0;
            for (j, &a) in row.iter().enumerate() {
                if a.abs() <= PIVOT_TOL || self.is_fixed(j) {
                    continue;
                }
                let ok = match self.state[j] {
                    ColState::Basic(_) => false,
                    ColState::Lower => (side < 0.0 && a < 0.0) || (side > 0.0 && a > 0.0),
                    ColState::Upper => (side < 0.0 && a > 0.0) || (side > 0.0 && a < 0.0),
                    ColState::Zero => true,
                };
                if !ok {
                    continue;
                }
                let ratio = self.dj[j].abs() / a.abs();
                if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && a.abs() > best_alpha) {
                    best_ratio = ratio;
                    best_alpha = a.abs();
                    best = Some(j);
                }
            }
            let Some(q) = best else {
                return Outcome::Infeasible;
            };
            let alpha = self.tab[r * nc + q];
            let delta = (self.xb[r] - target) / alpha;
            let entering_value = self.nonbasic_value(q) + delta;
            for i in 0..self.m {
                let a = self.tab[i * nc + q];
                if a != 0.0 {
                    self.xb[i] -= a * delta;
                }
            }
            let b = self.basis[r];
            self.pivot(r, q);
            self.state[b] = if side < 0.0 { ColState::Lower } else { ColState::Upper };
            self.xb[r] = entering_value;
            self.iterations += 1;
        }
    }

    fn drive_out_artificials(&mut self) {
        let nc = self.ncols;
        let first_art = self.n + self.m;
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let row = &self.tab[r * nc..(r + 1) * nc];
            let mut best: Option<usize> = None;
            let mut best_abs = 1e-7;
            for (j, &a) in row[..first_art].iter().enumerate() {
                if !matches!(self.state[j], ColState::Basic(_)) && a.abs() > best_abs {
                    best_abs = a.abs();
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                // Degenerate pivot: the artificial sits at ~0.
                let value = self.nonbasic_value(q);
                let shift = self.xb[r] / self.tab[r * nc + q];
                for i in 0..self.m {
                    let a = self.tab[i * nc + q];
                    if a != 0.0 {
                        self.xb[i] -= a * shift;
                    }
                }
                let b = self.basis[r];
                self.pivot(r, q);
                self.state[b] = ColState::Lower;
                self.xb[r] = value + shift;
            }
            // Otherwise the row is redundant; its artificial stays basic at 0.
        }
    }

    /// Rebuilds tableau and basic values from the original rows via
    /// Gauss-Jordan on the basis matrix. Returns false if singular.
    fn reinvert(&mut self) -> bool {
        let m = self.m;
        let nc = self.ncols;
        let first_art = self.n + self.m;
        // Original column entries, with artificial signs recovered from
        // the phase-1 construction (artificials are only ever ±e_i).
        let mut a_full = vec![0.0; m * nc];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                a_full[i * nc + j] = a;
            }
            a_full[i * nc + self.n + i] = 1.0;
        }
        for (k, &(i, sg)) in self.artificials.iter().enumerate() {
            a_full[i * nc + first_art + k] = sg;
        }
        let mut bmat = vec![0.0; m * m];
        for (k, &col) in self.basis.iter().enumerate() {
            for i in 0..m {
                bmat[i * m + k] = a_full[i * nc + col];
            }
        }
        // Augment [B | A | b']
        let nb = self.nonbasic_rhs();
        let width = nc + 1;
        let mut aug = vec![0.0; m * width];
        for i in 0..m {
            aug[i * width..i * width + nc].copy_from_slice(&a_full[i * nc..(i + 1) * nc]);
            aug[i * width + nc] = nb[i];
        }
        for k in 0..m {
            let p = (k..m).max_by(|&a, &b| bmat[a * m + k].abs().total_cmp(&bmat[b * m + k].abs())).unwrap();
            if bmat[p * m + k].abs() < 1e-12 {
                return false;
            }
            if p != k {
                for c in 0..m {
                    bmat.swap(k * m + c, p * m + c);
                }
                for c in 0..width {
                    aug.swap(k * width + c, p * width + c);
                }
            }
            let inv = 1.0 / bmat[k * m + k];
            for c in 0..m {
                bmat[k * m + c] *= inv;
            }
            for c in 0..width {
                aug[k * width + c] *= inv;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = bmat[i * m + k];
                if f != 0.0 {
                    for c in 0..m {
                        bmat[i * m + c] -= f * bmat[k * m + c];
                    }
                    for c in 0..width {
                        aug[i * width + c] -= f * aug[k * width + c];
                    }
                }
            }
        }
        for i in 0..m {
            self.tab[i * nc..(i + 1) * nc].copy_from_slice(&aug[i * width..i * width + nc]);
            self.xb[i] = aug[i * width + nc];
        }
        true
    }

    /// `b − A_N x_N` over original columns.
    fn nonbasic_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                if !matches!(self.state[j], ColState::Basic(_)) {
                    r[i] -= a * self.nonbasic_value(j);
                }
            }
            let s = self.n + i;
            if !matches!(self.state[s], ColState::Basic(_)) {
                r[i] -= self.nonbasic_value(s);
            }
        }
        r
    }
}

fn nonbasic_state(l: f64, u: f64) -> ColState {
    if l.is_finite() {
        ColState::Lower
    } else if u.is_finite() {
        ColState::Upper
    } else {
        ColState::Zero
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LinearProgram, Relation, Sense};

    fn degenerate_lp() -> LinearProgram {
        // Beale's cycling example for Dantzig pricing with naive ties.
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x: Vec<_> = (0..4).map(|i| lp.add_var(format!("x{i}"), 0.0, f64::INFINITY, 0.0)).collect();
        lp.objective = vec![-0.75, 150.0, -0.02, 6.0];
        lp.add_constraint(vec![(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)], Relation::Le, 0.0);
        lp.add_constraint(vec![(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)], Relation::Le, 0.0);
        lp.add_constraint(vec![(x[2], 1.0)], Relation::Le, 1.0);
        lp
    }

    #[test]
    fn beale_terminates_with_and_without_bland() {
        let lp = degenerate_lp();
        for force_bland in [false, true] {
            let (_, s) = DenseSimplex::solve(&lp, SimplexOptions { force_bland, bland_after: 1, ..Default::default() });
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective_value + 0.05).abs() < 1e-9, "{}", s.objective_value);
        }
    }

    #[test]
    fn warm_rhs_matches_cold() {
        // min x + 2y, x + y >= b0, x <= b1, y <= 10
        let build = |b0: f64, b1: f64| {
            let mut lp = LinearProgram::new(Sense::Minimize);
            let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
            let y = lp.add_var("y", 0.0, 10.0, 2.0);
            lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Ge, b0);
            lp.add_constraint(vec![(x, 1.0)], Relation::Le, b1);
            lp
        };
        let (mut warm, s0) = DenseSimplex::solve(&build(3.0, 5.0), SimplexOptions::default());
        assert!((s0.objective_value - 3.0).abs() < 1e-9);
        for (b0, b1) in [(7.0, 5.0), (1.0, 0.5), (12.0, 4.0), (20.0, 4.0)] {
            let lp = build(b0, b1);
            let w = warm.resolve_with_rhs(&lp);
            let (_, c) = DenseSimplex::solve(&lp, SimplexOptions::default());
            assert_eq!(w.status, c.status);
            if c.is_optimal() {
                assert!((w.objective_value - c.objective_value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 4.0);
        lp.add_constraint(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 8.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 1.0);
        let (mut st, s) = DenseSimplex::solve(&lp, SimplexOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 4.0).abs() < 1e-9);
        lp.constraints[0].rhs = 6.0;
        lp.constraints[1].rhs = 12.0;
        let w = st.resolve_with_rhs(&lp);
        assert_eq!(w.status, LpStatus::Optimal);
        assert!((w.objective_value - 6.0).abs() < 1e-9);
    }
}
