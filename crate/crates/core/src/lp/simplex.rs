//! Two-phase bounded-variable revised simplex with an explicit dense basis
//! inverse (column-major), Harris ratio test, and Bland's rule as the
//! anti-cycling fallback after a run of degenerate pivots.
//!
//! Every row gets a slack `a·x + s = b`: `<=` rows have `s in [0, inf)`,
//! `>=` rows `s in (-inf, 0]`, equality rows `s in [0, 0]`. Rows whose slack
//! cannot absorb the initial residual get an artificial variable, and phase 1
//! minimizes the sum of artificials.

use super::{LinearProgram, LpSolution, LpStatus, Relation, ROW_TOL};
use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const PHASE1_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    rhs: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    alpha_nz: Vec<usize>,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
}

pub(super) fn solve(program: &LinearProgram, start: Option<&[f64]>) -> Result<LpSolution> {
    let mut s = Simplex::new(program, start);
    let has_artificials = !s.art_row.is_empty();
    if has_artificials {
        let first_art = s.n + s.m;
        for v in 0..s.total() {
            s.cost[v] = if v >= first_art { 1.0 } else { 0.0 };
        }
        s.refactor()?;
        s.run()?;
        s.refactor()?;
        let infeasibility: f64 = (first_art..s.total()).map(|v| s.x[v].max(0.0)).sum();
        if infeasibility > PHASE1_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                values: s.x[..s.n].to_vec(),
                objective: f64::NAN,
                iterations: s.iterations,
            });
        }
        for v in first_art..s.total() {
            s.hi[v] = 0.0;
            if s.state[v] != VarState::Basic {
                s.x[v] = 0.0;
                s.state[v] = VarState::AtLower;
            }
        }
    }
    for v in 0..s.total() {
        s.cost[v] = if v < s.n { -program.objective[v] } else { 0.0 };
    }
    s.refactor()?;
    let outcome = s.run()?;
    if let Outcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            values: s.x[..s.n].to_vec(),
            objective: f64::INFINITY,
            iterations: s.iterations,
        });
    }
    s.refactor()?;
    let values = s.extract(program)?;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: program.objective_value(&values),
        values,
        iterations: s.iterations,
    })
}

impl Simplex {
    /// Structurals start nonbasic at the bound nearest `start` (lower bound
    /// when absent); slacks absorb what they can and artificials the rest.
    fn new(program: &LinearProgram, start: Option<&[f64]>) -> Self {
        let n = program.num_vars();
        let m = program.num_rows();

        let mut counts = vec![0usize; n + 1];
        for row in program.rows() {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut fill = counts;
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut rhs = Vec::with_capacity(m);
        for (r, row) in program.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_row[fill[j]] = r;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
            rhs.push(row.rhs);
        }

        let mut lo = Vec::with_capacity(n + 2 * m);
        let mut hi = Vec::with_capacity(n + 2 * m);
        let mut x = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for j in 0..n {
            let (l, h) = program.bounds(j);
            lo.push(l);
            hi.push(h);
            let up = start.is_some_and(|s| l < h && s[j] - l > h - s[j]);
            if up {
                x.push(h);
                state.push(VarState::AtUpper);
            } else {
                x.push(l);
                state.push(VarState::AtLower);
            }
        }

        // Residual of each row with every structural at its lower bound.
        let mut residual = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for k in col_start[j]..col_start[j + 1] {
                    residual[col_row[k]] -= col_val[k] * x[j];
                }
            }
        }

        let mut basis = vec![0; m];
        let mut art_row = Vec::new();
        let mut art_sign = Vec::new();
        for (r, row) in program.rows().iter().enumerate() {
            let (sl, sh) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo.push(sl);
            hi.push(sh);
            let res = residual[r];
            if res >= sl && res <= sh {
                x.push(res);
                state.push(VarState::Basic);
                basis[r] = n + r;
            } else {
                let at = res.clamp(sl, sh);
                x.push(at);
                state.push(if at == sl {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                });
                art_row.push(r);
                art_sign.push(if res > at { 1.0 } else { -1.0 });
            }
        }
        for (k, (&r, &sign)) in art_row.iter().zip(&art_sign).enumerate() {
            let v = n + m + k;
            lo.push(0.0);
            hi.push(f64::INFINITY);
            let slack_val = x[n + r];
            x.push((residual[r] - slack_val) * sign);
            state.push(VarState::Basic);
            basis[r] = v;
        }

        let total = n + m + art_row.len();
        let mut pos = vec![usize::MAX; total];
        for (r, &v) in basis.iter().enumerate() {
            pos[v] = r;
        }
        Self {
            m,
            n,
            col_start,
            col_row,
            col_val,
            art_row,
            art_sign,
            lo,
            hi,
            cost: vec![0.0; total],
            x,
            state,
            basis,
            pos,
            binv: vec![0.0; m * m],
            rhs,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            alpha_nz: Vec::with_capacity(m),
            iterations: 0,
            since_refactor: 0,
            max_iterations: 50 * (n + m) + 10_000,
        }
    }

    fn total(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    fn for_each_entry(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        if v < self.n {
            for k in self.col_start[v]..self.col_start[v + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else if v < self.n + self.m {
            f(v - self.n, 1.0);
        } else {
            let k = v - self.n - self.m;
            f(self.art_row[k], self.art_sign[k]);
        }
    }

    /// `alpha = B^-1 a_v`, recording the nonzero positions.
    fn ftran(&mut self, v: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        let mut col = Vec::with_capacity(4);
        self.for_each_entry(v, |r, a| col.push((r, a)));
        for (r, a) in col {
            let src = &self.binv[r * m..(r + 1) * m];
            for (dst, &b) in self.alpha.iter_mut().zip(src) {
                *dst += a * b;
            }
        }
        self.alpha_nz.clear();
        for (i, a) in self.alpha.iter_mut().enumerate() {
            if a.abs() > DROP_TOL {
                self.alpha_nz.push(i);
            } else {
                *a = 0.0;
            }
        }
    }

    /// Replaces the basic variable of row `r` using the current `alpha`.
    fn pivot_inverse(&mut self, r: usize) {
        let m = self.m;
        let piv = self.alpha[r];
        for c in 0..m {
            let col = &mut self.binv[c * m..(c + 1) * m];
            let v = col[r];
            if v == 0.0 {
                continue;
            }
            let v = v / piv;
            for &i in &self.alpha_nz {
                col[i] -= self.alpha[i] * v;
            }
            col[r] = v;
        }
    }

    /// Rebuilds `B^-1` from the current basis, then recomputes basic values and duals.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let n = self.n;
        self.binv.iter_mut().for_each(|b| *b = 0.0);
        for r in 0..m {
            self.binv[r * m + r] = 1.0;
        }
        let old_basis = std::mem::replace(&mut self.basis, vec![usize::MAX; m]);
        for &v in &old_basis {
            if (n..n + m).contains(&v) {
                self.basis[v - n] = v;
            }
        }
        for &v in &old_basis {
            if (n..n + m).contains(&v) {
                continue;
            }
            self.ftran(v);
            let mut best = usize::MAX;
            let mut best_abs = PIVOT_TOL;
            for &i in &self.alpha_nz {
                if self.basis[i] == usize::MAX && self.alpha[i].abs() > best_abs {
                    best = i;
                    best_abs = self.alpha[i].abs();
                }
            }
            if best == usize::MAX {
                // Dependent column: leave it out of the basis at its nearest bound.
                let at = self.x[v].clamp(self.lo[v], self.hi[v]);
                let to_lower = (at - self.lo[v]).abs() <= (self.hi[v] - at).abs();
                self.x[v] = if to_lower { self.lo[v] } else { self.hi[v] };
                if !self.x[v].is_finite() {
                    return Err(Error::Numerical(
                        "singular basis with an unbounded dependent variable".into(),
                    ));
                }
                self.state[v] = if to_lower {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                self.pos[v] = usize::MAX;
                continue;
            }
            self.pivot_inverse(best);
            self.basis[best] = v;
        }
        for r in 0..m {
            if self.basis[r] == usize::MAX {
                let s = n + r;
                self.basis[r] = s;
                self.state[s] = VarState::Basic;
            }
        }
        self.pos.iter_mut().for_each(|p| *p = usize::MAX);
        for (r, &v) in self.basis.iter().enumerate() {
            self.pos[v] = r;
        }
        self.recompute_primal();
        self.recompute_duals();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        let mut res = self.rhs.clone();
        for v in 0..self.total() {
            if self.state[v] != VarState::Basic && self.x[v] != 0.0 {
                let xv = self.x[v];
                self.for_each_entry(v, |r, a| res[r] -= a * xv);
            }
        }
        let mut xb = vec![0.0; m];
        for (c, &rc) in res.iter().enumerate() {
            if rc != 0.0 {
                let col = &self.binv[c * m..(c + 1) * m];
                for (dst, &b) in xb.iter_mut().zip(col) {
                    *dst += b * rc;
                }
            }
        }
        for (r, &v) in self.basis.iter().enumerate() {
            self.x[v] = xb[r];
        }
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&v| self.cost[v]).collect();
        for c in 0..m {
            let col = &self.binv[c * m..(c + 1) * m];
            self.y[c] = col.iter().zip(&cb).map(|(b, k)| b * k).sum();
        }
    }

    #[inline]
    fn reduced_cost(&self, v: usize) -> f64 {
        let mut d = self.cost[v];
        self.for_each_entry(v, |r, a| d -= self.y[r] * a);
        d
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for v in 0..self.total() {
            let st = self.state[v];
            if st == VarState::Basic || self.lo[v] == self.hi[v] {
                continue;
            }
            let d = self.reduced_cost(v);
            let dir = match st {
                VarState::AtLower if d < -DUAL_TOL => 1.0,
                VarState::AtUpper if d > DUAL_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((v, dir, d));
            }
            if best.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                best = Some((v, dir, d));
            }
        }
        best
    }

    fn run(&mut self) -> Result<Outcome> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let Some((q, dir, dq)) = self.price(bland) else {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    if self.price(bland).is_some() {
                        continue;
                    }
                }
                return Ok(Outcome::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::Numerical(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            self.ftran(q);

            // Harris pass 1: loosest step respecting bounds relaxed by PRIMAL_TOL.
            let mut relaxed = f64::INFINITY;
            for &r in &self.alpha_nz {
                let a = self.alpha[r];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let v = self.basis[r];
                let g = -dir * a;
                let lim = if g < 0.0 {
                    (self.x[v] - self.lo[v] + PRIMAL_TOL) / -g
                } else {
                    (self.hi[v] - self.x[v] + PRIMAL_TOL) / g
                };
                relaxed = relaxed.min(lim);
            }
            // Pass 2: among rows blocking within that step, the largest pivot
            // (or the smallest variable index under Bland's rule).
            let mut leave: Option<(usize, f64, bool)> = None;
            for &r in &self.alpha_nz {
                let a = self.alpha[r];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let v = self.basis[r];
                let g = -dir * a;
                let (lim, to_upper) = if g < 0.0 {
                    ((self.x[v] - self.lo[v]) / -g, false)
                } else {
                    ((self.hi[v] - self.x[v]) / g, true)
                };
                if !lim.is_finite() || lim > relaxed {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((br, blim, _)) => {
                        if bland {
                            lim < blim - 1e-12 || (lim <= blim + 1e-12 && v < self.basis[br])
                        } else {
                            a.abs() > self.alpha[br].abs()
                        }
                    }
                };
                if better {
                    leave = Some((r, lim, to_upper));
                }
            }

            let range = self.hi[q] - self.lo[q];
            let theta = match leave {
                Some((_, lim, _)) if lim.max(0.0) < range => lim.max(0.0),
                _ if range.is_finite() => {
                    // Bound flip: the entering variable reaches its other bound first.
                    self.apply_step(q, dir, range);
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.since_refactor += 1;
                    degenerate = 0;
                    bland = false;
                    continue;
                }
                _ => return Ok(Outcome::Unbounded),
            };
            let (r, _, to_upper) = leave.expect("leaving row chosen above");
            self.apply_step(q, dir, theta);
            let out = self.basis[r];
            self.x[out] = if to_upper { self.hi[out] } else { self.lo[out] };
            self.state[out] = if to_upper {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.pos[out] = usize::MAX;

            // Dual update: y += (d_q / alpha_r) * row r of the old inverse.
            let m = self.m;
            let f = dq / self.alpha[r];
            for c in 0..m {
                let b = self.binv[c * m + r];
                if b != 0.0 {
                    self.y[c] += f * b;
                }
            }
            self.pivot_inverse(r);
            self.basis[r] = q;
            self.pos[q] = r;
            self.state[q] = VarState::Basic;
            self.since_refactor += 1;

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for &r in &self.alpha_nz {
            let v = self.basis[r];
            self.x[v] -= dir * theta * self.alpha[r];
        }
    }

    fn extract(&self, program: &LinearProgram) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let (lo, hi) = program.bounds(j);
            let v = self.x[j];
            if v < lo - 1e-7 || v > hi + 1e-7 {
                return Err(Error::Numerical(format!(
                    "x{j} = {v} ends outside its bounds [{lo}, {hi}]"
                )));
            }
            values.push(v.clamp(lo, hi));
        }
        for (r, row) in program.rows().iter().enumerate() {
            let viol = row.violation(&values);
            if viol > ROW_TOL {
                return Err(Error::Numerical(format!(
                    "row {r} violated by {viol} at the final basis"
                )));
            }
        }
        Ok(values)
    }
}
