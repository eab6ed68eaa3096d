//! Bounded-variable linear programs and a primal simplex solver.
//!
//! Every optimal solution returned by [`solve_lp`] is a basic feasible
//! solution: nonbasic variables sit exactly on a bound, so the number of
//! variables strictly inside their bounds never exceeds the rank of the tight
//! rows. [`vertex_check`] measures that property independently of the solver.

mod simplex;

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A value is treated as integral when it is this close to 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Distance below which a row or bound counts as tight.
pub const TIGHT_TOL: f64 = 1e-7;
/// Allowed bound violation of a returned optimum.
pub const BOUND_TOL: f64 = 1e-9;
/// Allowed row violation of a returned optimum.
pub const ROW_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// How far `values` are from satisfying the row; 0 when satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Maximize `objective · x` subject to `lower <= x <= upper` and the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    /// Program over `num_vars` variables in `[0, 1]` with a zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![1.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn is_fixed(&self, var: usize) -> bool {
        self.lower[var] == self.upper[var]
    }

    fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.num_vars() {
            return Err(Error::IndexOutOfRange {
                what: "variable",
                index: var,
                len: self.num_vars(),
            });
        }
        Ok(())
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) -> Result<()> {
        self.check_var(var)?;
        if !coeff.is_finite() {
            return Err(Error::MalformedProgram(format!(
                "objective coefficient of x{var} is not finite"
            )));
        }
        self.objective[var] = coeff;
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> Result<()> {
        self.check_var(var)?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::MalformedProgram(format!(
                "bounds [{lo}, {hi}] of x{var} are not an ordered finite interval"
            )));
        }
        self.lower[var] = lo;
        self.upper[var] = hi;
        Ok(())
    }

    /// Appends a row and returns its index. Duplicate variable entries are summed.
    pub fn add_row(
        &mut self,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        if !rhs.is_finite() {
            return Err(Error::MalformedProgram(
                "row right-hand side is not finite".into(),
            ));
        }
        let mut coeffs = coeffs;
        for &(j, a) in &coeffs {
            self.check_var(j)?;
            if !a.is_finite() {
                return Err(Error::MalformedProgram(format!(
                    "coefficient of x{j} is not finite"
                )));
            }
        }
        coeffs.sort_by_key(|&(j, _)| j);
        coeffs.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    /// Pins `var` to 0 or 1; the value must lie within the current bounds.
    pub fn fix_variable(&mut self, var: usize, value: u8) -> Result<()> {
        self.check_var(var)?;
        let v = match value {
            0 => 0.0,
            1 => 1.0,
            _ => {
                return Err(Error::Precondition(format!(
                    "x{var} can only be fixed to 0 or 1, got {value}"
                )))
            }
        };
        if v < self.lower[var] || v > self.upper[var] {
            return Err(Error::Precondition(format!(
                "cannot fix x{var} = {value} outside its bounds [{}, {}]",
                self.lower[var], self.upper[var]
            )));
        }
        self.lower[var] = v;
        self.upper[var] = v;
        Ok(())
    }

    /// Removes a row; later rows shift down by one.
    pub fn drop_row(&mut self, row: usize) -> Result<Row> {
        if row >= self.rows.len() {
            return Err(Error::IndexOutOfRange {
                what: "row",
                index: row,
                len: self.rows.len(),
            });
        }
        Ok(self.rows.remove(row))
    }

    /// Removes every row whose index is in `rows` (sorted or not).
    pub fn drop_rows(&mut self, rows: &[usize]) -> Result<()> {
        let mut drop = vec![false; self.rows.len()];
        for &r in rows {
            if r >= self.rows.len() {
                return Err(Error::IndexOutOfRange {
                    what: "row",
                    index: r,
                    len: self.rows.len(),
                });
            }
            drop[r] = true;
        }
        let mut idx = 0;
        self.rows.retain(|_| {
            let keep = !drop[idx];
            idx += 1;
            keep
        });
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Human-readable dump in the CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        fn term(out: &mut String, first: &mut bool, a: f64, j: usize) {
            if *first {
                let _ = write!(out, " {a} x{j}");
            } else if a < 0.0 {
                let _ = write!(out, " - {} x{j}", -a);
            } else {
                let _ = write!(out, " + {a} x{j}");
            }
            *first = false;
        }
        let mut out = String::from("Maximize\n obj:");
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, &mut first, c, j);
            }
        }
        if first {
            out.push_str(" 0 x0");
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            let mut first = true;
            for &(j, a) in &row.coeffs {
                term(&mut out, &mut first, a, j);
            }
            if first {
                out.push_str(" 0 x0");
            }
            let _ = writeln!(out, " {} {}", row.relation.symbol(), row.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            if self.lower[j] == self.upper[j] {
                let _ = writeln!(out, " x{j} = {}", self.lower[j]);
            } else {
                let _ = writeln!(out, " {} <= x{j} <= {}", self.lower[j], self.upper[j]);
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves the program to an optimal vertex, or reports infeasibility.
///
/// Numerical breakdown (singular bases that cannot be repaired, iteration
/// limits, or a final point that fails the feasibility re-check) is an
/// [`Error::Numerical`], never an `Infeasible` status.
pub fn solve_lp(program: &LinearProgram) -> Result<LpSolution> {
    simplex::solve(program, None)
}

/// [`solve_lp`] starting every variable at the bound nearest to `start`.
/// The optimum value is the same; a good start only saves pivots.
pub fn solve_lp_from(program: &LinearProgram, start: &[f64]) -> Result<LpSolution> {
    if start.len() != program.num_vars() {
        return Err(Error::ShapeMismatch {
            expected: (program.num_vars(), 1),
            found: (start.len(), 1),
        });
    }
    simplex::solve(program, Some(start))
}

/// Integrality in the sense used by iterative rounding.
pub fn is_integral_value(v: f64) -> bool {
    v.abs() <= INTEGRALITY_TOL || (v - 1.0).abs() <= INTEGRALITY_TOL
}

/// Count of fractional variables against the rank of the tight rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexReport {
    /// Variables further than [`TIGHT_TOL`] from both bounds.
    pub fractional: usize,
    /// Rows satisfied with equality within [`TIGHT_TOL`].
    pub tight_rows: usize,
    /// Rank of the tight rows restricted to the fractional columns.
    pub tight_rank: usize,
}

impl VertexReport {
    pub fn holds(&self) -> bool {
        self.fractional <= self.tight_rank
    }
}

/// Checks that `values` is a vertex: the tight rows, restricted to the
/// fractional variables, must have full column rank.
pub fn vertex_check(program: &LinearProgram, values: &[f64]) -> VertexReport {
    let n = program.num_vars();
    let mut col_of = vec![usize::MAX; n];
    let mut fractional = 0;
    for j in 0..n {
        let (lo, hi) = program.bounds(j);
        if values[j] - lo > TIGHT_TOL && hi - values[j] > TIGHT_TOL {
            col_of[j] = fractional;
            fractional += 1;
        }
    }
    let mut tight_rows = 0;
    let mut dense: Vec<Vec<f64>> = Vec::new();
    for row in program.rows() {
        let tight = match row.relation {
            Relation::Eq => true,
            _ => (row.activity(values) - row.rhs).abs() <= TIGHT_TOL,
        };
        if !tight {
            continue;
        }
        tight_rows += 1;
        let mut r = vec![0.0; fractional];
        let mut any = false;
        for &(j, a) in &row.coeffs {
            if col_of[j] != usize::MAX && a != 0.0 {
                r[col_of[j]] = a;
                any = true;
            }
        }
        if any {
            dense.push(r);
        }
    }
    VertexReport {
        fractional,
        tight_rows,
        tight_rank: rank(dense, fractional),
    }
}

fn rank(mut m: Vec<Vec<f64>>, cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        if rank == m.len() {
            break;
        }
        let (best, val) = (rank..m.len())
            .map(|r| (r, m[r][c].abs()))
            .fold((rank, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= 1e-9 {
            continue;
        }
        m.swap(rank, best);
        let pivot = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            let f = row[c] / pivot[c];
            if f != 0.0 {
                for k in c..cols {
                    row[k] -= f * pivot[k];
                }
            }
        }
        rank += 1;
    }
    rank
}
