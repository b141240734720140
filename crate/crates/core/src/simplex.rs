//! Two-phase revised simplex with Bland's pivoting rule.
//!
//! Solves `min cᵀx` subject to equality rows, `≤` rows and `x ≥ 0`. The
//! problems here are small (tens to a few hundred columns), so the basis is
//! refactorized from scratch at every iteration. This keeps basic solutions
//! accurate on the highly degenerate programs the mechanism design produces.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint<T> {
    pub name: String,
    /// Dense coefficients, one per variable.
    pub coefficients: Vec<T>,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram<T> {
    pub variable_names: Vec<String>,
    pub objective: Vec<T>,
    pub equalities: Vec<Constraint<T>>,
    pub inequalities: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub equality_duals: Vec<T>,
    pub inequality_duals: Vec<T>,
    /// `|cᵀx − bᵀy|` for the recovered duals.
    pub duality_gap: T,
    /// Most negative reduced cost, as a nonnegative number.
    pub dual_infeasibility: T,
    /// Largest constraint or bound violation of `x`.
    pub primal_infeasibility: T,
    pub iterations: usize,
    /// Equality rows dropped as linearly dependent.
    pub redundant_rows: Vec<usize>,
}

impl<T: Real> LinearProgram<T> {
    pub fn new(variable_names: Vec<String>) -> Self {
        let n = variable_names.len();
        Self {
            variable_names,
            objective: vec![T::zero(); n],
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn variable_count(&self) -> usize {
        self.variable_names.len()
    }

    pub fn add_equality(&mut self, name: impl Into<String>, coefficients: Vec<T>, rhs: T) {
        self.equalities.push(Constraint {
            name: name.into(),
            coefficients,
            rhs,
        });
    }

    pub fn add_inequality(&mut self, name: impl Into<String>, coefficients: Vec<T>, rhs: T) {
        self.inequalities.push(Constraint {
            name: name.into(),
            coefficients,
            rhs,
        });
    }

    /// Checks row lengths and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.variable_count();
        if self.objective.len() != n {
            return Err(Error::LengthMismatch(self.objective.len(), n));
        }
        for c in self.equalities.iter().chain(&self.inequalities) {
            if c.coefficients.len() != n {
                return Err(Error::LengthMismatch(c.coefficients.len(), n));
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "constraint {} has a non-finite entry",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ {} variables", self.variable_count());
        out.push_str("Minimize\n obj:");
        self.write_terms(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for c in &self.equalities {
            let _ = write!(out, " {}:", c.name);
            self.write_terms(&mut out, &c.coefficients);
            let _ = writeln!(out, " = {}", c.rhs);
        }
        for c in &self.inequalities {
            let _ = write!(out, " {}:", c.name);
            self.write_terms(&mut out, &c.coefficients);
            let _ = writeln!(out, " <= {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for name in &self.variable_names {
            let _ = writeln!(out, " {name} >= 0");
        }
        out.push_str("End\n");
        out
    }

    fn write_terms(&self, out: &mut String, coefficients: &[T]) {
        let mut any = false;
        for (name, &v) in self.variable_names.iter().zip(coefficients) {
            if v == T::zero() {
                continue;
            }
            let sign = if v < T::zero() { '-' } else { '+' };
            let _ = write!(out, " {sign} {} {name}", v.abs());
            any = true;
        }
        if !any {
            if let Some(name) = self.variable_names.first() {
                let _ = write!(out, " 0 {name}");
            }
        }
    }
}

/// Revised simplex state over a dense standardized system `A x = b`,
/// `b ≥ 0`. The basis is refactorized every iteration, so round-off does
/// not accumulate across pivots.
struct Revised<'a, T> {
    /// Column-major standardized matrix, including artificial columns.
    columns: &'a [Vec<T>],
    rhs: &'a [T],
    active_rows: Vec<usize>,
    basis: Vec<usize>,
}

struct Factored<T> {
    lu: Lu<T>,
    x_b: Vec<T>,
}

impl<T: Real> Revised<'_, T> {
    fn column(&self, j: usize) -> Vec<T> {
        self.active_rows
            .iter()
            .map(|&i| self.columns[j][i])
            .collect()
    }

    fn factor(&self) -> Result<Factored<T>> {
        let n = self.active_rows.len();
        let b = Matrix::from_fn(n, n, |i, k| {
            self.columns[self.basis[k]][self.active_rows[i]]
        });
        let lu = Lu::new(&b)?;
        let b_rhs: Vec<T> = self.active_rows.iter().map(|&i| self.rhs[i]).collect();
        let x_b = lu.solve(&b_rhs);
        Ok(Factored { lu, x_b })
    }

    /// Bland's rule iterations until optimality. `allowed` masks columns
    /// that may enter.
    fn run(
        &mut self,
        costs: &[T],
        allowed: &[bool],
        iterations: &mut usize,
        limit: usize,
    ) -> Result<()> {
        let cost_tol = T::c(T::PIVOT_TOL);
        let n_cols = self.columns.len();
        loop {
            let f = self.factor()?;
            let c_b: Vec<T> = self.basis.iter().map(|&k| costs[k]).collect();
            let y = f.lu.solve_transpose(&c_b);
            let mut in_basis = vec![false; n_cols];
            self.basis.iter().for_each(|&k| in_basis[k] = true);
            let enter = (0..n_cols).find(|&j| {
                allowed[j]
                    && !in_basis[j]
                    && costs[j]
                        - self
                            .active_rows
                            .iter()
                            .zip(&y)
                            .map(|(&i, &yi)| self.columns[j][i] * yi)
                            .sum::<T>()
                        < -cost_tol
            });
            let Some(enter) = enter else {
                return Ok(());
            };
            let d = f.lu.solve(&self.column(enter));
            let d_max = d.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
            let pivot_tol = T::c(T::PIVOT_TOL).max(T::c(1e-9) * d_max);
            let tie = T::c(1e-13);
            let mut leave: Option<(usize, T)> = None;
            for (r, &dr) in d.iter().enumerate() {
                if dr <= pivot_tol {
                    continue;
                }
                let ratio = f.x_b[r].max(T::zero()) / dr;
                leave = match leave {
                    Some((best, best_ratio))
                        if ratio > best_ratio + tie
                            || (ratio >= best_ratio - tie && self.basis[r] > self.basis[best]) =>
                    {
                        Some((best, best_ratio))
                    }
                    _ => Some((r, ratio)),
                };
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            *iterations += 1;
            if *iterations > limit {
                return Err(Error::CycleLimitExceeded(limit));
            }
            self.basis[r] = enter;
        }
    }
}

/// Solves the program. Returns `Infeasible`, `Unbounded` or
/// `CycleLimitExceeded` when no optimal basic solution is reached.
pub fn solve<T: Real>(lp: &LinearProgram<T>) -> Result<SimplexSolution<T>> {
    lp.validate()?;
    let n = lp.variable_count();
    let m_eq = lp.equalities.len();
    let m_le = lp.inequalities.len();
    let m = m_eq + m_le;
    let n_std = n + m_le;

    // Standardized rows: [A | slack] x = b with b ≥ 0.
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs: Vec<T> = Vec::with_capacity(m);
    let mut sign: Vec<T> = Vec::with_capacity(m);
    for (i, c) in lp.equalities.iter().chain(&lp.inequalities).enumerate() {
        let mut row = c.coefficients.clone();
        row.resize(n_std, T::zero());
        if i >= m_eq {
            row[n + i - m_eq] = T::one();
        }
        let s = if c.rhs < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        row.iter_mut().for_each(|v| *v *= s);
        rows.push(row);
        rhs.push(c.rhs * s);
        sign.push(s);
    }

    // Slack columns with a +1 entry start basic; other rows get artificials.
    let mut basis = vec![usize::MAX; m];
    let mut artificial_rows = Vec::new();
    for i in 0..m {
        if i >= m_eq && sign[i] > T::zero() {
            basis[i] = n + i - m_eq;
        } else {
            artificial_rows.push(i);
        }
    }
    let n_art = artificial_rows.len();
    let n_cols = n_std + n_art;
    let mut columns: Vec<Vec<T>> = (0..n_std)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    for (k, &i) in artificial_rows.iter().enumerate() {
        let mut col = vec![T::zero(); m];
        col[i] = T::one();
        columns.push(col);
        basis[i] = n_std + k;
    }

    let limit = 10_000.max(50 * (m + n_cols));
    let mut iterations = 0;
    let mut redundant_rows = Vec::new();
    let mut state = Revised {
        columns: &columns,
        rhs: &rhs,
        active_rows: (0..m).collect(),
        basis,
    };

    if n_art > 0 {
        let mut phase1 = vec![T::zero(); n_cols];
        phase1[n_std..].iter_mut().for_each(|v| *v = T::one());
        state.run(&phase1, &vec![true; n_cols], &mut iterations, limit)?;
        let f = state.factor()?;
        let infeasibility: T = state
            .basis
            .iter()
            .zip(&f.x_b)
            .filter(|(&k, _)| k >= n_std)
            .map(|(_, &v)| v.abs())
            .sum();
        let scale = rhs.iter().fold(T::one(), |a, &b| a.max(b.abs()));
        if infeasibility > T::c(T::INEQUALITY_TOL) * scale {
            return Err(Error::Infeasible);
        }
        // Swap remaining artificials for structural columns; rows where that
        // is impossible are linear combinations of the others.
        let mut r = 0;
        while r < state.basis.len() {
            if state.basis[r] < n_std {
                r += 1;
                continue;
            }
            let f = state.factor()?;
            let mut unit = vec![T::zero(); state.basis.len()];
            unit[r] = T::one();
            let row_inv = f.lu.solve_transpose(&unit);
            let mut in_basis = vec![false; n_cols];
            state.basis.iter().for_each(|&k| in_basis[k] = true);
            let mut best: Option<(usize, T)> = None;
            for j in (0..n_std).filter(|&j| !in_basis[j]) {
                let v = dot(&row_inv, &state.column(j)).abs();
                if v > T::c(1e-9) && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => {
                    state.basis[r] = j;
                    r += 1;
                }
                None => {
                    redundant_rows.push(state.active_rows[r]);
                    state.active_rows.remove(r);
                    state.basis.remove(r);
                }
            }
        }
    }

    let mut costs = lp.objective.clone();
    costs.resize(n_cols, T::zero());
    let mut allowed = vec![true; n_cols];
    allowed[n_std..].iter_mut().for_each(|v| *v = false);
    state.run(&costs, &allowed, &mut iterations, limit)?;

    let f = state.factor()?;
    let c_b: Vec<T> = state.basis.iter().map(|&k| costs[k]).collect();
    let y_active = f.lu.solve_transpose(&c_b);
    let mut x_std = vec![T::zero(); n_std];
    for (&k, &v) in state.basis.iter().zip(&f.x_b) {
        x_std[k] = v;
    }
    let mut y_std = vec![T::zero(); m];
    for (&i, &v) in state.active_rows.iter().zip(&y_active) {
        y_std[i] = v;
    }
    let feas_tol = T::c(T::INEQUALITY_TOL);
    for v in x_std.iter_mut() {
        if *v < T::zero() && *v > -feas_tol {
            *v = T::zero();
        }
    }
    redundant_rows.sort_unstable();

    let mut primal_infeasibility = x_std.iter().fold(T::zero(), |a, &v| a.max(-v));
    for (row, &b) in rows.iter().zip(&rhs) {
        let lhs: T = row.iter().zip(&x_std).map(|(&a, &x)| a * x).sum();
        primal_infeasibility = primal_infeasibility.max((lhs - b).abs());
    }
    let mut dual_infeasibility = T::zero();
    for c in 0..n_std {
        let reduced = costs[c] - (0..m).map(|i| rows[i][c] * y_std[i]).sum::<T>();
        dual_infeasibility = dual_infeasibility.max(-reduced);
    }
    let x: Vec<T> = x_std[..n].to_vec();
    let objective: T = lp.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();
    let dual_objective: T = y_std.iter().zip(&rhs).map(|(&y, &b)| y * b).sum();
    let duals: Vec<T> = y_std.iter().zip(&sign).map(|(&y, &s)| y * s).collect();

    Ok(SimplexSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        equality_duals: duals[..m_eq].to_vec(),
        inequality_duals: duals[m_eq..].to_vec(),
        duality_gap: (objective - dual_objective).abs(),
        dual_infeasibility,
        primal_infeasibility,
        iterations,
        redundant_rows,
    })
}
