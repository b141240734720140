//! Mechanism design by linear programming over perturbed extreme points.
//!
//! Each index set Ω ∈ Ω¹ gets one block `η_Ω = P_U(u) · P_Y|U=u` restricted
//! to Ω. In η coordinates the linearized conditional entropy is `−l_Ω·η_Ω`,
//! the consistency constraint is a scatter of all blocks onto P_Y, and the
//! perturbation is the linear map `D_Ω η = H_Ω⁻¹ (η − (1ᵀη) base_Ω)`:
//! under criterion 1 `J_u = D_Ω η / ε`, under criterion 2
//! `J_u = D_Ω η / (ε · 1ᵀη)`. The ℓ₁ bounds become linear after splitting
//! `|D_Ω η| ≤ t_Ω`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{compute_m, enumerate_omega1, extreme_point, OmegaSet, PerturbationVector};
use crate::info::{
    entropy, Criterion, DistributionVector, JointDistribution, Mechanism, MechanismKind,
};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;
use crate::simplex::{solve, LinearProgram, LpStatus, SimplexSolution};

/// Below this budget the J recovery divides by ε; report `J = 0` instead.
const TINY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpLayout {
    /// ε > 0: η blocks followed by split variables.
    Full,
    /// ε = 0: one weight per Ω multiplying its base point.
    PerfectPrivacy,
}

#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    pub program: LinearProgram<T>,
    pub criterion: Criterion,
    pub eps: T,
    pub omega1: Vec<OmegaSet<T>>,
    pub layout: LpLayout,
    pub x_size: usize,
}

impl<T: Real> LpProblem<T> {
    pub fn eta_offset(&self, block: usize) -> usize {
        match self.layout {
            LpLayout::Full => block * self.x_size,
            LpLayout::PerfectPrivacy => block,
        }
    }

    pub fn split_offset(&self, block: usize) -> Option<usize> {
        match self.layout {
            LpLayout::Full => Some((self.omega1.len() + block) * self.x_size),
            LpLayout::PerfectPrivacy => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    /// Per Ω ∈ Ω¹, in the order of the problem.
    pub eta_blocks: Vec<Vec<T>>,
    pub objective_value: T,
    pub status: LpStatus,
    pub omega1: Vec<OmegaSet<T>>,
    pub simplex: SimplexSolution<T>,
}

/// The deviation map `D_Ω = H_Ω⁻¹ (I − base_Ω 1ᵀ)` with round-off zeroed.
pub fn deviation_map<T: Real>(omega: &OmegaSet<T>) -> Matrix<T> {
    let n = omega.indices().len();
    let projector = Matrix::from_fn(n, n, |i, k| {
        let delta = if i == k { T::one() } else { T::zero() };
        delta - omega.base_point()[i]
    });
    let mut d = omega.h_omega_inv().matmul(&projector);
    let scale = d.max_abs().max(T::one());
    for i in 0..n {
        for k in 0..n {
            if d[(i, k)].abs() < T::c(1e-12) * scale {
                d[(i, k)] = T::zero();
            }
        }
    }
    d
}

pub fn build_lp<T: Real>(
    joint: &JointDistribution<T>,
    eps: T,
    criterion: Criterion,
    omega1: &[OmegaSet<T>],
) -> Result<LpProblem<T>> {
    if omega1.is_empty() {
        return Err(Error::EmptyOmega1);
    }
    if !(eps >= T::zero()) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps must be finite and nonnegative, got {eps}"
        )));
    }
    joint.require_polytope_support()?;
    let nx = joint.x_size();
    let ny = joint.y_size();
    let p_y = joint.p_y();
    let k = omega1.len();
    let base = joint.log_base();

    if eps == T::zero() {
        let names = (0..k).map(|b| format!("w_{b}")).collect();
        let mut program = LinearProgram::new(names);
        for (b, omega) in omega1.iter().enumerate() {
            let l: Vec<T> = omega.base_point().iter().map(|&p| base.log(p)).collect();
            program.objective[b] = -dot(&l, omega.base_point());
        }
        for y in 0..ny {
            let mut row = vec![T::zero(); k];
            for (b, omega) in omega1.iter().enumerate() {
                if let Some(pos) = omega.indices().iter().position(|&i| i == y) {
                    row[b] = omega.base_point()[pos];
                }
            }
            program.add_equality(format!("mass_{y}"), row, p_y[y]);
        }
        return Ok(LpProblem {
            program,
            criterion,
            eps,
            omega1: omega1.to_vec(),
            layout: LpLayout::PerfectPrivacy,
            x_size: nx,
        });
    }

    let n_vars = 2 * k * nx;
    let mut names = Vec::with_capacity(n_vars);
    for b in 0..k {
        names.extend((0..nx).map(|i| format!("eta_{b}_{i}")));
    }
    for b in 0..k {
        names.extend((0..nx).map(|i| format!("t_{b}_{i}")));
    }
    let mut program = LinearProgram::new(names);
    let maps: Vec<Matrix<T>> = omega1.iter().map(deviation_map).collect();

    for (b, omega) in omega1.iter().enumerate() {
        for i in 0..nx {
            program.objective[b * nx + i] = -base.log(omega.base_point()[i]);
        }
    }
    for y in 0..ny {
        let mut row = vec![T::zero(); n_vars];
        for (b, omega) in omega1.iter().enumerate() {
            if let Some(pos) = omega.indices().iter().position(|&i| i == y) {
                row[b * nx + pos] = T::one();
            }
        }
        program.add_equality(format!("mass_{y}"), row, p_y[y]);
    }
    // Σ_u J_u = 0 (criterion 1) or Σ_u P_U(u) J_u = 0 (criterion 2); both
    // are Σ_Ω D_Ω η_Ω = 0 up to the factor ε.
    for i in 0..nx {
        let mut row = vec![T::zero(); n_vars];
        for (b, d) in maps.iter().enumerate() {
            for c in 0..nx {
                row[b * nx + c] = d[(i, c)];
            }
        }
        program.add_equality(format!("family_{i}"), row, T::zero());
    }
    for (b, d) in maps.iter().enumerate() {
        let mut row = vec![T::zero(); n_vars];
        for c in 0..nx {
            let s: T = (0..nx).map(|i| d[(i, c)]).sum();
            row[b * nx + c] = if s.abs() < T::c(1e-12) { T::zero() } else { s };
        }
        program.add_equality(format!("zero_sum_{b}"), row, T::zero());
    }
    for (b, d) in maps.iter().enumerate() {
        for i in 0..nx {
            for (sign, tag) in [(T::one(), "pos"), (-T::one(), "neg")] {
                let mut row = vec![T::zero(); n_vars];
                for c in 0..nx {
                    row[b * nx + c] = sign * d[(i, c)];
                }
                row[(k + b) * nx + i] = -T::one();
                program.add_inequality(format!("split_{tag}_{b}_{i}"), row, T::zero());
            }
        }
        let mut row = vec![T::zero(); n_vars];
        for i in 0..nx {
            row[(k + b) * nx + i] = T::one();
        }
        let rhs = match criterion {
            Criterion::One => eps,
            Criterion::Two => {
                for i in 0..nx {
                    row[b * nx + i] = -eps;
                }
                T::zero()
            }
        };
        program.add_inequality(format!("budget_{b}"), row, rhs);
    }
    Ok(LpProblem {
        program,
        criterion,
        eps,
        omega1: omega1.to_vec(),
        layout: LpLayout::Full,
        x_size: nx,
    })
}

pub fn solve_lp<T: Real>(problem: &LpProblem<T>) -> Result<LpSolution<T>> {
    let simplex = solve(&problem.program)?;
    let eta_blocks = problem
        .omega1
        .iter()
        .enumerate()
        .map(|(b, omega)| match problem.layout {
            LpLayout::Full => {
                let o = problem.eta_offset(b);
                simplex.x[o..o + problem.x_size].to_vec()
            }
            LpLayout::PerfectPrivacy => {
                let w = simplex.x[b];
                omega.base_point().iter().map(|&p| w * p).collect()
            }
        })
        .collect();
    Ok(LpSolution {
        eta_blocks,
        objective_value: simplex.objective,
        status: simplex.status,
        omega1: problem.omega1.clone(),
        simplex,
    })
}

/// One output letter of a designed mechanism.
#[derive(Debug, Clone, Serialize)]
pub struct DesignedLetter<T> {
    pub omega: Vec<usize>,
    pub p_u: T,
    /// P_Y|U=u, length |Y|.
    pub posterior: Vec<T>,
    pub j: PerturbationVector<T>,
}

#[derive(Debug, Clone)]
pub struct DesignedMechanism<T> {
    pub mechanism: Mechanism<T>,
    pub p_u: DistributionVector<T>,
    pub letters: Vec<DesignedLetter<T>>,
    pub criterion: Criterion,
    pub eps: T,
    /// Exact I(U;Y) of the recovered mechanism.
    pub achieved_utility: T,
    /// `H(Y) − linearized H(Y|U)`, the LP estimate of the utility.
    pub approx_value: T,
    /// The LP objective: the linearized H(Y|U).
    pub linearized_conditional_entropy: T,
    /// Exact H(Y|U).
    pub exact_conditional_entropy: T,
}

impl<T: Real> DesignedMechanism<T> {
    pub fn j_vectors(&self) -> Vec<&PerturbationVector<T>> {
        self.letters.iter().map(|l| &l.j).collect()
    }

    /// `|H(Y|U*) − linearized H(Y|U*)|`.
    pub fn approximation_error(&self) -> T {
        (self.exact_conditional_entropy - self.linearized_conditional_entropy).abs()
    }
}

/// Re-solves over letter weights with the posteriors held fixed, moving to a
/// vertex of `{λ ≥ 0 : Σ λ_u P_Y|U=u = P_Y}` (with the per-letter caps
/// `λ_u ≤ ε / ‖P_X|Y (P_Y|U=u − P_Y)‖₁` under criterion 1). The LP
/// objective is unchanged; the number of active letters can only drop.
fn reduce_support<T: Real>(
    solution: &LpSolution<T>,
    joint: &JointDistribution<T>,
    eps: T,
    criterion: Criterion,
) -> Result<Vec<Vec<T>>> {
    let ny = joint.y_size();
    let active: Vec<usize> = (0..solution.eta_blocks.len())
        .filter(|&b| solution.eta_blocks[b].iter().copied().sum::<T>() > T::c(T::POSITIVITY_TOL))
        .collect();
    if active.len() <= ny {
        return Ok(solution.eta_blocks.clone());
    }
    let base = joint.log_base();
    let locals: Vec<Vec<T>> = active
        .iter()
        .map(|&b| {
            let eta = &solution.eta_blocks[b];
            let mass: T = eta.iter().copied().sum();
            eta.iter().map(|&v| v / mass).collect()
        })
        .collect();
    let names = active.iter().map(|b| format!("lambda_{b}")).collect();
    let mut program = LinearProgram::new(names);
    for (u, &b) in active.iter().enumerate() {
        let omega = &solution.omega1[b];
        program.objective[u] = -omega
            .base_point()
            .iter()
            .zip(&locals[u])
            .map(|(&p, &v)| base.log(p) * v)
            .sum::<T>();
    }
    for y in 0..ny {
        let row = active
            .iter()
            .zip(&locals)
            .map(|(&b, v)| {
                solution.omega1[b]
                    .indices()
                    .iter()
                    .position(|&i| i == y)
                    .map_or(T::zero(), |pos| v[pos])
            })
            .collect();
        program.add_equality(format!("mass_{y}"), row, joint.p_y()[y]);
    }
    if criterion == Criterion::One {
        let k = joint.p_x_given_y();
        for (u, &b) in active.iter().enumerate() {
            let posterior = solution.omega1[b].scatter(&locals[u]);
            let shift: Vec<T> = posterior
                .iter()
                .zip(joint.p_y())
                .map(|(&a, &p)| a - p)
                .collect();
            let leak: T = k.mul_vec(&shift).iter().map(|v| v.abs()).sum();
            let mut row = vec![T::zero(); active.len()];
            row[u] = leak;
            program.add_inequality(format!("cap_{b}"), row, eps);
        }
    }
    let reduced = solve(&program)?;
    let mut blocks = vec![vec![T::zero(); joint.x_size()]; solution.eta_blocks.len()];
    for (u, &b) in active.iter().enumerate() {
        blocks[b] = locals[u].iter().map(|&v| reduced.x[u] * v).collect();
    }
    Ok(blocks)
}

fn mismatch<T>(msg: String) -> Result<T> {
    Err(Error::ReconstructionMismatch(msg))
}

pub fn recover_mechanism<T: Real>(
    solution: &LpSolution<T>,
    joint: &JointDistribution<T>,
    eps: T,
    criterion: Criterion,
) -> Result<DesignedMechanism<T>> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::Infeasible);
    }
    let tol = T::c(T::INEQUALITY_TOL);
    let ny = joint.y_size();
    let p_y = joint.p_y();
    let blocks = reduce_support(solution, joint, eps, criterion)?;
    let mut letters = Vec::new();
    for (omega, eta) in solution.omega1.iter().zip(&blocks) {
        let mass: T = eta.iter().copied().sum();
        if mass <= T::c(T::POSITIVITY_TOL) {
            continue;
        }
        let local: Vec<T> = eta.iter().map(|&v| v / mass).collect();
        let j = if eps < T::c(TINY_EPS) {
            vec![T::zero(); local.len()]
        } else {
            let d = deviation_map(omega).mul_vec(eta);
            let denom = match criterion {
                Criterion::One => eps,
                Criterion::Two => eps * mass,
            };
            d.iter().map(|&v| v / denom).collect()
        };
        let j_sum: T = j.iter().copied().sum();
        let j_norm: T = j.iter().map(|v| v.abs()).sum();
        if j_sum.abs() * eps.max(T::one()) > tol || (j_norm - T::one()) * eps > tol {
            return mismatch(format!(
                "perturbation for {:?}: sum {j_sum}, l1 norm {j_norm}",
                omega.indices()
            ));
        }
        let j = PerturbationVector::unchecked(j);
        let effective_eps = if eps < T::c(TINY_EPS) { T::zero() } else { eps };
        let point = extreme_point(omega, &j, effective_eps, mass.min(T::one()), criterion)?;
        let posterior = omega.scatter(&local);
        let gap = point
            .vector
            .iter()
            .zip(&posterior)
            .fold(T::zero(), |a, (&p, &q)| a.max((p - q).abs()));
        if gap > T::c(1e-6).max(tol / mass) {
            return mismatch(format!(
                "posterior for {:?} is {gap} away from its extreme point",
                omega.indices()
            ));
        }
        letters.push(DesignedLetter {
            omega: omega.indices().to_vec(),
            p_u: mass,
            posterior,
            j,
        });
    }
    if letters.is_empty() {
        return mismatch("no letter carries positive mass".into());
    }
    if criterion == Criterion::Two && letters.len() > ny {
        return mismatch(format!(
            "{} active letters exceed |Y| = {ny}",
            letters.len()
        ));
    }

    let total: T = letters.iter().map(|l| l.p_u).sum();
    if (total - T::one()).abs() > tol {
        return mismatch(format!("letter masses sum to {total}"));
    }
    let mut kernel = Matrix::from_fn(letters.len(), ny, |u, y| {
        let v = letters[u].p_u * letters[u].posterior[y] / p_y[y];
        if v < T::zero() {
            T::zero()
        } else {
            v
        }
    });
    for y in 0..ny {
        let s: T = (0..letters.len()).map(|u| kernel[(u, y)]).sum();
        if (s - T::one()).abs() > tol {
            return mismatch(format!("consistency fails at y = {y}: column sum {s}"));
        }
        for u in 0..letters.len() {
            kernel[(u, y)] /= s;
        }
    }
    let p_u_raw: Vec<T> = letters.iter().map(|l| l.p_u / total).collect();
    let mechanism = Mechanism::new(MechanismKind::Markov, kernel)?;
    let triple = mechanism.induce(joint)?;
    let achieved_utility = triple.mutual_information_uy();
    let base = joint.log_base();

    for (u, value) in triple.criterion_values(criterion).into_iter().enumerate() {
        if let Some(v) = value {
            if v > eps + tol {
                return mismatch(format!("letter {u} leaks {v} > {eps}"));
            }
        }
    }

    let exact_conditional_entropy: T = letters
        .iter()
        .map(|l| l.p_u * entropy(&l.posterior, base))
        .sum();
    let linearized = solution.objective_value;
    Ok(DesignedMechanism {
        mechanism,
        p_u: DistributionVector::new(p_u_raw)?,
        letters,
        criterion,
        eps,
        achieved_utility,
        approx_value: entropy(p_y, base) - linearized,
        linearized_conditional_entropy: linearized,
        exact_conditional_entropy,
    })
}

/// The LP lower bound `L_g(ε) = I(U*;Y)` with its mechanism.
pub fn lower_bound_g<T: Real>(
    joint: &JointDistribution<T>,
    eps: T,
    criterion: Criterion,
) -> Result<(T, DesignedMechanism<T>)> {
    let m = compute_m(joint)?;
    let omega1 = enumerate_omega1(&m, joint.p_y())?;
    lower_bound_with(joint, eps, criterion, &omega1)
}

pub fn lower_bound_with<T: Real>(
    joint: &JointDistribution<T>,
    eps: T,
    criterion: Criterion,
    omega1: &[OmegaSet<T>],
) -> Result<(T, DesignedMechanism<T>)> {
    let problem = build_lp(joint, eps, criterion, omega1)?;
    let solution = solve_lp(&problem)?;
    let designed = recover_mechanism(&solution, joint, eps, criterion)?;
    Ok((designed.achieved_utility, designed))
}

/// Solves every grid point concurrently; the geometry is shared.
pub fn lower_bound_sweep<T: Real>(
    joint: &JointDistribution<T>,
    eps_grid: &[T],
    criterion: Criterion,
) -> Result<Vec<Result<DesignedMechanism<T>>>> {
    let m = compute_m(joint)?;
    let omega1 = enumerate_omega1(&m, joint.p_y())?;
    Ok(eps_grid
        .par_iter()
        .map(|&eps| lower_bound_with(joint, eps, criterion, &omega1).map(|(_, d)| d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::validate_joint;
    use itertools::Itertools;

    fn example_one() -> JointDistribution<f64> {
        validate_joint(&[
            vec![0.693, 0.027, 0.108, 0.072],
            vec![0.006, 0.085, 0.004, 0.005],
        ])
        .unwrap()
    }

    fn example_two() -> JointDistribution<f64> {
        validate_joint(&[
            vec![0.350, 0.025, 0.085, 0.040],
            vec![0.025, 0.425, 0.035, 0.015],
        ])
        .unwrap()
    }

    fn omega1(j: &JointDistribution<f64>) -> Vec<OmegaSet<f64>> {
        enumerate_omega1(&compute_m(j).unwrap(), j.p_y()).unwrap()
    }

    #[test]
    fn structure_counts() {
        let j = example_one();
        let o = omega1(&j);
        let lp = build_lp(&j, 0.01, Criterion::One, &o).unwrap();
        assert_eq!(lp.program.variable_count(), 2 * o.len() * 2);
        assert_eq!(lp.program.equalities.len(), 4 + 2 + o.len());
        assert_eq!(lp.program.inequalities.len(), o.len() * (2 * 2 + 1));
        // 1ᵀJ rows vanish identically.
        for row in &lp.program.equalities[6..] {
            assert!(row.coefficients.iter().all(|&v| v == 0.0));
        }
        let reduced = build_lp(&j, 0.0, Criterion::One, &o).unwrap();
        assert_eq!(reduced.layout, LpLayout::PerfectPrivacy);
        assert_eq!(reduced.program.variable_count(), o.len());
        assert!(build_lp(&j, 0.01, Criterion::One, &[]).is_err());
    }

    #[test]
    fn first_example_criterion_one_is_optimal() {
        let j = example_one();
        let o = omega1(&j);
        let lp = build_lp(&j, 0.01, Criterion::One, &o).unwrap();
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.simplex.primal_infeasibility < 1e-9);
        assert!(s.simplex.dual_infeasibility < 1e-9);
        assert!(s.simplex.duality_gap < 1e-9);
        let d = recover_mechanism(&s, &j, 0.01, Criterion::One).unwrap();
        assert!(d.letters.len() <= 4);
        for l in &d.letters {
            assert!(l.j.as_slice().iter().sum::<f64>().abs() < 1e-9);
            assert!(l.j.l1_norm() <= 1.0 + 1e-9);
        }
        let family: Vec<f64> = (0..2)
            .map(|i| d.letters.iter().map(|l| l.j.as_slice()[i]).sum())
            .collect();
        assert!(family.iter().all(|v| v.abs() < 1e-9));
        assert!(d.achieved_utility > 0.0);
    }

    #[test]
    fn perfect_privacy_lp_matches_basic_enumeration() {
        for j in [example_one(), example_two()] {
            let o = omega1(&j);
            let lp = build_lp(&j, 0.0, Criterion::One, &o).unwrap();
            let s = solve_lp(&lp).unwrap();
            // Exhaustive: every set of at most |Y| base points whose convex
            // combination hits P_Y.
            let mut best = f64::INFINITY;
            for size in 1..=4 {
                for subset in (0..o.len()).combinations(size) {
                    let a = Matrix::from_fn(4, size, |y, c| {
                        o[subset[c]].scatter(o[subset[c]].base_point())[y]
                    });
                    let ata = a.transpose().matmul(&a);
                    let Ok(lu) = crate::linalg::Lu::new(&ata) else {
                        continue;
                    };
                    let w = lu.solve(&a.transpose().mul_vec(j.p_y()));
                    if w.iter().any(|&v| v < -1e-12) {
                        continue;
                    }
                    let fit = a.mul_vec(&w);
                    if fit.iter().zip(j.p_y()).any(|(f, p)| (f - p).abs() > 1e-10) {
                        continue;
                    }
                    let value: f64 = subset
                        .iter()
                        .zip(&w)
                        .map(|(&b, &wb)| wb * entropy(o[b].base_point(), LogBase::Bits))
                        .sum();
                    best = best.min(value);
                }
            }
            assert!(
                (s.objective_value - best).abs() < 1e-9,
                "{} vs {best}",
                s.objective_value
            );
        }
    }

    use crate::info::LogBase;

    #[test]
    fn perfect_privacy_degenerates_continuously() {
        let j = example_two();
        let (g0, d0) = lower_bound_g(&j, 0.0, Criterion::Two).unwrap();
        let (g_tiny, _) = lower_bound_g(&j, 1e-10, Criterion::Two).unwrap();
        assert!((g0 - g_tiny).abs() < 1e-6);
        assert!(d0.j_vectors().iter().all(|v| v.l1_norm() == 0.0));
        // At ε = 0 the utility is exact: posteriors are the base points.
        assert!(d0.approximation_error() < 1e-12);
    }

    #[test]
    fn deterministic_x_perfect_privacy_reaches_conditional_entropy() {
        let j =
            validate_joint::<f64>(&[vec![0.2, 0.3, 0.0, 0.0], vec![0.0, 0.0, 0.1, 0.4]]).unwrap();
        let (g0, _) = lower_bound_g(&j, 0.0, Criterion::One).unwrap();
        let h = crate::info::conditional_entropy(&j, crate::info::Direction::YGivenX);
        assert!((g0 - h).abs() < 1e-9);
    }

    #[test]
    fn criterion_two_recovers_feasible_mechanisms() {
        for j in [example_one(), example_two()] {
            for eps in [0.005, 0.01, 0.02, 0.05] {
                let (value, d) = lower_bound_g(&j, eps, Criterion::Two).unwrap();
                assert!(value >= 0.0);
                let t = d.mechanism.induce(&j).unwrap();
                for v in t.criterion_values(Criterion::Two).into_iter().flatten() {
                    assert!(v <= eps + 1e-9);
                }
                assert!(t.conditional_mutual_information_xu_given_y() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_and_matches_single_solves() {
        let j = example_one();
        let grid = [0.0, 0.004, 0.008, 0.012];
        let a = lower_bound_sweep(&j, &grid, Criterion::One).unwrap();
        let b = lower_bound_sweep(&j, &grid, Criterion::One).unwrap();
        for ((x, y), &eps) in a.iter().zip(&b).zip(&grid) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!(x.achieved_utility, y.achieved_utility);
            let (single, _) = lower_bound_g(&j, eps, Criterion::One).unwrap();
            assert_eq!(single, x.achieved_utility);
        }
    }

    #[test]
    fn lp_dump_is_well_formed() {
        let j = example_one();
        let lp = build_lp(&j, 0.01, Criterion::Two, &omega1(&j)).unwrap();
        let text = lp.program.to_lp_format();
        assert!(text.starts_with("\\ "));
        assert!(text.contains("budget_0:"));
        assert!(text.contains("mass_3:"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn joint_strategy() -> impl Strategy<Value = JointDistribution<f64>> {
            (1usize..=3, 1usize..=3).prop_flat_map(|(nx, extra)| {
                let ny = nx + extra;
                proptest::collection::vec(0.01f64..1.0, nx * ny).prop_map(move |raw| {
                    let total: f64 = raw.iter().sum();
                    let rows: Vec<Vec<f64>> = raw
                        .chunks(ny)
                        .map(|r| r.iter().map(|v| v / total).collect())
                        .collect();
                    validate_joint(&rows).unwrap()
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]
            #[test]
            fn recovered_mechanisms_satisfy_invariants(
                j in joint_strategy(),
                eps in 0.0f64..0.3,
                second in any::<bool>(),
            ) {
                let criterion = if second { Criterion::Two } else { Criterion::One };
                let (value, d) = lower_bound_g(&j, eps, criterion).unwrap();
                if criterion == Criterion::Two {
                    prop_assert!(d.letters.len() <= j.y_size());
                }
                prop_assert!(value >= -1e-12);
                let t = d.mechanism.induce(&j).unwrap();
                for v in t.criterion_values(criterion).into_iter().flatten() {
                    prop_assert!(v <= eps + 1e-9);
                }
                let mix: Vec<f64> = (0..j.y_size())
                    .map(|y| d.letters.iter().map(|l| l.p_u * l.posterior[y]).sum())
                    .collect();
                for (a, b) in mix.iter().zip(j.p_y()) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
