//! Polytope geometry of the posterior distributions P_Y|U=u.
//!
//! The leakage matrix P_X|Y acts on distributions only through its row
//! space, which the matrix M (first |X| right singular vectors, as rows)
//! spans. For an index set Ω of |X| columns of M with invertible M_Ω, the
//! vertex of `{y ≥ 0 : M y = M P_Y + s·M[P_X|Y₁⁻¹ J; 0]}` supported on Ω is
//! `M_Ω⁻¹ (M P_Y + s·M[P_X|Y₁⁻¹ J; 0])` scattered into the Ω positions.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::info::{Criterion, JointDistribution, LogBase};
use crate::linalg::{condition_number, dot, inverse, svd, Lu, Matrix};
use crate::scalar::Real;

/// The row-space basis M of P_X|Y together with the column choice Y₁.
#[derive(Debug, Clone, PartialEq)]
pub struct MMatrix<T = f64> {
    m: Matrix<T>,
    /// Y indices, Y₁ first. Y₁ is the best-conditioned |X|-column block of
    /// P_X|Y found by greedy column pivoting.
    column_permutation: Vec<usize>,
    /// `M(Y₁) · P_X|Y₁⁻¹`, the map `J ↦ M [P_X|Y₁⁻¹ J; 0]`.
    perturbation_map: Matrix<T>,
    log_base: LogBase,
}

impl<T: Real> MMatrix<T> {
    pub fn m(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn column_permutation(&self) -> &[usize] {
        &self.column_permutation
    }

    /// The Y₁ columns in ascending order.
    pub fn y1_columns(&self) -> Vec<usize> {
        let mut c = self.column_permutation[..self.m.rows()].to_vec();
        c.sort_unstable();
        c
    }

    pub fn perturbation_map(&self) -> &Matrix<T> {
        &self.perturbation_map
    }

    pub fn x_size(&self) -> usize {
        self.m.rows()
    }

    pub fn y_size(&self) -> usize {
        self.m.cols()
    }

    pub fn log_base(&self) -> LogBase {
        self.log_base
    }
}

/// Greedy pivoted column selection: repeatedly take the column with the
/// largest residual norm and project it out of the others.
fn pivoted_columns<T: Real>(a: &Matrix<T>, count: usize) -> Vec<usize> {
    let mut residual: Vec<Vec<T>> = (0..a.cols()).map(|j| a.col(j)).collect();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let (best, _) = (0..a.cols())
            .filter(|j| !chosen.contains(j))
            .map(|j| (j, dot(&residual[j], &residual[j])))
            .fold((usize::MAX, -T::one()), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            });
        chosen.push(best);
        let norm = dot(&residual[best], &residual[best]).sqrt();
        if norm == T::zero() {
            continue;
        }
        let q: Vec<T> = residual[best].iter().map(|&v| v / norm).collect();
        for (j, r) in residual.iter_mut().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let proj = dot(r, &q);
            r.iter_mut().zip(&q).for_each(|(v, &qi)| *v -= proj * qi);
        }
    }
    chosen
}

/// Builds M from the SVD of P_X|Y with a deterministic sign convention (the
/// largest-magnitude entry of each row is positive).
pub fn compute_m<T: Real>(joint: &JointDistribution<T>) -> Result<MMatrix<T>> {
    joint.require_polytope_support()?;
    let k = joint.p_x_given_y();
    let (nx, ny) = (joint.x_size(), joint.y_size());
    let v = svd(k).v;
    let mut m = Matrix::from_fn(nx, ny, |i, j| v[(j, i)]);
    for i in 0..nx {
        let pivot = (0..ny).fold(0, |best, j| {
            if m[(i, j)].abs() > m[(i, best)].abs() {
                j
            } else {
                best
            }
        });
        if m[(i, pivot)] < T::zero() {
            for j in 0..ny {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
    let y1 = pivoted_columns(k, nx);
    let mut column_permutation = y1.clone();
    column_permutation.extend((0..ny).filter(|j| !y1.contains(j)));
    let k1 = k.select_columns(&y1);
    let k1_inv = inverse(&k1).map_err(|_| Error::RankDeficient)?;
    let perturbation_map = m.select_columns(&y1).matmul(&k1_inv);
    Ok(MMatrix {
        m,
        column_permutation,
        perturbation_map,
        log_base: joint.log_base(),
    })
}

/// An index set Ω with a strictly positive base point `M_Ω⁻¹ M P_Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSet<T = f64> {
    indices: Vec<usize>,
    y_size: usize,
    m_omega_inv: Matrix<T>,
    base_point: Vec<T>,
    /// `H_Ω = M_Ω⁻¹ M(Y₁) P_X|Y₁⁻¹`.
    h_omega: Matrix<T>,
    h_omega_inv: Matrix<T>,
    condition: T,
    log_base: LogBase,
}

impl<T: Real> OmegaSet<T> {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn m_omega_inv(&self) -> &Matrix<T> {
        &self.m_omega_inv
    }

    pub fn base_point(&self) -> &[T] {
        &self.base_point
    }

    pub fn h_omega(&self) -> &Matrix<T> {
        &self.h_omega
    }

    pub fn h_omega_inv(&self) -> &Matrix<T> {
        &self.h_omega_inv
    }

    pub fn condition(&self) -> T {
        self.condition
    }

    pub fn log_base(&self) -> LogBase {
        self.log_base
    }

    /// Places an |X|-vector into the Ω positions of a |Y|-vector.
    pub fn scatter(&self, values: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.y_size];
        for (&idx, &v) in self.indices.iter().zip(values) {
            out[idx] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaStatus {
    Valid,
    /// Smallest base-point entry within `[-1e-9, positivity tolerance]`.
    Borderline,
    NonPositive,
    Singular,
}

/// Classification of one |X|-subset, kept for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaCandidate<T> {
    pub indices: Vec<usize>,
    pub status: OmegaStatus,
    pub base_point: Option<Vec<T>>,
    pub condition: T,
}

fn classify<T: Real>(
    m: &Matrix<T>,
    perturbation_map: &Matrix<T>,
    mp_y: &[T],
    indices: Vec<usize>,
    log_base: LogBase,
) -> (OmegaCandidate<T>, Option<OmegaSet<T>>) {
    let m_omega = m.select_columns(&indices);
    let condition = condition_number(&m_omega);
    let singular = OmegaCandidate {
        indices: indices.clone(),
        status: OmegaStatus::Singular,
        base_point: None,
        condition,
    };
    if !(condition < T::c(T::CONDITION_LIMIT)) {
        return (singular, None);
    }
    let Ok(lu) = Lu::new(&m_omega) else {
        return (singular, None);
    };
    let base_point = lu.solve(mp_y);
    let min = base_point.iter().copied().fold(T::infinity(), T::min);
    let status = if min > T::c(T::POSITIVITY_TOL) {
        OmegaStatus::Valid
    } else if min >= T::c(-1e-9) {
        OmegaStatus::Borderline
    } else {
        OmegaStatus::NonPositive
    };
    let candidate = OmegaCandidate {
        indices: indices.clone(),
        status,
        base_point: Some(base_point.clone()),
        condition,
    };
    if status != OmegaStatus::Valid {
        return (candidate, None);
    }
    let m_omega_inv = lu.inverse();
    let h_omega = m_omega_inv.matmul(perturbation_map);
    let Ok(h_omega_inv) = inverse(&h_omega) else {
        return (singular, None);
    };
    let set = OmegaSet {
        indices,
        y_size: m.cols(),
        m_omega_inv,
        base_point,
        h_omega,
        h_omega_inv,
        condition,
        log_base,
    };
    (candidate, Some(set))
}

fn classify_all<T: Real>(
    m: &Matrix<T>,
    perturbation_map: &Matrix<T>,
    p_y: &[T],
    log_base: LogBase,
) -> Vec<(OmegaCandidate<T>, Option<OmegaSet<T>>)> {
    let mp_y = m.mul_vec(p_y);
    let subsets: Vec<Vec<usize>> = (0..m.cols()).combinations(m.rows()).collect();
    subsets
        .into_par_iter()
        .map(|s| classify(m, perturbation_map, &mp_y, s, log_base))
        .collect()
}

/// Every |X|-subset of Y with its status, in lexicographic order.
pub fn omega_candidates<T: Real>(m: &MMatrix<T>, p_y: &[T]) -> Vec<OmegaCandidate<T>> {
    classify_all(&m.m, &m.perturbation_map, p_y, m.log_base)
        .into_iter()
        .map(|(c, _)| c)
        .collect()
}

/// Ω¹: the index sets whose base point is a strictly positive distribution,
/// in lexicographic order.
pub fn enumerate_omega1<T: Real>(m: &MMatrix<T>, p_y: &[T]) -> Result<Vec<OmegaSet<T>>> {
    if p_y.len() != m.y_size() {
        return Err(Error::LengthMismatch(p_y.len(), m.y_size()));
    }
    let sets: Vec<OmegaSet<T>> = classify_all(&m.m, &m.perturbation_map, p_y, m.log_base)
        .into_iter()
        .filter_map(|(_, s)| s)
        .collect();
    if sets.is_empty() {
        Err(Error::EmptyOmega1)
    } else {
        Ok(sets)
    }
}

/// Ω¹ computed from raw matrices, for geometry that does not come from a
/// joint distribution.
pub fn enumerate_omega1_raw<T: Real>(
    m: &Matrix<T>,
    perturbation_map: &Matrix<T>,
    p_y: &[T],
    log_base: LogBase,
) -> Vec<OmegaSet<T>> {
    classify_all(m, perturbation_map, p_y, log_base)
        .into_iter()
        .filter_map(|(_, s)| s)
        .collect()
}

/// A vector J with `1ᵀJ = 0` and `‖J‖₁ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PerturbationVector<T = f64>(Vec<T>);

impl<T: Real> PerturbationVector<T> {
    pub fn new(j: Vec<T>) -> Result<Self> {
        let tol = T::c(T::INEQUALITY_TOL);
        let sum: T = j.iter().copied().sum();
        if sum.abs() > tol {
            return Err(Error::InvalidPerturbation(format!("entries sum to {sum}")));
        }
        let norm: T = j.iter().map(|v| v.abs()).sum();
        if norm > T::one() + tol {
            return Err(Error::InvalidPerturbation(format!(
                "l1 norm {norm} exceeds 1"
            )));
        }
        Ok(Self(j))
    }

    pub fn zero(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    /// Wraps a vector without checking the constraints.
    pub(crate) fn unchecked(j: Vec<T>) -> Self {
        Self(j)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn l1_norm(&self) -> T {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

/// First-order entropy data of an index set: `l = log(base point)`,
/// `b = l · base point`, `a = l · H_Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Linearization<T> {
    pub a: Vec<T>,
    pub b: T,
    pub l: Vec<T>,
}

impl<T: Real> Linearization<T> {
    /// `−(b + scale · a·J)`, the first-order entropy of the perturbed point.
    pub fn entropy_estimate(&self, scale: T, j: &[T]) -> T {
        -(self.b + scale * dot(&self.a, j))
    }
}

pub fn linearize_entropy<T: Real>(omega: &OmegaSet<T>) -> Linearization<T> {
    let l: Vec<T> = omega
        .base_point
        .iter()
        .map(|&p| omega.log_base.log(p))
        .collect();
    let b = dot(&l, &omega.base_point);
    let a = omega.h_omega.vec_mul(&l);
    Linearization { a, b, l }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremePoint<T> {
    pub omega: Vec<usize>,
    /// Length |Y|; zero outside Ω.
    pub vector: Vec<T>,
    pub feasible: bool,
    pub linearization: Linearization<T>,
}

impl<T: Real> ExtremePoint<T> {
    /// Rejects points with an entry below the feasibility tolerance.
    pub fn into_feasible(self) -> Result<Self> {
        if let Some((index, &value)) = self
            .vector
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -T::c(T::FEASIBILITY_TOL))
        {
            return Err(Error::InfeasiblePoint {
                index,
                value: value.as_f64(),
            });
        }
        Ok(self)
    }
}

/// Perturbation scale: `ε / P_U(u)` under criterion 1, `ε` under criterion 2.
pub fn perturbation_scale<T: Real>(eps: T, weight: T, criterion: Criterion) -> Result<T> {
    if eps < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    match criterion {
        Criterion::One => {
            if !(weight > T::zero() && weight <= T::one()) {
                return Err(Error::InvalidArgument(format!(
                    "weight must lie in (0, 1], got {weight}"
                )));
            }
            Ok(eps / weight)
        }
        Criterion::Two => Ok(eps),
    }
}

/// The vertex of the perturbed polytope supported on Ω.
pub fn extreme_point<T: Real>(
    omega: &OmegaSet<T>,
    j: &PerturbationVector<T>,
    eps: T,
    weight: T,
    criterion: Criterion,
) -> Result<ExtremePoint<T>> {
    if j.as_slice().len() != omega.indices.len() {
        return Err(Error::LengthMismatch(
            j.as_slice().len(),
            omega.indices.len(),
        ));
    }
    let scale = perturbation_scale(eps, weight, criterion)?;
    let shift = omega.h_omega.mul_vec(j.as_slice());
    let entries: Vec<T> = omega
        .base_point
        .iter()
        .zip(&shift)
        .map(|(&b, &s)| b + scale * s)
        .collect();
    let feasible = entries.iter().all(|&v| v >= -T::c(T::FEASIBILITY_TOL));
    Ok(ExtremePoint {
        omega: omega.indices.clone(),
        vector: omega.scatter(&entries),
        feasible,
        linearization: linearize_entropy(omega),
    })
}
