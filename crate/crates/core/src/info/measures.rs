//! Entropies, divergences and the per-letter leakage measures.
//!
//! Two per-letter quantities appear throughout:
//!
//! * the *conditional* distance `‖P_X|U(·|u) − P_X‖₁` (strong criterion 2),
//! * the *joint-weighted* distance `‖P_X,U(·,u) − P_X P_U(u)‖₁`
//!   (strong criterion 1), which equals `P_U(u)` times the conditional one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::info::joint::{JointDistribution, LogBase};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// `−Σ p log p` with `0 log 0 = 0`.
pub fn entropy<T: Real>(p: &[T], base: LogBase) -> T {
    p.iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| -v * base.log(v))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// H(Y|X)
    YGivenX,
    /// H(X|Y)
    XGivenY,
}

fn joint_entropy<T: Real>(p: &Matrix<T>, base: LogBase) -> T {
    entropy(p.as_slice(), base)
}

pub fn conditional_entropy<T: Real>(joint: &JointDistribution<T>, direction: Direction) -> T {
    let base = joint.log_base();
    let hxy = joint_entropy(joint.p_xy(), base);
    match direction {
        Direction::YGivenX => hxy - entropy(joint.p_x(), base),
        Direction::XGivenY => hxy - entropy(joint.p_y(), base),
    }
}

pub fn mutual_information<T: Real>(joint: &JointDistribution<T>) -> T {
    mutual_information_of(joint.p_xy(), joint.log_base())
}

/// Mutual information between the row and column variables of any joint
/// probability matrix, clamped at zero against roundoff.
pub fn mutual_information_of<T: Real>(p: &Matrix<T>, base: LogBase) -> T {
    let rows: Vec<T> = (0..p.rows())
        .map(|i| p.row(i).iter().copied().sum())
        .collect();
    let cols: Vec<T> = (0..p.cols())
        .map(|j| (0..p.rows()).map(|i| p[(i, j)]).sum())
        .collect();
    let mut acc = T::zero();
    for (i, &pr) in rows.iter().enumerate() {
        for (j, &pc) in cols.iter().enumerate() {
            let v = p[(i, j)];
            if v > T::zero() {
                acc += v * base.log(v / (pr * pc));
            }
        }
    }
    acc.max(T::zero())
}

/// `Σ |p − q|` (the un-halved convention used throughout).
pub fn l1_distance<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum())
}

/// Total variation distance, half of [`l1_distance`].
pub fn total_variation<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    Ok(l1_distance(p, q)? / T::c(2.0))
}

pub fn kl_divergence<T: Real>(p: &[T], q: &[T], base: LogBase) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let mut acc = T::zero();
    for (index, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > T::zero() {
            if b <= T::zero() {
                return Err(Error::SupportViolation { index });
            }
            acc += a * base.log(a / b);
        }
    }
    Ok(acc.max(T::zero()))
}

/// Per-letter leakage of one variable (X or Y) towards the disclosed U.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LetterLeakage<T> {
    /// `‖P_V|U(·|u) − P_V‖₁`; `None` where `P_U(u) = 0`.
    pub conditional: Vec<Option<T>>,
    /// `‖P_V,U(·,u) − P_V P_U(u)‖₁`.
    pub joint_weighted: Vec<T>,
    /// `Σ_u P_U(u) · conditional(u)`.
    pub conditional_average: T,
    /// `Σ_u joint_weighted(u)`.
    pub joint_weighted_total: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport<T> {
    pub p_u: Vec<T>,
    pub x: LetterLeakage<T>,
    pub y: Option<LetterLeakage<T>>,
    /// Letters with `P_U(u) = 0`; their conditional measure is undefined.
    pub zero_weight_letters: Vec<usize>,
}

fn letter_leakage<T: Real>(joint_vu: &Matrix<T>) -> LetterLeakage<T> {
    let (nv, nu) = (joint_vu.rows(), joint_vu.cols());
    let p_v: Vec<T> = (0..nv)
        .map(|i| joint_vu.row(i).iter().copied().sum())
        .collect();
    let p_u: Vec<T> = (0..nu)
        .map(|u| (0..nv).map(|i| joint_vu[(i, u)]).sum())
        .collect();
    let mut conditional = Vec::with_capacity(nu);
    let mut joint_weighted = Vec::with_capacity(nu);
    for (u, &pu) in p_u.iter().enumerate() {
        let jw: T = (0..nv)
            .map(|i| (joint_vu[(i, u)] - p_v[i] * pu).abs())
            .sum();
        joint_weighted.push(jw);
        conditional.push(if pu > T::zero() {
            Some(
                (0..nv)
                    .map(|i| (joint_vu[(i, u)] / pu - p_v[i]).abs())
                    .sum(),
            )
        } else {
            None
        });
    }
    let conditional_average = conditional
        .iter()
        .zip(&p_u)
        .filter_map(|(c, &pu)| c.map(|c| c * pu))
        .sum();
    let joint_weighted_total = joint_weighted.iter().copied().sum();
    LetterLeakage {
        conditional,
        joint_weighted,
        conditional_average,
        joint_weighted_total,
    }
}

/// Per-letter and averaged leakage measures from the joint of (X, U) and,
/// optionally, the joint of (Y, U). Both matrices have U along the columns.
pub fn leakage_measures<T: Real>(
    joint_xu: &Matrix<T>,
    joint_yu: Option<&Matrix<T>>,
) -> Result<LeakageReport<T>> {
    if let Some(yu) = joint_yu {
        if yu.cols() != joint_xu.cols() {
            return Err(Error::LengthMismatch(joint_xu.cols(), yu.cols()));
        }
    }
    let p_u: Vec<T> = (0..joint_xu.cols())
        .map(|u| (0..joint_xu.rows()).map(|i| joint_xu[(i, u)]).sum())
        .collect();
    let zero_weight_letters = p_u
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= T::zero())
        .map(|(u, _)| u)
        .collect();
    Ok(LeakageReport {
        x: letter_leakage(joint_xu),
        y: joint_yu.map(letter_leakage),
        p_u,
        zero_weight_letters,
    })
}

/// `TV(P_X,U ; P_X P_U)`, half the ℓ₁ distance between the joint and the
/// product of its marginals.
pub fn joint_product_tv<T: Real>(joint_xu: &Matrix<T>) -> T {
    letter_leakage(joint_xu).joint_weighted_total / T::c(2.0)
}
