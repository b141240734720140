//! Constructive mechanisms with access to (X, Y), and mechanism
//! verification.
//!
//! [`frl_construct`] builds a functional representation: a W independent of
//! X with Y a deterministic function of (W, X). [`efrl_construct`] relaxes
//! the independence to a prescribed leakage `I(U;X) = ε²/2` nats by pairing
//! W with an erased copy of X.

use serde::Serialize;

use crate::bounds::relaxation_limit;
use crate::error::{Error, Result};
use crate::info::{
    conditional_entropy, Criterion, Direction, JointDistribution, LogBase, Mechanism, MechanismKind,
};
use crate::linalg::Matrix;
use crate::scalar::Real;

const PEEL_ZERO: f64 = 1e-14;
const PEEL_STOP: f64 = 1e-13;

/// A functional representation of Y given X.
#[derive(Debug, Clone)]
pub struct FrlDecomposition<T> {
    pub u_alphabet_size: usize,
    /// `P_U(u)`.
    pub masses: Vec<T>,
    /// `reconstruction[u][x] = f(u, x)`.
    pub reconstruction: Vec<Vec<usize>>,
    /// The kernel P_U|X,Y.
    pub mechanism: Mechanism<T>,
}

impl<T: Real> FrlDecomposition<T> {
    pub fn reconstruct(&self, u: usize, x: usize) -> usize {
        self.reconstruction[u][x]
    }

    pub fn kernel(&self) -> &Matrix<T> {
        self.mechanism.kernel()
    }
}

/// Greedy peeling of the conditionals P_Y|X=x: every step takes the largest
/// remaining entry of each column (lowest y on ties) and removes the
/// smallest of those masses from all columns at once.
pub fn frl_construct<T: Real>(joint: &JointDistribution<T>) -> FrlDecomposition<T> {
    let (nx, ny) = (joint.x_size(), joint.y_size());
    let mut residual: Vec<Vec<T>> = (0..nx).map(|x| joint.p_y_given_x(x)).collect();
    let mut masses = Vec::new();
    let mut reconstruction = Vec::new();
    let max_peels = nx * (ny - 1) + 1;
    while masses.len() < max_peels {
        let remaining: T = residual[0].iter().copied().sum();
        if remaining < T::c(PEEL_STOP) {
            break;
        }
        let choice: Vec<usize> = residual
            .iter()
            .map(|col| (0..ny).fold(0, |b, y| if col[y] > col[b] { y } else { b }))
            .collect();
        let m = (0..nx)
            .map(|x| residual[x][choice[x]])
            .fold(T::infinity(), T::min);
        for x in 0..nx {
            let v = &mut residual[x][choice[x]];
            *v -= m;
            if *v < T::c(PEEL_ZERO) {
                *v = T::zero();
            }
        }
        masses.push(m);
        reconstruction.push(choice);
    }
    let total: T = masses.iter().copied().sum();
    masses.iter_mut().for_each(|m| *m /= total);

    let n = masses.len();
    let p_xy = joint.p_xy();
    let kernel = Matrix::from_fn(n, nx * ny, |u, col| {
        let (x, y) = (col / ny, col % ny);
        let column_mass: T = (0..n)
            .filter(|&w| reconstruction[w][x] == y)
            .map(|w| masses[w])
            .sum();
        if p_xy[(x, y)] == T::zero() || column_mass == T::zero() {
            masses[u]
        } else if reconstruction[u][x] == y {
            masses[u] / column_mass
        } else {
            T::zero()
        }
    });
    let mechanism = Mechanism::new(MechanismKind::JointAccess, kernel)
        .expect("peeled kernel columns are normalized");
    FrlDecomposition {
        u_alphabet_size: n,
        masses,
        reconstruction,
        mechanism,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EfrlDiagnostics<T> {
    pub eps: T,
    /// Probability that the X component is revealed.
    pub alpha_prime: T,
    pub target_leakage_nats: T,
    pub achieved_leakage_nats: T,
    /// Configured base.
    pub mutual_information_uy: T,
    pub conditional_entropy_y_given_xu: T,
    /// `d(P_X,U(·,u), P_X P_U(u))` per output letter.
    pub per_letter_distances: Vec<T>,
    pub max_distance: T,
    /// `sqrt(2 I(X;Y))`, I in nats.
    pub regime_limit: T,
    pub bisection_iterations: usize,
    pub frl_letters: usize,
}

/// Output letters are pairs `(w, z)` with w an FRL letter and z either X
/// (probability α') or an erasure symbol. Letter `(w, z)` has index
/// `w·(|X|+1) + z` with `z = |X|` the erasure; zero-mass letters are dropped.
fn efrl_mechanism<T: Real>(
    frl: &FrlDecomposition<T>,
    nx: usize,
    ny: usize,
    alpha: T,
) -> Mechanism<T> {
    let width = nx + 1;
    let keep: Vec<usize> = (0..frl.u_alphabet_size * width)
        .filter(|&u| {
            let z = u % width;
            if z == nx {
                alpha < T::one()
            } else {
                alpha > T::zero()
            }
        })
        .collect();
    let base = frl.kernel();
    let kernel = Matrix::from_fn(keep.len(), nx * ny, |r, col| {
        let u = keep[r];
        let (w, z) = (u / width, u % width);
        let x = col / ny;
        let reveal = if z == nx {
            T::one() - alpha
        } else if z == x {
            alpha
        } else {
            T::zero()
        };
        base[(w, col)] * reveal
    });
    Mechanism::new(MechanismKind::JointAccess, kernel).expect("product kernel is stochastic")
}

/// A mechanism with `I(U;X) = ε²/2` nats and `H(Y|U,X) = 0`.
pub fn efrl_construct<T: Real>(
    joint: &JointDistribution<T>,
    eps: T,
) -> Result<(Mechanism<T>, EfrlDiagnostics<T>)> {
    let limit = relaxation_limit(joint);
    if !(eps >= T::zero() && eps < limit) {
        return Err(Error::RegimeViolation {
            eps: eps.as_f64(),
            limit: limit.as_f64(),
        });
    }
    let (nx, ny) = (joint.x_size(), joint.y_size());
    let frl = frl_construct(joint);
    let target = eps * eps / T::c(2.0);
    let leakage = |alpha: T| -> Result<T> {
        let m = efrl_mechanism(&frl, nx, ny, alpha);
        let t = m.induce(joint)?;
        Ok(joint.log_base().to_nats(t.mutual_information_ux()))
    };
    let max = leakage(T::one())?;
    if target > max {
        return Err(Error::BisectionFailure {
            target: target.as_f64(),
            max: max.as_f64(),
        });
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut iterations = 0;
    let alpha = if target == T::zero() {
        T::zero()
    } else {
        let tol = T::c(1e-13).max(T::epsilon() * T::c(16.0));
        loop {
            iterations += 1;
            let mid = (lo + hi) / T::c(2.0);
            let v = leakage(mid)?;
            if (v - target).abs() <= tol || iterations >= 200 || hi - lo <= T::epsilon() {
                break mid;
            }
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    };
    let mechanism = efrl_mechanism(&frl, nx, ny, alpha);
    let triple = mechanism.induce(joint)?;
    let per_letter_distances: Vec<T> = triple
        .criterion_values(Criterion::One)
        .into_iter()
        .map(|v| v.unwrap_or_else(T::zero))
        .collect();
    let max_distance = per_letter_distances.iter().copied().fold(T::zero(), T::max);
    let diagnostics = EfrlDiagnostics {
        eps,
        alpha_prime: alpha,
        target_leakage_nats: target,
        achieved_leakage_nats: joint.log_base().to_nats(triple.mutual_information_ux()),
        mutual_information_uy: triple.mutual_information_uy(),
        conditional_entropy_y_given_xu: triple.conditional_entropy_y_given_xu(),
        per_letter_distances,
        max_distance,
        regime_limit: limit,
        bisection_iterations: iterations,
        frl_letters: frl.u_alphabet_size,
    };
    Ok((mechanism, diagnostics))
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionCheck<T> {
    pub criterion: Criterion,
    /// `None` for letters of zero probability under criterion 2.
    pub per_letter: Vec<Option<T>>,
    pub max: T,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport<T> {
    pub kind: MechanismKind,
    pub eps: T,
    pub criterion: Criterion,
    pub log_base: LogBase,
    pub p_u: Vec<T>,
    pub checks: Vec<CriterionCheck<T>>,
    /// Passes the requested criterion.
    pub pass: bool,
    /// `I(X;U|Y)`; zero when X − Y − U holds.
    pub markov_residual: T,
    pub mutual_information_uy: T,
    pub mutual_information_ux: T,
    pub conditional_entropy_y_given_xu: T,
    /// `I(U;Y) − (I(X;U) + H(Y|X) − I(X;U|Y) − H(Y|X,U))`.
    pub decomposition_residual: T,
}

impl<T: Real> VerificationReport<T> {
    pub fn check(&self, criterion: Criterion) -> &CriterionCheck<T> {
        &self.checks[usize::from(criterion == Criterion::Two)]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Measures a mechanism against both criteria. Shape mismatches are the only
/// error; failing constraints are reported, not raised.
pub fn verify_mechanism<T: Real>(
    mechanism: &Mechanism<T>,
    joint: &JointDistribution<T>,
    criterion: Criterion,
    eps: T,
) -> Result<VerificationReport<T>> {
    let triple = mechanism.induce(joint)?;
    let slack = T::c(T::INEQUALITY_TOL);
    let checks: Vec<CriterionCheck<T>> = [Criterion::One, Criterion::Two]
        .into_iter()
        .map(|c| {
            let per_letter = triple.criterion_values(c);
            let max = per_letter.iter().flatten().copied().fold(T::zero(), T::max);
            CriterionCheck {
                criterion: c,
                per_letter,
                max,
                pass: max <= eps + slack,
            }
        })
        .collect();
    let pass = checks[usize::from(criterion == Criterion::Two)].pass;
    let markov_residual = match mechanism.kind() {
        MechanismKind::Markov => T::zero(),
        MechanismKind::JointAccess => triple.conditional_mutual_information_xu_given_y(),
    };
    let i_uy = triple.mutual_information_uy();
    let i_ux = triple.mutual_information_ux();
    let h_y_xu = triple.conditional_entropy_y_given_xu();
    let h_y_x = conditional_entropy(joint, Direction::YGivenX);
    let i_xu_y = triple.conditional_mutual_information_xu_given_y();
    Ok(VerificationReport {
        kind: mechanism.kind(),
        eps,
        criterion,
        log_base: joint.log_base(),
        p_u: triple.p_u(),
        checks,
        pass,
        markov_residual,
        mutual_information_uy: i_uy,
        mutual_information_ux: i_ux,
        conditional_entropy_y_given_xu: h_y_xu,
        decomposition_residual: i_uy - (i_ux + h_y_x - i_xu_y - h_y_xu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::lower_h1;
    use crate::info::{mutual_information, validate_joint};
    use crate::lp::lower_bound_g;

    fn example_one() -> JointDistribution<f64> {
        validate_joint(&[
            vec![0.693, 0.027, 0.108, 0.072],
            vec![0.006, 0.085, 0.004, 0.005],
        ])
        .unwrap()
    }

    fn assert_frl_invariants(j: &JointDistribution<f64>, frl: &FrlDecomposition<f64>) {
        let t = frl.mechanism.induce(j).unwrap();
        assert!(t.conditional_entropy_y_given_xu() < 1e-12);
        let xu = t.p_xu();
        let p_u = t.p_u();
        for x in 0..j.x_size() {
            let dist: f64 = (0..p_u.len())
                .map(|u| (xu[(x, u)] / j.p_x()[x] - p_u[u]).abs())
                .sum();
            assert!(dist < 1e-9);
        }
        assert!(frl.u_alphabet_size <= j.x_size() * (j.y_size() - 1) + 1);
        for u in 0..frl.u_alphabet_size {
            for x in 0..j.x_size() {
                let y = frl.reconstruct(u, x);
                assert!(j.p_xy()[(x, y)] > 0.0);
            }
        }
    }

    #[test]
    fn frl_on_first_example() {
        let j = example_one();
        let frl = frl_construct(&j);
        assert!(frl.u_alphabet_size <= 7);
        assert_frl_invariants(&j, &frl);
    }

    #[test]
    fn frl_special_channels() {
        let independent = validate_joint(&[vec![0.1, 0.3, 0.1], vec![0.1, 0.3, 0.1]]).unwrap();
        let frl = frl_construct(&independent);
        assert!(frl.u_alphabet_size <= 3);
        for row in &frl.reconstruction {
            assert!(row.iter().all(|&y| y == row[0]));
        }
        assert_frl_invariants(&independent, &frl);

        let copy = validate_joint(&[vec![0.4, 0.0], vec![0.0, 0.6]]).unwrap();
        let frl = frl_construct(&copy);
        assert_eq!(frl.u_alphabet_size, 1);
        assert_eq!(frl.reconstruction[0], vec![0, 1]);
    }

    #[test]
    fn efrl_hits_target_leakage() {
        let j = example_one();
        let limit = relaxation_limit(&j);
        for frac in [0.05, 0.1, 0.2, 0.6] {
            let eps = frac * limit;
            let (m, d) = efrl_construct(&j, eps).unwrap();
            assert!((d.achieved_leakage_nats - eps * eps / 2.0).abs() < 1e-9);
            assert!(d.conditional_entropy_y_given_xu < 1e-12);
            assert!(d.max_distance <= eps + 1e-12);
            for &dist in &d.per_letter_distances {
                assert!(dist * dist / 2.0 <= d.achieved_leakage_nats + 1e-12);
            }
            let (l1, _, _) = lower_h1(&j, eps).unwrap();
            assert!(d.mutual_information_uy >= l1 - 1e-9);
            let r = verify_mechanism(&m, &j, Criterion::One, eps).unwrap();
            assert!(r.pass);
            assert!(r.decomposition_residual.abs() < 1e-9);
            assert!(m.u_size() <= d.frl_letters * (j.x_size() + 1));
        }
    }

    #[test]
    fn efrl_at_zero_is_pure_frl() {
        let j = example_one();
        let (m, d) = efrl_construct(&j, 0.0).unwrap();
        assert_eq!(d.alpha_prime, 0.0);
        assert_eq!(m.u_size(), d.frl_letters);
        assert!(d.per_letter_distances.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn efrl_regime_is_enforced() {
        let j = example_one();
        let limit = (2.0 * LogBase::Bits.to_nats(mutual_information(&j))).sqrt();
        assert!(matches!(
            efrl_construct(&j, limit),
            Err(Error::RegimeViolation { .. })
        ));
        assert!(efrl_construct(&j, -0.1).is_err());
    }

    #[test]
    fn verification_of_simple_mechanisms() {
        let j = example_one();
        let constant = Mechanism::constant(MechanismKind::Markov, 4, &[0.3, 0.7]).unwrap();
        let r = verify_mechanism(&constant, &j, Criterion::Two, 0.0).unwrap();
        assert!(r.check(Criterion::One).pass && r.check(Criterion::Two).pass);
        assert!(r.mutual_information_uy.abs() < 1e-12);

        let identity = Mechanism::identity(4);
        let r = verify_mechanism(&identity, &j, Criterion::Two, 0.01).unwrap();
        assert!(!r.pass);
        let expected = (0..4)
            .map(|y| {
                let col = j.p_x_given_y().col(y);
                col.iter()
                    .zip(j.p_x())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        assert!((r.check(Criterion::Two).max - expected).abs() < 1e-12);
        assert_eq!(r.markov_residual, 0.0);
        assert!(r.to_json().contains("\"decomposition_residual\""));
    }

    #[test]
    fn lp_mechanism_verifies() {
        let j = example_one();
        let (_, d) = lower_bound_g(&j, 0.01, Criterion::One).unwrap();
        let r = verify_mechanism(&d.mechanism, &j, Criterion::One, 0.01).unwrap();
        assert!(r.pass);
        assert!(r.decomposition_residual.abs() < 1e-9);
    }
}
