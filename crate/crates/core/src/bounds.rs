//! Closed-form bounds on the utility-leakage trade-off, the threshold ε₂ and
//! the assembly of per-ε bound reports.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{compute_m, enumerate_omega1, OmegaSet};
use crate::info::{
    conditional_entropy, entropy, mutual_information, Criterion, Direction, JointDistribution,
};
use crate::linalg::largest_singular_value;
use crate::lp::{lower_bound_with, DesignedMechanism};
use crate::scalar::Real;

/// `sqrt(2 I(X;Y))` with I in nats: the largest budget for which the
/// relaxed functional representation constructions exist.
pub fn relaxation_limit<T: Real>(joint: &JointDistribution<T>) -> T {
    let i_nats = joint.log_base().to_nats(mutual_information(joint));
    (T::c(2.0) * i_nats.max(T::zero())).sqrt()
}

/// `(L¹_h1, L²_h1, max)`. L²_h1 is NaN when H(X) = 0.
pub fn lower_h1<T: Real>(joint: &JointDistribution<T>, eps: T) -> Result<(T, T, T)> {
    let limit = relaxation_limit(joint);
    if !(eps >= T::zero() && eps < limit) {
        return Err(Error::RegimeViolation {
            eps: eps.as_f64(),
            limit: limit.as_f64(),
        });
    }
    let (l1, l2) = lower_h1_formulas(joint, eps);
    let max = if l2.is_nan() { l1 } else { l1.max(l2) };
    Ok((l1, l2, max))
}

fn lower_h1_formulas<T: Real>(joint: &JointDistribution<T>, eps: T) -> (T, T) {
    let base = joint.log_base();
    let h_y_x = conditional_entropy(joint, Direction::YGivenX);
    let h_x_y = conditional_entropy(joint, Direction::XGivenY);
    let h_x = entropy(joint.p_x(), base);
    let i_xy = mutual_information(joint);
    let half_sq = eps * eps / T::c(2.0);
    let l1 = h_y_x - h_x_y + half_sq;
    let l2 = if h_x > T::zero() {
        let alpha = half_sq / h_x;
        h_y_x - alpha * h_x_y + half_sq
            - (T::one() - alpha) * (base.log(i_xy + T::one()) + T::c(4.0))
    } else {
        T::nan()
    };
    (l1, l2)
}

/// `(U_g1, min(U_g1, H(Y)))`.
pub fn upper_g1<T: Real>(joint: &JointDistribution<T>, eps: T) -> (T, T) {
    let h_y_x = conditional_entropy(joint, Direction::YGivenX);
    let sizes = T::from_usize_lossy(joint.x_size() * joint.y_size());
    let u = eps * sizes / joint.min_p_x() + h_y_x;
    (u, u.min(entropy(joint.p_y(), joint.log_base())))
}

pub fn upper_h2<T: Real>(joint: &JointDistribution<T>, eps: T) -> T {
    eps * eps / joint.min_p_x() + conditional_entropy(joint, Direction::YGivenX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// ε < ε₂ / 2.
    HalfEps2,
    /// ε < ε₂ / (2√|X|).
    HalfEps2OverSqrtX,
}

/// Bound on `|H(Y|U*) − linearized H(Y|U*)|` in the given regime.
pub fn error_bound<T: Real>(x_size: usize, regime: Regime) -> T {
    match regime {
        Regime::HalfEps2 => T::c(0.75),
        Regime::HalfEps2OverSqrtX => {
            let n = T::from_usize_lossy(x_size);
            let d = T::c(2.0) * n.sqrt() - T::one();
            T::one() / (T::c(2.0) * d * d) + T::one() / (T::c(4.0) * n)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Epsilon2Data<T> {
    pub epsilon2: T,
    /// Ω and the Y index of the smallest base-point entry.
    pub argmin_entry: (Vec<usize>, usize),
    /// Ω with the largest σ_max(H_Ω).
    pub argmax_omega: Vec<usize>,
    pub h_omega_sigma_max: Vec<(Vec<usize>, T)>,
}

impl<T: Real> Epsilon2Data<T> {
    pub fn threshold(&self, regime: Regime, x_size: usize) -> T {
        match regime {
            Regime::HalfEps2 => self.epsilon2 / T::c(2.0),
            Regime::HalfEps2OverSqrtX => {
                self.epsilon2 / (T::c(2.0) * T::from_usize_lossy(x_size).sqrt())
            }
        }
    }
}

pub fn epsilon2<T: Real>(joint: &JointDistribution<T>) -> Result<Epsilon2Data<T>> {
    let m = compute_m(joint)?;
    let omega1 = enumerate_omega1(&m, joint.p_y())?;
    epsilon2_of(&omega1)
}

pub fn epsilon2_of<T: Real>(omega1: &[OmegaSet<T>]) -> Result<Epsilon2Data<T>> {
    if omega1.is_empty() {
        return Err(Error::EmptyOmega1);
    }
    let mut numerator = T::infinity();
    let mut argmin_entry = (Vec::new(), 0);
    let mut denominator = -T::one();
    let mut argmax_omega = Vec::new();
    let mut h_omega_sigma_max = Vec::with_capacity(omega1.len());
    for omega in omega1 {
        for (&y, &v) in omega.indices().iter().zip(omega.base_point()) {
            if v < numerator {
                numerator = v;
                argmin_entry = (omega.indices().to_vec(), y);
            }
        }
        let sigma = largest_singular_value(omega.h_omega());
        if sigma > denominator {
            denominator = sigma;
            argmax_omega = omega.indices().to_vec();
        }
        h_omega_sigma_max.push((omega.indices().to_vec(), sigma));
    }
    Ok(Epsilon2Data {
        epsilon2: numerator / denominator,
        argmin_entry,
        argmax_omega,
        h_omega_sigma_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperG2<T> {
    pub u1: T,
    pub u1_valid: bool,
    pub u2: T,
    pub u2_valid: bool,
}

/// `U¹_g2 = approx + 3/4` and `U²_g2 = approx + strengthened slack`, each
/// flagged by its regime.
pub fn upper_g2<T: Real>(x_size: usize, eps2: T, eps: T, approx_value: T) -> UpperG2<T> {
    let n = T::from_usize_lossy(x_size);
    UpperG2 {
        u1: approx_value + error_bound(x_size, Regime::HalfEps2),
        u1_valid: eps < eps2 / T::c(2.0),
        u2: approx_value + error_bound(x_size, Regime::HalfEps2OverSqrtX),
        u2_valid: eps < eps2 / (T::c(2.0) * n.sqrt()),
    }
}

/// Regime thresholds of an instance. Geometry-based entries are `None`
/// when the polytope construction does not apply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds<T> {
    pub epsilon2: Option<T>,
    pub half_epsilon2: Option<T>,
    pub half_epsilon2_over_sqrt_x: Option<T>,
    pub relaxation_limit: T,
}

pub fn thresholds<T: Real>(joint: &JointDistribution<T>) -> Thresholds<T> {
    let e2 = epsilon2(joint).ok();
    let nx = joint.x_size();
    Thresholds {
        epsilon2: e2.as_ref().map(|d| d.epsilon2),
        half_epsilon2: e2.as_ref().map(|d| d.threshold(Regime::HalfEps2, nx)),
        half_epsilon2_over_sqrt_x: e2
            .as_ref()
            .map(|d| d.threshold(Regime::HalfEps2OverSqrtX, nx)),
        relaxation_limit: relaxation_limit(joint),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BoundName {
    #[serde(rename = "L_h1_1")]
    LH1One,
    #[serde(rename = "L_h1_2")]
    LH1Two,
    #[serde(rename = "L_g1")]
    LG1,
    #[serde(rename = "L_g2")]
    LG2,
    #[serde(rename = "U_g1")]
    UG1,
    #[serde(rename = "U_g1_cap")]
    UG1Cap,
    #[serde(rename = "U_h2")]
    UH2,
    #[serde(rename = "U_g2_1")]
    UG2One,
    #[serde(rename = "U_g2_2")]
    UG2Two,
}

impl BoundName {
    /// CSV column order.
    pub const ALL: [BoundName; 9] = [
        BoundName::LH1One,
        BoundName::LH1Two,
        BoundName::LG1,
        BoundName::LG2,
        BoundName::UG1,
        BoundName::UG1Cap,
        BoundName::UH2,
        BoundName::UG2One,
        BoundName::UG2Two,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BoundName::LH1One => "L_h1_1",
            BoundName::LH1Two => "L_h1_2",
            BoundName::LG1 => "L_g1",
            BoundName::LG2 => "L_g2",
            BoundName::UG1 => "U_g1",
            BoundName::UG1Cap => "U_g1_cap",
            BoundName::UH2 => "U_h2",
            BoundName::UG2One => "U_g2_1",
            BoundName::UG2Two => "U_g2_2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry<T> {
    /// NaN when the quantity cannot be evaluated at all.
    pub value: T,
    pub valid: bool,
    /// Why the entry is invalid.
    pub reason: Option<String>,
}

impl<T: Real> BoundEntry<T> {
    fn valid(value: T) -> Self {
        Self {
            value,
            valid: true,
            reason: None,
        }
    }

    fn invalid(value: T, reason: impl Into<String>) -> Self {
        Self {
            value,
            valid: false,
            reason: Some(reason.into()),
        }
    }

    fn flagged(value: T, ok: bool, reason: impl Into<String>) -> Self {
        if ok {
            Self::valid(value)
        } else {
            Self::invalid(value, reason)
        }
    }

    pub fn valid_value(&self) -> Option<T> {
        self.valid.then_some(self.value)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport<T> {
    pub eps: T,
    /// Indexed like [`BoundName::ALL`].
    pub bounds: Vec<(BoundName, BoundEntry<T>)>,
    pub special_case_deterministic_x: bool,
}

impl<T: Real> BoundReport<T> {
    pub fn get(&self, name: BoundName) -> &BoundEntry<T> {
        &self.bounds[BoundName::ALL
            .iter()
            .position(|&n| n == name)
            .expect("known bound")]
        .1
    }

    fn best(&self, names: &[BoundName], lower: bool) -> Option<T> {
        names
            .iter()
            .filter_map(|&n| self.get(n).valid_value())
            .reduce(|a, b| if lower { a.max(b) } else { a.min(b) })
    }

    /// Largest valid lower bound on g for the criterion. With X a function
    /// of Y the joint-access bounds apply to g¹ as well.
    pub fn lower_g(&self, criterion: Criterion) -> Option<T> {
        match criterion {
            Criterion::One if self.special_case_deterministic_x => self.best(
                &[BoundName::LH1One, BoundName::LH1Two, BoundName::LG1],
                true,
            ),
            Criterion::One => self.best(&[BoundName::LG1], true),
            Criterion::Two => self.best(&[BoundName::LG2], true),
        }
    }

    /// Smallest valid upper bound on g for the criterion.
    pub fn upper_g(&self, criterion: Criterion) -> Option<T> {
        match criterion {
            Criterion::One => self.best(&[BoundName::UG1, BoundName::UG1Cap], false),
            Criterion::Two => self.best(
                &[BoundName::UH2, BoundName::UG2One, BoundName::UG2Two],
                false,
            ),
        }
    }

    /// Largest violation of `lower ≤ upper` over both criteria (zero when
    /// the sandwich holds).
    pub fn sandwich_violation(&self) -> T {
        [Criterion::One, Criterion::Two]
            .iter()
            .filter_map(|&c| Some(self.lower_g(c)? - self.upper_g(c)?))
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Reusable per-instance data for evaluating many ε.
struct Context<T> {
    omega1: std::result::Result<Vec<OmegaSet<T>>, Error>,
    eps2: Option<T>,
    relaxation_limit: T,
    deterministic_x: bool,
    h_x_positive: bool,
}

fn lp_entry<T: Real>(result: &std::result::Result<DesignedMechanism<T>, Error>) -> BoundEntry<T> {
    match result {
        Ok(d) => BoundEntry::valid(d.achieved_utility),
        Err(e) => BoundEntry::invalid(T::nan(), e.to_string()),
    }
}

fn report_at<T: Real>(joint: &JointDistribution<T>, ctx: &Context<T>, eps: T) -> BoundReport<T> {
    let (l1, l2) = lower_h1_formulas(joint, eps);
    let in_relaxation = eps < ctx.relaxation_limit;
    let relaxation_reason = "eps ≥ sqrt(2 I(X;Y))";
    let (lg1, lg2) = match &ctx.omega1 {
        Ok(o) => (
            lower_bound_with(joint, eps, Criterion::One, o).map(|(_, d)| d),
            lower_bound_with(joint, eps, Criterion::Two, o).map(|(_, d)| d),
        ),
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    let (ug1, ug1_cap) = upper_g1(joint, eps);
    let uh2 = upper_h2(joint, eps);
    let (ug2_1, ug2_2) = match (&lg2, ctx.eps2) {
        (Ok(d), Some(e2)) => {
            let u = upper_g2(joint.x_size(), e2, eps, d.approx_value);
            (
                BoundEntry::flagged(u.u1, u.u1_valid, "eps ≥ ε₂/2"),
                BoundEntry::flagged(u.u2, u.u2_valid, "eps ≥ ε₂/(2√|X|)"),
            )
        }
        (Err(e), _) => (
            BoundEntry::invalid(T::nan(), e.to_string()),
            BoundEntry::invalid(T::nan(), e.to_string()),
        ),
        (Ok(_), None) => (
            BoundEntry::invalid(T::nan(), "ε₂ unavailable"),
            BoundEntry::invalid(T::nan(), "ε₂ unavailable"),
        ),
    };
    let l2_entry = if !ctx.h_x_positive {
        BoundEntry::invalid(l2, "H(X) = 0")
    } else {
        BoundEntry::flagged(l2, in_relaxation, relaxation_reason)
    };
    let entries = vec![
        BoundEntry::flagged(l1, in_relaxation, relaxation_reason),
        l2_entry,
        lp_entry(&lg1),
        lp_entry(&lg2),
        BoundEntry::valid(ug1),
        BoundEntry::valid(ug1_cap),
        BoundEntry::valid(uh2),
        ug2_1,
        ug2_2,
    ];
    BoundReport {
        eps,
        bounds: BoundName::ALL.iter().copied().zip(entries).collect(),
        special_case_deterministic_x: ctx.deterministic_x,
    }
}

/// One report per grid point, evaluated concurrently. The grid must be
/// sorted and nonnegative.
pub fn bound_report<T: Real>(
    joint: &JointDistribution<T>,
    eps_grid: &[T],
) -> Result<Vec<BoundReport<T>>> {
    if eps_grid
        .iter()
        .any(|&e| !(e >= T::zero()) || !e.is_finite())
    {
        return Err(Error::InvalidArgument(
            "eps grid must be finite and nonnegative".into(),
        ));
    }
    if eps_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("eps grid must be sorted".into()));
    }
    let omega1 = compute_m(joint).and_then(|m| enumerate_omega1(&m, joint.p_y()));
    let eps2 = omega1
        .as_ref()
        .ok()
        .and_then(|o| epsilon2_of(o).ok())
        .map(|d| d.epsilon2);
    let ctx = Context {
        omega1,
        eps2,
        relaxation_limit: relaxation_limit(joint),
        deterministic_x: joint.x_is_function_of_y(),
        h_x_positive: entropy(joint.p_x(), joint.log_base()) > T::zero(),
    };
    Ok(eps_grid
        .par_iter()
        .map(|&eps| report_at(joint, &ctx, eps))
        .collect())
}

/// CSV header: `eps`, one column per bound, one `valid_<bound>` column per
/// bound, then `deterministic_x`, `g1_lower`, `g1_upper`, `g2_lower`,
/// `g2_upper` (the combined sandwiches; empty when no bound is valid).
pub fn csv_header() -> Vec<String> {
    let mut h = vec!["eps".to_string()];
    h.extend(BoundName::ALL.iter().map(|n| n.label().to_string()));
    h.extend(
        BoundName::ALL
            .iter()
            .map(|n| format!("valid_{}", n.label())),
    );
    h.extend(
        [
            "deterministic_x",
            "g1_lower",
            "g1_upper",
            "g2_lower",
            "g2_upper",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn fmt_opt<T: Real>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<T: Real, W: Write>(reports: &[BoundReport<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header())?;
    for r in reports {
        let mut rec = vec![r.eps.to_string()];
        rec.extend(r.bounds.iter().map(|(_, e)| e.value.to_string()));
        rec.extend(r.bounds.iter().map(|(_, e)| e.valid.to_string()));
        rec.push(r.special_case_deterministic_x.to_string());
        rec.push(fmt_opt(r.lower_g(Criterion::One)));
        rec.push(fmt_opt(r.upper_g(Criterion::One)));
        rec.push(fmt_opt(r.lower_g(Criterion::Two)));
        rec.push(fmt_opt(r.upper_g(Criterion::Two)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<T: Real>(reports: &[BoundReport<T>]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}
