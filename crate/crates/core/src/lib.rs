//! Information-theoretic privacy bounds for disclosing a useful variable Y
//! that is correlated with a private variable X.
//!
//! The library computes lower and upper bounds on the largest utility
//! `I(U;Y)` achievable by a disclosure U whose per-letter ℓ₁ leakage about X
//! is at most ε, designs near-optimal mechanisms through a linear program
//! over vertices of a perturbed polytope, and verifies the bounds against a
//! brute-force oracle.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the default type parameters and the aliases below fix
//! the common choices.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod info;
pub mod linalg;
pub mod lp;
pub mod mechanisms;
pub mod oracle;
pub mod scalar;
pub mod simplex;

pub use error::{Error, Result};
pub use info::{Criterion, JointDistribution, LogBase, Mechanism, MechanismKind};
pub use scalar::Real;

pub type Joint = info::JointDistribution<f64>;
pub type Joint32 = info::JointDistribution<f32>;
pub type Mechanism64 = info::Mechanism<f64>;
pub type Mechanism32 = info::Mechanism<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type BoundReport64 = bounds::BoundReport<f64>;
pub type BoundReport32 = bounds::BoundReport<f32>;
