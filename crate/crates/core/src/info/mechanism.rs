use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::info::joint::{JointDistribution, LogBase};
use crate::info::measures::{entropy, mutual_information_of};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Which per-letter ℓ₁ constraint a mechanism must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// `‖P_X,U(·,u) − P_X P_U(u)‖₁ ≤ ε` for every u.
    One,
    /// `‖P_X|U(·|u) − P_X‖₁ ≤ ε` for every u.
    Two,
}

impl Criterion {
    pub fn number(self) -> u8 {
        match self {
            Criterion::One => 1,
            Criterion::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Criterion::One),
            2 => Ok(Criterion::Two),
            _ => Err(Error::InvalidArgument(format!(
                "criterion must be 1 or 2, got {n}"
            ))),
        }
    }
}

impl Serialize for Criterion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Criterion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        Criterion::from_number(n).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// Kernel P_U|Y; X − Y − U holds by construction.
    Markov,
    /// Kernel P_U|X,Y; column `x·|Y| + y` holds P_U|X=x,Y=y.
    JointAccess,
}

/// A disclosure kernel. Rows are indexed by U; every column is a
/// probability distribution over U.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism<T = f64> {
    kind: MechanismKind,
    kernel: Matrix<T>,
}

impl<T: Real> Mechanism<T> {
    pub fn new(kind: MechanismKind, kernel: Matrix<T>) -> Result<Self> {
        for j in 0..kernel.cols() {
            let mut sum = T::zero();
            for u in 0..kernel.rows() {
                let v = kernel[(u, j)];
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::InvalidMechanism(format!(
                        "kernel entry ({u}, {j}) = {v} is not a probability"
                    )));
                }
                sum += v;
            }
            if (sum - T::one()).abs() > T::c(T::NORMALIZATION_TOL) {
                return Err(Error::InvalidMechanism(format!(
                    "kernel column {j} sums to {sum}"
                )));
            }
        }
        Ok(Self { kind, kernel })
    }

    /// U independent of everything: every column equals `p_u`.
    pub fn constant(kind: MechanismKind, columns: usize, p_u: &[T]) -> Result<Self> {
        Self::new(kind, Matrix::from_fn(p_u.len(), columns, |u, _| p_u[u]))
    }

    /// `U = Y`.
    pub fn identity(y_size: usize) -> Self {
        Self {
            kind: MechanismKind::Markov,
            kernel: Matrix::identity(y_size),
        }
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn kernel(&self) -> &Matrix<T> {
        &self.kernel
    }

    pub fn u_size(&self) -> usize {
        self.kernel.rows()
    }

    fn check_shape(&self, joint: &JointDistribution<T>) -> Result<()> {
        let expected = match self.kind {
            MechanismKind::Markov => joint.y_size(),
            MechanismKind::JointAccess => joint.x_size() * joint.y_size(),
        };
        if self.kernel.cols() != expected {
            return Err(Error::LengthMismatch(self.kernel.cols(), expected));
        }
        Ok(())
    }

    /// The joint law of (X, Y, U) induced by applying the kernel to `joint`.
    pub fn induce(&self, joint: &JointDistribution<T>) -> Result<TripleDistribution<T>> {
        self.check_shape(joint)?;
        let (nx, ny, nu) = (joint.x_size(), joint.y_size(), self.u_size());
        let mut p = vec![T::zero(); nx * ny * nu];
        for x in 0..nx {
            for y in 0..ny {
                let pxy = joint.p_xy()[(x, y)];
                let col = match self.kind {
                    MechanismKind::Markov => y,
                    MechanismKind::JointAccess => x * ny + y,
                };
                for u in 0..nu {
                    p[(x * ny + y) * nu + u] = pxy * self.kernel[(u, col)];
                }
            }
        }
        Ok(TripleDistribution {
            nx,
            ny,
            nu,
            p,
            base: joint.log_base(),
        })
    }

    pub fn to_document(&self) -> MechanismDocument<T> {
        MechanismDocument {
            kind: self.kind,
            kernel: self.kernel.to_rows(),
            u_size: self.u_size(),
        }
    }

    pub fn from_document(doc: &MechanismDocument<T>) -> Result<Self> {
        let kernel = Matrix::from_rows(&doc.kernel)?;
        if kernel.rows() != doc.u_size {
            return Err(Error::LengthMismatch(kernel.rows(), doc.u_size));
        }
        Self::new(doc.kind, kernel)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("mechanism serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MechanismDocument<T> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("mechanism JSON: {e}")))?;
        Self::from_document(&doc)
    }
}

/// `{"kind": "...", "kernel": [[...]], "u_size": n}`; kernel rows are U.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismDocument<T = f64> {
    pub kind: MechanismKind,
    pub kernel: Vec<Vec<T>>,
    pub u_size: usize,
}

/// Joint law of (X, Y, U).
#[derive(Debug, Clone)]
pub struct TripleDistribution<T> {
    nx: usize,
    ny: usize,
    nu: usize,
    p: Vec<T>,
    base: LogBase,
}

impl<T: Real> TripleDistribution<T> {
    #[inline]
    fn at(&self, x: usize, y: usize, u: usize) -> T {
        self.p[(x * self.ny + y) * self.nu + u]
    }

    pub fn u_size(&self) -> usize {
        self.nu
    }

    pub fn log_base(&self) -> LogBase {
        self.base
    }

    /// `|X| × |U|`.
    pub fn p_xu(&self) -> Matrix<T> {
        Matrix::from_fn(self.nx, self.nu, |x, u| {
            (0..self.ny).map(|y| self.at(x, y, u)).sum()
        })
    }

    /// `|Y| × |U|`.
    pub fn p_yu(&self) -> Matrix<T> {
        Matrix::from_fn(self.ny, self.nu, |y, u| {
            (0..self.nx).map(|x| self.at(x, y, u)).sum()
        })
    }

    pub fn p_u(&self) -> Vec<T> {
        (0..self.nu)
            .map(|u| {
                (0..self.nx)
                    .flat_map(|x| (0..self.ny).map(move |y| (x, y)))
                    .map(|(x, y)| self.at(x, y, u))
                    .sum()
            })
            .collect()
    }

    pub fn mutual_information_uy(&self) -> T {
        mutual_information_of(&self.p_yu(), self.base)
    }

    pub fn mutual_information_ux(&self) -> T {
        mutual_information_of(&self.p_xu(), self.base)
    }

    /// `H(Y | X, U)`.
    pub fn conditional_entropy_y_given_xu(&self) -> T {
        let mut acc = T::zero();
        for x in 0..self.nx {
            for u in 0..self.nu {
                let column: Vec<T> = (0..self.ny).map(|y| self.at(x, y, u)).collect();
                let mass: T = column.iter().copied().sum();
                if mass > T::zero() {
                    let cond: Vec<T> = column.iter().map(|&v| v / mass).collect();
                    acc += mass * entropy(&cond, self.base);
                }
            }
        }
        acc
    }

    /// `I(X; U | Y)`: zero exactly when X − Y − U is a Markov chain.
    pub fn conditional_mutual_information_xu_given_y(&self) -> T {
        let mut acc = T::zero();
        for y in 0..self.ny {
            let slice = Matrix::from_fn(self.nx, self.nu, |x, u| self.at(x, y, u));
            let mass: T = slice.as_slice().iter().copied().sum();
            if mass > T::zero() {
                let normalized = Matrix::from_fn(self.nx, self.nu, |x, u| slice[(x, u)] / mass);
                acc += mass * mutual_information_of(&normalized, self.base);
            }
        }
        acc
    }

    /// Per-letter value of the given criterion; `None` for letters with
    /// `P_U(u) = 0` under criterion 2.
    pub fn criterion_values(&self, criterion: Criterion) -> Vec<Option<T>> {
        let xu = self.p_xu();
        let p_x: Vec<T> = (0..self.nx)
            .map(|x| xu.row(x).iter().copied().sum())
            .collect();
        let p_u = self.p_u();
        (0..self.nu)
            .map(|u| {
                let pu = p_u[u];
                match criterion {
                    Criterion::One => {
                        Some((0..self.nx).map(|x| (xu[(x, u)] - p_x[x] * pu).abs()).sum())
                    }
                    Criterion::Two if pu > T::zero() => {
                        Some((0..self.nx).map(|x| (xu[(x, u)] / pu - p_x[x]).abs()).sum())
                    }
                    Criterion::Two => None,
                }
            })
            .collect()
    }
}
