use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};
use crate::scalar::Real;

/// Unit of every entropy and mutual information value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    #[inline]
    pub fn log<T: Real>(self, x: T) -> T {
        match self {
            LogBase::Nats => x.ln(),
            LogBase::Bits => x.log2(),
        }
    }

    /// Multiplier converting a value in this base to nats.
    pub fn to_nats<T: Real>(self, value: T) -> T {
        match self {
            LogBase::Nats => value,
            LogBase::Bits => value * T::c(std::f64::consts::LN_2),
        }
    }

    pub fn from_nats<T: Real>(self, value: T) -> T {
        match self {
            LogBase::Nats => value,
            LogBase::Bits => value / T::c(std::f64::consts::LN_2),
        }
    }
}

/// A nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DistributionVector<T = f64>(Vec<T>);

impl<T: Real> DistributionVector<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        check_probabilities(probs.iter().map(|&p| (0, p)))?;
        Ok(Self(probs))
    }

    /// Point mass on `index`.
    pub fn point_mass(len: usize, index: usize) -> Self {
        let mut v = vec![T::zero(); len];
        v[index] = T::one();
        Self(v)
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![T::one() / T::from_usize_lossy(len); len])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for DistributionVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

fn check_probabilities<T: Real>(entries: impl Iterator<Item = (usize, T)>) -> Result<()> {
    let mut sum = T::zero();
    for (k, (row, p)) in entries.enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite { row, col: k });
        }
        if p < T::zero() {
            return Err(Error::NegativeEntry {
                row,
                col: k,
                value: p.as_f64(),
            });
        }
        sum += p;
    }
    if (sum - T::one()).abs() > T::c(T::NORMALIZATION_TOL) {
        return Err(Error::NotNormalized { sum: sum.as_f64() });
    }
    Ok(())
}

/// Validated joint distribution of private data X (rows) and useful data Y
/// (columns), with cached marginals and the leakage matrix P_X|Y.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution<T = f64> {
    p_xy: Matrix<T>,
    p_x: Vec<T>,
    p_y: Vec<T>,
    p_x_given_y: Matrix<T>,
    labels_x: Vec<String>,
    labels_y: Vec<String>,
    log_base: LogBase,
    full_row_rank: bool,
}

/// Validates a raw `|X| × |Y|` probability grid using the default base (bits).
pub fn validate_joint<T: Real>(rows: &[Vec<T>]) -> Result<JointDistribution<T>> {
    JointDistribution::new(rows)
}

impl<T: Real> JointDistribution<T> {
    pub fn new(rows: &[Vec<T>]) -> Result<Self> {
        let p_xy = Matrix::from_rows(rows)?;
        let (nx, ny) = (p_xy.rows(), p_xy.cols());
        for i in 0..nx {
            for j in 0..ny {
                let v = p_xy[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v < T::zero() {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v.as_f64(),
                    });
                }
            }
        }
        let total: T = p_xy.as_slice().iter().copied().sum();
        if (total - T::one()).abs() > T::c(T::NORMALIZATION_TOL) {
            return Err(Error::NotNormalized {
                sum: total.as_f64(),
            });
        }
        let p_x: Vec<T> = (0..nx).map(|i| p_xy.row(i).iter().copied().sum()).collect();
        let p_y: Vec<T> = (0..ny)
            .map(|j| (0..nx).map(|i| p_xy[(i, j)]).sum())
            .collect();
        if let Some(index) = p_x.iter().position(|&p| p <= T::zero()) {
            return Err(Error::ZeroMarginal { axis: 'X', index });
        }
        if let Some(index) = p_y.iter().position(|&p| p <= T::zero()) {
            return Err(Error::ZeroMarginal { axis: 'Y', index });
        }
        let p_x_given_y = Matrix::from_fn(nx, ny, |i, j| p_xy[(i, j)] / p_y[j]);
        let s = svd(&p_x_given_y).singular_values;
        let smin = s[nx.min(ny) - 1];
        let full_row_rank = nx <= ny && smin > T::zero() && s[0] / smin < T::c(T::CONDITION_LIMIT);
        Ok(Self {
            p_xy,
            p_x,
            p_y,
            p_x_given_y,
            labels_x: (0..nx).map(|i| format!("x{i}")).collect(),
            labels_y: (0..ny).map(|j| format!("y{j}")).collect(),
            log_base: LogBase::default(),
            full_row_rank,
        })
    }

    pub fn with_log_base(mut self, base: LogBase) -> Self {
        self.log_base = base;
        self
    }

    pub fn with_labels(mut self, labels_x: Vec<String>, labels_y: Vec<String>) -> Result<Self> {
        if labels_x.len() != self.x_size() {
            return Err(Error::LengthMismatch(labels_x.len(), self.x_size()));
        }
        if labels_y.len() != self.y_size() {
            return Err(Error::LengthMismatch(labels_y.len(), self.y_size()));
        }
        self.labels_x = labels_x;
        self.labels_y = labels_y;
        Ok(self)
    }

    pub fn p_xy(&self) -> &Matrix<T> {
        &self.p_xy
    }

    pub fn p_x(&self) -> &[T] {
        &self.p_x
    }

    pub fn p_y(&self) -> &[T] {
        &self.p_y
    }

    pub fn p_x_given_y(&self) -> &Matrix<T> {
        &self.p_x_given_y
    }

    /// Column `x` of P_Y|X, i.e. the conditional distribution of Y given X = x.
    pub fn p_y_given_x(&self, x: usize) -> Vec<T> {
        self.p_xy.row(x).iter().map(|&p| p / self.p_x[x]).collect()
    }

    pub fn x_size(&self) -> usize {
        self.p_xy.rows()
    }

    pub fn y_size(&self) -> usize {
        self.p_xy.cols()
    }

    pub fn log_base(&self) -> LogBase {
        self.log_base
    }

    pub fn labels_x(&self) -> &[String] {
        &self.labels_x
    }

    pub fn labels_y(&self) -> &[String] {
        &self.labels_y
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.full_row_rank
    }

    /// `|X| < |Y|`, required by the polytope machinery.
    pub fn has_strictly_smaller_x(&self) -> bool {
        self.x_size() < self.y_size()
    }

    pub fn min_p_x(&self) -> T {
        self.p_x.iter().copied().fold(T::infinity(), T::min)
    }

    /// Errors unless the polytope/LP operations are applicable.
    pub fn require_polytope_support(&self) -> Result<()> {
        if !self.has_strictly_smaller_x() {
            return Err(Error::AlphabetSizes {
                x: self.x_size(),
                y: self.y_size(),
            });
        }
        if !self.full_row_rank {
            return Err(Error::RankDeficient);
        }
        Ok(())
    }

    /// X is a deterministic function of Y: every column of P_XY has a
    /// single nonzero entry.
    pub fn x_is_function_of_y(&self) -> bool {
        (0..self.y_size()).all(|j| {
            (0..self.x_size())
                .filter(|&i| self.p_xy[(i, j)] > T::zero())
                .count()
                == 1
        })
    }

    pub fn to_document(&self) -> JointDocument<T> {
        JointDocument {
            p_xy: self.p_xy.to_rows(),
            labels_x: Some(self.labels_x.clone()),
            labels_y: Some(self.labels_y.clone()),
        }
    }

    pub fn from_document(doc: &JointDocument<T>) -> Result<Self> {
        let mut joint = Self::new(&doc.p_xy)?;
        if doc.labels_x.is_some() || doc.labels_y.is_some() {
            let lx = doc
                .labels_x
                .clone()
                .unwrap_or_else(|| joint.labels_x.clone());
            let ly = doc
                .labels_y
                .clone()
                .unwrap_or_else(|| joint.labels_y.clone());
            joint = joint.with_labels(lx, ly)?;
        }
        Ok(joint)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JointDocument<T> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("joint distribution JSON: {e}")))?;
        Self::from_document(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("joint document serializes")
    }
}

/// On-disk form of a joint distribution: row-major, rows indexed by X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDocument<T = f64> {
    pub p_xy: Vec<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_x: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_y: Option<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_one() -> Vec<Vec<f64>> {
        vec![
            vec![0.693, 0.027, 0.108, 0.072],
            vec![0.006, 0.085, 0.004, 0.005],
        ]
    }

    #[test]
    fn accepts_first_example() {
        let j = validate_joint(&example_one()).unwrap();
        assert_eq!((j.x_size(), j.y_size()), (2, 4));
        assert!(j.is_full_row_rank());
        assert!(j.has_strictly_smaller_x());
        assert!((j.p_x()[0] - 0.9).abs() < 1e-12);
        assert!((j.min_p_x() - 0.1).abs() < 1e-12);
        for col in 0..4 {
            let s: f64 = j.p_x_given_y().col(col).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn accepts_uniform_grid() {
        let j = validate_joint(&vec![vec![1.0 / 6.0; 3]; 2]).unwrap();
        // Identical columns: P_X|Y has rank one.
        assert!(!j.is_full_row_rank());
    }

    #[test]
    fn rejects_zero_column() {
        let err = validate_joint(&[vec![0.5, 0.0, 0.25], vec![0.25, 0.0, 0.0]]).unwrap_err();
        assert_eq!(
            err,
            Error::ZeroMarginal {
                axis: 'Y',
                index: 1
            }
        );
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(matches!(
            validate_joint(&[vec![0.5, 0.6], vec![-0.1, 0.0]]),
            Err(Error::NegativeEntry { row: 1, col: 0, .. })
        ));
        assert!(matches!(
            validate_joint(&[vec![0.5, 0.6], vec![0.1, 0.1]]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            validate_joint(&[vec![0.5, f64::NAN]]),
            Err(Error::NonFinite { .. })
        ));
        assert_eq!(
            validate_joint::<f64>(&[vec![0.5, 0.5], vec![0.0]]).unwrap_err(),
            Error::MalformedGrid
        );
    }

    #[test]
    fn json_round_trip() {
        let j = validate_joint(&example_one())
            .unwrap()
            .with_labels(
                vec!["a".into(), "b".into()],
                (0..4).map(|i| i.to_string()).collect(),
            )
            .unwrap();
        let back = JointDistribution::<f64>::from_json(&j.to_json()).unwrap();
        assert_eq!(back, j);
        let bare = JointDistribution::<f64>::from_json(r#"{"p_xy": [[0.25, 0.25], [0.25, 0.25]]}"#)
            .unwrap();
        assert_eq!(bare.labels_y(), &["y0".to_string(), "y1".to_string()]);
    }

    #[test]
    fn distribution_vector_checks() {
        assert!(DistributionVector::new(vec![0.25, 0.75]).is_ok());
        assert!(DistributionVector::new(vec![0.25, 0.70]).is_err());
        assert!(DistributionVector::new(vec![1.25, -0.25]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let rows: Vec<Vec<f32>> = example_one()
            .iter()
            .map(|r| r.iter().map(|&v| v as f32).collect())
            .collect();
        let j = validate_joint(&rows).unwrap();
        assert!(j.is_full_row_rank());
    }
}
