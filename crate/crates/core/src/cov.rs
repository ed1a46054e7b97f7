//! Long-run covariance plug-ins.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a full matrix is treated as singular.
pub const SINGULAR_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKind {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// The true long-run covariance.
    Known,
    /// Estimated from data.
    Estimated,
    /// Supplied by the user; not assumed to be consistent.
    User,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Diagonal(Vec<f64>),
    Full {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
        inv_sqrt: DMatrix<f64>,
    },
}

/// Positive definite covariance, either diagonal or full, with its inverse
/// and inverse square root precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovFile", into = "CovFile")]
pub struct CovModel {
    repr: Repr,
    provenance: Provenance,
}

impl CovModel {
    pub fn diagonal(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidCovariance("empty diagonal".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidCovariance(format!(
                "diagonal entry {v} is not strictly positive"
            )));
        }
        Ok(Self {
            repr: Repr::Diagonal(values),
            provenance,
        })
    }

    pub fn identity(d: usize, provenance: Provenance) -> Self {
        Self {
            repr: Repr::Diagonal(vec![1.0; d]),
            provenance,
        }
    }

    /// Full symmetric positive definite matrix given as rows.
    pub fn full(rows: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidCovariance("empty matrix".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Self::from_matrix(matrix, provenance)
    }

    pub fn from_matrix(matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidCovariance("matrix must be square".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = matrix.amax();
        let d = matrix.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidCovariance(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min < SINGULAR_RATIO * max {
            let ratio = if max > 0.0 { min / max } else { 0.0 };
            return Err(Error::SingularCovariance { ratio });
        }
        let v = &eig.eigenvectors;
        let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
        let inv_sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let inverse = v * inv_diag * v.transpose();
        let inv_sqrt = v * inv_sqrt_diag * v.transpose();
        Ok(Self {
            repr: Repr::Full {
                matrix: sym,
                inverse,
                inv_sqrt,
            },
            provenance,
        })
    }

    pub fn d(&self) -> usize {
        match &self.repr {
            Repr::Diagonal(v) => v.len(),
            Repr::Full { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn kind(&self) -> CovKind {
        match self.repr {
            Repr::Diagonal(_) => CovKind::Diagonal,
            Repr::Full { .. } => CovKind::Full,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.kind() == CovKind::Diagonal
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Diagonal entries (the variances).
    pub fn variances(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(v) => v.clone(),
            Repr::Full { matrix, .. } => matrix.diagonal().iter().copied().collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Diagonal(v) => DMatrix::from_diagonal(&DVector::from_column_slice(v)),
            Repr::Full { matrix, .. } => matrix.clone(),
        }
    }

    /// `s^T Σ^{-1} s`.
    pub fn inv_quad_form(&self, s: &[f64]) -> f64 {
        debug_assert_eq!(s.len(), self.d());
        match &self.repr {
            Repr::Diagonal(v) => s.iter().zip(v).map(|(a, var)| a * a / var).sum(),
            Repr::Full { inverse, .. } => {
                let x = DVector::from_column_slice(s);
                let q = x.dot(&(inverse * &x));
                q.max(0.0)
            }
        }
    }

    /// `Σ^{-1} v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(var) => v.iter().zip(var).map(|(a, s)| a / s).collect(),
            Repr::Full { inverse, .. } => (inverse * DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect(),
        }
    }

    /// `Σ^{-1/2} v`.
    pub fn inv_sqrt_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(var) => v.iter().zip(var).map(|(a, s)| a / s.sqrt()).collect(),
            Repr::Full { inv_sqrt, .. } => (inv_sqrt * DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect(),
        }
    }

    /// The same model multiplied by a positive scalar.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale {c} must be positive"
            )));
        }
        match &self.repr {
            Repr::Diagonal(v) => Self::diagonal(v.iter().map(|x| x * c).collect(), self.provenance),
            Repr::Full { matrix, .. } => Self::from_matrix(matrix * c, self.provenance),
        }
    }
}

/// On-disk form: `{"kind", "values", "provenance"}` with full matrices as
/// row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovFile {
    pub kind: CovKind,
    pub values: CovValues,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovValues {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl TryFrom<CovFile> for CovModel {
    type Error = Error;

    fn try_from(file: CovFile) -> Result<Self> {
        match (file.kind, file.values) {
            (CovKind::Diagonal, CovValues::Diagonal(v)) => CovModel::diagonal(v, file.provenance),
            (CovKind::Full, CovValues::Full(rows)) => CovModel::full(rows, file.provenance),
            (kind, _) => Err(Error::InvalidCovariance(format!(
                "values do not match kind {kind:?}"
            ))),
        }
    }
}

impl From<CovModel> for CovFile {
    fn from(cov: CovModel) -> Self {
        let values = match &cov.repr {
            Repr::Diagonal(v) => CovValues::Diagonal(v.clone()),
            Repr::Full { matrix, .. } => CovValues::Full(
                (0..matrix.nrows())
                    .map(|i| matrix.row(i).iter().copied().collect())
                    .collect(),
            ),
        };
        CovFile {
            kind: cov.kind(),
            values,
            provenance: cov.provenance,
        }
    }
}
