//! Geometry of symmetric positive-definite matrices: matrix log/exp,
//! Log-Euclidean distance and mean, and the whitened tangent-space map.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest are clamped before `log`.
pub const EIGEN_FLOOR_RATIO: f64 = 1e-12;

static CLAMPED_EIGENVALUES: AtomicUsize = AtomicUsize::new(0);

/// Number of eigenvalues clamped by [`matrix_log`] since process start.
pub fn clamped_eigenvalue_count() -> usize {
    CLAMPED_EIGENVALUES.load(Ordering::Relaxed)
}

/// A validated symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::Argument(format!(
                "SPD matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        let scale = values.amax().max(f64::MIN_POSITIVE);
        let asym = (&values - values.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Numeric(format!(
                "matrix is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let min = SymmetricEigen::new(values.clone()).eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (smallest eigenvalue {min:.6e})"
            )));
        }
        Ok(Self(values))
    }

    /// Symmetrizes `(m + mᵀ)/2` before validating.
    pub fn from_symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        Self::new((m + m.transpose()) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag)))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SpdMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = crate::matrix_serde::from_rows(&rows).map_err(Error::Schema)?;
        SpdMatrix::new(m)
    }
}

impl From<SpdMatrix> for Vec<Vec<f64>> {
    fn from(m: SpdMatrix) -> Self {
        crate::matrix_serde::to_rows(&m.0)
    }
}

/// Shrinkage toward a scaled identity: `(1−γ)Σ + γ·(tr Σ / n)·I`.
pub fn shrink(m: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mu = m.trace() / n as f64;
    m * (1.0 - gamma) + DMatrix::identity(n, n) * (gamma * mu)
}

/// `U f(Λ) Uᵀ` for a symmetric matrix with eigendecomposition `U Λ Uᵀ`.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mapped = eig.eigenvalues.map(f);
    let u = &eig.eigenvectors;
    let out = u * DMatrix::from_diagonal(&mapped) * u.transpose();
    (&out + out.transpose()) * 0.5
}

pub fn matrix_log(m: &SpdMatrix) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.0.clone());
    let max = eig.eigenvalues.max();
    if let Some(bad) = eig.eigenvalues.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Numeric(format!(
            "cannot take log of matrix with eigenvalue {bad:.6e}"
        )));
    }
    let floor = EIGEN_FLOOR_RATIO * max;
    let logs = eig.eigenvalues.map(|v| {
        if v < floor {
            CLAMPED_EIGENVALUES.fetch_add(1, Ordering::Relaxed);
            floor.ln()
        } else {
            v.ln()
        }
    });
    let u = &eig.eigenvectors;
    let out = u * DMatrix::from_diagonal(&logs) * u.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Exponential of a symmetric matrix; always SPD.
pub fn matrix_exp(sym: &DMatrix<f64>) -> Result<SpdMatrix> {
    SpdMatrix::new(sym_apply(sym, f64::exp))
}

fn check_dims(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

pub fn logeuclidean_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok((matrix_log(a)? - matrix_log(b)?).norm())
}

pub fn logeuclidean_mean(mats: &[SpdMatrix]) -> Result<SpdMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::Argument("cannot average an empty list".into()))?;
    let n = first.dim();
    let mut acc = DMatrix::zeros(n, n);
    for m in mats {
        check_dims(first, m)?;
        acc += matrix_log(m)?;
    }
    matrix_exp(&(acc / mats.len() as f64))
}

/// Tangent-space base point with its cached inverse square root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    mean: SpdMatrix,
    #[serde(with = "crate::matrix_serde")]
    inv_sqrt: DMatrix<f64>,
}

impl ReferencePoint {
    pub fn new(mean: SpdMatrix) -> Self {
        let inv_sqrt = sym_apply(mean.values(), |v| 1.0 / v.sqrt());
        Self { mean, inv_sqrt }
    }

    /// Reference at the Log-Euclidean mean of `mats`.
    pub fn fit(mats: &[SpdMatrix]) -> Result<Self> {
        Ok(Self::new(logeuclidean_mean(mats)?))
    }

    pub fn mean(&self) -> &SpdMatrix {
        &self.mean
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// `mean^{-1/2} · m · mean^{-1/2}`.
    pub fn whiten(&self, m: &SpdMatrix) -> Result<SpdMatrix> {
        check_dims(&self.mean, m)?;
        let w = &self.inv_sqrt * m.values() * &self.inv_sqrt;
        SpdMatrix::from_symmetrized(&w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub values: Vec<f64>,
    pub reference_dim: usize,
}

pub fn tangent_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper triangle in row-major order, off-diagonal entries weighted by √2
/// so the Euclidean norm equals the Frobenius norm.
pub fn vectorize_upper(sym: &DMatrix<f64>) -> Vec<f64> {
    let n = sym.nrows();
    let mut out = Vec::with_capacity(tangent_len(n));
    for i in 0..n {
        out.push(sym[(i, i)]);
        for j in i + 1..n {
            out.push(std::f64::consts::SQRT_2 * sym[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vectorize_upper`].
pub fn unvectorize_upper(v: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if v.len() != tangent_len(n) {
        return Err(Error::Argument(format!(
            "vector of length {} does not encode a {n}x{n} symmetric matrix",
            v.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut it = v.iter();
    for i in 0..n {
        m[(i, i)] = *it.next().expect("length checked");
        for j in i + 1..n {
            let x = it.next().expect("length checked") / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(m)
}

pub fn tangent_map(reference: &ReferencePoint, m: &SpdMatrix) -> Result<TangentVector> {
    let whitened = reference.whiten(m)?;
    let log = matrix_log(&whitened)?;
    Ok(TangentVector {
        values: vectorize_upper(&log),
        reference_dim: reference.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn log_of_identity_is_zero() {
        let l = matrix_log(&SpdMatrix::identity(4)).unwrap();
        assert!(l.amax() < 1e-15);
    }

    #[test]
    fn log_of_diagonal() {
        let m = SpdMatrix::from_diagonal(&[E, E * E]).unwrap();
        let l = matrix_log(&m).unwrap();
        assert_relative_eq!(l[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(l[(1, 1)], 2.0, epsilon = 1e-14);
        assert!(l[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn distance_to_identity() {
        let a = SpdMatrix::from_diagonal(&[E, 1.0]).unwrap();
        let d = logeuclidean_distance(&a, &SpdMatrix::identity(2)).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-14);
        assert_eq!(logeuclidean_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mean_of_commuting_diagonals() {
        let a = SpdMatrix::from_diagonal(&[E * E, 1.0]).unwrap();
        let m = logeuclidean_mean(&[a.clone(), SpdMatrix::identity(2)]).unwrap();
        assert_relative_eq!(m.values()[(0, 0)], E, epsilon = 1e-13);
        assert_relative_eq!(m.values()[(1, 1)], 1.0, epsilon = 1e-13);
        let same = logeuclidean_mean(&[a.clone(), a.clone()]).unwrap();
        assert_relative_eq!(same.values(), a.values(), epsilon = 1e-12);
    }

    #[test]
    fn empty_mean_rejected() {
        assert!(matches!(logeuclidean_mean(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = SpdMatrix::identity(2);
        let b = SpdMatrix::identity(3);
        assert!(matches!(logeuclidean_distance(&a, &b), Err(Error::Argument(_))));
    }

    #[test]
    fn tangent_at_reference_is_zero() {
        let mean = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let r = ReferencePoint::new(mean.clone());
        let v = tangent_map(&r, &mean).unwrap();
        assert_eq!(v.values.len(), 3);
        assert!(v.values.iter().all(|x| x.abs() < 1e-12));
        let ident = &r.inv_sqrt * mean.values() * &r.inv_sqrt;
        assert_relative_eq!(ident, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn tangent_length_for_six_filters() {
        let r = ReferencePoint::new(SpdMatrix::identity(6));
        let v = tangent_map(&r, &SpdMatrix::from_diagonal(&[1., 2., 3., 4., 5., 6.]).unwrap())
            .unwrap();
        assert_eq!(v.values.len(), 21);
    }

    #[test]
    fn non_spd_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::Numeric(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(SpdMatrix::new(asym).is_err());
    }

    #[test]
    fn vectorize_roundtrip() {
        let m = DMatrix::from_row_slice(3, 3, &[1., 2., 3., 2., 4., 5., 3., 5., 6.]);
        let v = vectorize_upper(&m);
        assert_relative_eq!(v[1], 2.0 * std::f64::consts::SQRT_2);
        assert_relative_eq!(unvectorize_upper(&v, 3).unwrap(), m, epsilon = 1e-15);
    }

    #[test]
    fn spd_json_is_row_major() {
        let m = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[[2.0,0.5],[0.5,1.0]]");
        let back: SpdMatrix = serde_json::from_str("[[2.0,0.5],[0.5,1.0]]").unwrap();
        assert_eq!(back, m);
    }
}
