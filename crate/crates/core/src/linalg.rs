//! Dense complex matrices and the Hermitian decompositions used by the solvers.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Eigenvalues below `-PSD_REJECT_TOL * ||X||_F` are treated as genuine
/// indefiniteness by [`psd_sqrt`]; smaller negative values are clipped to zero.
pub const PSD_REJECT_TOL: f64 = 1e-6;

/// Eigenvalues at or below `EIG_FLOOR * ||X||_F` are rounding noise and map to
/// zero in [`psd_sqrt`].
const EIG_FLOOR: f64 = 1e-13;

/// Relative deviation from Hermitian symmetry accepted before symmetrizing.
const HERMITIAN_TOL: f64 = 1e-9;

/// A dense complex matrix with finite entries.
///
/// Zero-sized dimensions are allowed so that an IRS with no elements can be
/// represented by an empty `0 x M` cascaded channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }
}

impl Deref for ComplexMatrix {
    type Target = DMatrix<C64>;

    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

/// A square complex matrix equal to its own conjugate transpose.
///
/// Symmetry is enforced on construction: the stored matrix is `(A + A^H) / 2`,
/// so `entry(i, j) == conj(entry(j, i))` holds bit-exactly and the diagonal is
/// real.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let adj = m.adjoint();
        let dev = (&m - &adj).norm();
        if dev > HERMITIAN_TOL * m.norm().max(f64::MIN_POSITIVE) && dev > 0.0 {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (asymmetry {dev:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Hermitian part `(A + A^H) / 2` of an arbitrary square matrix.
    pub fn symmetrized(m: DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            h[(j, j)] = C64::new(m[(j, j)].re, 0.0);
            for i in (j + 1)..n {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        Self(h)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&d))
    }

    /// The rank-one matrix `x x^H`.
    pub fn outer(x: &CVector) -> Self {
        Self::symmetrized(x * x.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `x^H H x`, real for Hermitian `H`.
    pub fn quad_form(&self, x: &CVector) -> f64 {
        x.dotc(&(&self.0 * x)).re
    }

    /// `Re tr(self * other)` for Hermitian operands (the Frobenius inner product).
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * C64::new(s, 0.0))
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }
}

impl Deref for HermitianMatrix {
    type Target = DMatrix<C64>;

    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order; column `k` of the returned
/// matrix is the unit-norm eigenvector for eigenvalue `k`.
pub fn herm_eig(h: &HermitianMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite Hermitian matrix".into()));
    }
    let n = h.dim();
    if n == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::new(h.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, ComplexMatrix(vectors)))
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigval(a: &HermitianMatrix) -> Result<f64> {
    let (values, _) = herm_eig(a)?;
    values
        .last()
        .copied()
        .ok_or_else(|| Error::InvalidInput("empty matrix has no eigenvalues".into()))
}

/// Principal eigenpair `(lambda_max, unit eigenvector)`.
pub fn principal_eig(a: &HermitianMatrix) -> Result<(f64, CVector)> {
    let (values, vectors) = herm_eig(a)?;
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix has no eigenvalues".into()));
    }
    Ok((values[n - 1], vectors.column(n - 1).into_owned()))
}

/// Hermitian square root `S` of a PSD matrix, so that `S S^H = X`.
///
/// Small negative eigenvalues (solver noise) and rounding-level positive ones
/// are clipped to zero.
pub fn psd_sqrt(x: &HermitianMatrix) -> Result<ComplexMatrix> {
    let norm = x.norm();
    let (values, vectors) = herm_eig(x)?;
    let n = values.len();
    if let Some(&min) = values.first() {
        if min < -PSD_REJECT_TOL * norm {
            return Err(Error::NotPsd { min_eig: min, norm });
        }
    }
    let mut scaled = vectors.0.clone();
    for (k, &lambda) in values.iter().enumerate() {
        let root = if lambda > EIG_FLOOR * norm { lambda.sqrt() } else { 0.0 };
        for i in 0..n {
            scaled[(i, k)] *= root;
        }
    }
    Ok(ComplexMatrix(&scaled * vectors.0.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> HermitianMatrix {
        let m = DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        HermitianMatrix::symmetrized(m)
    }

    fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> HermitianMatrix {
        let b = DMatrix::from_fn(n, rank, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        HermitianMatrix::symmetrized(&b * b.adjoint())
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let (vals, _) = herm_eig(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);

        let (vals, _) = herm_eig(&HermitianMatrix::from_real_diagonal(&[1.0, 3.0, 2.0])).unwrap();
        for (v, e) in vals.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_residuals_random_6x6() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(6, &mut rng);
        let (vals, vecs) = herm_eig(&h).unwrap();
        for (k, &val) in vals.iter().enumerate() {
            let v = vecs.column(k).into_owned();
            let r = &*h * &v - &v * C64::new(val, 0.0);
            assert!(r.norm() < 1e-10, "pair {k}: residual {}", r.norm());
        }
        let gram = vecs.adjoint() * &*vecs;
        assert!((gram - DMatrix::<C64>::identity(6, 6)).norm() < 1e-10);
    }

    #[test]
    fn max_eigval_cases() {
        assert_eq!(max_eigval(&HermitianMatrix::identity(4)).unwrap(), 1.0);
        let d = HermitianMatrix::from_real_diagonal(&[-2.0, 5.0, 0.0]);
        assert!((max_eigval(&d).unwrap() - 5.0).abs() < 1e-14);
        let b = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)]);
        let l = max_eigval(&HermitianMatrix::outer(&b)).unwrap();
        assert!((l - b.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DMatrix::<C64>::identity(2, 2);
        m[(0, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::<C64>::identity(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn psd_sqrt_simple_cases() {
        let s = psd_sqrt(&HermitianMatrix::identity(2)).unwrap();
        assert!((&*s - DMatrix::<C64>::identity(2, 2)).norm() < 1e-14);

        let s = psd_sqrt(&HermitianMatrix::from_real_diagonal(&[4.0, 9.0])).unwrap();
        let expected = HermitianMatrix::from_real_diagonal(&[2.0, 3.0]);
        assert!((&*s - &*expected).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let x = HermitianMatrix::from_real_diagonal(&[1.0, -0.5]);
        assert!(matches!(psd_sqrt(&x), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn psd_sqrt_clips_solver_noise() {
        let x = HermitianMatrix::from_real_diagonal(&[1.0, -1e-12]);
        let s = psd_sqrt(&x).unwrap();
        assert!((s[(1, 1)]).norm() < 1e-15);
    }

    #[test]
    fn psd_sqrt_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..100 {
            let n = 1 + case % 32;
            let rank = 1 + rng.random_range(0..n);
            let x = random_psd(n, rank, &mut rng);
            let s = psd_sqrt(&x).unwrap();
            let err = (&*s * s.adjoint() - &*x).norm();
            assert!(err <= 1e-9 * x.norm().max(1.0), "n={n} err={err:e}");
        }
    }

    #[test]
    fn trace_equals_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=20 {
            let h = random_hermitian(n, &mut rng);
            let (vals, vecs) = herm_eig(&h).unwrap();
            let sum: f64 = vals.iter().sum();
            assert!((sum - h.trace()).abs() <= 1e-9 * h.trace().abs().max(1.0));
            let gram = vecs.adjoint() * &*vecs;
            assert!((gram - DMatrix::<C64>::identity(n, n)).norm() < 1e-10);
        }
    }
}
