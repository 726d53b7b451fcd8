//! Dense complex operator algebra.
//!
//! Everything here works on small dense matrices (d up to roughly 16) through
//! full eigen- or singular-value decompositions. Matrices are
//! `nalgebra::DMatrix<Complex64>`; the [`HermitianMatrix`] and
//! [`DensityMatrix`] newtypes carry checked invariants.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative tolerance on `|A - A^dagger|` accepted when building a [`HermitianMatrix`].
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Relative tolerance below which eigenvalues count as zero.
pub const PSD_REL_TOL: f64 = 1e-10;
/// Absolute tolerance on the unit trace of a density matrix.
pub const TRACE_TOL: f64 = 1e-9;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn ensure_square(a: &ComplexMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub(crate) fn ensure_dim(a: &ComplexMatrix, d: usize) -> Result<()> {
    let n = ensure_square(a)?;
    if n != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: n,
        });
    }
    Ok(())
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

/// Matrix unit `e_ij = |i><j|`.
pub fn unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    m[(i, j)] = ONE;
    m
}

pub fn ket(d: usize, i: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(d);
    v[i] = ONE;
    v
}

/// `|psi><psi|` for a (not necessarily normalized) vector.
pub fn projector(psi: &DVector<Complex64>) -> ComplexMatrix {
    psi * psi.adjoint()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Hilbert-Schmidt inner product `Tr(A^dagger B)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `sigma_+ = |0><1|`.
pub fn sigma_plus() -> ComplexMatrix {
    unit(2, 0, 1)
}

/// `sigma_- = |1><0|`.
pub fn sigma_minus() -> ComplexMatrix {
    unit(2, 1, 0)
}

/// Unnormalized maximally entangled vector `sum_i |ii>`.
pub fn omega_vector(d: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = ONE;
    }
    v
}

/// Normalized maximally entangled projector `P+ = |psi+><psi+|` on `C^d (x) C^d`.
pub fn max_entangled(d: usize) -> ComplexMatrix {
    projector(&omega_vector(d)) / c(d as f64, 0.0)
}

/// Defect `|A - A^dagger|_F` relative to `|A|_F` (zero for the zero matrix).
pub fn hermiticity_defect(a: &ComplexMatrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// A Hermitian matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        ensure_square(&a)?;
        if !is_finite(&a) {
            return Err(Error::NonFinite);
        }
        let defect = hermiticity_defect(&a);
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self::symmetrized(&a))
    }

    /// Hermitian part `(A + A^dagger)/2`, without any tolerance check.
    pub fn symmetrized(a: &ComplexMatrix) -> Self {
        Self((a + a.adjoint()) * c(0.5, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigh(&self) -> (Vec<f64>, ComplexMatrix) {
        eigh(&self.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Zero threshold for eigenvalues: `PSD_REL_TOL * |A|_2`.
    pub fn psd_tol(&self) -> f64 {
        PSD_REL_TOL * self.eigenvalues().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Hermitian eigendecomposition of an (assumed Hermitian) matrix, ascending.
pub(crate) fn eigh(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = a.nrows();
    let herm = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub(crate) fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    eigh(a).0
}

/// Rebuilds `V diag(f) V^dagger`.
pub(crate) fn from_spectrum(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(a)?;
        let tr = trace(h.matrix()).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min = h.min_eigenvalue();
        if min < -h.psd_tol().max(PSD_REL_TOL) {
            return Err(Error::NotPsd(min));
        }
        Ok(Self(h))
    }

    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Argument("zero state vector".into()));
        }
        Self::new(projector(&(psi / c(norm, 0.0))))
    }

    /// `|i><i|`.
    pub fn basis_state(d: usize, i: usize) -> Self {
        Self(HermitianMatrix(unit(d, i, i)))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(HermitianMatrix(identity(d) / c(d as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.0.matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    ensure_square(a)?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    if hermiticity_defect(a) <= 1e-14 {
        return Ok(hermitian_eigenvalues(a).iter().map(|x| x.abs()).sum());
    }
    Ok(a.clone().svd(false, false).singular_values.sum())
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> Result<f64> {
    ensure_square(a)?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(a.clone().svd(false, false).singular_values.max())
}

/// Applies a real function to the spectrum of a Hermitian matrix.
///
/// Eigenvalues with magnitude below `PSD_REL_TOL * |A|` are snapped to 0
/// before `f` is applied; a non-finite `f(lambda)` is a domain error.
pub fn matrix_function<F>(a: &HermitianMatrix, f: F) -> Result<HermitianMatrix>
where
    F: Fn(f64) -> f64,
{
    let (mut values, vectors) = a.eigh();
    let tol = PSD_REL_TOL * values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for v in values.iter_mut() {
        let x = if v.abs() < tol { 0.0 } else { *v };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Domain(x));
        }
        *v = fx;
    }
    Ok(HermitianMatrix::symmetrized(&from_spectrum(&values, &vectors)))
}

/// Square root of a positive semidefinite matrix; slightly negative
/// eigenvalues (within tolerance) are clipped to zero.
pub fn sqrt_psd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let tol = a.psd_tol().max(PSD_REL_TOL);
    matrix_function(a, |x| if x < 0.0 && x > -tol { 0.0 } else { x.sqrt() })
}

/// Uhlmann fidelity `F = |sqrt(rho) sqrt(sigma)|_1^2`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let a = sqrt_psd(rho.as_hermitian())?;
    let b = sqrt_psd(sigma.as_hermitian())?;
    let root = trace_norm(&(a.matrix() * b.matrix()))?;
    Ok((root * root).clamp(0.0, 1.0))
}

/// Trace distance `D = |rho - sigma|_1 / 2`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    Ok(0.5 * trace_norm(&(rho.matrix() - sigma.matrix()))?)
}

/// Which tensor factor of a bipartite operator to keep or act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

fn check_bipartite(w: &ComplexMatrix, dims: (usize, usize)) -> Result<()> {
    let n = ensure_square(w)?;
    if n != dims.0 * dims.1 {
        return Err(Error::DimensionMismatch {
            expected: dims.0 * dims.1,
            got: n,
        });
    }
    Ok(())
}

/// Partial trace of an operator on `C^dA (x) C^dB`, keeping the given factor.
pub fn partial_trace(w: &ComplexMatrix, dims: (usize, usize), keep: Subsystem) -> Result<ComplexMatrix> {
    check_bipartite(w, dims)?;
    let (da, db) = dims;
    let out = match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| w[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |k, l| {
            (0..da).map(|i| w[(i * db + k, i * db + l)]).sum()
        }),
    };
    Ok(out)
}

/// Partial transpose on the given factor.
pub fn partial_transpose(w: &ComplexMatrix, dims: (usize, usize), on: Subsystem) -> Result<ComplexMatrix> {
    check_bipartite(w, dims)?;
    let (da, db) = dims;
    let n = da * db;
    Ok(ComplexMatrix::from_fn(n, n, |r, col| {
        let (i, k) = (r / db, r % db);
        let (j, l) = (col / db, col % db);
        match on {
            Subsystem::A => w[(j * db + k, i * db + l)],
            Subsystem::B => w[(i * db + l, j * db + k)],
        }
    }))
}

/// Negativity `(|W^T_B|_1 - 1) / 2` of a bipartite state on `C^d (x) C^d`.
pub fn negativity(w: &ComplexMatrix, dims: (usize, usize)) -> Result<f64> {
    let pt = partial_transpose(w, dims, Subsystem::B)?;
    Ok(((trace_norm(&pt)? - 1.0) / 2.0).max(0.0))
}

/// 2-norm condition number (infinite for singular matrices).
pub fn condition_number(a: &ComplexMatrix) -> Result<f64> {
    ensure_square(a)?;
    let s = a.clone().svd(false, false).singular_values;
    let (max, min) = (s.max(), s.min());
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real(rows: usize, data: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(rows, rows, &data.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn trace_norm_examples() {
        assert_abs_diff_eq!(trace_norm(&sigma_z()).unwrap(), 2.0, epsilon = 1e-14);
        let diff = unit(2, 0, 0) - unit(2, 1, 1);
        assert_abs_diff_eq!(trace_norm(&diff).unwrap(), 2.0, epsilon = 1e-14);
        let a = real(2, &[1.0, 2.0, 2.0, -1.0]);
        assert_abs_diff_eq!(trace_norm(&a).unwrap(), 2.0 * 5f64.sqrt(), epsilon = 1e-13);
        // non-Hermitian input goes through the SVD route
        assert_abs_diff_eq!(trace_norm(&sigma_plus()).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn norms_reject_non_square() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(trace_norm(&a), Err(Error::NotSquare { .. })));
        assert!(matches!(operator_norm(&a), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&identity(3)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(operator_norm(&sigma_plus()).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(operator_norm(&(sigma_x() * c(2.0, 0.0))).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let zero = DensityMatrix::basis_state(2, 0);
        let one = DensityMatrix::basis_state(2, 1);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(fidelity(&zero, &zero).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &mixed).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&mixed, &zero).unwrap(), 0.5, epsilon = 1e-12);
        let three = DensityMatrix::maximally_mixed(3);
        assert!(matches!(fidelity(&zero, &three), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matrix_function_examples() {
        let id = HermitianMatrix::new(identity(2)).unwrap();
        let r = matrix_function(&id, f64::sqrt).unwrap();
        assert!((r.matrix() - identity(2)).norm() < 1e-14);

        let d = HermitianMatrix::new(real(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let r = matrix_function(&d, f64::sqrt).unwrap();
        assert!((r.matrix() - real(2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-13);

        let e = std::f64::consts::E;
        let d = HermitianMatrix::new(real(2, &[1.0, 0.0, 0.0, e])).unwrap();
        let r = matrix_function(&d, f64::ln).unwrap();
        assert!((r.matrix() - real(2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-13);
    }

    #[test]
    fn matrix_function_domain_error() {
        let d = HermitianMatrix::new(real(2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(matrix_function(&d, f64::ln), Err(Error::Domain(_))));
        let d = HermitianMatrix::new(real(2, &[1.0, 0.0, 0.0, -0.5])).unwrap();
        assert!(matches!(matrix_function(&d, f64::sqrt), Err(Error::Domain(_))));
    }

    #[test]
    fn hermitian_construction_symmetrizes_and_rejects() {
        let mut a = sigma_x();
        a[(0, 1)] += c(1e-12, 0.0);
        let h = HermitianMatrix::new(a).unwrap();
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
        assert!(matches!(HermitianMatrix::new(sigma_plus()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn density_matrix_rejects_invalid() {
        assert!(matches!(DensityMatrix::new(identity(2)), Err(Error::InvalidTrace(_))));
        let bad = real(2, &[1.5, 0.0, 0.0, -0.5]);
        assert!(matches!(DensityMatrix::new(bad), Err(Error::NotPsd(_))));
    }

    #[test]
    fn partial_trace_examples() {
        let rho = real(2, &[0.7, 0.1, 0.1, 0.3]);
        let sigma = real(3, &[0.2, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.3]) * c(2.0, 0.0);
        let w = kron(&rho, &sigma);
        let ra = partial_trace(&w, (2, 3), Subsystem::A).unwrap();
        assert!((ra - &rho * trace(&sigma)).norm() < 1e-14);

        let p = max_entangled(2);
        let half = identity(2) / c(2.0, 0.0);
        assert!((partial_trace(&p, (2, 2), Subsystem::A).unwrap() - &half).norm() < 1e-14);
        assert!((partial_trace(&p, (2, 2), Subsystem::B).unwrap() - &half).norm() < 1e-14);

        assert!(matches!(
            partial_trace(&p, (2, 3), Subsystem::A),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negativity_of_max_entangled() {
        assert_abs_diff_eq!(negativity(&max_entangled(2), (2, 2)).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(negativity(&max_entangled(3), (3, 3)).unwrap(), 1.0, epsilon = 1e-12);
        let product = kron(&unit(2, 0, 0), &unit(2, 1, 1));
        assert_abs_diff_eq!(negativity(&product, (2, 2)).unwrap(), 0.0, epsilon = 1e-14);
    }
}
