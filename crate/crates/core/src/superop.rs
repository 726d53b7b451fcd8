//! Linear maps on operators in the column-stacking (Liouville) representation.
//!
//! `vec(A)[i + j*d] = A[(i, j)]`, which is nalgebra's native column-major
//! storage. Under this convention `rho -> A rho B^dagger` has the matrix
//! `conj(B) (x) A`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{
    c, ensure_dim, eigh, hermitian_eigenvalues, identity, is_finite, kron, operator_norm, trace, unit,
    ComplexMatrix, HermitianMatrix, I,
};

/// Relative tolerance on the minimum Choi eigenvalue, scaled by `|Tr C|`.
pub const CP_REL_TOL: f64 = 1e-9;

/// A linear map on `d x d` matrices stored as a `d^2 x d^2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    d: usize,
    matrix: ComplexMatrix,
}

/// Outcome of a complete-positivity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpVerdict {
    pub is_cp: bool,
    pub min_choi_eigenvalue: f64,
    pub tolerance: f64,
}

/// `C(S) = sum_ij e_ij (x) S(e_ij)` (unnormalized, trace `d` for trace-preserving `S`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    pub d: usize,
    pub matrix: HermitianMatrix,
}

impl ChoiMatrix {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.min_eigenvalue()
    }
}

pub fn vectorize(a: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &DVector<Complex64>, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v.as_slice())
}

impl Superoperator {
    pub fn new(d: usize, matrix: ComplexMatrix) -> Result<Self> {
        if d < 2 {
            return Err(Error::Argument(format!("system dimension must be >= 2, got {d}")));
        }
        ensure_dim(&matrix, d * d)?;
        if !is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        Ok(Self { d, matrix })
    }

    pub(crate) fn from_raw(d: usize, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), d * d);
        Self { d, matrix }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_raw(d, identity(d * d))
    }

    pub fn zero(d: usize) -> Self {
        Self::from_raw(d, ComplexMatrix::zeros(d * d, d * d))
    }

    /// `rho -> A rho B^dagger`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        let d = a.nrows();
        ensure_dim(a, d)?;
        ensure_dim(b, d)?;
        Self::new(d, kron(&b.map(|z| z.conj()), a))
    }

    /// `rho -> U rho U^dagger`.
    pub fn conjugation(u: &ComplexMatrix) -> Result<Self> {
        Self::sandwich(u, u)
    }

    /// `rho -> sum_k K_k rho K_k^dagger`.
    pub fn from_kraus(ops: &[ComplexMatrix]) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::Argument("empty Kraus list".into()))?;
        let mut acc = Self::sandwich(first, first)?;
        for k in &ops[1..] {
            acc = &acc + &Self::sandwich(k, k)?;
        }
        Ok(acc)
    }

    /// `rho -> -i[H, rho]`.
    pub fn hamiltonian(h: &ComplexMatrix) -> Result<Self> {
        let d = h.nrows();
        ensure_dim(h, d)?;
        let id = identity(d);
        let m = (kron(&id, h) - kron(&h.transpose(), &id)) * (-I);
        Self::new(d, m)
    }

    /// Builds the matrix of an arbitrary linear action from its values on matrix units.
    pub fn from_fn<F>(d: usize, f: F) -> Result<Self>
    where
        F: Fn(&ComplexMatrix) -> ComplexMatrix,
    {
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let img = f(&unit(d, i, j));
                ensure_dim(&img, d)?;
                m.set_column(i + j * d, &vectorize(&img));
            }
        }
        Self::new(d, m)
    }

    /// The transpose map `rho -> rho^T` (positive, not completely positive).
    pub fn transpose_map(d: usize) -> Self {
        Self::from_fn(d, |a| a.transpose()).expect("transpose map is well formed")
    }

    /// `rho -> I Tr(rho) / d`.
    pub fn completely_depolarizing(d: usize) -> Self {
        Self::from_fn(d, |a| identity(d) * (trace(a) / c(d as f64, 0.0))).expect("well formed")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        ensure_dim(a, self.d)?;
        Ok(unvectorize(&(&self.matrix * vectorize(a)), self.d))
    }

    /// `self o other` (apply `other` first).
    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_same(other)?;
        Ok(Self::from_raw(self.d, &self.matrix * &other.matrix))
    }

    pub fn scale(&self, s: Complex64) -> Superoperator {
        Self::from_raw(self.d, &self.matrix * s)
    }

    fn check_same(&self, other: &Superoperator) -> Result<()> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        Ok(())
    }

    /// Hilbert-Schmidt adjoint: `Tr(X^dagger S(Y)) = Tr(dual(S)(X)^dagger Y)`.
    ///
    /// For Hermiticity-preserving maps this coincides with the Heisenberg
    /// picture dual `Tr(rho dual(S)(a)) = Tr(a S(rho))`.
    pub fn dual(&self) -> Superoperator {
        Self::from_raw(self.d, self.matrix.adjoint())
    }

    /// Unnormalized Choi matrix `sum_ij e_ij (x) S(e_ij)`.
    pub fn choi(&self) -> ChoiMatrix {
        ChoiMatrix {
            d: self.d,
            matrix: HermitianMatrix::symmetrized(&self.choi_raw()),
        }
    }

    /// Raw (not symmetrized) Choi matrix; differs from [`Self::choi`] only for
    /// maps that do not preserve Hermiticity.
    pub fn choi_raw(&self) -> ComplexMatrix {
        let d = self.d;
        ComplexMatrix::from_fn(d * d, d * d, |r, col| {
            let (i, k) = (r / d, r % d);
            let (j, l) = (col / d, col % d);
            self.matrix[(k + l * d, i + j * d)]
        })
    }

    /// Default CP tolerance: `CP_REL_TOL * |Tr C|` (floored at `CP_REL_TOL`).
    pub fn default_cp_tol(&self) -> f64 {
        CP_REL_TOL * trace(&self.choi_raw()).norm().max(1.0)
    }

    pub fn is_completely_positive(&self, tol: f64) -> CpVerdict {
        let min = hermitian_eigenvalues(self.choi().matrix.matrix())
            .first()
            .copied()
            .unwrap_or(0.0);
        CpVerdict {
            is_cp: min >= -tol,
            min_choi_eigenvalue: min,
            tolerance: tol,
        }
    }

    pub fn cp_verdict(&self) -> CpVerdict {
        self.is_completely_positive(self.default_cp_tol())
    }

    /// Largest entry of `|dual(S)(I) - I|`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.d;
        let img = unvectorize(&(self.matrix.adjoint() * vectorize(&identity(d))), d);
        (img - identity(d)).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_defect() <= tol
    }

    /// Largest entry of `|dual(S)(I)|`; zero for generators of trace-preserving dynamics.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let d = self.d;
        let img = unvectorize(&(self.matrix.adjoint() * vectorize(&identity(d))), d);
        img.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Relative defect of `S(A^dagger) = S(A)^dagger` over matrix units.
    pub fn hermiticity_preservation_defect(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let a = unvectorize(&self.matrix.column(i + j * d).into_owned(), d);
                let b = unvectorize(&self.matrix.column(j + i * d).into_owned(), d);
                worst = worst.max((a - b.adjoint()).norm());
            }
        }
        worst / self.matrix.norm().max(f64::MIN_POSITIVE)
    }

    /// `(1 (x) S) W` for `W` acting on `C^d (x) C^d` (S on the second factor).
    pub fn apply_extended(&self, w: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.d;
        ensure_dim(w, d * d)?;
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let block = w.view((i * d, j * d), (d, d)).into_owned();
                let img = unvectorize(&(&self.matrix * vectorize(&block)), d);
                out.view_mut((i * d, j * d), (d, d)).copy_from(&img);
            }
        }
        Ok(out)
    }

    /// `(S (x) 1) W` for `W` acting on `C^d (x) C^d` (S on the first factor).
    pub fn apply_extended_left(&self, w: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.d;
        ensure_dim(w, d * d)?;
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for k in 0..d {
            for l in 0..d {
                let block = ComplexMatrix::from_fn(d, d, |i, j| w[(i * d + k, j * d + l)]);
                let img = unvectorize(&(&self.matrix * vectorize(&block)), d);
                for i in 0..d {
                    for j in 0..d {
                        out[(i * d + k, j * d + l)] = img[(i, j)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Operator norm of the `d^2 x d^2` representation.
    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix).unwrap_or(f64::NAN)
    }

    /// Max-entry distance to another superoperator.
    pub fn distance(&self, other: &Superoperator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `[self, other]` as a superoperator.
    pub fn commutator(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_same(other)?;
        Ok(Self::from_raw(
            self.d,
            &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        ))
    }

    /// Matrix exponential `exp(S)` of the representation.
    pub fn exp(&self) -> Superoperator {
        Self::from_raw(self.d, self.matrix.clone().exp())
    }

    /// Inverse, refused when the condition number exceeds `max_cond`.
    pub fn inverse_guarded(&self, max_cond: f64) -> Result<Superoperator> {
        let cond = crate::operators::condition_number(&self.matrix)?;
        if !cond.is_finite() || cond > max_cond {
            return Err(Error::IllConditioned(cond));
        }
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or(Error::IllConditioned(f64::INFINITY))?;
        Ok(Self::from_raw(self.d, inv))
    }
}

impl std::ops::Add for &Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.d, rhs.d, "superoperator dimension mismatch");
        Superoperator::from_raw(self.d, &self.matrix + &rhs.matrix)
    }
}

impl std::ops::Sub for &Superoperator {
    type Output = Superoperator;
    fn sub(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.d, rhs.d, "superoperator dimension mismatch");
        Superoperator::from_raw(self.d, &self.matrix - &rhs.matrix)
    }
}

/// Smallest eigenvalue of a Hermitian(-ized) matrix.
pub(crate) fn min_eigenvalue(a: &ComplexMatrix) -> f64 {
    eigh(a).0.first().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{ONE, ZERO, max_entangled, sigma_minus, sigma_plus, sigma_x, sigma_z, trace_norm};
    use approx::assert_abs_diff_eq;

    fn dephasing_channel(gamma: f64) -> Superoperator {
        let f = (-gamma).exp();
        Superoperator::from_fn(2, |a| {
            ComplexMatrix::from_row_slice(2, 2, &[a[(0, 0)], a[(0, 1)] * f, a[(1, 0)] * f, a[(1, 1)]])
        })
        .unwrap()
    }

    #[test]
    fn sandwich_convention() {
        let a = ComplexMatrix::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let b = ComplexMatrix::from_fn(2, 2, |i, j| c(j as f64 * 0.3, 1.0 + i as f64));
        let rho = ComplexMatrix::from_fn(2, 2, |i, j| c(0.2 * i as f64, 0.7 * j as f64 + 0.1));
        let s = Superoperator::sandwich(&a, &b).unwrap();
        let direct = &a * &rho * b.adjoint();
        assert!((s.apply(&rho).unwrap() - direct).norm() < 1e-13);
    }

    #[test]
    fn apply_examples() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| c(i as f64, j as f64));
        assert_eq!(Superoperator::identity(3).apply(&a).unwrap(), a);

        let flip = Superoperator::conjugation(&sigma_x()).unwrap();
        let out = flip.apply(&unit(2, 0, 0)).unwrap();
        assert!((out - unit(2, 1, 1)).norm() < 1e-15);

        let plus = ComplexMatrix::from_element(2, 2, c(0.5, 0.0));
        let out = dephasing_channel(1.0).apply(&plus).unwrap();
        let e = (-1.0f64).exp();
        let expected = ComplexMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5 * e, 0.0), c(0.5 * e, 0.0), c(0.5, 0.0)]);
        assert!((out - expected).norm() < 1e-15);

        assert!(matches!(flip.apply(&identity(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn choi_examples() {
        let id = Superoperator::identity(2).choi();
        let ev = id.eigenvalues();
        assert_abs_diff_eq!(ev[3], 2.0, epsilon = 1e-13);
        for &x in &ev[..3] {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-13);
        }

        let t = Superoperator::transpose_map(2).choi();
        let swap = ComplexMatrix::from_fn(4, 4, |r, col| {
            let (i, k) = (r / 2, r % 2);
            let (j, l) = (col / 2, col % 2);
            if i == l && k == j {
                ONE
            } else {
                ZERO
            }
        });
        assert!((t.matrix.matrix() - swap).norm() < 1e-15);
        assert_abs_diff_eq!(t.min_eigenvalue(), -1.0, epsilon = 1e-12);

        let dep = Superoperator::completely_depolarizing(2).choi();
        assert!((dep.matrix.matrix() - identity(4) * c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn choi_is_d_times_extended_action_on_p_plus() {
        let s = dephasing_channel(0.3);
        let ext = s.apply_extended(&max_entangled(2)).unwrap();
        assert!((s.choi().matrix.matrix() - ext * c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn cp_examples() {
        let v = Superoperator::identity(2).cp_verdict();
        assert!(v.is_cp);
        assert_abs_diff_eq!(v.min_choi_eigenvalue, 0.0, epsilon = 1e-13);

        let v = Superoperator::transpose_map(2).cp_verdict();
        assert!(!v.is_cp);
        assert_abs_diff_eq!(v.min_choi_eigenvalue, -1.0, epsilon = 1e-12);

        for gamma in [0.0, 0.5, 3.0] {
            let s = dephasing_channel(gamma);
            let v = s.cp_verdict();
            assert!(v.is_cp);
            let ev = s.choi().eigenvalues();
            let f = (-gamma).exp();
            assert_abs_diff_eq!(ev[3], 1.0 + f, epsilon = 1e-12);
            assert_abs_diff_eq!(ev[2], 1.0 - f, epsilon = 1e-12);
        }
        // amplified coherences are not CP
        assert!(!dephasing_channel(-0.5).cp_verdict().is_cp);
    }

    #[test]
    fn trace_preservation_examples() {
        assert!(Superoperator::identity(2).is_trace_preserving(1e-12));
        let half = Superoperator::identity(2).scale(c(0.5, 0.0));
        assert!(!half.is_trace_preserving(1e-12));
        assert!(Superoperator::transpose_map(3).is_trace_preserving(1e-12));
    }

    #[test]
    fn dual_examples() {
        let u = (sigma_x() + sigma_z() * I) * c(0.5f64.sqrt(), 0.0);
        let s = Superoperator::conjugation(&u).unwrap();
        let expected = Superoperator::conjugation(&u.adjoint()).unwrap();
        assert!(s.dual().distance(&expected) < 1e-14);
        assert_eq!(s.dual().dual(), s);

        let tp = dephasing_channel(0.7);
        let img = tp.dual().apply(&identity(2)).unwrap();
        assert!((img - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn dual_of_dephasing_generator_on_sigma_plus() {
        let (omega, gamma) = (0.8, 0.3);
        let ham = Superoperator::hamiltonian(&(sigma_z() * c(omega / 2.0, 0.0))).unwrap();
        let diss = &Superoperator::conjugation(&sigma_z()).unwrap() - &Superoperator::identity(2);
        let l = &ham + &diss.scale(c(gamma / 2.0, 0.0));
        let img = l.dual().apply(&sigma_plus()).unwrap();
        let expected = sigma_plus() * c(-gamma, omega);
        assert!((img - expected).norm() < 1e-14);
        let img = l.apply(&sigma_plus()).unwrap();
        assert!((img - sigma_plus() * c(-gamma, -omega)).norm() < 1e-14);
        let _ = sigma_minus();
    }

    #[test]
    fn apply_extended_examples() {
        let w = ComplexMatrix::from_fn(4, 4, |i, j| c((i * 4 + j) as f64, (i as f64) - (j as f64)));
        assert_eq!(Superoperator::identity(2).apply_extended(&w).unwrap(), w);

        let gamma = 0.4;
        let out = dephasing_channel(gamma).apply_extended(&max_entangled(2)).unwrap();
        let mut expected = max_entangled(2);
        expected[(0, 3)] *= (-gamma).exp();
        expected[(3, 0)] *= (-gamma).exp();
        assert!((out - expected).norm() < 1e-15);

        let rho = ComplexMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        let sigma = ComplexMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.0, 0.4), c(0.0, -0.4), c(0.7, 0.0)]);
        let s = dephasing_channel(1.2);
        let out = s.apply_extended(&kron(&rho, &sigma)).unwrap();
        assert!((out - kron(&rho, &s.apply(&sigma).unwrap())).norm() < 1e-15);
        let out = s.apply_extended_left(&kron(&rho, &sigma)).unwrap();
        assert!((out - kron(&s.apply(&rho).unwrap(), &sigma)).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_superoperator_is_commutator() {
        let h = sigma_x() + sigma_z() * c(0.3, 0.0);
        let rho = ComplexMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        let l = Superoperator::hamiltonian(&h).unwrap();
        let direct = (&h * &rho - &rho * &h) * (-I);
        assert!((l.apply(&rho).unwrap() - direct).norm() < 1e-14);
        assert!(l.trace_annihilation_defect() < 1e-14);
        assert!(trace_norm(&l.apply(&rho).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn guarded_inverse_refuses_singular_maps() {
        let dep = Superoperator::completely_depolarizing(2);
        assert!(matches!(dep.inverse_guarded(1e10), Err(Error::IllConditioned(_))));
        let s = dephasing_channel(0.5);
        let inv = s.inverse_guarded(1e10).unwrap();
        assert!(inv.compose(&s).unwrap().distance(&Superoperator::identity(2)) < 1e-13);
    }
}
