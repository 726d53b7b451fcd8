//! Time-local generators: GKSL construction and decomposition, the qubit
//! dephasing and d-level Weyl families, and generators obtained from a
//! completely positive family `N_t` of Schur-multiplier maps.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::operators::{
    c, hermitian_eigenvalues, hermiticity_defect, hs_inner, identity, kron, operator_norm, sigma_z,
    trace, unit, ComplexMatrix, HermitianMatrix, HERMITICITY_TOL,
};
use crate::random::{ginibre, WitnessRng};
use crate::signal::{ComplexSignal, ScalarSignal};
use crate::superop::{min_eigenvalue, Superoperator};

/// Orthonormality tolerance for operator bases.
pub const BASIS_TOL: f64 = 1e-12;

/// Normalized generalized Gell-Mann matrices: `d^2 - 1` traceless Hermitian
/// matrices with `Tr(F_k F_l) = delta_kl`.
pub fn gell_mann_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            out.push((unit(d, j, k) + unit(d, k, j)) * c(s, 0.0));
            out.push((unit(d, j, k) * c(0.0, -1.0) + unit(d, k, j) * c(0.0, 1.0)) * c(s, 0.0));
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    out
}

/// `F_0 = I/sqrt(d)` followed by the Gell-Mann basis.
pub fn operator_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = vec![identity(d) / c((d as f64).sqrt(), 0.0)];
    out.extend(gell_mann_basis(d));
    out
}

fn check_basis(d: usize, basis: &[ComplexMatrix]) -> Result<()> {
    for (k, f) in basis.iter().enumerate() {
        if f.nrows() != d || f.ncols() != d {
            return Err(Error::Validation(format!("basis element {k} is not {d}x{d}")));
        }
        if trace(f).norm() > BASIS_TOL {
            return Err(Error::Validation(format!("basis element {k} is not traceless")));
        }
        for (l, g) in basis.iter().enumerate().skip(k) {
            let expected = if k == l { 1.0 } else { 0.0 };
            if (hs_inner(f, g) - c(expected, 0.0)).norm() > BASIS_TOL {
                return Err(Error::Validation(format!(
                    "basis elements {k} and {l} are not orthonormal"
                )));
            }
        }
    }
    Ok(())
}

/// Data of a GKSL generator
/// `L rho = -i[H, rho] + sum_kl a_kl (F_k rho F_l^dagger - 1/2 {F_l^dagger F_k, rho})`.
///
/// The `F_k` are traceless and Hilbert-Schmidt orthonormal; they need not
/// span the full traceless subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct GkslData {
    hamiltonian: HermitianMatrix,
    rates: HermitianMatrix,
    basis: Vec<ComplexMatrix>,
}

impl GkslData {
    pub fn new(hamiltonian: ComplexMatrix, rates: ComplexMatrix, basis: Vec<ComplexMatrix>) -> Result<Self> {
        let d = hamiltonian.nrows();
        let hamiltonian = HermitianMatrix::new(hamiltonian)?;
        check_basis(d, &basis)?;
        if rates.nrows() != basis.len() || rates.ncols() != basis.len() {
            return Err(Error::Validation(format!(
                "rate matrix is {}x{}, basis has {} elements",
                rates.nrows(),
                rates.ncols(),
                basis.len()
            )));
        }
        let defect = hermiticity_defect(&rates);
        if defect > HERMITICITY_TOL {
            return Err(Error::Validation(format!(
                "rate matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            hamiltonian,
            rates: HermitianMatrix::symmetrized(&rates),
            basis,
        })
    }

    /// GKSL data in the normalized Gell-Mann basis.
    pub fn with_gell_mann(hamiltonian: ComplexMatrix, rates: ComplexMatrix) -> Result<Self> {
        let d = hamiltonian.nrows();
        Self::new(hamiltonian, rates, gell_mann_basis(d))
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn rates(&self) -> &HermitianMatrix {
        &self.rates
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// `G = -1/2 sum_kl a_kl F_l^dagger F_k`.
    pub fn g(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut k_op = ComplexMatrix::zeros(d, d);
        for (k, fk) in self.basis.iter().enumerate() {
            for (l, fl) in self.basis.iter().enumerate() {
                let a = self.rates.matrix()[(k, l)];
                if a != c(0.0, 0.0) {
                    k_op += fl.adjoint() * fk * a;
                }
            }
        }
        k_op * c(-0.5, 0.0)
    }
}

/// Builds the superoperator of a GKSL generator.
pub fn gksl_build(data: &GkslData) -> Superoperator {
    let d = data.dim();
    let id = identity(d);
    let mut phi = ComplexMatrix::zeros(d * d, d * d);
    for (k, fk) in data.basis.iter().enumerate() {
        for (l, fl) in data.basis.iter().enumerate() {
            let a = data.rates.matrix()[(k, l)];
            if a != c(0.0, 0.0) {
                phi += kron(&fl.map(|z| z.conj()), fk) * a;
            }
        }
    }
    let g = data.g();
    let h = data.hamiltonian.matrix();
    // -i[H, .] + {G, .} + Phi
    let ham = (kron(&id, h) - kron(&h.transpose(), &id)) * c(0.0, -1.0);
    let anti = kron(&id, &g) + kron(&g.transpose(), &id);
    Superoperator::from_raw(d, ham + anti + phi)
}

/// Result of decomposing a trace-annihilating, Hermiticity-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct GkslDecomposition {
    pub hamiltonian: HermitianMatrix,
    pub g: HermitianMatrix,
    pub rates: HermitianMatrix,
    pub basis: Vec<ComplexMatrix>,
}

impl GkslDecomposition {
    pub fn to_data(&self) -> Result<GkslData> {
        GkslData::new(
            self.hamiltonian.matrix().clone(),
            self.rates.matrix().clone(),
            self.basis.clone(),
        )
    }

    pub fn min_rate_eigenvalue(&self) -> f64 {
        self.rates.min_eigenvalue()
    }
}

fn generator_tol(l: &Superoperator) -> f64 {
    1e-9 * l.matrix().norm().max(1.0)
}

/// Recovers `(H, G, a_kl)` from a generator, given traceless orthonormal
/// `F_1..F_{d^2-1}` (with `F_0 = I/sqrt(d)` implied).
///
/// Expanding `L rho = sum c_ab F_a rho F_b^dagger`, the traceless block of
/// `c` is the rate matrix, `A = sum_k c_k0 F_k / sqrt(d)` and
/// `G = c_00/(2d) I + (A + A^dagger)/2`, `H = i (A - A^dagger)/2`.
pub fn gksl_decompose(l: &Superoperator, basis: &[ComplexMatrix]) -> Result<GkslDecomposition> {
    let d = l.dim();
    if basis.len() != d * d - 1 {
        return Err(Error::Validation(format!(
            "decomposition needs {} traceless basis elements, got {}",
            d * d - 1,
            basis.len()
        )));
    }
    check_basis(d, basis)?;
    let tol = generator_tol(l);
    let tad = l.trace_annihilation_defect();
    if tad > tol {
        return Err(Error::NotTraceAnnihilating(tad));
    }
    let hp = l.hermiticity_preservation_defect();
    if hp > 1e-9 {
        return Err(Error::Validation(format!(
            "map is not Hermiticity-preserving (defect {hp:.3e})"
        )));
    }

    let mut full = vec![identity(d) / c((d as f64).sqrt(), 0.0)];
    full.extend(basis.iter().cloned());
    let n = full.len();
    // coefficient of F_a . F_b^dagger is <conj(F_b) (x) F_a, L>
    let conj: Vec<ComplexMatrix> = full.iter().map(|f| f.map(|z| z.conj())).collect();
    let coeff = ComplexMatrix::from_fn(n, n, |a, b| hs_inner(&kron(&conj[b], &full[a]), l.matrix()));

    let rates = coeff.view((1, 1), (n - 1, n - 1)).into_owned();
    let mut a_op = ComplexMatrix::zeros(d, d);
    for k in 1..n {
        a_op += &full[k] * coeff[(k, 0)];
    }
    a_op /= c((d as f64).sqrt(), 0.0);
    let g = identity(d) * (coeff[(0, 0)] / c(2.0 * d as f64, 0.0)) + (&a_op + a_op.adjoint()) * c(0.5, 0.0);
    let h = (&a_op - a_op.adjoint()) * c(0.0, 0.5);
    Ok(GkslDecomposition {
        hamiltonian: HermitianMatrix::symmetrized(&h),
        g: HermitianMatrix::symmetrized(&g),
        rates: HermitianMatrix::symmetrized(&rates),
        basis: basis.to_vec(),
    })
}

/// Decomposition in the default Gell-Mann basis.
pub fn gksl_decompose_default(l: &Superoperator) -> Result<GkslDecomposition> {
    gksl_decompose(l, &gell_mann_basis(l.dim()))
}

/// True iff `L` is trace-annihilating, Hermiticity-preserving and its rate
/// matrix has minimum eigenvalue `>= -tol`.
pub fn is_legitimate_gksl(l: &Superoperator, tol: f64) -> bool {
    match gksl_decompose_default(l) {
        Ok(dec) => dec.min_rate_eigenvalue() >= -tol,
        Err(_) => false,
    }
}

/// Declared family a generator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorClass {
    Gksl,
    Dephasing,
    Weyl,
    FromMapFamily,
    Custom,
}

impl GeneratorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorClass::Gksl => "gksl",
            GeneratorClass::Dephasing => "dephasing",
            GeneratorClass::Weyl => "weyl",
            GeneratorClass::FromMapFamily => "from_map_family",
            GeneratorClass::Custom => "custom",
        }
    }
}

type Rule = Arc<dyn Fn(f64) -> Superoperator + Send + Sync>;

/// A rule `t -> L_t`; the rule must be a pure function of `t`.
#[derive(Clone)]
pub struct TimeDependentGenerator {
    d: usize,
    class: GeneratorClass,
    rule: Rule,
}

impl fmt::Debug for TimeDependentGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentGenerator")
            .field("d", &self.d)
            .field("class", &self.class)
            .finish()
    }
}

impl TimeDependentGenerator {
    pub fn new<F>(d: usize, class: GeneratorClass, rule: F) -> Self
    where
        F: Fn(f64) -> Superoperator + Send + Sync + 'static,
    {
        Self {
            d,
            class,
            rule: Arc::new(rule),
        }
    }

    pub fn constant(l: Superoperator, class: GeneratorClass) -> Self {
        let d = l.dim();
        Self::new(d, class, move |_| l.clone())
    }

    pub fn zero(d: usize) -> Self {
        Self::constant(Superoperator::zero(d), GeneratorClass::Custom)
    }

    /// Time-dependent GKSL generator from a rule producing GKSL data.
    pub fn gksl<F>(d: usize, data: F) -> Self
    where
        F: Fn(f64) -> GkslData + Send + Sync + 'static,
    {
        Self::new(d, GeneratorClass::Gksl, move |t| gksl_build(&data(t)))
    }

    pub fn at(&self, t: f64) -> Superoperator {
        (self.rule)(t)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn class(&self) -> GeneratorClass {
        self.class
    }
}

/// Qubit generator `L_t rho = -(i w_t/2)[sz, rho] + (g_t/2)(sz rho sz - rho)`.
pub fn dephasing_generator(omega: ScalarSignal, gamma: ScalarSignal) -> TimeDependentGenerator {
    let sz = sigma_z();
    let ham = Superoperator::hamiltonian(&(&sz * c(0.5, 0.0))).expect("2x2");
    let diss = &Superoperator::conjugation(&sz).expect("2x2") - &Superoperator::identity(2);
    TimeDependentGenerator::new(2, GeneratorClass::Dephasing, move |t| {
        let w = omega.eval(t);
        let g = gamma.eval(t);
        &ham.scale(c(w, 0.0)) + &diss.scale(c(g / 2.0, 0.0))
    })
}

/// The diagonal Weyl operators `V_a = sum_b lambda^(a b) P_b`, `lambda = e^(2 pi i/d)`.
pub fn weyl_operators(d: usize) -> Vec<ComplexMatrix> {
    (0..d)
        .map(|a| {
            let mut v = ComplexMatrix::zeros(d, d);
            for b in 0..d {
                let phase = 2.0 * PI * ((a * b) % d) as f64 / d as f64;
                v[(b, b)] = c(phase.cos(), phase.sin());
            }
            v
        })
        .collect()
}

/// Weyl-class generator
/// `L_t rho = -i[H_t, rho] + sum_kl c_kl(t) ([V_k, rho V_l^dagger] + [V_k rho, V_l^dagger])`
/// with `H_t = sum_k (h_k V_k + conj(h_k) V_k^dagger)`, `k, l = 1..d-1`.
///
/// `c` is read from its upper triangle: `c_lk = conj(c_kl)` for `k < l`
/// and only the real part of each diagonal entry is used.
pub fn weyl_generator(d: usize, coeffs: Vec<Vec<ComplexSignal>>, h: Vec<ComplexSignal>) -> Result<TimeDependentGenerator> {
    if d < 2 {
        return Err(Error::Argument(format!("Weyl generator needs d >= 2, got {d}")));
    }
    let m = d - 1;
    if coeffs.len() != m || coeffs.iter().any(|row| row.len() != m) {
        return Err(Error::Argument(format!("coefficient matrix must be {m}x{m}")));
    }
    if h.len() != m {
        return Err(Error::Argument(format!("expected {m} Hamiltonian signals, got {}", h.len())));
    }
    let v = weyl_operators(d);
    let id = identity(d);
    // superoperator of rho -> 2 V_k rho V_l^dagger - {V_l^dagger V_k, rho}
    let mut terms = vec![vec![ComplexMatrix::zeros(d * d, d * d); m]; m];
    for k in 0..m {
        for l in 0..m {
            let (vk, vl) = (&v[k + 1], &v[l + 1]);
            let prod = vl.adjoint() * vk;
            terms[k][l] =
                kron(&vl.map(|z| z.conj()), vk) * c(2.0, 0.0) - kron(&id, &prod) - kron(&prod.transpose(), &id);
        }
    }
    let hams: Vec<ComplexMatrix> = (0..m)
        .map(|k| Superoperator::hamiltonian(&v[k + 1]).expect("square").matrix().clone())
        .collect();
    let hams_dag: Vec<ComplexMatrix> = (0..m)
        .map(|k| Superoperator::hamiltonian(&v[k + 1].adjoint()).expect("square").matrix().clone())
        .collect();
    Ok(TimeDependentGenerator::new(d, GeneratorClass::Weyl, move |t| {
        let mut acc = ComplexMatrix::zeros(d * d, d * d);
        for k in 0..m {
            for l in 0..m {
                let ckl = match k.cmp(&l) {
                    std::cmp::Ordering::Less => coeffs[k][l].eval(t),
                    std::cmp::Ordering::Greater => coeffs[l][k].eval(t).conj(),
                    std::cmp::Ordering::Equal => c(coeffs[k][k].re.eval(t), 0.0),
                };
                if ckl != c(0.0, 0.0) {
                    acc += &terms[k][l] * ckl;
                }
            }
            let hk = h[k].eval(t);
            if hk != c(0.0, 0.0) {
                acc += &hams[k] * hk + &hams_dag[k] * hk.conj();
            }
        }
        Superoperator::from_raw(d, acc)
    }))
}

fn symmetric_entry(m: &[Vec<ScalarSignal>], k: usize, l: usize) -> &ScalarSignal {
    if k <= l {
        &m[k][l]
    } else {
        &m[l][k]
    }
}

fn psd_violation(m: &ComplexMatrix) -> Option<f64> {
    let ev = hermitian_eigenvalues(m);
    let scale = ev.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let min = ev.first().copied().unwrap_or(0.0);
    (min < -1e-10 * scale).then_some(min)
}

/// Generator of pure decoherence built from a Schur-multiplier family
/// `N_t rho = sum_kl n_kl(t) e_kk rho e_ll` and a completely positive
/// `Theta_t` with `theta_kk = -dn_kk/dt` and free off-diagonal part.
///
/// The result is `L_t rho = sum_{k != l} (theta_kl + dn_kl/dt)/n_kl e_kk rho e_ll`.
/// `n` and `theta_offdiag` are symmetric and read from their upper triangle;
/// `None` selects `theta_kl = 0` for `k != l`. Preconditions are checked at
/// every time in `checkpoints`.
pub fn generator_from_map_family(
    n: Vec<Vec<ScalarSignal>>,
    theta_offdiag: Option<Vec<Vec<ScalarSignal>>>,
    checkpoints: &[f64],
) -> Result<TimeDependentGenerator> {
    let dim = n.len();
    if dim < 2 || n.iter().any(|row| row.len() != dim) {
        return Err(Error::Argument("n must be a square matrix of size >= 2".into()));
    }
    if let Some(th) = &theta_offdiag {
        if th.len() != dim || th.iter().any(|row| row.len() != dim) {
            return Err(Error::Argument(format!("theta must be {dim}x{dim}")));
        }
    }
    for k in 0..dim {
        for l in k..dim {
            let v = n[k][l].eval(0.0);
            if (v - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("n_{k}{l}(0) = {v}, expected 1")));
            }
        }
    }
    let n_at = |t: f64| ComplexMatrix::from_fn(dim, dim, |k, l| c(symmetric_entry(&n, k, l).eval(t), 0.0));
    let theta_at = |t: f64| {
        ComplexMatrix::from_fn(dim, dim, |k, l| {
            if k == l {
                c(-n[k][k].derivative(t), 0.0)
            } else {
                match &theta_offdiag {
                    Some(th) => c(symmetric_entry(th, k, l).eval(t), 0.0),
                    None => c(0.0, 0.0),
                }
            }
        })
    };
    for &t in checkpoints {
        let nt = n_at(t);
        if nt.iter().any(|z| !z.re.is_finite()) {
            return Err(Error::Validation(format!("n is not finite at t = {t}")));
        }
        if let Some(min) = psd_violation(&nt) {
            return Err(Error::Validation(format!(
                "n is not positive semidefinite at t = {t} (min eigenvalue {min:.3e})"
            )));
        }
        for k in 0..dim {
            let dn = n[k][k].derivative(t);
            if dn > 1e-10 {
                return Err(Error::Validation(format!(
                    "precondition dn_{k}{k}/dt <= 0 violated at t = {t} (value {dn:.3e})"
                )));
            }
        }
        if let Some(min) = psd_violation(&theta_at(t)) {
            return Err(Error::Validation(format!(
                "theta is not positive semidefinite at t = {t} (min eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(TimeDependentGenerator::new(dim, GeneratorClass::FromMapFamily, move |t| {
        let mut m = ComplexMatrix::zeros(dim * dim, dim * dim);
        for k in 0..dim {
            for l in 0..dim {
                if k == l {
                    continue;
                }
                let nkl = symmetric_entry(&n, k, l);
                let theta = match &theta_offdiag {
                    Some(th) => symmetric_entry(th, k, l).eval(t),
                    None => 0.0,
                };
                let rate = (theta + nkl.derivative(t)) / nkl.eval(t);
                m[(k + l * dim, k + l * dim)] = c(rate, 0.0);
            }
        }
        Superoperator::from_raw(dim, m)
    }))
}

/// Operator norm of `[L_t, L_u]`.
pub fn commutativity_defect(l: &TimeDependentGenerator, t: f64, u: f64) -> f64 {
    let (a, b) = (l.at(t), l.at(u));
    let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    operator_norm(&comm).unwrap_or(f64::NAN)
}

/// Outcome of a complete-dissipativity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityVerdict {
    /// Exact verdict: GKSL form with a PSD rate matrix.
    pub completely_dissipative: bool,
    /// Smallest eigenvalue of the sampled dissipation matrices (plain and
    /// ampliated). Only a cross-check; negative values are possible for
    /// non-dissipative maps.
    pub min_sampled_eigenvalue: f64,
    pub samples: usize,
}

/// `D(a) = L#(a a^dagger) - L#(a) a^dagger - a L#(a^dagger)` for a dual map `L#`.
pub fn dissipation_matrix<F>(dual_action: F, a: &ComplexMatrix) -> ComplexMatrix
where
    F: Fn(&ComplexMatrix) -> ComplexMatrix,
{
    let ad = a.adjoint();
    dual_action(&(a * &ad)) - dual_action(a) * &ad - a * dual_action(&ad)
}

/// Complete dissipativity of the dual of `L`, decided as a PSD rate matrix.
///
/// The dissipation inequality is additionally sampled on `samples` random
/// `a` on `C^d` and on `C^d (x) C^d` (for `1 (x) L#`); the sample minimum is
/// reported in the verdict but does not decide it.
pub fn dissipativity_check(l: &Superoperator, tol: f64) -> DissipativityVerdict {
    dissipativity_check_sampled(l, tol, 8, 0x5eed)
}

pub fn dissipativity_check_sampled(l: &Superoperator, tol: f64, samples: usize, seed: u64) -> DissipativityVerdict {
    let d = l.dim();
    let dual = l.dual();
    let mut rng = WitnessRng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    for _ in 0..samples {
        let a = ginibre(&mut rng, d, d);
        let m = dissipation_matrix(|x| dual.apply(x).expect("dimension"), &a);
        min = min.min(min_eigenvalue(&m));
        let a2 = ginibre(&mut rng, d * d, d * d);
        let m2 = dissipation_matrix(|x| dual.apply_extended(x).expect("dimension"), &a2);
        min = min.min(min_eigenvalue(&m2));
    }
    DissipativityVerdict {
        completely_dissipative: is_legitimate_gksl(l, tol),
        min_sampled_eigenvalue: if samples == 0 { 0.0 } else { min },
        samples,
    }
}
