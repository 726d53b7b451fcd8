//! Dynamical maps: RK4 propagation of `dL/dt = L_t Lambda_t`, two-time
//! propagators, the closed-form solution for commutative families and exact
//! reduced dynamics of a finite system-plus-reservoir model.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{commutativity_defect, is_legitimate_gksl, TimeDependentGenerator};
use crate::operators::{
    c, eigh, is_finite, kron, partial_trace, unit, ComplexMatrix, DensityMatrix, HermitianMatrix, Subsystem,
};
use crate::superop::{CpVerdict, Superoperator};

/// Default number of steps per unit time.
pub const STEPS_PER_UNIT_TIME: f64 = 1000.0;
/// Largest condition number accepted when a propagator is obtained by inversion.
pub const MAX_INVERSION_COND: f64 = 1e10;
/// Trace-preservation tolerance used in validity reports.
pub const TP_TOL: f64 = 1e-9;
/// Relative tolerance on `|[L_t, L_u]|` for commutative families.
pub const COMMUTATIVITY_TOL: f64 = 1e-9;
/// Largest total dimension accepted by [`reduced_dynamics`].
pub const DEFAULT_SIZE_CAP: usize = 64;

/// Uniform time grid `t_i = i t_end / n_steps`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !t_end.is_finite() || t_end <= 0.0 {
            return Err(Error::Argument(format!("t_end must be positive and finite, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::Argument("n_steps must be positive".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    /// Grid with the default resolution of 1000 steps per unit time.
    pub fn with_default_steps(t_end: f64) -> Result<Self> {
        let n = (STEPS_PER_UNIT_TIME * t_end).round().max(1.0) as usize;
        Self::new(t_end, n)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.t(i)).collect()
    }

    /// Index of the node closest to `t` (clamped to the grid).
    pub fn nearest(&self, t: f64) -> usize {
        ((t / self.step()).round().max(0.0) as usize).min(self.n_steps)
    }
}

/// How a [`MapFamily`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Ode,
    ClosedForm,
    Microscopic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Ode => "ode",
            Provenance::ClosedForm => "closed_form",
            Provenance::Microscopic => "microscopic",
        }
    }
}

/// CP and TP status of one map in a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeValidity {
    pub t: f64,
    pub cp: CpVerdict,
    pub trace_defect: f64,
    pub is_tp: bool,
}

/// Maps `Lambda_t` on a grid. Immutable once built.
#[derive(Debug, Clone)]
pub struct MapFamily {
    d: usize,
    grid: TimeGrid,
    maps: Vec<Superoperator>,
    provenance: Provenance,
    generator: Option<TimeDependentGenerator>,
    validity: OnceLock<Vec<NodeValidity>>,
}

impl MapFamily {
    pub fn new(
        grid: TimeGrid,
        maps: Vec<Superoperator>,
        provenance: Provenance,
        generator: Option<TimeDependentGenerator>,
    ) -> Result<Self> {
        if maps.len() != grid.len() {
            return Err(Error::Argument(format!(
                "expected {} maps for the grid, got {}",
                grid.len(),
                maps.len()
            )));
        }
        let d = maps[0].dim();
        if let Some(m) = maps.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.dim(),
            });
        }
        if let Some(g) = &generator {
            if g.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.dim(),
                });
            }
        }
        Ok(Self {
            d,
            grid,
            maps,
            provenance,
            generator,
            validity: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn maps(&self) -> &[Superoperator] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &Superoperator {
        &self.maps[i]
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn generator(&self) -> Option<&TimeDependentGenerator> {
        self.generator.as_ref()
    }

    /// CP verdict and trace-preservation defect of every map.
    pub fn validity(&self) -> &[NodeValidity] {
        self.validity.get_or_init(|| {
            self.maps
                .par_iter()
                .enumerate()
                .map(|(i, m)| {
                    let trace_defect = m.trace_preservation_defect();
                    NodeValidity {
                        t: self.grid.t(i),
                        cp: m.cp_verdict(),
                        trace_defect,
                        is_tp: trace_defect <= TP_TOL,
                    }
                })
                .collect()
        })
    }

    /// `V_{t_i, t_j}`: re-integrated from `t_j` when the generator is known,
    /// otherwise `Lambda_i Lambda_j^-1` with a condition-number guard.
    pub fn propagator(&self, i: usize, j: usize) -> Result<Superoperator> {
        if i < j {
            return Err(Error::Argument(format!("propagator needs t >= s (got nodes {i} < {j})")));
        }
        match &self.generator {
            Some(l) => integrate(l, self.grid.t(j), self.grid.t(i), i - j),
            None => self.propagator_by_inversion(i, j),
        }
    }

    pub fn propagator_by_inversion(&self, i: usize, j: usize) -> Result<Superoperator> {
        if i < j {
            return Err(Error::Argument(format!("propagator needs t >= s (got nodes {i} < {j})")));
        }
        let inv = self.maps[j].inverse_guarded(MAX_INVERSION_COND)?;
        self.maps[i].compose(&inv)
    }
}

fn checked_generator(l: &TimeDependentGenerator, t: f64) -> Result<Superoperator> {
    let m = l.at(t);
    if m.dim() != l.dim() {
        return Err(Error::Propagation {
            t,
            reason: format!("generator has dimension {}, expected {}", m.dim(), l.dim()),
        });
    }
    if !is_finite(m.matrix()) {
        return Err(Error::Propagation {
            t,
            reason: "generator is not finite".into(),
        });
    }
    Ok(m)
}

fn rk4_step(l: &TimeDependentGenerator, t: f64, h: f64, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let l0 = checked_generator(l, t)?;
    let lm = checked_generator(l, t + h / 2.0)?;
    let l1 = checked_generator(l, t + h)?;
    let hc = |s: f64| Complex64::new(s, 0.0);
    let k1 = l0.matrix() * x;
    let k2 = lm.matrix() * (x + &k1 * hc(h / 2.0));
    let k3 = lm.matrix() * (x + &k2 * hc(h / 2.0));
    let k4 = l1.matrix() * (x + &k3 * hc(h));
    let next = x + (k1 + (k2 + k3) * hc(2.0) + k4) * hc(h / 6.0);
    if !is_finite(&next) {
        return Err(Error::Propagation {
            t: t + h,
            reason: "solution is not finite".into(),
        });
    }
    Ok(next)
}

/// `V_{t,s}` by `n_steps` RK4 steps of `dV/dt = L_t V` from `V_{s,s} = 1`.
pub fn integrate(l: &TimeDependentGenerator, s: f64, t: f64, n_steps: usize) -> Result<Superoperator> {
    if t < s {
        return Err(Error::Argument(format!("propagator needs t >= s (got t = {t}, s = {s})")));
    }
    let d = l.dim();
    let mut x = ComplexMatrix::identity(d * d, d * d);
    if t == s || n_steps == 0 {
        return Ok(Superoperator::identity(d));
    }
    let h = (t - s) / n_steps as f64;
    for k in 0..n_steps {
        x = rk4_step(l, s + k as f64 * h, h, &x)?;
    }
    Superoperator::new(d, x)
}

/// `V_{t,s}` with the default resolution of 1000 steps per unit time.
pub fn propagator(l: &TimeDependentGenerator, s: f64, t: f64) -> Result<Superoperator> {
    if t < s {
        return Err(Error::Argument(format!("propagator needs t >= s (got t = {t}, s = {s})")));
    }
    let n = (STEPS_PER_UNIT_TIME * (t - s)).ceil().max(1.0) as usize;
    integrate(l, s, t, n)
}

/// `Lambda_t` on every grid node by fixed-step RK4.
pub fn propagate(l: &TimeDependentGenerator, grid: &TimeGrid) -> Result<MapFamily> {
    let d = l.dim();
    let mut maps = Vec::with_capacity(grid.len());
    let mut x = ComplexMatrix::identity(d * d, d * d);
    maps.push(Superoperator::identity(d));
    for i in 0..grid.n_steps() {
        let t = grid.t(i);
        x = rk4_step(l, t, grid.t(i + 1) - t, &x)?;
        maps.push(Superoperator::new(d, x.clone())?);
    }
    MapFamily::new(*grid, maps, Provenance::Ode, Some(l.clone()))
}

/// Closed-form solution `exp(int_0^t L_u du)` together with the cumulant.
#[derive(Debug, Clone)]
pub struct CommutativeSolution {
    pub map: Superoperator,
    pub cumulant: Superoperator,
}

const COMMUTATIVITY_SAMPLES: usize = 9;

fn check_commutative(l: &TimeDependentGenerator, t_end: f64) -> Result<()> {
    let ts: Vec<f64> = (0..COMMUTATIVITY_SAMPLES)
        .map(|k| t_end * k as f64 / (COMMUTATIVITY_SAMPLES - 1) as f64)
        .collect();
    let scale: Vec<f64> = ts.iter().map(|&t| l.at(t).norm()).collect();
    for a in 0..ts.len() {
        for b in (a + 1)..ts.len() {
            let defect = commutativity_defect(l, ts[a], ts[b]);
            let tol = COMMUTATIVITY_TOL * (scale[a] * scale[b]).max(1.0);
            if !(defect <= tol) {
                return Err(Error::NotCommutative {
                    defect,
                    t: ts[a],
                    u: ts[b],
                });
            }
        }
    }
    Ok(())
}

/// Cumulants `int_0^{t_i} L_u du` on the grid (Simpson's rule on each step).
fn cumulants(l: &TimeDependentGenerator, grid: &TimeGrid) -> Result<Vec<Superoperator>> {
    let d = l.dim();
    let mut acc = ComplexMatrix::zeros(d * d, d * d);
    let mut out = vec![Superoperator::zero(d)];
    let mut left = checked_generator(l, 0.0)?;
    for i in 0..grid.n_steps() {
        let (a, b) = (grid.t(i), grid.t(i + 1));
        let mid = checked_generator(l, 0.5 * (a + b))?;
        let right = checked_generator(l, b)?;
        acc += (left.matrix() + mid.matrix() * c(4.0, 0.0) + right.matrix()) * c((b - a) / 6.0, 0.0);
        out.push(Superoperator::new(d, acc.clone())?);
        left = right;
    }
    Ok(out)
}

/// `exp(int_0^t L_u du)` for a commutative family.
///
/// Commutativity is checked on all pairs of 9 equispaced times in `[0, t]`.
pub fn commutative_solve(l: &TimeDependentGenerator, t: f64) -> Result<CommutativeSolution> {
    if t < 0.0 {
        return Err(Error::Argument(format!("t must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        let d = l.dim();
        return Ok(CommutativeSolution {
            map: Superoperator::identity(d),
            cumulant: Superoperator::zero(d),
        });
    }
    check_commutative(l, t)?;
    let grid = TimeGrid::with_default_steps(t)?;
    let cumulant = cumulants(l, &grid)?.pop().expect("nonempty grid");
    Ok(CommutativeSolution {
        map: cumulant.exp(),
        cumulant,
    })
}

/// Closed-form family on a grid; also returns the cumulant at every node.
pub fn commutative_family(l: &TimeDependentGenerator, grid: &TimeGrid) -> Result<(MapFamily, Vec<Superoperator>)> {
    check_commutative(l, grid.t_end())?;
    let cums = cumulants(l, grid)?;
    let maps = cums.par_iter().map(Superoperator::exp).collect();
    let family = MapFamily::new(*grid, maps, Provenance::ClosedForm, Some(l.clone()))?;
    Ok((family, cums))
}

/// Whether the cumulant `int_0^t L_u du` is a legitimate GKSL generator at
/// every node.
pub fn check_cumulant_legitimacy(l: &TimeDependentGenerator, grid: &TimeGrid, tol: f64) -> Result<Vec<bool>> {
    check_commutative(l, grid.t_end())?;
    let cums = cumulants(l, grid)?;
    Ok(cums.par_iter().map(|k| is_legitimate_gksl(k, tol)).collect())
}

/// A finite system-plus-reservoir model `(H_total, omega_R)` on `C^dS (x) C^dR`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroscopicModel {
    d_s: usize,
    d_r: usize,
    h_total: HermitianMatrix,
    omega_r: DensityMatrix,
}

impl MicroscopicModel {
    pub fn new(d_s: usize, d_r: usize, h_total: ComplexMatrix, omega_r: DensityMatrix) -> Result<Self> {
        if d_s < 2 || d_r < 1 {
            return Err(Error::Argument(format!("invalid dimensions d_S = {d_s}, d_R = {d_r}")));
        }
        if omega_r.dim() != d_r {
            return Err(Error::DimensionMismatch {
                expected: d_r,
                got: omega_r.dim(),
            });
        }
        let h_total = HermitianMatrix::new(h_total)?;
        if h_total.dim() != d_s * d_r {
            return Err(Error::DimensionMismatch {
                expected: d_s * d_r,
                got: h_total.dim(),
            });
        }
        Ok(Self {
            d_s,
            d_r,
            h_total,
            omega_r,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.d_s
    }

    pub fn reservoir_dim(&self) -> usize {
        self.d_r
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.h_total
    }

    pub fn reservoir_state(&self) -> &DensityMatrix {
        &self.omega_r
    }
}

/// Spectral decomposition `H = sum_a e_a P_a` with degenerate eigenvalues grouped.
fn spectral_projectors(h: &HermitianMatrix) -> Vec<(f64, ComplexMatrix)> {
    let (values, vectors) = eigh(h.matrix());
    let n = values.len();
    let scale = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let mut out: Vec<(f64, ComplexMatrix)> = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= tol {
            end += 1;
        }
        let cols = vectors.columns(start, end - start);
        let p = &cols * cols.adjoint();
        let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
        out.push((mean, p));
        start = end;
    }
    out
}

/// `Lambda_t rho = Tr_R[e^{-iHt} (rho (x) omega_R) e^{iHt}]` assembled as
/// `sum_ab e^{-i(e_a - e_b)t} Lambda_ab` with
/// `Lambda_ab rho = Tr_R(P_a (rho (x) omega_R) P_b)`.
pub fn reduced_dynamics(model: &MicroscopicModel, grid: &TimeGrid) -> Result<MapFamily> {
    reduced_dynamics_with_cap(model, grid, DEFAULT_SIZE_CAP)
}

pub fn reduced_dynamics_with_cap(model: &MicroscopicModel, grid: &TimeGrid, cap: usize) -> Result<MapFamily> {
    let (ds, dr) = (model.d_s, model.d_r);
    if ds * dr > cap {
        return Err(Error::Argument(format!(
            "total dimension {} exceeds the cap of {cap}",
            ds * dr
        )));
    }
    let projectors = spectral_projectors(&model.h_total);
    let omega = model.omega_r.matrix();
    // inputs rho (x) omega_R for every matrix unit e_ij of the system
    let inputs: Vec<ComplexMatrix> = (0..ds * ds).map(|k| kron(&unit(ds, k % ds, k / ds), omega)).collect();
    let mut terms: Vec<(f64, ComplexMatrix)> = Vec::new();
    for (ea, pa) in &projectors {
        for (eb, pb) in &projectors {
            let mut m = ComplexMatrix::zeros(ds * ds, ds * ds);
            for (k, x) in inputs.iter().enumerate() {
                let img = partial_trace(&(pa * x * pb), (ds, dr), Subsystem::A)?;
                for j in 0..ds {
                    for i in 0..ds {
                        m[(i + j * ds, k)] = img[(i, j)];
                    }
                }
            }
            if m.iter().any(|z| z.norm() > 0.0) {
                terms.push((ea - eb, m));
            }
        }
    }
    let maps: Vec<Superoperator> = grid
        .nodes()
        .par_iter()
        .map(|&t| {
            let mut acc = ComplexMatrix::zeros(ds * ds, ds * ds);
            for (w, m) in &terms {
                let phase = -w * t;
                acc += m * c(phase.cos(), phase.sin());
            }
            Superoperator::new(ds, acc)
        })
        .collect::<Result<_>>()?;
    MapFamily::new(*grid, maps, Provenance::Microscopic, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{dephasing_generator, gksl_build, GeneratorClass, GkslData};
    use crate::operators::{identity, sigma_x, sigma_z};
    use crate::random::{random_hermitian, random_psd, rng};
    use crate::signal::ScalarSignal;
    use std::f64::consts::PI;

    fn dephasing(omega: &str, gamma: &str) -> TimeDependentGenerator {
        dephasing_generator(ScalarSignal::parse(omega).unwrap(), ScalarSignal::parse(gamma).unwrap())
    }

    /// Coefficient of `e_01` in `Lambda(e_01)`.
    fn coherence(m: &Superoperator) -> Complex64 {
        m.matrix()[(2, 2)]
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(TimeGrid::with_default_steps(2.5).unwrap().n_steps(), 2500);
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert_eq!(g.nearest(1.3), 3);
    }

    #[test]
    fn zero_generator_gives_identity() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let fam = propagate(&TimeDependentGenerator::zero(3), &grid).unwrap();
        for m in fam.maps() {
            assert_eq!(m, &Superoperator::identity(3));
        }
    }

    #[test]
    fn dephasing_closed_form() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let fam = propagate(&dephasing("0", "1"), &grid).unwrap();
        assert!((coherence(fam.map(1000)) - c((-1.0f64).exp(), 0.0)).norm() < 1e-8);
        for v in fam.validity() {
            assert!(v.is_tp && v.cp.is_cp);
        }
    }

    #[test]
    fn non_finite_generator_names_time() {
        let l = dephasing("0", "1/(t - 0.5)");
        let err = propagate(&l, &TimeGrid::new(1.0, 4).unwrap()).unwrap_err();
        match err {
            Error::Propagation { t, .. } => assert_eq!(t, 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn halving_reduces_error_by_at_least_eight() {
        let l = dephasing("cos(t)", "sin(t) + 0.5");
        let exact = |t: f64| {
            // Omega_t = sin t, Gamma_t = 1 - cos t + t/2
            let gamma = 1.0 - t.cos() + 0.5 * t;
            c(0.0, -t.sin()).exp() * (-gamma).exp()
        };
        let t_end = 3.0;
        let err = |n: usize| {
            let fam = propagate(&l, &TimeGrid::new(t_end, n).unwrap()).unwrap();
            (coherence(fam.map(n)) - exact(t_end)).norm()
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    fn random_gksl(seed: u64, d: usize) -> Superoperator {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, d);
        let a = random_psd(&mut r, d * d - 1, d * d - 1);
        gksl_build(&GkslData::with_gell_mann(h.matrix().clone(), a.matrix().clone()).unwrap())
    }

    #[test]
    fn semigroup_property_for_constant_generator() {
        let l = random_gksl(5, 2).scale(c(0.3, 0.0));
        let gen = TimeDependentGenerator::constant(l.clone(), GeneratorClass::Gksl);
        let grid = TimeGrid::new(2.0, 2000).unwrap();
        let fam = propagate(&gen, &grid).unwrap();
        for (i, j) in [(100, 300), (500, 1500), (1000, 1000)] {
            let lhs = fam.map(i + j);
            let rhs = fam.map(i).compose(fam.map(j)).unwrap();
            assert!(lhs.distance(&rhs) < 1e-8);
        }
        // matrix exponential oracle
        assert!(fam.map(2000).distance(&l.scale(c(2.0, 0.0)).exp()) < 1e-8);
    }

    #[test]
    fn propagator_examples() {
        let l = dephasing("0", "sin(t)");
        assert_eq!(propagator(&l, 1.0, 1.0).unwrap(), Superoperator::identity(2));
        assert!(matches!(propagator(&l, 2.0, 1.0), Err(Error::Argument(_))));

        let v = propagator(&l, PI, 1.5 * PI).unwrap();
        assert!((coherence(&v) - c(1.0f64.exp(), 0.0)).norm() < 1e-8);
        assert!(!v.cp_verdict().is_cp);

        let k = random_gksl(9, 2).scale(c(0.5, 0.0));
        let gen = TimeDependentGenerator::constant(k.clone(), GeneratorClass::Gksl);
        let v = propagator(&gen, 0.7, 1.9).unwrap();
        assert!(v.distance(&k.scale(c(1.2, 0.0)).exp()) < 1e-10);
    }

    #[test]
    fn composition_law_for_divisible_dephasing() {
        let l = dephasing("1", "1 + 0.5*sin(3*t)");
        for (t, s, u) in [(2.0, 1.0, 0.0), (1.5, 0.8, 0.2), (3.0, 2.9, 0.1)] {
            let vts = propagator(&l, s, t).unwrap();
            let vsu = propagator(&l, u, s).unwrap();
            let vtu = propagator(&l, u, t).unwrap();
            assert!(vts.compose(&vsu).unwrap().distance(&vtu) < 1e-8);
        }
    }

    #[test]
    fn family_propagators_agree() {
        let l = dephasing("1", "0.5");
        let fam = propagate(&l, &TimeGrid::new(2.0, 200).unwrap()).unwrap();
        let a = fam.propagator(150, 50).unwrap();
        let b = fam.propagator_by_inversion(150, 50).unwrap();
        assert!(a.distance(&b) < 1e-10);
        assert!(fam.propagator(10, 20).is_err());
    }

    #[test]
    fn commutative_solve_examples() {
        let sol = commutative_solve(&TimeDependentGenerator::zero(2), 1.0).unwrap();
        assert!(sol.map.distance(&Superoperator::identity(2)) < 1e-15);

        // Omega_t = sin t, Gamma_t = t^2/2
        let l = dephasing("cos(t)", "t");
        let t = 1.3;
        let sol = commutative_solve(&l, t).unwrap();
        let (om, ga) = (t.sin(), t * t / 2.0);
        // Lambda(e_01) = e^{(-i Omega - Gamma)} e_01 and e_01 sits at vec index 2
        assert!((coherence(&sol.map) - c(-ga, -om).exp()).norm() < 1e-10);
        assert!((sol.map.matrix()[(1, 1)] - c(-ga, om).exp()).norm() < 1e-10);
    }

    #[test]
    fn commutative_solve_refuses_non_commuting() {
        let sz = Superoperator::hamiltonian(&sigma_z()).unwrap();
        let sx = Superoperator::hamiltonian(&sigma_x()).unwrap();
        let l = TimeDependentGenerator::new(2, GeneratorClass::Custom, move |t| {
            &sz.scale(c(t.cos(), 0.0)) + &sx.scale(c(t.sin(), 0.0))
        });
        assert!(matches!(commutative_solve(&l, 1.0), Err(Error::NotCommutative { .. })));
    }

    #[test]
    fn cumulant_legitimacy_examples() {
        let grid = TimeGrid::new(2.0 * PI, 200).unwrap();
        assert!(check_cumulant_legitimacy(&dephasing("0", "sin(t)"), &grid, 1e-9)
            .unwrap()
            .iter()
            .all(|&b| b));
        let neg = check_cumulant_legitimacy(&dephasing("0", "-1"), &grid, 1e-9).unwrap();
        assert!(neg[0]);
        assert!(neg[1..].iter().all(|&b| !b));
        assert!(check_cumulant_legitimacy(&TimeDependentGenerator::zero(2), &grid, 1e-9)
            .unwrap()
            .iter()
            .all(|&b| b));
    }

    #[test]
    fn reduced_dynamics_uncoupled_is_unitary() {
        let hs = sigma_x() * c(0.7, 0.0);
        let model = MicroscopicModel::new(2, 2, kron(&hs, &identity(2)), DensityMatrix::maximally_mixed(2)).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let fam = reduced_dynamics(&model, &grid).unwrap();
        assert!(fam.map(0).distance(&Superoperator::identity(2)) < 1e-12);
        for (i, t) in grid.nodes().into_iter().enumerate() {
            let u = (hs.clone() * c(0.0, -t)).exp();
            let expected = Superoperator::conjugation(&u).unwrap();
            assert!(fam.map(i).distance(&expected) < 1e-12);
        }
    }

    #[test]
    fn reduced_dynamics_zz_model() {
        let plus = DensityMatrix::pure(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)])).unwrap();
        let model = MicroscopicModel::new(2, 2, kron(&sigma_z(), &sigma_z()), plus.clone()).unwrap();
        let grid = TimeGrid::new(2.0 * PI, 400).unwrap();
        let fam = reduced_dynamics(&model, &grid).unwrap();
        for (i, t) in grid.nodes().into_iter().enumerate() {
            // 4x4 exponential and partial trace oracle
            let u = (kron(&sigma_z(), &sigma_z()) * c(0.0, -t)).exp();
            let rho = unit(2, 0, 1);
            let full = &u * kron(&rho, plus.matrix()) * u.adjoint();
            let oracle = partial_trace(&full, (2, 2), Subsystem::A).unwrap();
            assert!((oracle[(0, 1)] - c((2.0 * t).cos(), 0.0)).norm() < 1e-12);
            assert!((fam.map(i).apply(&rho).unwrap() - oracle).norm() < 1e-12);
        }
        for v in fam.validity() {
            assert!(v.cp.min_choi_eigenvalue >= -1e-9 && v.is_tp);
        }
    }

    #[test]
    fn reduced_dynamics_cap() {
        let model = MicroscopicModel::new(2, 2, identity(4), DensityMatrix::maximally_mixed(2)).unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        assert!(reduced_dynamics_with_cap(&model, &grid, 3).is_err());
    }
}
