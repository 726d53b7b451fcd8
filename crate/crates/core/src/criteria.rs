//! Markovianity criteria: CP-divisibility of short-time propagators, the
//! `g_t` measure and monotonicity witnesses evaluated on a [`MapFamily`].

use std::fmt;

use rayon::prelude::*;

use crate::dynamics::{integrate, MapFamily, TimeGrid, MAX_INVERSION_COND};
use crate::error::{Error, Result};
use crate::generators::TimeDependentGenerator;
use crate::operators::{
    c, eigh, ensure_dim, from_spectrum, ket, max_entangled, negativity, operator_norm, trace_norm, ComplexMatrix,
    DensityMatrix, HermitianMatrix,
};
use crate::random::{random_hermitian_unit_trace_norm, random_orthogonal_pair, split};
use crate::superop::Superoperator;

/// Relative per-step slack before a difference counts as a monotonicity violation.
pub const SLOPE_REL_TOL: f64 = 1e-7;
/// `g` values below this are reported as exactly zero.
pub const G_ZERO_TOL: f64 = 1e-8;
/// Default tolerance of [`divisibility_report`].
pub const DIVISIBILITY_TOL: f64 = 1e-9;
/// Eigenvalues below this count as outside the support of a state.
pub const SUPPORT_TOL: f64 = 1e-12;
/// RK4 substeps used for each short-time propagator.
const PROPAGATOR_SUBSTEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    NonIncreasing,
    NonDecreasing,
}

/// A witness evaluated on a grid together with its monotonicity verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSeries {
    name: String,
    times: Vec<f64>,
    values: Vec<f64>,
    direction: Monotonicity,
    slope_tol: f64,
    flags: Vec<bool>,
    violation_intervals: Vec<(f64, f64)>,
    revival_peaks: Vec<(f64, f64)>,
    warnings: Vec<String>,
}

impl WitnessSeries {
    /// Builds a series and its verdict. Infinite values are kept as
    /// sentinels but excluded from the verdict.
    pub fn new(name: impl Into<String>, times: Vec<f64>, values: Vec<f64>, direction: Monotonicity) -> Result<Self> {
        let name = name.into();
        if times.len() != values.len() {
            return Err(Error::Argument(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Validation(format!("{name}: value at t = {} is NaN", times[i])));
        }
        let max = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        let slope_tol = SLOPE_REL_TOL * (max + 1.0);
        let mut warnings = Vec::new();
        let skipped = values.iter().filter(|v| !v.is_finite()).count();
        if skipped > 0 {
            warnings.push(format!(
                "{name}: {skipped} infinite value(s) excluded from the monotonicity verdict"
            ));
        }
        let n = values.len();
        let mut step_bad = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            let (a, b) = (values[i], values[i + 1]);
            if !(a.is_finite() && b.is_finite()) {
                continue;
            }
            step_bad[i] = match direction {
                Monotonicity::NonIncreasing => b - a > slope_tol,
                Monotonicity::NonDecreasing => a - b > slope_tol,
            };
        }
        let mut flags = vec![false; n];
        let mut violation_intervals = Vec::new();
        let mut revival_peaks = Vec::new();
        let mut i = 0;
        while i < step_bad.len() {
            if !step_bad[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < step_bad.len() && step_bad[i] {
                flags[i + 1] = true;
                i += 1;
            }
            violation_intervals.push((times[start], times[i]));
            revival_peaks.push((times[i], values[i]));
        }
        Ok(Self {
            name,
            times,
            values,
            direction,
            slope_tol,
            flags,
            violation_intervals,
            revival_peaks,
            warnings,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn direction(&self) -> Monotonicity {
        self.direction
    }

    pub fn slope_tol(&self) -> f64 {
        self.slope_tol
    }

    /// Per node: whether the step into this node violates monotonicity.
    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn violation_intervals(&self) -> &[(f64, f64)] {
        &self.violation_intervals
    }

    pub fn is_monotone(&self) -> bool {
        self.violation_intervals.is_empty()
    }

    /// Times at which the series turns back (start of each violation run).
    pub fn revivals(&self) -> Vec<f64> {
        self.violation_intervals.iter().map(|iv| iv.0).collect()
    }

    /// `(t, value)` at the end of each violation run.
    pub fn revival_peaks(&self) -> &[(f64, f64)] {
        &self.revival_peaks
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Overall divisibility verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Markovian,
    NonMarkovian,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Markovian => "markovian",
            Verdict::NonMarkovian => "non_markovian",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// CP verdicts of `V_{t+delta,t}` and `g_t` on every node.
///
/// Entries are `None` where the propagator could not be formed (only in
/// family mode, when `Lambda_t` is too ill-conditioned to invert).
#[derive(Debug, Clone, PartialEq)]
pub struct DivisibilityReport {
    pub times: Vec<f64>,
    pub delta: f64,
    pub tol: f64,
    pub min_choi: Vec<Option<f64>>,
    pub g: Vec<Option<f64>>,
    pub verdict: Verdict,
    pub violation_intervals: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl DivisibilityReport {
    fn assemble(times: Vec<f64>, delta: f64, tol: f64, min_choi: Vec<Option<f64>>, g: Vec<Option<f64>>, t_max: f64) -> Self {
        let cp_fail: Vec<bool> = min_choi.iter().map(|m| m.is_some_and(|v| v < -tol)).collect();
        let g_fail: Vec<bool> = g.iter().map(|x| x.is_some_and(|v| v > tol)).collect();
        let missing = min_choi.iter().filter(|m| m.is_none()).count() + g.iter().filter(|x| x.is_none()).count();
        let any_cp = cp_fail.iter().any(|&b| b);
        let any_g = g_fail.iter().any(|&b| b);
        let verdict = if any_cp && any_g {
            Verdict::NonMarkovian
        } else if any_cp || any_g || missing > 0 {
            Verdict::Inconclusive
        } else {
            Verdict::Markovian
        };
        let mut warnings = Vec::new();
        if missing > 0 {
            warnings.push(format!("divisibility: {missing} entries unavailable (ill-conditioned maps)"));
        }
        if any_cp != any_g {
            warnings.push(format!(
                "divisibility: CP test {} but g measure {}",
                if any_cp { "fails" } else { "passes" },
                if any_g { "fails" } else { "passes" }
            ));
        }
        let mut violation_intervals = Vec::new();
        let mut i = 0;
        let n = times.len();
        while i < n {
            if !(cp_fail[i] || g_fail[i]) {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && (cp_fail[i] || g_fail[i]) {
                i += 1;
            }
            violation_intervals.push((times[start], (times[i - 1] + delta).min(t_max)));
        }
        Self {
            times,
            delta,
            tol,
            min_choi,
            g,
            verdict,
            violation_intervals,
            warnings,
        }
    }

    /// Per node: CP verdict of `V_{t+delta,t}`.
    pub fn cp(&self) -> Vec<Option<bool>> {
        self.min_choi.iter().map(|m| m.map(|v| v >= -self.tol)).collect()
    }

    /// Smallest Choi eigenvalue over all nodes and the time it occurs.
    pub fn worst_choi(&self) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.min_choi)
            .filter_map(|(&t, m)| m.map(|v| (v, t)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn g_max(&self) -> Option<f64> {
        self.g.iter().flatten().copied().reduce(f64::max)
    }
}

fn g_at_epsilon(l: &Superoperator, p: &ComplexMatrix, eps: f64) -> f64 {
    let m = p + l.apply_extended(p).expect("dimension") * c(eps, 0.0);
    (trace_norm(&m).unwrap_or(f64::NAN) - 1.0) / eps
}

/// `g_t = lim (|P+ + eps (1 (x) L_t) P+|_1 - 1)/eps`, extrapolated from
/// `eps = 1e-5, 1e-6`; values below `1e-8` are returned as 0.
pub fn g_measure(l: &TimeDependentGenerator, t: f64) -> f64 {
    g_measure_of(&l.at(t))
}

pub fn g_measure_of(l: &Superoperator) -> f64 {
    let p = max_entangled(l.dim());
    let (g1, g2) = (g_at_epsilon(l, &p, 1e-5), g_at_epsilon(l, &p, 1e-6));
    let g = (10.0 * g2 - g1) / 9.0;
    if g < G_ZERO_TOL {
        0.0
    } else {
        g
    }
}

/// CP verdict of `V_{t+delta,t}` (4 RK4 substeps) and `g_t` at every node.
pub fn divisibility_report(
    l: &TimeDependentGenerator,
    grid: &TimeGrid,
    delta: f64,
    tol: f64,
) -> Result<DivisibilityReport> {
    if !(delta > 0.0) || delta > grid.step() * (1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "delta must lie in (0, {}], got {delta}",
            grid.step()
        )));
    }
    let times = grid.nodes();
    let rows: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let v = integrate(l, t, t + delta, PROPAGATOR_SUBSTEPS)?;
            let cp = v.is_completely_positive(tol);
            Ok((cp.min_choi_eigenvalue, g_measure(l, t)))
        })
        .collect::<Result<_>>()?;
    let (min_choi, g) = rows.into_iter().map(|(m, g)| (Some(m), Some(g))).unzip();
    Ok(DivisibilityReport::assemble(times, delta, tol, min_choi, g, grid.t_end()))
}

/// Divisibility from the maps alone: `V = Lambda_{i+1} Lambda_i^-1` and
/// `g_i = (|(1 (x) V) P+|_1 - 1)/dt` on every node but the last.
pub fn divisibility_report_from_maps(family: &MapFamily, tol: f64) -> DivisibilityReport {
    let grid = family.grid();
    let n = grid.n_steps();
    let p = max_entangled(family.dim());
    let rows: Vec<(Option<f64>, Option<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dt = grid.t(i + 1) - grid.t(i);
            let inv = match family.map(i).inverse_guarded(MAX_INVERSION_COND) {
                Ok(inv) => inv,
                Err(_) => return (None, None),
            };
            let v = family.map(i + 1).compose(&inv).expect("same dimension");
            let min = v.is_completely_positive(tol).min_choi_eigenvalue;
            let norm = trace_norm(&v.apply_extended(&p).expect("dimension")).unwrap_or(f64::NAN);
            let g = (norm - 1.0) / dt;
            (Some(min), Some(if g < G_ZERO_TOL { 0.0 } else { g }))
        })
        .collect();
    let (min_choi, g): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut times = grid.nodes();
    times.pop();
    DivisibilityReport::assemble(times, grid.step(), tol, min_choi, g, grid.t_end())
}

/// Generator mode when the family carries its generator, map mode otherwise.
pub fn family_divisibility_report(family: &MapFamily, delta: f64, tol: f64) -> Result<DivisibilityReport> {
    match family.generator() {
        Some(l) => divisibility_report(l, family.grid(), delta, tol),
        None => Ok(divisibility_report_from_maps(family, tol)),
    }
}

fn series<F>(family: &MapFamily, name: String, direction: Monotonicity, f: F) -> Result<WitnessSeries>
where
    F: Fn(&Superoperator) -> Result<f64> + Sync,
{
    let values = family.maps().par_iter().map(&f).collect::<Result<Vec<f64>>>()?;
    WitnessSeries::new(name, family.grid().nodes(), values, direction)
}

fn check_state(family: &MapFamily, rho: &DensityMatrix) -> Result<()> {
    ensure_dim(rho.matrix(), family.dim())
}

/// `D(t) = |Lambda_t(rho - sigma)|_1 / 2`, expected non-increasing.
pub fn trace_distance_series(family: &MapFamily, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<WitnessSeries> {
    check_state(family, rho)?;
    check_state(family, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    series(family, "trace_distance".into(), Monotonicity::NonIncreasing, |m| {
        Ok(0.5 * trace_norm(&m.apply(&diff)?)?)
    })
}

fn sqrt_lenient(a: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = eigh(a);
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    from_spectrum(&roots, &vectors)
}

/// `F = |sqrt(A) sqrt(B)|_1^2` for positive semidefinite `A, B` (no state validation).
pub fn fidelity_of(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let f = trace_norm(&(sqrt_lenient(a) * sqrt_lenient(b)))?;
    Ok((f * f).min(1.0))
}

/// `F(Lambda_t rho, Lambda_t sigma)`, expected non-decreasing.
pub fn fidelity_series(family: &MapFamily, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<WitnessSeries> {
    check_state(family, rho)?;
    check_state(family, sigma)?;
    series(family, "fidelity".into(), Monotonicity::NonDecreasing, |m| {
        fidelity_of(&m.apply(rho.matrix())?, &m.apply(sigma.matrix())?)
    })
}

/// Relative entropy flavours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyKind {
    /// `S_a = log(Tr rho^a sigma^(1-a)) / (a - 1)`, `a` in `[0,1) U (1,2]`.
    Renyi(f64),
    /// `T_q = (1 - Tr rho^q sigma^(1-q)) / (1 - q)`, `q` in `[0,1)`.
    Tsallis(f64),
    VonNeumann,
}

impl EntropyKind {
    pub fn validate(self) -> Result<Self> {
        match self {
            EntropyKind::Renyi(a) if !((0.0..1.0).contains(&a) || (a > 1.0 && a <= 2.0)) => {
                Err(Error::Argument(format!("Renyi order must lie in [0,1) U (1,2], got {a}")))
            }
            EntropyKind::Tsallis(q) if !(0.0..1.0).contains(&q) => {
                Err(Error::Argument(format!("Tsallis index must lie in [0,1), got {q}")))
            }
            k => Ok(k),
        }
    }

    pub fn label(self) -> String {
        match self {
            EntropyKind::Renyi(a) => format!("renyi_{a}"),
            EntropyKind::Tsallis(q) => format!("tsallis_{q}"),
            EntropyKind::VonNeumann => "relative_entropy".into(),
        }
    }
}

/// Eigen-pairs of a PSD matrix with the squared overlaps to another basis.
struct SpectralPair {
    p: Vec<f64>,
    q: Vec<f64>,
    overlap: Vec<Vec<f64>>,
}

impl SpectralPair {
    fn new(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Self {
        let (p, u) = eigh(rho);
        let (q, v) = eigh(sigma);
        let w = u.adjoint() * v;
        let overlap = (0..p.len())
            .map(|i| (0..q.len()).map(|j| w[(i, j)].norm_sqr()).collect())
            .collect();
        Self { p, q, overlap }
    }

    /// Whether the support of rho leaks outside the support of sigma.
    fn support_violation(&self) -> bool {
        for (i, &pi) in self.p.iter().enumerate() {
            if pi <= SUPPORT_TOL {
                continue;
            }
            for (j, &qj) in self.q.iter().enumerate() {
                if qj <= SUPPORT_TOL && pi * self.overlap[i][j] > SUPPORT_TOL {
                    return true;
                }
            }
        }
        false
    }

    /// `Tr rho^a sigma^b` with `0^0 = 0` (powers restricted to the supports).
    fn power_trace(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &pi) in self.p.iter().enumerate() {
            if pi <= SUPPORT_TOL {
                continue;
            }
            for (j, &qj) in self.q.iter().enumerate() {
                if qj <= SUPPORT_TOL {
                    continue;
                }
                acc += pi.powf(a) * qj.powf(b) * self.overlap[i][j];
            }
        }
        acc
    }
}

/// Relative entropy of two PSD unit-trace matrices; `+inf` on support violations.
pub fn relative_entropy(rho: &ComplexMatrix, sigma: &ComplexMatrix, kind: EntropyKind) -> Result<f64> {
    let kind = kind.validate()?;
    let n = rho.nrows();
    ensure_dim(rho, n)?;
    ensure_dim(sigma, n)?;
    let sp = SpectralPair::new(rho, sigma);
    let value = match kind {
        EntropyKind::VonNeumann => {
            if sp.support_violation() {
                return Ok(f64::INFINITY);
            }
            let mut s = 0.0;
            for (i, &pi) in sp.p.iter().enumerate() {
                if pi <= SUPPORT_TOL {
                    continue;
                }
                s += pi * pi.ln();
                for (j, &qj) in sp.q.iter().enumerate() {
                    if qj > SUPPORT_TOL {
                        s -= pi * sp.overlap[i][j] * qj.ln();
                    }
                }
            }
            s
        }
        EntropyKind::Renyi(a) => {
            if a > 1.0 && sp.support_violation() {
                return Ok(f64::INFINITY);
            }
            let tr = sp.power_trace(a, 1.0 - a);
            if tr <= 0.0 {
                return Ok(f64::INFINITY);
            }
            tr.ln() / (a - 1.0)
        }
        EntropyKind::Tsallis(q) => (1.0 - sp.power_trace(q, 1.0 - q)) / (1.0 - q),
    };
    Ok(value.max(0.0))
}

/// Relative entropy of the evolved pair, expected non-increasing.
pub fn relative_entropy_series(
    family: &MapFamily,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    kind: EntropyKind,
) -> Result<WitnessSeries> {
    let kind = kind.validate()?;
    check_state(family, rho)?;
    check_state(family, sigma)?;
    series(family, kind.label(), Monotonicity::NonIncreasing, |m| {
        relative_entropy(&m.apply(rho.matrix())?, &m.apply(sigma.matrix())?, kind)
    })
}

/// `|dual(Lambda_t)(a)|` (operator norm), expected non-increasing.
pub fn heisenberg_norm_series(family: &MapFamily, a: &ComplexMatrix) -> Result<WitnessSeries> {
    ensure_dim(a, family.dim())?;
    series(family, "heisenberg_norm".into(), Monotonicity::NonIncreasing, |m| {
        operator_norm(&m.dual().apply(a)?)
    })
}

/// `|(1 (x) Lambda_t) W|_1` for each `W`, expected non-increasing.
pub fn extended_norm_series(family: &MapFamily, ws: &[(String, HermitianMatrix)]) -> Result<Vec<WitnessSeries>> {
    let d = family.dim();
    ws.iter()
        .map(|(name, w)| {
            ensure_dim(w.matrix(), d * d)?;
            series(family, name.clone(), Monotonicity::NonIncreasing, |m| {
                trace_norm(&m.apply_extended(w.matrix())?)
            })
        })
        .collect()
}

/// Negativity of `(Lambda_t (x) 1) W0`, expected non-increasing.
pub fn negativity_series(family: &MapFamily, w0: &DensityMatrix) -> Result<WitnessSeries> {
    let d = family.dim();
    ensure_dim(w0.matrix(), d * d)?;
    series(family, "negativity".into(), Monotonicity::NonIncreasing, |m| {
        negativity(&m.apply_extended_left(w0.matrix())?, (d, d))
    })
}

/// Number of random operators added to `P+` in the default extended-norm set.
pub const DEFAULT_RANDOM_WITNESSES: usize = 20;

/// `P+` followed by [`DEFAULT_RANDOM_WITNESSES`] random Hermitian operators.
pub fn default_extended_witnesses(d: usize, seed: u64) -> Vec<(String, HermitianMatrix)> {
    extended_witnesses(d, seed, DEFAULT_RANDOM_WITNESSES)
}

/// `P+` followed by `count` random Hermitian operators of unit trace norm
/// drawn from substream 1 of `seed`.
pub fn extended_witnesses(d: usize, seed: u64, count: usize) -> Vec<(String, HermitianMatrix)> {
    let mut out = vec![(
        "extended_norm_pplus".to_string(),
        HermitianMatrix::symmetrized(&max_entangled(d)),
    )];
    let mut rng = split(seed, 1);
    for k in 0..count {
        out.push((
            format!("extended_norm_w{:02}", k + 1),
            random_hermitian_unit_trace_norm(&mut rng, d * d),
        ));
    }
    out
}

/// `|+><+|, |-><-|` for qubits, otherwise two random orthogonal pure states
/// from substream 2 of `seed`.
pub fn default_state_pair(d: usize, seed: u64) -> (DensityMatrix, DensityMatrix) {
    if d == 2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ket(2, 0) * c(s, 0.0) + ket(2, 1) * c(s, 0.0);
        let minus = ket(2, 0) * c(s, 0.0) - ket(2, 1) * c(s, 0.0);
        (
            DensityMatrix::pure(&plus).expect("unit vector"),
            DensityMatrix::pure(&minus).expect("unit vector"),
        )
    } else {
        random_orthogonal_pair(&mut split(seed, 2), d)
    }
}
