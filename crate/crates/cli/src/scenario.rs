//! Turning a parsed [`ScenarioConfig`] into runtime objects.

use std::collections::BTreeMap;
use std::fmt;

use markovianity::criteria::{default_state_pair, extended_witnesses, DEFAULT_RANDOM_WITNESSES, DIVISIBILITY_TOL};
use markovianity::dynamics::TimeGrid;
use markovianity::generators::{
    dephasing_generator, generator_from_map_family, gksl_build, weyl_generator, GeneratorClass, GkslData,
    TimeDependentGenerator,
};
use markovianity::operators::{
    c, identity, max_entangled, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, unit, ComplexMatrix,
};
use markovianity::{ComplexSignal, DensityMatrix, EntropyKind, HermitianMatrix, MicroscopicModel, ScalarSignal};
use nalgebra::DVector;
use num_complex::Complex64;

use crate::config::{
    ComplexExpr, ComplexValue, CriterionSpec, EntropyName, ExprValue, GeneratorSpec, MatrixSpec, Method,
    OperatorSpec, PairSpec, ScenarioConfig, StateSpec, SCHEMA_VERSION,
};

/// Failure classes, mapped onto process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn config_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

/// Overridable tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    values: BTreeMap<String, f64>,
}

impl Tolerances {
    pub const KEYS: [&'static str; 4] = ["cp", "divisibility", "legitimacy", "tp"];

    pub fn defaults(d: usize) -> Self {
        let mut values = BTreeMap::new();
        values.insert("cp".to_string(), 1e-9 * d as f64);
        values.insert("divisibility".to_string(), DIVISIBILITY_TOL);
        values.insert("legitimacy".to_string(), 1e-9);
        values.insert("tp".to_string(), 1e-9);
        Self { values }
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        if !Self::KEYS.contains(&key) {
            return Err(config_err(format!(
                "unknown tolerance '{key}' (known: {})",
                Self::KEYS.join(", ")
            )));
        }
        if !(value.is_finite() && value >= 0.0) {
            return Err(config_err(format!("tolerance '{key}' must be a nonnegative number, got {value}")));
        }
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.values
    }
}

/// Parses `KEY=VAL`.
pub fn parse_override(text: &str) -> Result<(String, f64), CliError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| config_err(format!("override '{text}' is not of the form KEY=VAL")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| config_err(format!("override '{text}': '{v}' is not a number")))?;
    Ok((k.trim().to_string(), v))
}

pub enum Dynamics {
    Generator(TimeDependentGenerator, Method),
    Microscopic(MicroscopicModel),
}

pub type NamedPair = (String, DensityMatrix, DensityMatrix);

pub enum Criterion {
    Divisibility { delta: Option<f64> },
    TraceDistance(Vec<NamedPair>),
    Fidelity(Vec<NamedPair>),
    RelativeEntropy(EntropyKind, Vec<NamedPair>),
    HeisenbergNorm(ComplexMatrix),
    ExtendedNorm(Vec<(String, HermitianMatrix)>),
    Negativity(DensityMatrix),
    CumulantLegitimacy,
}

pub struct Scenario {
    pub d: usize,
    pub grid: TimeGrid,
    pub dynamics: Dynamics,
    pub criteria: Vec<Criterion>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub class: &'static str,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = serde_json::from_str(text)
        .map_err(|e| config_err(format!("invalid scenario JSON: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(config_err(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

fn signal(field: &str, e: &ExprValue) -> Result<ScalarSignal, CliError> {
    match e {
        ExprValue::Number(x) if x.is_finite() => Ok(ScalarSignal::constant(*x)),
        ExprValue::Number(x) => Err(config_err(format!("{field}: non-finite constant {x}"))),
        ExprValue::Text(s) => ScalarSignal::parse(s).map_err(|err| config_err(format!("{field}: {err} in \"{s}\""))),
    }
}

fn complex_signal(field: &str, e: &ComplexExpr) -> Result<ComplexSignal, CliError> {
    match e {
        ComplexExpr::Real(re) => Ok(ComplexSignal::real(signal(field, re)?)),
        ComplexExpr::Parts { re, im } => Ok(ComplexSignal::new(
            signal(&format!("{field}.re"), re)?,
            signal(&format!("{field}.im"), im)?,
        )),
    }
}

fn complex(v: ComplexValue) -> Complex64 {
    match v {
        ComplexValue::Real(x) => c(x, 0.0),
        ComplexValue::Pair([re, im]) => c(re, im),
    }
}

fn matrix(field: &str, m: &MatrixSpec, n: usize) -> Result<ComplexMatrix, CliError> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(config_err(format!("{field}: expected a {n}x{n} matrix")));
    }
    let out = ComplexMatrix::from_fn(n, n, |i, j| complex(m[i][j]));
    if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(config_err(format!("{field}: non-finite entry")));
    }
    Ok(out)
}

fn check_square<T>(field: &str, m: &[Vec<T>], n: usize) -> Result<(), CliError> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(config_err(format!("{field}: expected a {n}x{n} matrix")));
    }
    Ok(())
}

fn state(field: &str, s: &StateSpec, n: usize) -> Result<DensityMatrix, CliError> {
    let bad = |e: markovianity::Error| config_err(format!("{field}: {e}"));
    match s {
        StateSpec::Named(name) => match name.as_str() {
            "plus" | "minus" => {
                let sign = if name == "plus" { 1.0 } else { -1.0 };
                if n != 2 && name == "minus" {
                    return Err(config_err(format!("{field}: 'minus' is only defined for d = 2")));
                }
                let v = DVector::from_fn(n, |k, _| c(if k == 1 { sign } else { 1.0 }, 0.0));
                DensityMatrix::pure(&v).map_err(bad)
            }
            "maximally_mixed" => Ok(DensityMatrix::maximally_mixed(n)),
            "maximally_entangled" => {
                let d = (n as f64).sqrt().round() as usize;
                if d * d != n {
                    return Err(config_err(format!("{field}: no maximally entangled state of dimension {n}")));
                }
                DensityMatrix::new(max_entangled(d)).map_err(bad)
            }
            other => Err(config_err(format!(
                "{field}: unknown state '{other}' (known: plus, minus, maximally_mixed, maximally_entangled)"
            ))),
        },
        StateSpec::Ket { ket } => {
            if ket.len() != n {
                return Err(config_err(format!("{field}: ket must have {n} entries")));
            }
            let v = DVector::from_fn(n, |k, _| complex(ket[k]));
            DensityMatrix::pure(&v).map_err(bad)
        }
        StateSpec::Matrix { matrix: m } => DensityMatrix::new(matrix(field, m, n)?).map_err(bad),
    }
}

fn operator(field: &str, o: &OperatorSpec, d: usize) -> Result<ComplexMatrix, CliError> {
    match o {
        OperatorSpec::Named(name) => {
            let qubit = |m: ComplexMatrix| {
                if d == 2 {
                    Ok(m)
                } else {
                    Err(config_err(format!("{field}: '{name}' is only defined for d = 2")))
                }
            };
            match name.as_str() {
                "identity" => Ok(identity(d)),
                "sigma_plus" => qubit(sigma_plus()),
                "sigma_minus" => qubit(sigma_minus()),
                "sigma_x" => qubit(sigma_x()),
                "sigma_y" => qubit(sigma_y()),
                "sigma_z" => qubit(sigma_z()),
                other => Err(config_err(format!(
                    "{field}: unknown operator '{other}' (known: identity, sigma_plus, sigma_minus, sigma_x, sigma_y, sigma_z)"
                ))),
            }
        }
        OperatorSpec::Matrix { matrix: m } => matrix(field, m, d),
    }
}

fn pairs(field: &str, base: &str, specs: &[PairSpec], d: usize, seed: u64) -> Result<Vec<NamedPair>, CliError> {
    let (p, m) = default_state_pair(d, seed);
    let mut out = vec![(base.to_string(), p, m)];
    for (k, spec) in specs.iter().enumerate() {
        let f = format!("{field}.pairs[{k}]");
        out.push((
            format!("{base}_pair{}", k + 1),
            state(&format!("{f}.rho"), &spec.rho, d)?,
            state(&format!("{f}.sigma"), &spec.sigma, d)?,
        ));
    }
    Ok(out)
}

fn build_generator(spec: &GeneratorSpec, d: usize, grid: &TimeGrid) -> Result<Dynamics, CliError> {
    let g = match spec {
        GeneratorSpec::Dephasing { omega, gamma } => {
            if d != 2 {
                return Err(config_err(format!("dephasing generator needs dimension 2, got {d}")));
            }
            dephasing_generator(signal("generator.omega", omega)?, signal("generator.gamma", gamma)?)
        }
        GeneratorSpec::Weyl { c: coeffs, h } => {
            check_square("generator.c", coeffs, d - 1)?;
            let cs = coeffs
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(l, e)| complex_signal(&format!("generator.c[{k}][{l}]"), e))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let hs = if h.is_empty() {
                vec![ComplexSignal::zero(); d - 1]
            } else {
                h.iter()
                    .enumerate()
                    .map(|(k, e)| complex_signal(&format!("generator.h[{k}]"), e))
                    .collect::<Result<Vec<_>, _>>()?
            };
            weyl_generator(d, cs, hs).map_err(|e| config_err(format!("generator: {e}")))?
        }
        GeneratorSpec::Gksl {
            hamiltonian,
            rates,
            time_factor,
        } => {
            let h = matrix("generator.hamiltonian", hamiltonian, d)?;
            let a = matrix("generator.rates", rates, d * d - 1)?;
            let data = GkslData::with_gell_mann(h, a).map_err(|e| config_err(format!("generator: {e}")))?;
            let l = gksl_build(&data);
            match time_factor {
                None => TimeDependentGenerator::constant(l, GeneratorClass::Gksl),
                Some(f) => {
                    let f = signal("generator.time_factor", f)?;
                    TimeDependentGenerator::new(d, GeneratorClass::Gksl, move |t| l.scale(c(f.eval(t), 0.0)))
                }
            }
        }
        GeneratorSpec::FromMapFamily { n, theta_offdiag } => {
            check_square("generator.n", n, d)?;
            let parse = |field: &str, m: &Vec<Vec<ExprValue>>| {
                m.iter()
                    .enumerate()
                    .map(|(k, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(l, e)| signal(&format!("{field}[{k}][{l}]"), e))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            };
            let ns = parse("generator.n", n)?;
            let theta = match theta_offdiag {
                Some(th) => {
                    check_square("generator.theta_offdiag", th, d)?;
                    Some(parse("generator.theta_offdiag", th)?)
                }
                None => None,
            };
            generator_from_map_family(ns, theta, &grid.nodes()).map_err(|e| config_err(format!("generator: {e}")))?
        }
        GeneratorSpec::Microscopic {
            reservoir_dim,
            hamiltonian,
            reservoir_state,
        } => {
            let dr = *reservoir_dim;
            if dr == 0 {
                return Err(config_err("generator.reservoir_dim must be positive"));
            }
            let h = matrix("generator.hamiltonian", hamiltonian, d * dr)?;
            let omega = state("generator.reservoir_state", reservoir_state, dr)?;
            let model = MicroscopicModel::new(d, dr, h, omega).map_err(|e| config_err(format!("generator: {e}")))?;
            return Ok(Dynamics::Microscopic(model));
        }
    };
    Ok(Dynamics::Generator(g, Method::Ode))
}

/// Static checks and construction of everything a run needs.
pub fn build_scenario(cfg: &ScenarioConfig, overrides: &[(String, f64)]) -> Result<Scenario, CliError> {
    let d = cfg.dimension;
    if d < 2 {
        return Err(config_err(format!("dimension must be at least 2, got {d}")));
    }
    if d > 8 {
        return Err(config_err(format!("dimension {d} exceeds the supported maximum of 8")));
    }
    let grid = match cfg.grid.n_steps {
        Some(n) => TimeGrid::new(cfg.grid.t_end, n),
        None => TimeGrid::with_default_steps(cfg.grid.t_end),
    }
    .map_err(|e| config_err(format!("grid: {e}")))?;

    let mut tolerances = Tolerances::defaults(d);
    for (k, v) in &cfg.tolerances {
        tolerances.set(k, *v)?;
    }
    for (k, v) in overrides {
        tolerances.set(k, *v)?;
    }

    let mut dynamics = build_generator(&cfg.generator, d, &grid)?;
    if let Dynamics::Generator(_, method) = &mut dynamics {
        *method = cfg.method;
    } else if cfg.method == Method::ClosedForm {
        return Err(config_err("method 'closed_form' needs a generator, not a microscopic model"));
    }

    let seed = cfg.seed;
    let mut criteria = Vec::new();
    for (i, spec) in cfg.criteria.iter().enumerate() {
        let field = format!("criteria[{i}]");
        let crit = match spec {
            CriterionSpec::Divisibility { delta } => {
                if let Some(x) = delta {
                    if !(*x > 0.0 && *x <= grid.step() * (1.0 + 1e-12)) {
                        return Err(config_err(format!(
                            "{field}.delta must lie in (0, {}], got {x}",
                            grid.step()
                        )));
                    }
                }
                Criterion::Divisibility { delta: *delta }
            }
            CriterionSpec::TraceDistance { pairs: p } => {
                Criterion::TraceDistance(pairs(&field, "trace_distance", p, d, seed)?)
            }
            CriterionSpec::Fidelity { pairs: p } => Criterion::Fidelity(pairs(&field, "fidelity", p, d, seed)?),
            CriterionSpec::RelativeEntropy { kind, alpha, q, pairs: p } => {
                let k = match kind {
                    EntropyName::Vonneumann => EntropyKind::VonNeumann,
                    EntropyName::Renyi => EntropyKind::Renyi(
                        alpha.ok_or_else(|| config_err(format!("{field}: renyi needs 'alpha'")))?,
                    ),
                    EntropyName::Tsallis => {
                        EntropyKind::Tsallis(q.ok_or_else(|| config_err(format!("{field}: tsallis needs 'q'")))?)
                    }
                };
                let k = k.validate().map_err(|e| config_err(format!("{field}: {e}")))?;
                Criterion::RelativeEntropy(k, pairs(&field, &k.label(), p, d, seed)?)
            }
            CriterionSpec::HeisenbergNorm { operator: op } => {
                let a = match op {
                    Some(o) => operator(&format!("{field}.operator"), o, d)?,
                    None if d == 2 => sigma_plus(),
                    None => unit(d, 0, 1),
                };
                Criterion::HeisenbergNorm(a)
            }
            CriterionSpec::ExtendedNorm { random_count, extra } => {
                let mut ws = extended_witnesses(d, seed, random_count.unwrap_or(DEFAULT_RANDOM_WITNESSES));
                for (k, m) in extra.iter().enumerate() {
                    let f = format!("{field}.extra[{k}]");
                    let w = HermitianMatrix::new(matrix(&f, m, d * d)?).map_err(|e| config_err(format!("{f}: {e}")))?;
                    ws.push((format!("extended_norm_extra{}", k + 1), w));
                }
                Criterion::ExtendedNorm(ws)
            }
            CriterionSpec::Negativity { state: s } => {
                let w0 = match s {
                    Some(s) => state(&format!("{field}.state"), s, d * d)?,
                    None => DensityMatrix::new(max_entangled(d)).expect("valid state"),
                };
                Criterion::Negativity(w0)
            }
            CriterionSpec::CumulantLegitimacy => {
                if matches!(dynamics, Dynamics::Microscopic(_)) {
                    return Err(config_err(format!(
                        "{field}: cumulant_legitimacy needs a generator, not a microscopic model"
                    )));
                }
                Criterion::CumulantLegitimacy
            }
        };
        criteria.push(crit);
    }
    Ok(Scenario {
        d,
        grid,
        dynamics,
        criteria,
        seed,
        tolerances,
        class: cfg.generator.class(),
    })
}
