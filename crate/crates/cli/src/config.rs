//! Scenario file schema (JSON, `schema_version: 1`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub dimension: usize,
    pub generator: GeneratorSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub criteria: Vec<CriterionSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Ode,
    ClosedForm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_end: f64,
    #[serde(default)]
    pub n_steps: Option<usize>,
}

/// A rate expression given either as text or as a plain number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ExprValue {
    Number(f64),
    Text(String),
}

impl ExprValue {
    pub fn source(&self) -> String {
        match self {
            ExprValue::Number(x) => format!("{x:?}"),
            ExprValue::Text(s) => s.clone(),
        }
    }
}

impl Default for ExprValue {
    fn default() -> Self {
        ExprValue::Number(0.0)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ComplexExpr {
    Parts {
        re: ExprValue,
        #[serde(default)]
        im: ExprValue,
    },
    Real(ExprValue),
}

/// A complex constant: `x` or `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

pub type MatrixSpec = Vec<Vec<ComplexValue>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Dephasing {
        #[serde(default)]
        omega: ExprValue,
        gamma: ExprValue,
    },
    Weyl {
        c: Vec<Vec<ComplexExpr>>,
        #[serde(default)]
        h: Vec<ComplexExpr>,
    },
    Gksl {
        hamiltonian: MatrixSpec,
        rates: MatrixSpec,
        #[serde(default)]
        time_factor: Option<ExprValue>,
    },
    FromMapFamily {
        n: Vec<Vec<ExprValue>>,
        #[serde(default)]
        theta_offdiag: Option<Vec<Vec<ExprValue>>>,
    },
    Microscopic {
        reservoir_dim: usize,
        hamiltonian: MatrixSpec,
        reservoir_state: StateSpec,
    },
}

impl GeneratorSpec {
    pub fn class(&self) -> &'static str {
        match self {
            GeneratorSpec::Dephasing { .. } => "dephasing",
            GeneratorSpec::Weyl { .. } => "weyl",
            GeneratorSpec::Gksl { .. } => "gksl",
            GeneratorSpec::FromMapFamily { .. } => "from_map_family",
            GeneratorSpec::Microscopic { .. } => "microscopic",
        }
    }
}

/// A state: a named state, a ket or a density matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Ket { ket: Vec<ComplexValue> },
    Matrix { matrix: MatrixSpec },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Matrix { matrix: MatrixSpec },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub rho: StateSpec,
    pub sigma: StateSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyName {
    Vonneumann,
    Renyi,
    Tsallis,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CriterionSpec {
    Divisibility {
        #[serde(default)]
        delta: Option<f64>,
    },
    TraceDistance {
        #[serde(default)]
        pairs: Vec<PairSpec>,
    },
    Fidelity {
        #[serde(default)]
        pairs: Vec<PairSpec>,
    },
    RelativeEntropy {
        kind: EntropyName,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        q: Option<f64>,
        #[serde(default)]
        pairs: Vec<PairSpec>,
    },
    HeisenbergNorm {
        #[serde(default)]
        operator: Option<OperatorSpec>,
    },
    ExtendedNorm {
        #[serde(default)]
        random_count: Option<usize>,
        #[serde(default)]
        extra: Vec<MatrixSpec>,
    },
    Negativity {
        #[serde(default)]
        state: Option<StateSpec>,
    },
    CumulantLegitimacy,
}
