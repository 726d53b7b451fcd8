//! Scalar time signals `t -> f(t)` used to parametrize generators.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::expr::{parse_expression, Expr, ParseError};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real-valued function of time, optionally with an analytic derivative.
#[derive(Clone)]
pub struct ScalarSignal {
    rule: RealFn,
    derivative: Option<RealFn>,
    description: String,
}

impl fmt::Debug for ScalarSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarSignal")
            .field("description", &self.description)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl ScalarSignal {
    pub fn new<F>(description: impl Into<String>, rule: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            rule: Arc::new(rule),
            derivative: None,
            description: description.into(),
        }
    }

    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("{value:?}"), move |_| value).with_derivative(|_| 0.0)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Signal backed by a parsed expression; the derivative is symbolic.
    pub fn from_expr(expr: Expr) -> Self {
        let description = expr.to_string();
        let d = expr.derivative();
        Self::new(description, move |t| expr.eval(t)).with_derivative(move |t| d.eval(t))
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let e = parse_expression(text)?;
        let mut s = Self::from_expr(e);
        s.description = text.to_string();
        Ok(s)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.rule)(t)
    }

    /// Analytic derivative when available, otherwise a central difference
    /// with step `1e-6 * max(1, |t|)`.
    pub fn derivative(&self, t: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(t),
            None => {
                let h = 1e-6 * t.abs().max(1.0);
                (self.eval(t + h) - self.eval(t - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

impl From<f64> for ScalarSignal {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

/// A complex signal as a pair of real signals.
#[derive(Clone, Debug)]
pub struct ComplexSignal {
    pub re: ScalarSignal,
    pub im: ScalarSignal,
}

impl ComplexSignal {
    pub fn new(re: ScalarSignal, im: ScalarSignal) -> Self {
        Self { re, im }
    }

    pub fn real(re: ScalarSignal) -> Self {
        Self {
            re,
            im: ScalarSignal::zero(),
        }
    }

    pub fn zero() -> Self {
        Self::real(ScalarSignal::zero())
    }

    pub fn constant(z: Complex64) -> Self {
        Self::new(ScalarSignal::constant(z.re), ScalarSignal::constant(z.im))
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        Complex64::new(self.re.eval(t), self.im.eval(t))
    }
}

impl From<ScalarSignal> for ComplexSignal {
    fn from(s: ScalarSignal) -> Self {
        Self::real(s)
    }
}
