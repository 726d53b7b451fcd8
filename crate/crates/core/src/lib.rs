//! Time-local quantum dynamical maps and witnesses of non-Markovianity.
//!
//! Operators are `nalgebra` complex matrices. Superoperators act on
//! column-stacked vectorizations, `vec(A)[i + j d] = A[(i, j)]`.

pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod generators;
pub mod operators;
pub mod random;
pub mod signal;
pub mod superop;

pub use criteria::{DivisibilityReport, EntropyKind, Monotonicity, Verdict, WitnessSeries};
pub use dynamics::{MapFamily, MicroscopicModel, Provenance, TimeGrid};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr, ParseError};
pub use generators::{GeneratorClass, GkslData, GkslDecomposition, TimeDependentGenerator};
pub use operators::{ComplexMatrix, DensityMatrix, HermitianMatrix};
pub use signal::{ComplexSignal, ScalarSignal};
pub use superop::{ChoiMatrix, CpVerdict, Superoperator};
