//! Stable many-to-one matchings that minimize per-institution set
//! objectives.
//!
//! The core types are generic over an exact [`Scalar`]; the aliases below
//! fix it to arbitrary-precision rationals, which is what the command line
//! front end uses.

pub mod bench;
pub mod da;
pub mod dcda;
pub mod fixtures;
pub mod gen;
pub mod io;
pub mod market;
pub mod objectives;
pub mod oracle;
pub mod scalar;
pub mod solver;
pub mod stable_sets;

pub use market::{Instance, Matching, RawInstance};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;
pub type Weights = solver::EdgeWeights<Rational>;
pub type Report = solver::SolveReport<Rational>;
pub type Costs = solver::StudentCosts<Rational>;
