//! Census of elliptic curves `y^2 = x^3 + A(a,b) x + B(a,b)` in one-parameter
//! families with prescribed division-field entanglement.
//!
//! The crate enumerates minimal members of bounded naive height, computes
//! the exact local densities at every prime, the area of the real region of
//! the height form, and assembles the leading constant of the counting
//! function `#C(X) ~ prod_l d_l * Area(R) * X^(2/d)`.

pub mod area;
pub mod cli;
pub mod arith;
pub mod family;
pub mod lattice;
pub mod lmfdb;
pub mod localdensity;
pub mod poly;
pub mod predict;
pub mod scalar;

use num_bigint::BigInt;

/// Arbitrary-precision integer used at every external boundary.
pub type Integer = BigInt;
/// Exact rational.
pub type Rational = num_rational::BigRational;
pub type UniPoly = poly::UniPoly<BigInt>;
/// Binary form with big-integer coefficients (`A`, `B`, `C`, ...).
pub type Form = poly::HomogeneousPoly<BigInt>;
pub type HomogeneousPoly = Form;

pub type AreaEstimate = area::AreaEstimate<f64>;

pub use family::{builtin, Builtin, FamilySpec};
pub use lattice::{CountSummary, CurveRecord};
