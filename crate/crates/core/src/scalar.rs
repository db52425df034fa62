//! Scalar traits the numeric modules are generic over.
//!
//! Exact code (polynomials, heights, minimality) is written against
//! [`IntScalar`] and works for machine integers as well as `BigInt`.
//! Floating-point code (quadrature, grid counting, fits) is written against
//! [`Real`] and works for `f32` and `f64`.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Float, FloatConst, FromPrimitive, Signed, ToPrimitive};

/// Exact signed integer: `i64`, `i128` or `BigInt`.
pub trait IntScalar:
    Integer + Signed + Clone + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync
{
    fn to_bigint(&self) -> BigInt;
}

impl IntScalar for i64 {
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl IntScalar for i128 {
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl IntScalar for BigInt {
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
}

/// Floating point: f32 or f64.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Lossy conversion of a big integer to a float, saturating to infinity.
pub fn big_to_real<F: Real>(x: &BigInt) -> F {
    match x.to_f64() {
        Some(v) => F::lit(v),
        None if x.is_negative() => F::neg_infinity(),
        None => F::infinity(),
    }
}

/// Natural logarithm of a positive big integer, accurate beyond the f64 range.
pub fn ln_big(x: &BigInt) -> f64 {
    assert!(x.is_positive(), "ln of nonpositive integer");
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}
