//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use entangle_census::family::from_config;
use entangle_census::{FamilySpec, Form};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// Valid families with small coefficients: `(C, A0, B0)` with
/// `A = C A0`, `B = C B0`.
pub fn synthetic_families() -> Vec<FamilySpec> {
    let cases: [(&str, &[i64], &[i64], &[i64]); 3] = [
        ("S1", &[1, 0, 1], &[-2, 0, -1], &[3, 0, 0, 0, 1]),
        ("S2", &[1, 1, 1], &[2, -1, 1], &[1, 1, 0, 0, 2]),
        ("S3", &[1, 0, 3, 0, 1], &[1, 0, 1], &[7, 0, 0, 0, 0, 1]),
    ];
    cases
        .iter()
        .map(|(name, c, a0, b0)| {
            let c = Form::from_i64(c);
            from_config(name, c.mul(&Form::from_i64(a0)), c.mul(&Form::from_i64(b0)), None, None)
                .unwrap_or_else(|e| panic!("{name}: {e}"))
        })
        .collect()
}

/// `max(|4A^3|, 27 B^2)` straight from the definition.
pub fn naive_h(a_val: &BigInt, b_val: &BigInt) -> BigInt {
    let four_a3 = BigInt::from(4) * a_val.pow(3);
    four_a3.abs().max(BigInt::from(27) * b_val.pow(2))
}

/// Form value by expanding every monomial.
pub fn eval_monomials(f: &Form, a: i64, b: i64) -> BigInt {
    let n = f.degree();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * BigInt::from(a).pow(i as u32) * BigInt::from(b).pow((n - i) as u32))
        .sum()
}

/// Largest `m` with `m^4 | A` and `m^6 | B`, by trying every candidate.
pub fn md_exhaustive(a_val: &BigInt, b_val: &BigInt) -> u64 {
    let limit = |x: &BigInt, k: f64| x.abs().to_string().parse::<f64>().unwrap().powf(1.0 / k) as u64 + 2;
    let bound = if a_val.is_zero() { limit(b_val, 6.0) } else { limit(a_val, 4.0) };
    (1..=bound)
        .rev()
        .find(|&m| {
            let m = BigInt::from(m);
            (a_val % m.pow(4)).is_zero() && (b_val % m.pow(6)).is_zero()
        })
        .unwrap()
}

pub fn euclid(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(a, b)` with `1 <= b <= b_max`, `|a| <= a_max` and `H <= X`, found by a
/// plain double loop.
pub fn naive_pairs(spec: &FamilySpec, x: &BigInt, a_max: i64, b_max: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for b in 1..=b_max {
        for a in -a_max..=a_max {
            let h = naive_h(&eval_monomials(&spec.a, a, b), &eval_monomials(&spec.b, a, b));
            if &h <= x {
                out.push((a, b));
            }
        }
    }
    out
}
