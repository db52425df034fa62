//! Row-by-row reproduction of the residue tables mod 2^6 and 3^6 for the
//! (2,3) family, by a direct scan independent of the library's counting.

use entangle_census::family::{builtin, Builtin};
use entangle_census::Form;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

fn reduced(f: &Form, m: i64) -> Vec<i64> {
    f.coeffs().iter().map(|c| c.mod_floor(&BigInt::from(m)).to_i64().unwrap()).collect()
}

fn eval_mod(coeffs: &[i64], a: i64, b: i64, m: i64) -> i64 {
    let n = coeffs.len() - 1;
    let mut b_pows = vec![1i64; n + 1];
    for k in 1..=n {
        b_pows[k] = b_pows[k - 1] * b % m;
    }
    coeffs.iter().enumerate().rev().fold(0i64, |acc, (i, c)| (acc * a + c * b_pows[n - i]) % m)
}

/// Excluded counts for `(a unit, b unit)`, `(a unit, l | b)`, `(l | a, b unit)`, `(l | a, l | b)`.
fn rows(ell: i64) -> [u64; 4] {
    let spec = builtin(Builtin::F1);
    let m4 = ell.pow(4);
    let m6 = ell.pow(6);
    let (ca, cb) = (reduced(&spec.a, m6), reduced(&spec.b, m6));
    let mut out = [0u64; 4];
    for a in 0..m6 {
        for b in 0..m6 {
            if eval_mod(&ca, a, b, m6) % m4 == 0 && eval_mod(&cb, a, b, m6) == 0 {
                let row = 2 * usize::from(a % ell == 0) + usize::from(b % ell == 0);
                out[row] += 1;
            }
        }
    }
    out
}

#[test]
fn table_mod_2_6() {
    assert_eq!(rows(2), [0, 0, 1024, 1024]);
}

#[test]
fn table_mod_3_6() {
    assert_eq!(rows(3), [0, 0, 118_098, 59_049]);
}
