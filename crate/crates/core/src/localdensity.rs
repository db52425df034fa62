//! Local densities `d_l` of the pairs `(a, b)` that are minimal at `l`, and
//! their Euler product.
//!
//! A pair is excluded at `l` when `l | gcd(a, b)` or when `l^4 | A(a,b)` and
//! `l^6 | B(a,b)`. Both conditions only see `(a, b) mod l^6`, so
//! `d_l = 1 - #excluded / l^12`.
//!
//! The structured count splits the excluded pairs by which coordinate is a
//! unit. Pairs with both coordinates divisible by `l` contribute `l^10`.
//! When `b` is a unit, `(a, b) = b (t, 1)` and the condition depends on
//! `t mod l^6` alone; when `l | b` and `a` is a unit, `(a, b) = a (1, s)`
//! with `l | s`. Hence
//!
//! ```text
//! #excluded = l^10 + phi(l^6) * (N_t + N_s)
//! ```
//!
//! where `N_t` counts `t mod l^6` with `l^4 | A(t,1)`, `l^6 | B(t,1)` and
//! `N_s` counts `s mod l^6`, `l | s`, with the same conditions on `(1, s)`.
//! These are counted by lifting residues one digit at a time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime_u64, mul_mod, pow_mod, primes_up_to};
use crate::family::{builtin, Builtin, FamilySpec};
use crate::poly::{Side, UniPoly};
use crate::scalar::IntScalar;
use crate::Form;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("polynomial vanishes identically mod {0}")]
    ZeroModL(u64),
    #[error("root {root} mod {ell} is not simple")]
    DoubleRoot { ell: u64, root: u64 },
    #[error("l = {ell} is too large for the {method} method")]
    TooLarge { ell: u64, method: &'static str },
    #[error("l = {0} is an exceptional prime of the family")]
    InSigma(u64),
    #[error("l must be 5 or larger, got {0}")]
    SmallPrime(u64),
    #[error("cutoff z = {z} is below the largest exceptional prime {max_sigma}")]
    BelowSigma { z: u64, max_sigma: u64 },
    #[error("tail bound at z = {0} is not below 1")]
    TailTooLarge(u64),
    #[error("density cache: {0}")]
    Cache(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DensityMethod {
    #[serde(rename = "def-mod-l6")]
    DefModL6,
    #[serde(rename = "via-C-mod-l4")]
    ViaCModL4,
    #[serde(rename = "closed-form")]
    ClosedForm,
    #[serde(rename = "structured")]
    Structured,
    #[serde(rename = "paper-table")]
    PaperTable,
}

impl DensityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DensityMethod::DefModL6 => "def-mod-l6",
            DensityMethod::ViaCModL4 => "via-C-mod-l4",
            DensityMethod::ClosedForm => "closed-form",
            DensityMethod::Structured => "structured",
            DensityMethod::PaperTable => "paper-table",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::DefModL6, Self::ViaCModL4, Self::ClosedForm, Self::Structured, Self::PaperTable]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityValue {
    pub prime: u64,
    pub value: BigRational,
    pub method: DensityMethod,
    pub modulus_exponent: u32,
}

impl DensityValue {
    fn new(prime: u64, value: BigRational, method: DensityMethod, modulus_exponent: u32) -> Self {
        DensityValue { prime, value, method, modulus_exponent }
    }
}

fn require_prime(ell: u64) -> Result<(), DensityError> {
    if is_prime_u64(ell) {
        Ok(())
    } else {
        Err(DensityError::NotPrime(ell))
    }
}

fn require_odd_prime(ell: u64) -> Result<(), DensityError> {
    if ell != 2 && is_prime_u64(ell) {
        Ok(())
    } else {
        Err(DensityError::NotOddPrime(ell))
    }
}

fn residue(a: i64, ell: u64) -> u64 {
    a.rem_euclid(ell as i64) as u64
}

/// Legendre symbol by Euler's criterion.
pub fn legendre(a: i64, ell: u64) -> Result<i8, DensityError> {
    require_odd_prime(ell)?;
    Ok(legendre_unchecked(residue(a, ell), ell))
}

fn legendre_unchecked(a: u64, ell: u64) -> i8 {
    match pow_mod(a, (ell - 1) / 2, ell) {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

/// Square root mod an odd prime (Tonelli-Shanks), normalised into `[0, l/2]`.
pub fn sqrt_mod(a: i64, ell: u64) -> Result<Option<u64>, DensityError> {
    require_odd_prime(ell)?;
    let a = residue(a, ell);
    Ok(sqrt_mod_unchecked(a, ell).map(|r| r.min(ell - r)))
}

fn sqrt_mod_unchecked(a: u64, p: u64) -> Option<u64> {
    if a == 0 {
        return Some(0);
    }
    if legendre_unchecked(a, p) != 1 {
        return None;
    }
    let (mut q, mut s) = (p - 1, 0u32);
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let z = (2..p).find(|&z| legendre_unchecked(z, p) == -1).expect("non-residue exists");
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

fn reduce_coeffs(p: &UniPoly<BigInt>, m: u64) -> Vec<u64> {
    let mb = BigInt::from(m);
    p.coeffs().iter().map(|c| c.mod_floor(&mb).to_u64().unwrap()).collect()
}

fn horner_mod(coeffs: &[u64], t: u64, m: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| (mul_mod(acc, t, m) + c) % m)
}

const SCAN_LIMIT: u64 = 1 << 20;

/// Number of distinct roots of `p` in `Z/lZ`.
pub fn count_roots_modp(p: &UniPoly<BigInt>, ell: u64) -> Result<usize, DensityError> {
    require_prime(ell)?;
    let c = reduce_coeffs(p, ell);
    if c.iter().all(|&x| x == 0) {
        return Err(DensityError::ZeroModL(ell));
    }
    if ell < SCAN_LIMIT {
        Ok((0..ell).filter(|&t| horner_mod(&c, t, ell) == 0).count())
    } else {
        Ok(fp::count_roots(&c, ell))
    }
}

/// Root count by `deg gcd(p, t^l - t)`; used for long prime ranges.
fn count_roots_fast(p: &UniPoly<BigInt>, ell: u64) -> Result<usize, DensityError> {
    let c = reduce_coeffs(p, ell);
    if c.iter().all(|&x| x == 0) {
        return Err(DensityError::ZeroModL(ell));
    }
    if ell < 64 {
        return Ok((0..ell).filter(|&t| horner_mod(&c, t, ell) == 0).count());
    }
    Ok(fp::count_roots(&c, ell))
}

/// Polynomials over `F_p` as coefficient vectors, lowest degree first.
mod fp {
    use crate::arith::{mul_mod, pow_mod};

    fn trim(v: &mut Vec<u64>) {
        while v.last() == Some(&0) {
            v.pop();
        }
    }

    fn inv(a: u64, p: u64) -> u64 {
        pow_mod(a, p - 2, p)
    }

    pub fn rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut r = a.to_vec();
        trim(&mut r);
        let db = b.len() - 1;
        let lead_inv = inv(b[db], p);
        while r.len() > db {
            let top = r.len() - 1;
            let q = mul_mod(r[top], lead_inv, p);
            let shift = top - db;
            for (i, &bc) in b.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p - mul_mod(q, bc, p)) % p;
            }
            trim(&mut r);
        }
        r
    }

    fn mul_rem(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + mul_mod(x, y, p)) % p;
            }
        }
        rem(&out, m, p)
    }

    fn gcd(mut a: Vec<u64>, mut b: Vec<u64>, p: u64) -> Vec<u64> {
        trim(&mut a);
        trim(&mut b);
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    /// Distinct roots of a nonzero polynomial in `F_p`.
    pub fn count_roots(c: &[u64], p: u64) -> usize {
        let mut f = c.to_vec();
        trim(&mut f);
        if f.len() <= 1 {
            return 0;
        }
        // t^p mod f by repeated squaring
        let mut acc = rem(&[1], &f, p);
        let mut base = rem(&[0, 1], &f, p);
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul_rem(&acc, &base, &f, p);
            }
            base = mul_rem(&base, &base, &f, p);
            e >>= 1;
        }
        acc.resize(acc.len().max(2), 0);
        acc[1] = (acc[1] + p - 1) % p;
        let g = gcd(f, acc, p);
        g.len() - 1
    }
}

/// `r_l` for `t^4 + 36 t^2 + 432`, through the roots of `u^2 + 36u + 432`.
pub fn r_formula_f1(ell: u64) -> Result<usize, DensityError> {
    require_prime(ell)?;
    if ell == 2 || ell == 3 {
        return Err(DensityError::SmallPrime(ell));
    }
    let delta = -432;
    let Some(root) = sqrt_mod(delta, ell)? else {
        return Ok(0);
    };
    let half = pow_mod(2, ell - 2, ell);
    let minus_b = residue(-36, ell);
    let roots = [(minus_b + root) % ell, (minus_b + ell - root) % ell].map(|x| mul_mod(x, half, ell));
    if roots[0] == roots[1] {
        return Ok((1 + legendre_unchecked(roots[0], ell) as i64) as usize);
    }
    Ok(roots.iter().map(|&u| (1 + legendre_unchecked(u, ell) as i64) as usize).sum())
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    e.gcd.is_one().then(|| e.x.mod_floor(m))
}

/// Roots of `p` mod `l^k`, each obtained by Newton lifting a simple root
/// mod `l`.
pub fn hensel_lift_roots(p: &UniPoly<BigInt>, ell: u64, k: u32) -> Result<Vec<BigInt>, DensityError> {
    require_prime(ell)?;
    if ell >= SCAN_LIMIT {
        return Err(DensityError::TooLarge { ell, method: "hensel" });
    }
    let c = reduce_coeffs(p, ell);
    if c.iter().all(|&x| x == 0) {
        return Err(DensityError::ZeroModL(ell));
    }
    let dp = p.derivative();
    let dc = reduce_coeffs(&dp, ell);
    let modulus = BigInt::from(ell).pow(k);
    let mut out = Vec::new();
    for r in (0..ell).filter(|&t| horner_mod(&c, t, ell) == 0) {
        if horner_mod(&dc, r, ell) == 0 {
            return Err(DensityError::DoubleRoot { ell, root: r });
        }
        let mut x = BigInt::from(r);
        let mut prec = BigInt::from(ell);
        while prec < modulus {
            prec = (&prec * &prec).min(modulus.clone());
            let fx = p.eval(&x);
            let inv = mod_inverse(&dp.eval(&x), &prec).expect("derivative is a unit");
            x = (x - fx * inv).mod_floor(&prec);
        }
        debug_assert!(p.eval(&x).mod_floor(&modulus).is_zero());
        out.push(x);
    }
    Ok(out)
}

pub fn hensel_lift_count(p: &UniPoly<BigInt>, ell: u64, k: u32) -> Result<usize, DensityError> {
    Ok(hensel_lift_roots(p, ell, k)?.len())
}

/// Largest prime for which the literal `l^12` scan is offered.
pub const FULL_SCAN_MAX: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefMethod {
    /// Every pair of `(Z/l^6)^2`.
    Full,
    /// Digit-by-digit lifting of the excluded residues.
    Structured,
    /// Full scan for `l <= 3`, structured otherwise.
    Auto,
}

/// `d_l` from the definition, computed mod `l^6`.
pub fn density_def(spec: &FamilySpec, ell: u64, method: DefMethod) -> Result<DensityValue, DensityError> {
    require_prime(ell)?;
    let full = match method {
        DefMethod::Full => true,
        DefMethod::Structured => false,
        DefMethod::Auto => ell <= 3,
    };
    if full {
        if ell > FULL_SCAN_MAX {
            return Err(DensityError::TooLarge { ell, method: "def-mod-l6" });
        }
        let excluded = excluded_full_scan(&spec.a, &spec.b, ell);
        let total = BigInt::from(ell).pow(12);
        let value = BigRational::new(&total - BigInt::from(excluded), total);
        return Ok(DensityValue::new(ell, value, DensityMethod::DefModL6, 6));
    }
    let excluded = excluded_structured(&spec.a, &spec.b, ell)?;
    let total = BigInt::from(ell).pow(12);
    Ok(DensityValue::new(ell, BigRational::new(&total - excluded, total), DensityMethod::Structured, 6))
}

/// Literal count of excluded pairs in `(Z/l^6)^2`.
pub fn excluded_full_scan(a: &Form, b: &Form, ell: u64) -> u64 {
    let m = ell.pow(6);
    let m4 = ell.pow(4);
    let row_coeffs = |form: &Form, bv: u64, modulus: u64| -> Vec<u64> {
        let n = form.degree();
        let mb = BigInt::from(modulus);
        form.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let c = c.mod_floor(&mb).to_u64().unwrap();
                mul_mod(c, pow_mod(bv, (n - i) as u64, modulus), modulus)
            })
            .collect()
    };
    (0..m)
        .into_par_iter()
        .map(|bv| {
            let ra = row_coeffs(a, bv, m4);
            let rb = row_coeffs(b, bv, m);
            let a_zero: Vec<bool> = (0..m4).map(|av| horner_mod(&ra, av, m4) == 0).collect();
            let b_div = bv % ell == 0;
            (0..m)
                .filter(|&av| (b_div && av % ell == 0) || (a_zero[(av % m4) as usize] && horner_mod(&rb, av, m) == 0))
                .count() as u64
        })
        .sum()
}

/// Count via the unit decomposition: `l^10 + phi(l^6) (N_t + N_s)`.
pub fn excluded_structured(a: &Form, b: &Form, ell: u64) -> Result<BigInt, DensityError> {
    let (nt, ns) = if ell < 1400 {
        lifted_counts::<i128>(a, b, ell)?
    } else {
        lifted_counts::<BigInt>(a, b, ell)?
    };
    let l = BigInt::from(ell);
    let phi = l.pow(6) - l.pow(5);
    Ok(l.pow(10) + phi * (nt + ns))
}

fn lifted_counts<T: IntScalar>(a: &Form, b: &Form, ell: u64) -> Result<(BigInt, BigInt), DensityError> {
    if ell >= 1 << 26 {
        return Err(DensityError::TooLarge { ell, method: "structured" });
    }
    let t_side = Lifter::<T>::new(&a.dehomogenize(Side::VOne), &b.dehomogenize(Side::VOne), ell);
    let s_side = Lifter::<T>::new(&a.dehomogenize(Side::UOne), &b.dehomogenize(Side::UOne), ell);
    let nt = t_side.count_all();
    let ns = if s_side.node_ok(&T::zero(), 1) { s_side.count_from(&T::zero(), 1) } else { T::zero() };
    Ok((nt.to_bigint(), ns.to_bigint()))
}

/// Residues `t mod l^6` with `l^4 | A(t)` and `l^6 | B(t)`, grown digit by
/// digit. A node at level `k` is `t mod l^k` with `A(t) = 0 mod l^min(k,4)`
/// and `B(t) = 0 mod l^min(k,6)`.
struct Lifter<T> {
    ell: u64,
    /// `l^0 ..= l^6`
    pows: Vec<T>,
    /// Hasse derivatives of `A` and `B`, reduced mod `l^6`.
    hasse_a: Vec<Vec<T>>,
    hasse_b: Vec<Vec<T>>,
    seed_a: Vec<u64>,
    seed_b: Vec<u64>,
}

fn hasse_derivatives<T: IntScalar>(p: &UniPoly<BigInt>, m: &BigInt) -> Vec<Vec<T>> {
    let c = p.coeffs();
    if c.is_empty() {
        return vec![vec![T::zero()]];
    }
    (0..c.len())
        .map(|i| {
            let mut binom = BigInt::one();
            (i..c.len())
                .map(|j| {
                    if j > i {
                        binom = binom.clone() * BigInt::from(j) / BigInt::from(j - i);
                    }
                    let v = (&c[j] * &binom).mod_floor(m);
                    T::from_u64(v.to_u64().unwrap()).unwrap_or_else(|| from_big(&v))
                })
                .collect()
        })
        .collect()
}

fn from_big<T: IntScalar>(v: &BigInt) -> T {
    // only reached for the BigInt instantiation
    let s = v.to_string();
    let ten = T::from_u64(10).unwrap();
    s.bytes().fold(T::zero(), |acc, d| acc * ten.clone() + T::from_u64((d - b'0') as u64).unwrap())
}

impl<T: IntScalar> Lifter<T> {
    fn new(a: &UniPoly<BigInt>, b: &UniPoly<BigInt>, ell: u64) -> Self {
        let l = BigInt::from(ell);
        let m = l.pow(6);
        let tl = T::from_u64(ell).unwrap();
        let pows = (0..=6).map(|k| (0..k).fold(T::one(), |acc, _| acc * tl.clone())).collect();
        Lifter {
            ell,
            pows,
            hasse_a: hasse_derivatives(a, &m),
            hasse_b: hasse_derivatives(b, &m),
            seed_a: reduce_coeffs(a, ell),
            seed_b: reduce_coeffs(b, ell),
        }
    }

    fn eval(coeffs: &[T], t: &T, m: &T) -> T {
        coeffs.iter().rev().fold(T::zero(), |acc, c| (acc * t.clone() + c.clone()).mod_floor(m))
    }

    fn divisible(&self, x: &T, e: usize) -> bool {
        x.mod_floor(&self.pows[e]).is_zero()
    }

    fn node_ok(&self, t: &T, k: usize) -> bool {
        let m = &self.pows[6];
        self.divisible(&Self::eval(&self.hasse_a[0], t, m), k.min(4))
            && self.divisible(&Self::eval(&self.hasse_b[0], t, m), k.min(6))
    }

    /// Whether every lift of `t mod l^k` to `l^6` satisfies both conditions,
    /// read off the Taylor expansion `f(t + l^k x) = sum H_i f(t) l^(ki) x^i`.
    fn saturated(&self, t: &T, k: usize) -> bool {
        let m = &self.pows[6];
        [(&self.hasse_a, 4usize), (&self.hasse_b, 6usize)].into_iter().all(|(hasse, e)| {
            hasse.iter().enumerate().take_while(|(i, _)| k * i < e).all(|(i, h)| {
                let v = Self::eval(h, t, m) * self.pows[k * i].clone();
                self.divisible(&v, e)
            })
        })
    }

    fn count_from(&self, t: &T, k: usize) -> T {
        if k == 6 {
            return T::one();
        }
        if self.saturated(t, k) {
            return self.pows[6 - k].clone();
        }
        let step = self.pows[k].clone();
        let mut total = T::zero();
        let mut child = t.clone();
        for _ in 0..self.ell {
            if self.node_ok(&child, k + 1) {
                total = total + self.count_from(&child, k + 1);
            }
            child = child + step.clone();
        }
        total
    }

    fn count_all(&self) -> T {
        let ell = self.ell;
        (0..ell)
            .filter(|&t| horner_mod(&self.seed_a, t, ell) == 0 && horner_mod(&self.seed_b, t, ell) == 0)
            .map(|t| self.count_from(&T::from_u64(t).unwrap(), 1))
            .fold(T::zero(), |acc, x| acc + x)
    }
}

/// Largest prime accepted by [`density_via_c`] (the scan has `l^8` cells).
pub const VIA_C_MAX: u64 = 17;

/// `d_l` for `l` outside the exceptional set, from the criterion
/// `l^4 | C(a,b)` on pairs with `l` not dividing both coordinates.
///
/// The criterion holds for families whose `B` is divisible by `C^2`, which
/// covers both built-in families.
pub fn density_via_c(spec: &FamilySpec, ell: u64) -> Result<DensityValue, DensityError> {
    require_prime(ell)?;
    if spec.in_sigma(ell) {
        return Err(DensityError::InSigma(ell));
    }
    if ell > VIA_C_MAX {
        return Err(DensityError::TooLarge { ell, method: "via-C-mod-l4" });
    }
    let m = ell.pow(4);
    let mb = BigInt::from(m);
    let n = spec.c.degree();
    let c: Vec<u64> = spec.c.coeffs().iter().map(|x| x.mod_floor(&mb).to_u64().unwrap()).collect();
    let excluded: u64 = (0..m)
        .into_par_iter()
        .map(|bv| {
            let row: Vec<u64> =
                c.iter().enumerate().map(|(i, &ci)| mul_mod(ci, pow_mod(bv, (n - i) as u64, m), m)).collect();
            let b_div = bv % ell == 0;
            (0..m).filter(|&av| (b_div && av % ell == 0) || horner_mod(&row, av, m) == 0).count() as u64
        })
        .sum();
    let total = BigInt::from(ell).pow(8);
    Ok(DensityValue::new(ell, BigRational::new(&total - BigInt::from(excluded), total), DensityMethod::ViaCModL4, 4))
}

/// `1 - 1/l^2 - r (l - 1)/l^5`.
pub fn closed_form(ell: u64, r: usize) -> BigRational {
    let l = BigInt::from(ell);
    let l5 = l.pow(5);
    let num = &l5 - l.pow(3) - BigInt::from(r) * (&l - 1);
    BigRational::new(num, l5)
}

fn closed_form_parts(ell: u64, r: usize) -> (BigInt, BigInt) {
    let l = BigInt::from(ell);
    let l5 = l.pow(5);
    (&l5 - l.pow(3) - BigInt::from(r) * (&l - 1), l5)
}

/// Whether `C^2 | B`, the shape under which the closed form applies off the
/// exceptional set.
pub fn closed_form_applies(spec: &FamilySpec) -> bool {
    spec.b.exact_div(&spec.c.pow(2)).is_some()
}

fn is_builtin(spec: &FamilySpec, which: Builtin) -> bool {
    let reference = builtin(which);
    spec.a == reference.a && spec.b == reference.b
}

/// `d_2 = 1/2` and `d_3 = 2/3` for the (2,3) family.
fn tabulated_value(spec: &FamilySpec, ell: u64) -> Option<BigRational> {
    if !is_builtin(spec, Builtin::F1) {
        return None;
    }
    match ell {
        2 => Some(BigRational::new(1.into(), 2.into())),
        3 => Some(BigRational::new(2.into(), 3.into())),
        _ => None,
    }
}

/// `d_l` by the cheapest exact route: the closed form off the exceptional
/// set, stored values on it.
pub fn density_closed(spec: &FamilySpec, ell: u64, cache: Option<&GoldenCache>) -> Result<DensityValue, DensityError> {
    require_prime(ell)?;
    if spec.in_sigma(ell) {
        if let Some(v) = tabulated_value(spec, ell) {
            return Ok(DensityValue::new(ell, v, DensityMethod::PaperTable, 6));
        }
        if let Some(hit) = cache.and_then(|c| c.get(spec, ell)) {
            return Ok(hit);
        }
        let v = density_def(spec, ell, DefMethod::Auto)?;
        if let Some(c) = cache {
            c.put(spec, &v)?;
        }
        return Ok(v);
    }
    if closed_form_applies(spec) {
        let r = count_roots_modp(&spec.c.dehomogenize(Side::VOne), ell)?;
        return Ok(DensityValue::new(ell, closed_form(ell, r), DensityMethod::ClosedForm, 6));
    }
    density_def(spec, ell, DefMethod::Structured)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
struct CacheEntry {
    num: String,
    den: String,
    method: String,
    provenance: String,
    /// `A` and `B` coefficients, to tell apart families sharing a name.
    forms: String,
}

/// Write-once store of exceptional-prime densities, one JSON map per
/// directory keyed by `family:l`.
#[derive(Debug)]
pub struct GoldenCache {
    path: PathBuf,
    entries: Mutex<BTreeMap<String, CacheEntry>>,
}

pub const CACHE_ENV: &str = "ENTANGLE_CACHE_DIR";

/// `$ENTANGLE_CACHE_DIR`, else `$HOME/.cache/entangle-census`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(dir);
    }
    match std::env::var_os("HOME") {
        Some(home) => Path::new(&home).join(".cache").join("entangle-census"),
        None => std::env::temp_dir().join("entangle-census"),
    }
}

fn forms_key(spec: &FamilySpec) -> String {
    let join = |f: &Form| f.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
    format!("A=[{}];B=[{}]", join(&spec.a), join(&spec.b))
}

impl GoldenCache {
    pub fn open(dir: &Path) -> Result<Self, DensityError> {
        let path = dir.join("densities.json");
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| DensityError::Cache(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(DensityError::Cache(e.to_string())),
        };
        Ok(GoldenCache { path, entries: Mutex::new(entries) })
    }

    pub fn from_env() -> Result<Self, DensityError> {
        Self::open(&default_cache_dir())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn key(spec: &FamilySpec, ell: u64) -> String {
        format!("{}:{}", spec.name, ell)
    }

    pub fn get(&self, spec: &FamilySpec, ell: u64) -> Option<DensityValue> {
        let entries = self.entries.lock().unwrap();
        let e = entries.get(&Self::key(spec, ell))?;
        if e.forms != forms_key(spec) {
            return None;
        }
        let num = e.num.parse().ok()?;
        let den = e.den.parse().ok()?;
        Some(DensityValue::new(ell, BigRational::new(num, den), DensityMethod::parse(&e.method)?, 6))
    }

    /// Records a value unless one is already present; a conflicting value
    /// for the same family is an error.
    pub fn put(&self, spec: &FamilySpec, v: &DensityValue) -> Result<(), DensityError> {
        let key = Self::key(spec, v.prime);
        let entry = CacheEntry {
            num: v.value.numer().to_string(),
            den: v.value.denom().to_string(),
            method: v.method.as_str().to_string(),
            provenance: match v.method {
                DensityMethod::DefModL6 => "derived-by-scan",
                _ => "derived-by-lifting",
            }
            .to_string(),
            forms: forms_key(spec),
        };
        let mut entries = self.entries.lock().unwrap();
        match entries.get(&key) {
            Some(old) if old.forms != entry.forms => return Ok(()),
            Some(old) if (&old.num, &old.den) != (&entry.num, &entry.den) => {
                return Err(DensityError::Cache(format!("stored value for {key} differs from {}", v.value)))
            }
            Some(_) => return Ok(()),
            None => {}
        }
        entries.insert(key, entry);
        let text = serde_json::to_string_pretty(&*entries).map_err(|e| DensityError::Cache(e.to_string()))?;
        write_atomic(&self.path, text.as_bytes()).map_err(|e| DensityError::Cache(e.to_string()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensitySource {
    /// [`density_closed`] at every prime.
    Closed,
    /// The lifting count at every prime.
    Structured,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerBracket {
    pub z: u64,
    pub lower: BigRational,
    pub upper: BigRational,
    pub partial: BigRational,
    /// Upper bound for the sum of the deficits `1 - d_l` over `l > z`.
    pub tail: BigRational,
}

/// Bound on `sum_{l > z} (1 - d_l)`.
///
/// Off the exceptional set at most `r` residues `t mod l` are roots of `C`,
/// each lifting to one root mod `l^4` and so to `l^2` residues mod `l^6`,
/// which gives `1 - d_l <= 1/l^2 + r (l-1)/l^5 <= 1/l^2 + r/l^4`. Comparing
/// sums with integrals of decreasing functions,
/// `sum_{n > z} 1/n^2 <= 1/z` and `sum_{n > z} 1/n^4 <= 1/(3 z^3)`.
pub fn tail_bound(z: u64, r: usize) -> BigRational {
    let z = BigInt::from(z);
    BigRational::new(BigInt::one(), z.clone()) + BigRational::new(BigInt::from(r), BigInt::from(3) * z.pow(3))
}

fn product_tree(v: &[BigInt]) -> BigInt {
    match v.len() {
        0 => BigInt::one(),
        1 => v[0].clone(),
        n => product_tree(&v[..n / 2]) * product_tree(&v[n / 2..]),
    }
}

/// `prod_{l <= z} d_l` exactly, bracketed against the full product by
/// `partial * (1 - T(z)) <= prod_l d_l <= partial`.
pub fn euler_product(
    spec: &FamilySpec,
    z: u64,
    source: DensitySource,
    cache: Option<&GoldenCache>,
) -> Result<EulerBracket, DensityError> {
    let max_sigma = spec.max_sigma();
    if z < max_sigma {
        return Err(DensityError::BelowSigma { z, max_sigma });
    }
    let tail = tail_bound(z.max(1), spec.r);
    if tail >= BigRational::one() {
        return Err(DensityError::TailTooLarge(z));
    }
    let primes = primes_up_to(z);
    let c_t = spec.c.dehomogenize(Side::VOne);
    let fast_closed = source == DensitySource::Closed && closed_form_applies(spec);
    let factors: Vec<(BigInt, BigInt)> = primes
        .par_iter()
        .map(|&ell| -> Result<(BigInt, BigInt), DensityError> {
            if fast_closed && !spec.in_sigma(ell) {
                return Ok(closed_form_parts(ell, count_roots_fast(&c_t, ell)?));
            }
            let v = match source {
                DensitySource::Closed => density_closed(spec, ell, cache)?,
                DensitySource::Structured => density_def(spec, ell, DefMethod::Structured)?,
            };
            Ok((v.value.numer().clone(), v.value.denom().clone()))
        })
        .collect::<Result<_, _>>()?;
    let nums: Vec<BigInt> = factors.iter().map(|f| f.0.clone()).collect();
    let dens: Vec<BigInt> = factors.iter().map(|f| f.1.clone()).collect();
    let partial = BigRational::new(product_tree(&nums), product_tree(&dens));
    let lower = &partial * (BigRational::one() - &tail);
    Ok(EulerBracket { z, lower, upper: partial.clone(), partial, tail })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for RationalJson {
    fn from(q: &BigRational) -> Self {
        RationalJson { num: q.numer().to_string(), den: q.denom().to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityReport {
    pub family: String,
    pub ell: u64,
    pub method: String,
    pub value: RationalJson,
}

impl DensityReport {
    pub fn new(family: &str, v: &DensityValue) -> Self {
        DensityReport {
            family: family.to_string(),
            ell: v.prime,
            method: v.method.as_str().to_string(),
            value: (&v.value).into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EulerReport {
    pub family: String,
    pub z: u64,
    pub partial: RationalJson,
    pub lower: RationalJson,
    pub upper: RationalJson,
    pub lower_f64: f64,
    pub upper_f64: f64,
}

impl EulerReport {
    pub fn new(family: &str, b: &EulerBracket) -> Self {
        EulerReport {
            family: family.to_string(),
            z: b.z,
            partial: (&b.partial).into(),
            lower: (&b.lower).into(),
            upper: (&b.upper).into(),
            lower_f64: rational_to_f64(&b.lower),
            upper_f64: rational_to_f64(&b.upper),
        }
    }
}

/// Nearest float of a positive rational, for display and numeric checks.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    let (n, d) = (q.numer(), q.denom());
    if n.is_zero() {
        return 0.0;
    }
    let k = 60 - (n.bits() as i64 - d.bits() as i64);
    let scaled = if k >= 0 { (n << k as u32) / d } else { n / (d << (-k) as u32) };
    scaled.to_f64().unwrap() * 2f64.powi(-k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn c_f1() -> UniPoly<BigInt> {
        UniPoly::from_i64(&[432, 0, 36, 0, 1])
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(1, 7).unwrap(), 1);
        assert_eq!(legendre(2, 7).unwrap(), 1);
        assert_eq!(legendre(5, 7).unwrap(), -1);
        assert_eq!(legendre(14, 7).unwrap(), 0);
        assert!(legendre(1, 2).is_err());
        assert!(legendre(1, 9).is_err());
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(sqrt_mod(0, 7).unwrap(), Some(0));
        assert_eq!(sqrt_mod(2, 7).unwrap(), Some(3));
        assert_eq!(sqrt_mod(5, 7).unwrap(), None);
        assert!(sqrt_mod(2, 15).is_err());
        for p in [13u64, 17, 97, 257, 65537, 1_000_003] {
            for a in 1..40u64 {
                if let Some(r) = sqrt_mod(a as i64, p).unwrap() {
                    assert_eq!(mul_mod(r, r, p), a % p);
                    assert!(2 * r <= p);
                }
            }
        }
    }

    #[test]
    fn root_count_examples() {
        assert_eq!(count_roots_modp(&c_f1(), 7).unwrap(), 2);
        assert_eq!(count_roots_modp(&c_f1(), 5).unwrap(), 0);
        assert_eq!(count_roots_modp(&UniPoly::from_i64(&[-1, 1]), 101).unwrap(), 1);
        assert!(matches!(count_roots_modp(&UniPoly::from_i64(&[7, 14]), 7), Err(DensityError::ZeroModL(7))));
    }

    #[test]
    fn gcd_root_count_matches_scan() {
        let polys = [c_f1(), UniPoly::from_i64(&[125, 0, 22, 0, 1]), UniPoly::from_i64(&[-2, 0, 0, 1])];
        for p in &polys {
            for ell in primes_up_to(3000).into_iter().filter(|&l| l > 5) {
                let c = reduce_coeffs(p, ell);
                let scan = (0..ell).filter(|&t| horner_mod(&c, t, ell) == 0).count();
                assert_eq!(fp::count_roots(&c, ell), scan, "l = {ell}");
            }
        }
    }

    #[test]
    fn r_formula_agrees_with_scan() {
        assert_eq!(r_formula_f1(7).unwrap(), 2);
        assert_eq!(r_formula_f1(5).unwrap(), 0);
        assert!(r_formula_f1(3).is_err());
        for ell in primes_up_to(1000).into_iter().filter(|&l| l >= 5) {
            assert_eq!(r_formula_f1(ell).unwrap(), count_roots_modp(&c_f1(), ell).unwrap(), "l = {ell}");
        }
    }

    #[test]
    fn hensel_examples() {
        assert_eq!(hensel_lift_count(&c_f1(), 7, 4).unwrap(), 2);
        assert_eq!(hensel_lift_count(&UniPoly::from_i64(&[-1, 0, 1]), 5, 3).unwrap(), 2);
        assert!(matches!(
            hensel_lift_count(&UniPoly::from_i64(&[0, 0, 1]), 5, 2),
            Err(DensityError::DoubleRoot { .. })
        ));
        for k in 1..=6 {
            let roots = hensel_lift_roots(&c_f1(), 11, k).unwrap();
            let m = BigInt::from(11).pow(k);
            assert!(roots.iter().all(|x| c_f1().eval(x).mod_floor(&m).is_zero()));
            assert_eq!(roots.len(), count_roots_modp(&c_f1(), 11).unwrap());
        }
    }

    #[test]
    fn f1_exceptional_by_scan() {
        let f1 = builtin(Builtin::F1);
        assert_eq!(excluded_full_scan(&f1.a, &f1.b, 2), 2048);
        assert_eq!(excluded_full_scan(&f1.a, &f1.b, 3), 177147);
        assert_eq!(density_def(&f1, 2, DefMethod::Full).unwrap().value, q(1, 2));
        assert_eq!(density_def(&f1, 3, DefMethod::Full).unwrap().value, q(2, 3));
    }

    #[test]
    fn structured_matches_scan_small_primes() {
        for fam in [Builtin::F1, Builtin::F2] {
            let spec = builtin(fam);
            for ell in [2u64, 3] {
                let s = excluded_structured(&spec.a, &spec.b, ell).unwrap();
                assert_eq!(s, BigInt::from(excluded_full_scan(&spec.a, &spec.b, ell)), "{fam:?} l = {ell}");
            }
        }
    }

    #[test]
    fn f2_exceptional_goldens() {
        let f2 = builtin(Builtin::F2);
        let expect = [(2, q(1, 2)), (3, q(8, 9)), (5, q(116, 125))];
        for (ell, v) in expect {
            assert_eq!(density_def(&f2, ell, DefMethod::Structured).unwrap().value, v, "l = {ell}");
        }
    }

    #[test]
    fn closed_values() {
        let f1 = builtin(Builtin::F1);
        let d2 = density_closed(&f1, 2, None).unwrap();
        assert_eq!((d2.value, d2.method), (q(1, 2), DensityMethod::PaperTable));
        assert_eq!(density_closed(&f1, 3, None).unwrap().value, q(2, 3));
        let d7 = density_closed(&f1, 7, None).unwrap();
        assert_eq!(d7.value, q(1, 1) - q(1, 49) - q(12, 16807));
        assert_eq!(d7.value, q(16452, 16807));
        assert_eq!(density_closed(&f1, 5, None).unwrap().value, q(24, 25));
    }

    #[test]
    fn triple_agreement_seven() {
        for fam in [Builtin::F1, Builtin::F2] {
            let spec = builtin(fam);
            let s = density_def(&spec, 7, DefMethod::Structured).unwrap().value;
            let c = density_via_c(&spec, 7).unwrap().value;
            let k = density_closed(&spec, 7, None).unwrap().value;
            assert_eq!(s, c);
            assert_eq!(s, k);
        }
        let f2 = builtin(Builtin::F2);
        assert_eq!(density_closed(&f2, 7, None).unwrap().value, q(48, 49));
    }

    #[test]
    fn via_c_rejects_sigma() {
        let f1 = builtin(Builtin::F1);
        assert!(matches!(density_via_c(&f1, 3), Err(DensityError::InSigma(3))));
    }

    #[test]
    fn euler_at_sigma_bound() {
        let f1 = builtin(Builtin::F1);
        let b = euler_product(&f1, 3, DensitySource::Closed, None).unwrap();
        assert_eq!(b.partial, q(1, 3));
        assert_eq!(b.upper, q(1, 3));
        assert!(b.lower < b.upper);
        assert!(matches!(euler_product(&f1, 2, DensitySource::Closed, None), Err(DensityError::BelowSigma { .. })));
    }

    #[test]
    fn euler_bracket_narrows() {
        let f1 = builtin(Builtin::F1);
        let small = euler_product(&f1, 100, DensitySource::Closed, None).unwrap();
        let large = euler_product(&f1, 10_000, DensitySource::Closed, None).unwrap();
        assert!(large.partial <= small.partial);
        assert!(&large.upper - &large.lower < &small.upper - &small.lower);
        assert!(large.lower > BigRational::zero());
        assert!(small.lower <= large.lower);
    }

    #[test]
    fn euler_sources_agree() {
        let f2 = builtin(Builtin::F2);
        let a = euler_product(&f2, 60, DensitySource::Closed, None).unwrap();
        let b = euler_product(&f2, 60, DensitySource::Structured, None).unwrap();
        assert_eq!(a.partial, b.partial);
    }

    #[test]
    fn cache_roundtrip_and_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let f2 = builtin(Builtin::F2);
        let cache = GoldenCache::open(dir.path()).unwrap();
        let v = density_closed(&f2, 3, Some(&cache)).unwrap();
        assert_eq!(v.value, q(8, 9));
        let reopened = GoldenCache::open(dir.path()).unwrap();
        assert_eq!(reopened.get(&f2, 3).unwrap().value, q(8, 9));
        let wrong = DensityValue::new(3, q(1, 9), DensityMethod::Structured, 6);
        assert!(reopened.put(&f2, &wrong).is_err());
    }

    #[test]
    fn rational_float() {
        assert_eq!(rational_to_f64(&q(1, 3)), 1.0 / 3.0);
        assert_eq!(rational_to_f64(&q(16452, 16807)), 16452.0 / 16807.0);
        assert_eq!(rational_to_f64(&q(7, 2)), 3.5);
    }
}
