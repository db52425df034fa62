//! Elementary number theory: primes, modular powers, factoring.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Primes below `limit` (Eratosthenes).
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

const SMALL_PRIME_LIMIT: u64 = 1 << 20;

/// Cached primes below 2^20.
pub fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_up_to(SMALL_PRIME_LIMIT))
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller-Rabin with the first 20 prime bases; exact below 2^64 and
/// overwhelmingly reliable beyond.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    let one = BigUint::one();
    let n1 = n - &one;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'witness: for &a in small_primes().iter().take(20) {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: &BigUint) -> BigUint {
    let one = BigUint::one();
    for c in 1u64.. {
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut x = BigUint::from(2u32);
        let mut y = x.clone();
        let mut d = one.clone();
        while d == one {
            x = f(&x);
            y = f(&f(&y));
            let diff = if x > y { &x - &y } else { &y - &x };
            d = diff.gcd(n);
        }
        if &d != n {
            return d;
        }
    }
    unreachable!()
}

fn factor_into(n: BigUint, out: &mut Vec<BigUint>) {
    if n.is_one() {
        return;
    }
    if is_probable_prime(&n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(&n);
    let rest = &n / &d;
    factor_into(d, out);
    factor_into(rest, out);
}

/// Distinct prime divisors of `|n|`, ascending. Trial division by the small
/// prime table, then Miller-Rabin and Pollard rho on any cofactor.
pub fn prime_divisors(n: &BigInt) -> Vec<BigUint> {
    let mut m = n.abs().to_biguint().unwrap();
    let mut out = Vec::new();
    if m.is_zero() {
        return out;
    }
    for &p in small_primes() {
        let pb = BigUint::from(p);
        if &pb * &pb > m {
            break;
        }
        if (&m % &pb).is_zero() {
            out.push(pb.clone());
            while (&m % &pb).is_zero() {
                m /= &pb;
            }
        }
    }
    if !m.is_one() {
        let mut big = Vec::new();
        factor_into(m, &mut big);
        big.sort();
        big.dedup();
        out.extend(big);
    }
    out.sort();
    out.dedup();
    out
}

/// `ell`-adic valuation of a nonzero integer.
pub fn valuation(n: &BigInt, ell: u64) -> u32 {
    assert!(!n.is_zero(), "valuation of zero");
    let p = BigInt::from(ell);
    let mut m = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// Reduce a big integer into `[0, m)`.
pub fn reduce_mod(n: &BigInt, m: u64) -> u64 {
    n.mod_floor(&BigInt::from(m)).to_u64().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_and_primality_agree() {
        let ps = primes_up_to(2000);
        for n in 0..2000u64 {
            assert_eq!(ps.binary_search(&n).is_ok(), is_prime_u64(n), "n = {n}");
        }
        assert!(is_prime_u64(18446744073709551557));
        assert!(!is_prime_u64(3215031751));
    }

    #[test]
    fn factoring() {
        let n = BigInt::from(-241864704i64);
        let ps: Vec<u64> = prime_divisors(&n).iter().map(|p| p.to_u64().unwrap()).collect();
        assert_eq!(ps, vec![2, 3]);
        // two primes above the trial-division table
        let big = BigInt::from(1_000_003u64) * BigInt::from(1_000_033u64) * BigInt::from(12);
        let ps: Vec<u64> = prime_divisors(&big).iter().map(|p| p.to_u64().unwrap()).collect();
        assert_eq!(ps, vec![2, 3, 1_000_003, 1_000_033]);
        assert!(prime_divisors(&BigInt::from(1)).is_empty());
        assert!(prime_divisors(&BigInt::from(-1)).is_empty());
    }

    #[test]
    fn valuations() {
        assert_eq!(valuation(&BigInt::from(15552), 2), 6);
        assert_eq!(valuation(&BigInt::from(-15552), 3), 5);
        assert_eq!(reduce_mod(&BigInt::from(-1), 7), 6);
    }
}
