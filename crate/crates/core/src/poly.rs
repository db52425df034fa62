//! Exact univariate and binary-form polynomial arithmetic.
//!
//! Everything here is generic over [`IntScalar`]; rational intermediate
//! results (Euclid, Sturm chains) use `Ratio<T>` so no step ever rounds.

use num_rational::Ratio;
use num_traits::Zero;
use thiserror::Error;

use crate::scalar::IntScalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("zero polynomial not allowed here")]
    ZeroPolynomial,
    #[error("gcd of two zero polynomials is undefined")]
    BothZero,
    #[error("operation needs a polynomial of degree at least 1")]
    ConstantPolynomial,
    #[error("polynomial is not squarefree")]
    NotSquarefree,
}

/// Dense univariate integer polynomial; `coeffs[i]` multiplies `t^i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UniPoly<T> {
    coeffs: Vec<T>,
}

impl<T: IntScalar> UniPoly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| T::from_i64(c).unwrap()).collect())
    }

    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&T> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &T) -> T {
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c.clone() * T::from_usize(i).unwrap())
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self::new(convolve(&self.coeffs, &other.coeffs))
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|i| {
                    let a = self.coeffs.get(i).cloned().unwrap_or_else(T::zero);
                    let b = other.coeffs.get(i).cloned().unwrap_or_else(T::zero);
                    a + b
                })
                .collect(),
        )
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Nonnegative gcd of the coefficients (zero for the zero polynomial).
    pub fn content(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |g, c| g.gcd(c))
    }

    /// Divides out the content and makes the leading coefficient positive.
    pub fn primitive_part(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = self.content();
        if self.leading().unwrap().is_negative() {
            c = -c;
        }
        Self::new(self.coeffs.iter().map(|x| x.clone() / c.clone()).collect())
    }

    /// Quotient if `divisor` divides `self` exactly in `Z[t]`.
    pub fn exact_div(&self, divisor: &Self) -> Option<Self> {
        if divisor.is_zero() {
            return None;
        }
        let (q, r) = qpoly::div_rem(&qpoly::from_int(self), &qpoly::from_int(divisor));
        if !r.is_empty() || q.iter().any(|c| !c.is_integer()) {
            return None;
        }
        Some(Self::new(q.into_iter().map(|c| c.to_integer()).collect()))
    }

    /// Primitive gcd over the rationals with positive leading coefficient.
    /// `gcd(0, 0)` is the zero polynomial.
    pub fn gcd(&self, other: &Self) -> Self {
        let g = qpoly::gcd(qpoly::from_int(self), qpoly::from_int(other));
        qpoly::to_primitive(&g)
    }

    pub fn is_squarefree(&self) -> bool {
        if self.is_zero() {
            return false;
        }
        self.gcd(&self.derivative()).degree() == Some(0)
    }

    /// `p / gcd(p, p')`, primitive.
    pub fn squarefree_part(&self) -> Self {
        if self.degree().unwrap_or(0) == 0 {
            return self.primitive_part();
        }
        let g = self.gcd(&self.derivative());
        self.exact_div(&g)
            .or_else(|| self.primitive_part().exact_div(&g))
            .expect("gcd divides its argument over Q")
            .primitive_part()
    }
}

fn convolve<T: IntScalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

/// Resultant by fraction-free Gaussian elimination on the Sylvester matrix.
pub fn resultant<T: IntScalar>(p: &UniPoly<T>, q: &UniPoly<T>) -> Result<T, PolyError> {
    let (m, n) = match (p.degree(), q.degree()) {
        (Some(m), Some(n)) => (m, n),
        _ => return Err(PolyError::ZeroPolynomial),
    };
    let size = m + n;
    let mut rows = Vec::with_capacity(size);
    for shift in 0..n {
        let mut row = vec![T::zero(); size];
        for (k, c) in p.coeffs.iter().rev().enumerate() {
            row[shift + k] = c.clone();
        }
        rows.push(row);
    }
    for shift in 0..m {
        let mut row = vec![T::zero(); size];
        for (k, c) in q.coeffs.iter().rev().enumerate() {
            row[shift + k] = c.clone();
        }
        rows.push(row);
    }
    Ok(bareiss_det(rows))
}

/// Bareiss determinant; every division is exact.
pub fn bareiss_det<T: IntScalar>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    if n == 0 {
        return T::one();
    }
    let mut negate = false;
    let mut prev = T::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    negate = !negate;
                }
                None => return T::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = a[i][j].clone() * a[k][k].clone() - a[i][k].clone() * a[k][j].clone();
                a[i][j] = v / prev.clone();
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if negate {
        -det
    } else {
        det
    }
}

fn disc_sign(n: usize) -> bool {
    (n * (n - 1) / 2) % 2 == 1
}

/// `(-1)^{n(n-1)/2} Res(p, p') / lc(p)`.
pub fn discriminant<T: IntScalar>(p: &UniPoly<T>) -> Result<T, PolyError> {
    let scaled = scaled_discriminant(p)?;
    Ok(scaled / p.leading().unwrap().clone())
}

/// `lc(p) * Disc(p)`, i.e. the signed resultant of `p` and `p'` without the
/// division by the leading coefficient. Its prime divisors are those of the
/// discriminant together with those of the leading coefficient.
pub fn scaled_discriminant<T: IntScalar>(p: &UniPoly<T>) -> Result<T, PolyError> {
    let n = match p.degree() {
        None => return Err(PolyError::ZeroPolynomial),
        Some(0) => return Err(PolyError::ConstantPolynomial),
        Some(n) => n,
    };
    let r = resultant(p, &p.derivative())?;
    Ok(if disc_sign(n) { -r } else { r })
}

/// Number of distinct real roots by Sturm's theorem, in exact arithmetic.
pub fn count_real_roots<T: IntScalar>(p: &UniPoly<T>) -> Result<usize, PolyError> {
    if p.is_zero() {
        return Err(PolyError::ZeroPolynomial);
    }
    if !p.is_squarefree() {
        return Err(PolyError::NotSquarefree);
    }
    let chain = sturm_chain(p);
    let at_pos_inf: Vec<bool> = chain.iter().map(|s| s.leading().unwrap().is_positive()).collect();
    let at_neg_inf: Vec<bool> = chain
        .iter()
        .map(|s| s.leading().unwrap().is_positive() ^ (s.degree().unwrap() % 2 == 1))
        .collect();
    Ok(sign_changes(&at_neg_inf) - sign_changes(&at_pos_inf))
}

/// Sturm sequence `p, p', -rem(..)...`, each member scaled by a positive
/// rational to a primitive integer polynomial.
pub fn sturm_chain<T: IntScalar>(p: &UniPoly<T>) -> Vec<UniPoly<T>> {
    let mut chain = vec![p.clone()];
    let d = p.derivative();
    if d.is_zero() {
        return chain;
    }
    chain.push(d);
    loop {
        let n = chain.len();
        let (_, r) = qpoly::div_rem(&qpoly::from_int(&chain[n - 2]), &qpoly::from_int(&chain[n - 1]));
        if r.is_empty() {
            break;
        }
        let neg: Vec<Ratio<T>> = r.into_iter().map(|c| -c).collect();
        chain.push(qpoly::to_int_same_sign(&neg));
    }
    chain
}

fn sign_changes(signs: &[bool]) -> usize {
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Which variable a binary form is specialised to 1 in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `P(t, 1)`
    VOne,
    /// `P(1, t)`
    UOne,
}

/// Binary form of fixed degree; `coeffs[i]` multiplies `u^i v^(n-i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HomogeneousPoly<T> {
    degree: usize,
    coeffs: Vec<T>,
}

impl<T: IntScalar> HomogeneousPoly<T> {
    /// Degree is `coeffs.len() - 1`; an all-zero vector gives the zero form.
    pub fn new(coeffs: Vec<T>) -> Self {
        if coeffs.iter().all(|c| c.is_zero()) {
            return Self::zero();
        }
        HomogeneousPoly { degree: coeffs.len() - 1, coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| T::from_i64(c).unwrap()).collect())
    }

    pub fn zero() -> Self {
        HomogeneousPoly { degree: 0, coeffs: vec![T::zero()] }
    }

    pub fn one() -> Self {
        HomogeneousPoly { degree: 0, coeffs: vec![T::one()] }
    }

    /// `u^i v^j`.
    pub fn monomial(i: usize, j: usize) -> Self {
        let mut coeffs = vec![T::zero(); i + j + 1];
        coeffs[i] = T::one();
        HomogeneousPoly { degree: i + j, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn eval(&self, a: &T, b: &T) -> T {
        let n = self.degree;
        let mut acc = self.coeffs[n].clone();
        let mut bp = T::one();
        for i in (0..n).rev() {
            bp = bp * b.clone();
            acc = acc * a.clone() + self.coeffs[i].clone() * bp.clone();
        }
        acc
    }

    pub fn dehomogenize(&self, side: Side) -> UniPoly<T> {
        match side {
            Side::VOne => UniPoly::new(self.coeffs.clone()),
            Side::UOne => UniPoly::new(self.coeffs.iter().rev().cloned().collect()),
        }
    }

    /// Inverse of [`dehomogenize`](Self::dehomogenize) at a chosen degree.
    pub fn homogenize(p: &UniPoly<T>, degree: usize, side: Side) -> Self {
        assert!(p.degree().map_or(true, |d| d <= degree), "degree too small for homogenization");
        let mut coeffs = vec![T::zero(); degree + 1];
        for (i, c) in p.coeffs().iter().enumerate() {
            coeffs[i] = c.clone();
        }
        if side == Side::UOne {
            coeffs.reverse();
        }
        if coeffs.iter().all(|c| c.is_zero()) {
            return Self::zero();
        }
        HomogeneousPoly { degree, coeffs }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        HomogeneousPoly {
            degree: self.degree + other.degree,
            coeffs: convolve(&self.coeffs, &other.coeffs),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(), |acc, _| acc.mul(self))
    }

    pub fn scale(&self, k: &T) -> Self {
        Self::new_with_degree(self.degree, self.coeffs.iter().map(|c| c.clone() * k.clone()).collect())
    }

    /// Sum of two forms of the same degree (a zero summand is accepted).
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        assert_eq!(self.degree, other.degree, "adding forms of different degree");
        Self::new_with_degree(
            self.degree,
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect(),
        )
    }

    fn new_with_degree(degree: usize, coeffs: Vec<T>) -> Self {
        if coeffs.iter().all(|c| c.is_zero()) {
            return Self::zero();
        }
        HomogeneousPoly { degree, coeffs }
    }

    /// Exponent of the largest power of `u` dividing the form.
    pub fn u_power(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().take_while(|c| c.is_zero()).count()
    }

    /// Exponent of the largest power of `v` dividing the form.
    pub fn v_power(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().rev().take_while(|c| c.is_zero()).count()
    }

    /// Removes every factor of `u` and `v`, returning `(rest, k_u, k_v)`.
    pub fn strip_monomials(&self) -> (Self, usize, usize) {
        let ku = self.u_power();
        let kv = self.v_power();
        if self.is_zero() {
            return (Self::zero(), 0, 0);
        }
        let coeffs = self.coeffs[ku..self.coeffs.len() - kv].to_vec();
        (HomogeneousPoly { degree: self.degree - ku - kv, coeffs }, ku, kv)
    }

    pub fn content(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |g, c| g.gcd(c))
    }

    pub fn exact_div(&self, divisor: &Self) -> Option<Self> {
        if divisor.is_zero() || divisor.degree > self.degree {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let q = self.dehomogenize(Side::VOne).exact_div(&divisor.dehomogenize(Side::VOne))?;
        let out = Self::homogenize(&q, self.degree - divisor.degree, Side::VOne);
        (out.mul(divisor) == *self).then_some(out)
    }

    /// Sign normalisation used for gcds: value at `(0,1)` positive when it is
    /// nonzero, otherwise the highest nonzero coefficient positive.
    fn normalize_sign(self) -> Self {
        let pivot = if !self.coeffs[0].is_zero() {
            &self.coeffs[0]
        } else {
            match self.coeffs.iter().rev().find(|c| !c.is_zero()) {
                Some(c) => c,
                None => return self,
            }
        };
        if pivot.is_negative() {
            self.scale(&-T::one())
        } else {
            self
        }
    }

    fn primitive(&self) -> Self {
        let c = self.content();
        if c.is_zero() {
            return self.clone();
        }
        Self::new_with_degree(self.degree, self.coeffs.iter().map(|x| x.clone() / c.clone()).collect())
    }

    pub fn is_squarefree(&self) -> bool {
        if self.is_zero() {
            return false;
        }
        let (rest, ku, kv) = self.strip_monomials();
        ku <= 1 && kv <= 1 && (rest.degree == 0 || rest.dehomogenize(Side::VOne).is_squarefree())
    }

    /// Distinct roots in `P^1(R)`, counting `[0:1]` (factor `u`) and
    /// `[1:0]` (factor `v`).
    pub fn real_projective_roots(&self) -> Result<usize, PolyError> {
        if self.is_zero() {
            return Err(PolyError::ZeroPolynomial);
        }
        let (rest, ku, kv) = self.strip_monomials();
        let finite = if rest.degree == 0 {
            0
        } else {
            count_real_roots(&rest.dehomogenize(Side::VOne).squarefree_part())?
        };
        Ok(finite + usize::from(ku > 0) + usize::from(kv > 0))
    }
}

/// Primitive integer gcd of two forms, including shared powers of `u`, `v`.
pub fn gcd_homo<T: IntScalar>(
    p: &HomogeneousPoly<T>,
    q: &HomogeneousPoly<T>,
) -> Result<HomogeneousPoly<T>, PolyError> {
    match (p.is_zero(), q.is_zero()) {
        (true, true) => return Err(PolyError::BothZero),
        (true, false) => return Ok(q.primitive().normalize_sign()),
        (false, true) => return Ok(p.primitive().normalize_sign()),
        _ => {}
    }
    let (ps, pu, pv) = p.strip_monomials();
    let (qs, qu, qv) = q.strip_monomials();
    let g = ps.dehomogenize(Side::VOne).gcd(&qs.dehomogenize(Side::VOne));
    let core = HomogeneousPoly::homogenize(&g, g.degree().unwrap_or(0), Side::VOne);
    let mono = HomogeneousPoly::monomial(pu.min(qu), pv.min(qv));
    Ok(core.mul(&mono).primitive().normalize_sign())
}

/// Dense polynomials over `Q` as trimmed coefficient vectors.
mod qpoly {
    use super::*;

    pub type Q<T> = Ratio<T>;

    pub fn from_int<T: IntScalar>(p: &UniPoly<T>) -> Vec<Q<T>> {
        p.coeffs().iter().map(|c| Ratio::from_integer(c.clone())).collect()
    }

    fn trim<T: IntScalar>(v: &mut Vec<Q<T>>) {
        while v.last().is_some_and(|c| c.is_zero()) {
            v.pop();
        }
    }

    pub fn div_rem<T: IntScalar>(a: &[Q<T>], b: &[Q<T>]) -> (Vec<Q<T>>, Vec<Q<T>>) {
        assert!(!b.is_empty(), "division by zero polynomial");
        let mut r = a.to_vec();
        trim(&mut r);
        if r.len() < b.len() {
            return (Vec::new(), r);
        }
        let lb = b.last().unwrap().clone();
        let mut q = vec![Q::<T>::zero(); r.len() - b.len() + 1];
        while r.len() >= b.len() {
            let shift = r.len() - b.len();
            let f = r.last().unwrap().clone() / lb.clone();
            for (i, c) in b.iter().enumerate() {
                r[shift + i] = r[shift + i].clone() - f.clone() * c.clone();
            }
            q[shift] = f;
            r.pop();
            trim(&mut r);
        }
        trim(&mut q);
        (q, r)
    }

    /// Monic gcd; empty when both inputs are zero.
    pub fn gcd<T: IntScalar>(mut a: Vec<Q<T>>, mut b: Vec<Q<T>>) -> Vec<Q<T>> {
        trim(&mut a);
        trim(&mut b);
        while !b.is_empty() {
            let (_, r) = div_rem(&a, &b);
            a = b;
            b = r;
        }
        if let Some(l) = a.last().cloned() {
            for c in a.iter_mut() {
                *c = c.clone() / l.clone();
            }
        }
        a
    }

    /// Clears denominators and content with a positive factor.
    pub fn to_int_same_sign<T: IntScalar>(v: &[Q<T>]) -> UniPoly<T> {
        let l = v.iter().fold(T::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<T> = v.iter().map(|c| c.numer().clone() * (l.clone() / c.denom().clone())).collect();
        let g = ints.iter().fold(T::zero(), |g, c| g.gcd(c));
        if g.is_zero() {
            return UniPoly::zero();
        }
        UniPoly::new(ints.into_iter().map(|c| c / g.clone()).collect())
    }

    pub fn to_primitive<T: IntScalar>(v: &[Q<T>]) -> UniPoly<T> {
        to_int_same_sign(v).primitive_part()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    type P = UniPoly<BigInt>;
    type H = HomogeneousPoly<BigInt>;

    fn c_f1() -> H {
        H::from_i64(&[432, 0, 36, 0, 1])
    }

    #[test]
    fn eval_examples() {
        let one = BigInt::from(1);
        assert_eq!(c_f1().eval(&one, &one), BigInt::from(469));
        let c2 = H::from_i64(&[125, 0, 22, 0, 1]);
        assert_eq!(c2.eval(&one, &one), BigInt::from(148));
        let b0 = H::from_i64(&[0, 2]).mul(&c_f1());
        assert_eq!(b0.eval(&BigInt::from(0), &one), BigInt::from(0));
    }

    #[test]
    fn dehomogenize_both_sides() {
        assert_eq!(c_f1().dehomogenize(Side::VOne), P::from_i64(&[432, 0, 36, 0, 1]));
        assert_eq!(c_f1().dehomogenize(Side::UOne), P::from_i64(&[1, 0, 36, 0, 432]));
        assert!(H::zero().dehomogenize(Side::UOne).is_zero());
        assert!(H::zero().dehomogenize(Side::VOne).is_zero());
    }

    #[test]
    fn zero_form_is_canonical() {
        let z = H::from_i64(&[0, 0, 0]);
        assert_eq!(z.degree(), 0);
        assert_eq!(z, H::zero());
    }

    #[test]
    fn resultant_small() {
        let r = resultant(&P::from_i64(&[-1, 1]), &P::from_i64(&[1, 1])).unwrap();
        assert_eq!(r, BigInt::from(2));
        assert_eq!(resultant(&P::zero(), &P::from_i64(&[1, 1])), Err(PolyError::ZeroPolynomial));
    }

    #[test]
    fn resultant_with_constant() {
        // Res(p, c) = c^deg p
        let r = resultant(&P::from_i64(&[1, 0, 1]), &P::from_i64(&[3])).unwrap();
        assert_eq!(r, BigInt::from(9));
    }

    #[test]
    fn discriminant_examples() {
        assert_eq!(discriminant(&P::from_i64(&[1, 0, 1])).unwrap(), BigInt::from(-4));
        assert_eq!(discriminant(&P::from_i64(&[5])), Err(PolyError::ConstantPolynomial));
        let c = P::from_i64(&[432, 0, 36, 0, 1]);
        assert_eq!(discriminant(&c).unwrap(), BigInt::from(2).pow(16) * BigInt::from(3).pow(9));
        let rc = P::from_i64(&[1, 0, 36, 0, 432]);
        assert_eq!(discriminant(&rc).unwrap(), BigInt::from(2).pow(16) * BigInt::from(3).pow(9));
        assert_eq!(scaled_discriminant(&rc).unwrap(), BigInt::from(2).pow(20) * BigInt::from(3).pow(12));
    }

    #[test]
    fn squarefree_examples() {
        assert!(P::from_i64(&[432, 0, 36, 0, 1]).is_squarefree());
        assert!(!P::from_i64(&[1, -2, 1]).is_squarefree());
        assert!(P::from_i64(&[0, 1]).is_squarefree());
    }

    #[test]
    fn real_root_examples() {
        assert_eq!(count_real_roots(&P::from_i64(&[432, 0, 36, 0, 1])).unwrap(), 0);
        assert_eq!(count_real_roots(&P::from_i64(&[-1, 0, 1])).unwrap(), 2);
        assert_eq!(count_real_roots(&P::from_i64(&[125, 0, 22, 0, 1])).unwrap(), 0);
        assert_eq!(count_real_roots(&P::from_i64(&[1, -2, 1])), Err(PolyError::NotSquarefree));
        // (t-1)(t-2)(t+3)
        assert_eq!(count_real_roots(&P::from_i64(&[6, -7, 0, 1])).unwrap(), 3);
    }

    #[test]
    fn gcd_of_family_parts() {
        let c1 = c_f1();
        let a1 = H::from_i64(&[-36, 0, -3]).mul(&c1);
        let b1 = H::from_i64(&[0, 864, 0, 72, 0, 2]).mul(&c1);
        assert_eq!(gcd_homo(&a1, &b1).unwrap(), c1);

        let c2 = H::from_i64(&[125, 0, 22, 0, 1]);
        let a2 = H::from_i64(&[-15, 0, -30, 0, -3]).mul(&c2);
        let b2 = H::from_i64(&[-2, 0, 8, 0, 2]).mul(&c2).mul(&c2);
        assert_eq!(gcd_homo(&a2, &b2).unwrap(), c2);
    }

    #[test]
    fn gcd_idempotent_and_monomials() {
        let p = H::from_i64(&[0, 6, 0, -4]); // 6uv^2 - 4u^3 = 2u(3v^2 - 2u^2)
        let g = gcd_homo(&p, &p).unwrap();
        assert_eq!(g, H::from_i64(&[0, -3, 0, 2]));
        let uv = H::from_i64(&[0, 1, 0]);
        let u2 = H::from_i64(&[0, 0, 1]);
        assert_eq!(gcd_homo(&uv, &u2).unwrap(), H::from_i64(&[0, 1]));
        assert_eq!(gcd_homo(&H::zero(), &H::zero()), Err(PolyError::BothZero));
    }

    #[test]
    fn projective_roots() {
        assert_eq!(c_f1().real_projective_roots().unwrap(), 0);
        assert_eq!(H::from_i64(&[0, 1, 0]).real_projective_roots().unwrap(), 2);
        assert_eq!(H::from_i64(&[-2, 0, 1]).real_projective_roots().unwrap(), 2);
    }

    #[test]
    fn exact_division() {
        let c1 = c_f1();
        let a1 = H::from_i64(&[-36, 0, -3]).mul(&c1);
        assert_eq!(a1.exact_div(&c1).unwrap(), H::from_i64(&[-36, 0, -3]));
        assert!(c1.exact_div(&H::from_i64(&[1, 1])).is_none());
    }

    #[test]
    fn machine_scalars_agree() {
        let p = UniPoly::<i128>::from_i64(&[-36, 0, -3]);
        let q = UniPoly::<i128>::from_i64(&[0, 864, 0, 72, 0, 2]);
        assert_eq!(resultant(&p, &q).unwrap(), -(1i128 << 12) * 3i128.pow(10));
    }
}
