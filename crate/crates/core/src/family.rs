//! One-parameter families `y^2 = x^3 + A(a,b) x + B(a,b)`.
//!
//! A [`FamilySpec`] is only ever produced by [`from_config`] (or
//! [`builtin`], which goes through it), so every spec in circulation has
//! passed the four structural conditions and carries recomputed `d`, `r`
//! and exceptional primes.

use std::fmt;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::prime_divisors;
use crate::poly::{gcd_homo, resultant, scaled_discriminant, PolyError, Side};
use crate::Form;

/// A single failed structural condition on `(A, B)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A or B is zero or constant.
    ConstantInput,
    /// (i) `3 deg A != 2 deg B`.
    DegreeMismatch { deg_a: usize, deg_b: usize },
    /// (ii) A and B share a root in `P^1(R)`.
    CommonRealRoot { roots: usize },
    /// (iii) `4A^3 + 27B^2` vanishes identically.
    ZeroDiscriminant,
    /// (iv) `gcd(A, B)` is constant.
    GcdConstant,
    /// (iv) `gcd(A, B)` has a repeated factor.
    GcdNotSquarefree,
    /// (iv) `u | gcd(A, B)`.
    GcdDivisibleByU,
    /// (iv) `v | gcd(A, B)`.
    GcdDivisibleByV,
    /// (iv) `deg gcd(A, B) > 4`.
    GcdDegreeTooLarge { r: usize },
}

impl Violation {
    /// Roman numeral of the violated condition.
    pub fn condition(&self) -> &'static str {
        match self {
            Violation::ConstantInput | Violation::DegreeMismatch { .. } => "i",
            Violation::CommonRealRoot { .. } => "ii",
            Violation::ZeroDiscriminant => "iii",
            _ => "iv",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ConstantInput => write!(f, "(i) A and B must be nonconstant forms"),
            Violation::DegreeMismatch { deg_a, deg_b } => {
                write!(f, "(i) 3*deg A = {} but 2*deg B = {}", 3 * deg_a, 2 * deg_b)
            }
            Violation::CommonRealRoot { roots } => {
                write!(f, "(ii) A and B have {roots} common root(s) in P^1(R)")
            }
            Violation::ZeroDiscriminant => write!(f, "(iii) 4A^3 + 27B^2 is identically zero"),
            Violation::GcdConstant => write!(f, "(iv) gcd(A, B) is constant"),
            Violation::GcdNotSquarefree => write!(f, "(iv) gcd(A, B) is not squarefree"),
            Violation::GcdDivisibleByU => write!(f, "(iv) gcd(A, B) is divisible by u"),
            Violation::GcdDivisibleByV => write!(f, "(iv) gcd(A, B) is divisible by v"),
            Violation::GcdDegreeTooLarge { r } => write!(f, "(iv) deg gcd(A, B) = {r} > 4"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("family fails validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("unknown builtin family {0:?} (expected F1 or F2)")]
    UnknownBuiltin(String),
    #[error("j-map numerator and denominator must both be given and have equal degree")]
    BadJmap,
    #[error("j-map denominator vanishes at ({a}, {b})")]
    JmapPole { a: BigInt, b: BigInt },
    #[error("singular curve: 4A^3 + 27B^2 = 0")]
    Singular,
    #[error("malformed family config: {0}")]
    Config(String),
    #[error("reading family config: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Division-field entanglement carried as an opaque label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entanglement {
    pub pair: (u32, u32),
    pub group: String,
}

/// The four integers whose prime divisors form the exceptional set.
///
/// The discriminant entries are `lc * Disc`, the signed resultant of the
/// dehomogenised `C` with its derivative, so primes dividing the leading
/// coefficient (where roots escape to infinity mod ell) are also caught.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaInvariants {
    /// `Res(A0(t,1), B0(t,1))`
    pub res_v: BigInt,
    /// `Res(A0(1,t), B0(1,t))`
    pub res_u: BigInt,
    /// `C(t,1)`
    pub disc_v: BigInt,
    /// `C(1,t)`
    pub disc_u: BigInt,
}

impl SigmaInvariants {
    pub fn as_array(&self) -> [&BigInt; 4] {
        [&self.res_v, &self.res_u, &self.disc_v, &self.disc_u]
    }
}

#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub name: String,
    pub a: Form,
    pub b: Form,
    pub c: Form,
    pub a0: Form,
    pub b0: Form,
    /// `3 deg A = 2 deg B`
    pub d: usize,
    /// `deg C`
    pub r: usize,
    pub sigma: Vec<BigUint>,
    pub invariants: SigmaInvariants,
    pub j_num: Option<Form>,
    pub j_den: Option<Form>,
    pub entanglement: Option<Entanglement>,
}

impl FamilySpec {
    pub fn in_sigma(&self, ell: u64) -> bool {
        self.sigma.iter().any(|p| p.to_u64() == Some(ell))
    }

    /// Largest exceptional prime, 1 when the set is empty.
    pub fn max_sigma(&self) -> u64 {
        self.sigma.iter().map(|p| p.to_u64().unwrap_or(u64::MAX)).max().unwrap_or(1)
    }

    pub fn eval_a(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.a.eval(a, b)
    }

    pub fn eval_b(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.b.eval(a, b)
    }

    pub fn jmap_value(&self, a: &BigInt, b: &BigInt) -> Result<BigRational, FamilyError> {
        jmap_value(self, a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    F1,
    F2,
}

impl std::str::FromStr for Builtin {
    type Err = FamilyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(Builtin::F1),
            "F2" => Ok(Builtin::F2),
            _ => Err(FamilyError::UnknownBuiltin(s.to_string())),
        }
    }
}

/// The two entangled families, built from their `(A0, B0, C)` factorisation
/// and then validated like any user family.
pub fn builtin(which: Builtin) -> FamilySpec {
    let (name, c, a0, b0, j_num, j_den, pair) = match which {
        Builtin::F1 => {
            let c = Form::from_i64(&[432, 0, 36, 0, 1]);
            let a0 = Form::from_i64(&[-36, 0, -3]);
            let b0 = Form::from_i64(&[0, 2]).mul(&c);
            let j_num = Form::from_i64(&[12, 0, 1]).pow(3);
            let j_den = Form::monomial(0, 6);
            ("F1", c, a0, b0, j_num, j_den, (2, 3))
        }
        Builtin::F2 => {
            let c = Form::from_i64(&[125, 0, 22, 0, 1]);
            let a0 = Form::from_i64(&[-15, 0, -30, 0, -3]);
            let b0 = Form::from_i64(&[-2, 0, 8, 0, 2]).mul(&c);
            let j_num = Form::from_i64(&[5, 0, 10, 0, 1]).pow(3);
            let j_den = Form::monomial(2, 10);
            ("F2", c, a0, b0, j_num, j_den, (2, 5))
        }
    };
    let mut spec = from_config(name, c.mul(&a0), c.mul(&b0), Some(j_num), Some(j_den))
        .expect("builtin families satisfy the structural conditions");
    spec.entanglement = Some(Entanglement { pair, group: "Z/2Z".to_string() });
    spec
}

pub fn builtin_by_name(name: &str) -> Result<FamilySpec, FamilyError> {
    Ok(builtin(name.parse()?))
}

/// Validate `(A, B)` and derive everything else. Every violated condition is
/// reported, not just the first.
pub fn from_config(
    name: &str,
    a: Form,
    b: Form,
    j_num: Option<Form>,
    j_den: Option<Form>,
) -> Result<FamilySpec, FamilyError> {
    if a.is_zero() || b.is_zero() || a.degree() == 0 || b.degree() == 0 {
        return Err(FamilyError::Invalid(vec![Violation::ConstantInput]));
    }
    let mut violations = Vec::new();
    let degrees_match = 3 * a.degree() == 2 * b.degree();
    if !degrees_match {
        violations.push(Violation::DegreeMismatch { deg_a: a.degree(), deg_b: b.degree() });
    }
    let c = gcd_homo(&a, &b)?;
    if degrees_match {
        let disc = a.pow(3).scale(&BigInt::from(4)).add(&b.pow(2).scale(&BigInt::from(27)));
        if disc.is_zero() {
            violations.push(Violation::ZeroDiscriminant);
        }
    }
    if c.degree() == 0 {
        violations.push(Violation::GcdConstant);
    } else {
        let roots = c.real_projective_roots()?;
        if roots > 0 {
            violations.push(Violation::CommonRealRoot { roots });
        }
        if c.u_power() > 0 {
            violations.push(Violation::GcdDivisibleByU);
        }
        if c.v_power() > 0 {
            violations.push(Violation::GcdDivisibleByV);
        }
        if !c.is_squarefree() {
            violations.push(Violation::GcdNotSquarefree);
        }
        if c.degree() > 4 {
            violations.push(Violation::GcdDegreeTooLarge { r: c.degree() });
        }
    }
    if !violations.is_empty() {
        return Err(FamilyError::Invalid(violations));
    }
    let (j_num, j_den) = match (j_num, j_den) {
        (Some(n), Some(d)) if n.degree() == d.degree() && !d.is_zero() => (Some(n), Some(d)),
        (None, None) => (None, None),
        _ => return Err(FamilyError::BadJmap),
    };
    let a0 = a.exact_div(&c).expect("gcd divides A");
    let b0 = b.exact_div(&c).expect("gcd divides B");
    let invariants = sigma_invariants(&a0, &b0, &c)?;
    let sigma = primes_dividing_any(&invariants.as_array());
    Ok(FamilySpec {
        name: name.to_string(),
        d: 3 * a.degree(),
        r: c.degree(),
        a,
        b,
        c,
        a0,
        b0,
        sigma,
        invariants,
        j_num,
        j_den,
        entanglement: None,
    })
}

pub fn sigma_invariants(a0: &Form, b0: &Form, c: &Form) -> Result<SigmaInvariants, PolyError> {
    Ok(SigmaInvariants {
        res_v: resultant(&a0.dehomogenize(Side::VOne), &b0.dehomogenize(Side::VOne))?,
        res_u: resultant(&a0.dehomogenize(Side::UOne), &b0.dehomogenize(Side::UOne))?,
        disc_v: scaled_discriminant(&c.dehomogenize(Side::VOne))?,
        disc_u: scaled_discriminant(&c.dehomogenize(Side::UOne))?,
    })
}

/// Exceptional primes recomputed from the spec's polynomials.
pub fn compute_sigma(spec: &FamilySpec) -> Vec<BigUint> {
    let inv = sigma_invariants(&spec.a0, &spec.b0, &spec.c).expect("validated spec");
    primes_dividing_any(&inv.as_array())
}

/// Sorted distinct primes dividing at least one of the given integers.
pub fn primes_dividing_any(values: &[&BigInt]) -> Vec<BigUint> {
    let mut out: Vec<BigUint> = values.iter().flat_map(|v| prime_divisors(v)).collect();
    out.sort();
    out.dedup();
    out
}

pub fn jmap_value(spec: &FamilySpec, a: &BigInt, b: &BigInt) -> Result<BigRational, FamilyError> {
    let (num, den) = match (&spec.j_num, &spec.j_den) {
        (Some(n), Some(d)) => (n, d),
        _ => return Err(FamilyError::BadJmap),
    };
    let den_v = den.eval(a, b);
    if den_v.is_zero() {
        return Err(FamilyError::JmapPole { a: a.clone(), b: b.clone() });
    }
    Ok(BigRational::new(num.eval(a, b), den_v))
}

/// `1728 * 4A^3 / (4A^3 + 27B^2)` in lowest terms.
pub fn j_invariant(a_val: &BigInt, b_val: &BigInt) -> Result<BigRational, FamilyError> {
    let four_a3 = BigInt::from(4) * a_val * a_val * a_val;
    let disc = &four_a3 + BigInt::from(27) * b_val * b_val;
    if disc.is_zero() {
        return Err(FamilyError::Singular);
    }
    Ok(BigRational::new(BigInt::from(1728) * four_a3, disc))
}

/// External form encoding: big integers as decimal strings, `u`-power ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormJson {
    pub degree: usize,
    pub coeffs: Vec<String>,
}

impl FormJson {
    pub fn from_form(f: &Form) -> Self {
        FormJson { degree: f.degree(), coeffs: f.coeffs().iter().map(|c| c.to_string()).collect() }
    }

    pub fn to_form(&self) -> Result<Form, FamilyError> {
        if self.coeffs.len() != self.degree + 1 {
            return Err(FamilyError::Config(format!(
                "degree {} needs {} coefficients, got {}",
                self.degree,
                self.degree + 1,
                self.coeffs.len()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|s| s.trim().parse::<BigInt>().map_err(|e| FamilyError::Config(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let form = Form::new(coeffs);
        if !form.is_zero() && form.degree() != self.degree {
            // leading zero coefficients: keep the declared degree
            return Ok(Form::homogenize(&form.dehomogenize(Side::VOne), self.degree, Side::VOne));
        }
        Ok(form)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub name: String,
    #[serde(rename = "A")]
    pub a: FormJson,
    #[serde(rename = "B")]
    pub b: FormJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_num: Option<FormJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_den: Option<FormJson>,
}

impl FamilyConfig {
    pub fn parse(text: &str) -> Result<Self, FamilyError> {
        serde_json::from_str(text).map_err(|e| FamilyError::Config(e.to_string()))
    }

    pub fn into_spec(self) -> Result<FamilySpec, FamilyError> {
        let j_num = self.j_num.as_ref().map(FormJson::to_form).transpose()?;
        let j_den = self.j_den.as_ref().map(FormJson::to_form).transpose()?;
        from_config(&self.name, self.a.to_form()?, self.b.to_form()?, j_num, j_den)
    }

    pub fn from_spec(spec: &FamilySpec) -> Self {
        FamilyConfig {
            name: spec.name.clone(),
            a: FormJson::from_form(&spec.a),
            b: FormJson::from_form(&spec.b),
            j_num: spec.j_num.as_ref().map(FormJson::from_form),
            j_den: spec.j_den.as_ref().map(FormJson::from_form),
        }
    }
}

pub fn load_config(path: &Path) -> Result<FamilySpec, FamilyError> {
    FamilyConfig::parse(&std::fs::read_to_string(path)?)?.into_spec()
}

/// Summary emitted by `check-family`.
#[derive(Clone, Debug, Serialize)]
pub struct FamilySummary {
    pub name: String,
    #[serde(rename = "A")]
    pub a: FormJson,
    #[serde(rename = "B")]
    pub b: FormJson,
    #[serde(rename = "C")]
    pub c: FormJson,
    #[serde(rename = "A0")]
    pub a0: FormJson,
    #[serde(rename = "B0")]
    pub b0: FormJson,
    pub d: usize,
    pub r: usize,
    pub sigma: Vec<String>,
    pub sigma_invariants: [String; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<Entanglement>,
}

impl FamilySummary {
    pub fn new(spec: &FamilySpec) -> Self {
        FamilySummary {
            name: spec.name.clone(),
            a: FormJson::from_form(&spec.a),
            b: FormJson::from_form(&spec.b),
            c: FormJson::from_form(&spec.c),
            a0: FormJson::from_form(&spec.a0),
            b0: FormJson::from_form(&spec.b0),
            d: spec.d,
            r: spec.r,
            sigma: spec.sigma.iter().map(|p| p.to_string()).collect(),
            sigma_invariants: spec.invariants.as_array().map(|v| v.to_string()),
            entanglement: spec.entanglement.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Pow;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    fn pow(b: i64, e: u32) -> BigInt {
        Pow::pow(BigInt::from(b), e)
    }

    #[test]
    fn builtin_degrees() {
        let f1 = builtin(Builtin::F1);
        assert_eq!((f1.d, f1.r), (18, 4));
        let f2 = builtin(Builtin::F2);
        assert_eq!((f2.d, f2.r), (24, 4));
        assert_eq!(f2.c, Form::from_i64(&[125, 0, 22, 0, 1]));
    }

    #[test]
    fn f1_b_is_2a_c_squared() {
        let f1 = builtin(Builtin::F1);
        for (a, b) in [(1, 1), (-3, 2), (7, 5), (0, 1)] {
            let (a, b) = (big(a), big(b));
            let c = f1.c.eval(&a, &b);
            assert_eq!(f1.eval_b(&a, &b), big(2) * &a * &c * &c);
        }
    }

    #[test]
    fn sigma_matches_known_values() {
        let f1 = builtin(Builtin::F1);
        assert_eq!(f1.invariants.res_v, -pow(2, 12) * pow(3, 10));
        assert_eq!(f1.invariants.res_u, pow(2, 10) * pow(3, 8));
        assert_eq!(f1.invariants.disc_v, pow(2, 16) * pow(3, 9));
        assert_eq!(f1.invariants.disc_u, pow(2, 20) * pow(3, 12));
        assert_eq!(f1.sigma, vec![BigUint::from(2u32), BigUint::from(3u32)]);
        assert_eq!(compute_sigma(&f1), f1.sigma);
        let f2 = builtin(Builtin::F2);
        let s: Vec<u64> = f2.sigma.iter().map(|p| p.to_u64().unwrap()).collect();
        assert_eq!(s, vec![2, 3, 5]);
    }

    #[test]
    fn units_give_empty_sigma() {
        let one = big(1);
        let m1 = big(-1);
        assert!(primes_dividing_any(&[&one, &m1, &one, &m1]).is_empty());
    }

    #[test]
    fn jmap_examples() {
        let f1 = builtin(Builtin::F1);
        assert_eq!(f1.jmap_value(&big(0), &big(1)).unwrap(), BigRational::from_integer(big(1728)));
        assert_eq!(f1.jmap_value(&big(1), &big(1)).unwrap(), BigRational::from_integer(big(2197)));
        let f2 = builtin(Builtin::F2);
        assert_eq!(f2.jmap_value(&big(1), &big(1)).unwrap(), BigRational::from_integer(big(4096)));
        assert!(matches!(f2.jmap_value(&big(0), &big(1)), Err(FamilyError::JmapPole { .. })));
    }

    #[test]
    fn j_invariant_examples() {
        assert_eq!(j_invariant(&big(5), &big(0)).unwrap(), BigRational::from_integer(big(1728)));
        assert_eq!(j_invariant(&big(0), &big(7)).unwrap(), BigRational::from_integer(big(0)));
        assert!(matches!(j_invariant(&big(-3), &big(2)), Err(FamilyError::Singular)));
        let f1 = builtin(Builtin::F1);
        let (a, b) = (big(1), big(1));
        assert_eq!(
            j_invariant(&f1.eval_a(&a, &b), &f1.eval_b(&a, &b)).unwrap(),
            BigRational::from_integer(big(2197))
        );
    }

    #[test]
    fn from_config_rebuilds_builtin() {
        let f1 = builtin(Builtin::F1);
        let again = from_config("again", f1.a.clone(), f1.b.clone(), None, None).unwrap();
        assert_eq!(again.c, f1.c);
        assert_eq!(again.sigma, f1.sigma);
        assert_eq!(again.d, 18);
    }

    fn violations(a: &[i64], b: &[i64]) -> Vec<Violation> {
        match from_config("m", Form::from_i64(a), Form::from_i64(b), None, None) {
            Err(FamilyError::Invalid(v)) => v,
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn shared_root_at_zero_is_rejected() {
        // A = u^2 v, B = u^3
        let v = violations(&[0, 0, 1, 0], &[0, 0, 0, 1]);
        assert!(v.iter().any(|x| x.condition() == "ii"), "{v:?}");
        assert!(v.contains(&Violation::GcdDivisibleByU));
    }

    #[test]
    fn gcd_divisible_by_u_is_condition_iv() {
        // C = u(u^2 + v^2), A = C (u + 2v), B = C (u^3 + 3v^3)
        let c = Form::from_i64(&[0, 1, 0, 1]);
        let a = c.mul(&Form::from_i64(&[2, 1]));
        let b = c.mul(&Form::from_i64(&[3, 0, 0, 1]));
        let v = match from_config("m", a, b, None, None) {
            Err(FamilyError::Invalid(v)) => v,
            other => panic!("{other:?}"),
        };
        assert!(v.contains(&Violation::GcdDivisibleByU), "{v:?}");
    }

    #[test]
    fn bad_jmap_degree() {
        let f1 = builtin(Builtin::F1);
        let r = from_config("x", f1.a.clone(), f1.b.clone(), Some(Form::from_i64(&[1, 1])), Some(Form::from_i64(&[1])));
        assert!(matches!(r, Err(FamilyError::BadJmap)));
    }

    #[test]
    fn config_round_trip() {
        let f2 = builtin(Builtin::F2);
        let text = serde_json::to_string(&FamilyConfig::from_spec(&f2)).unwrap();
        let back = FamilyConfig::parse(&text).unwrap().into_spec().unwrap();
        assert_eq!(back.a, f2.a);
        assert_eq!(back.b, f2.b);
        assert_eq!(back.j_num, f2.j_num);
        assert_eq!(back.sigma, f2.sigma);
    }

    #[test]
    fn config_rejects_wrong_coefficient_count() {
        let text = r#"{"name":"x","A":{"degree":2,"coeffs":["1","2"]},"B":{"degree":3,"coeffs":["1","0","0","1"]}}"#;
        assert!(matches!(FamilyConfig::parse(text).unwrap().into_spec(), Err(FamilyError::Config(_))));
    }
}
