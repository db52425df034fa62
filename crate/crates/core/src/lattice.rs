//! Heights, minimality defects and exact enumeration of `F(X)`, `D^z(X)`,
//! `C(X)`.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::area::{region_extent, AreaError, HeightForm};
use crate::arith::small_primes;
use crate::family::FamilySpec;
use crate::scalar::{ln_big, IntScalar};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("minimality defect of (0, 0) is undefined")]
    BothZero,
    #[error(transparent)]
    Region(#[from] AreaError),
    #[error("bounding box failed its boundary check even after enlarging")]
    BoxCheck,
    #[error("height bound X must be at least 1")]
    BadHeight,
    #[error("record I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("record parse: {0}")]
    Parse(String),
}

/// One pair `(a, b)` of the family with its Weierstrass data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveRecord {
    pub a: i64,
    pub b: i64,
    pub a_val: BigInt,
    pub b_val: BigInt,
    pub height: BigInt,
    pub md: u64,
    pub coprime: bool,
    pub nonsingular: bool,
}

impl CurveRecord {
    pub fn in_c(&self) -> bool {
        self.coprime && self.nonsingular && self.md == 1
    }

    pub fn in_d(&self) -> bool {
        self.coprime && self.md == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountSummary {
    #[serde(rename = "X", serialize_with = "crate::lattice::ser_big")]
    pub x: BigInt,
    #[serde(rename = "count_F")]
    pub count_f: u64,
    #[serde(rename = "count_D")]
    pub count_d: u64,
    #[serde(rename = "count_C")]
    pub count_c: u64,
    pub distinct_models: u64,
}

pub(crate) fn ser_big<S: serde::Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// `max(|4A^3|, |27B^2|)`
pub fn naive_height(a_val: &BigInt, b_val: &BigInt) -> BigInt {
    let ha = (BigInt::from(4) * a_val * a_val * a_val).abs();
    let hb = BigInt::from(27) * b_val * b_val;
    ha.max(hb)
}

pub fn height_h(spec: &FamilySpec, a: &BigInt, b: &BigInt) -> BigInt {
    naive_height(&spec.eval_a(a, b), &spec.eval_b(a, b))
}

fn pow_t<T: IntScalar>(base: &T, e: u32) -> T {
    (0..e).fold(T::one(), |acc, _| acc * base.clone())
}

fn strip<T: IntScalar>(n: &mut T, p: &T) -> u32 {
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        *n = q;
        v += 1;
    }
}

/// Largest `m` with `m^4 | A` and `m^6 | B`; a zero entry imposes no
/// condition.
///
/// Trial division over the part that can matter (`gcd(A, B)`, or the
/// nonzero entry), stopping once `p^4` (resp. `p^6`) exceeds what is left.
pub fn minimality_defect<T: IntScalar>(a_val: &T, b_val: &T) -> Result<T, LatticeError> {
    let (na, nb) = (a_val.abs(), b_val.abs());
    let (mut rest, exp) = match (na.is_zero(), nb.is_zero()) {
        (true, true) => return Err(LatticeError::BothZero),
        (true, false) => (nb.clone(), 6u32),
        (false, true) => (na.clone(), 4u32),
        (false, false) => (na.gcd(&nb), 4u32),
    };
    let mut m = T::one();
    let mut check = |p: T, rest: &mut T| {
        if !(rest.clone() % p.clone()).is_zero() {
            return;
        }
        strip(rest, &p);
        let k = match (na.is_zero(), nb.is_zero()) {
            (true, _) => strip(&mut nb.clone(), &p) / 6,
            (_, true) => strip(&mut na.clone(), &p) / 4,
            _ => (strip(&mut na.clone(), &p) / 4).min(strip(&mut nb.clone(), &p) / 6),
        };
        m = m.clone() * pow_t(&p, k);
    };
    let fits = |p: &T, rest: &T| pow_t(p, exp) <= *rest;
    for &p in small_primes() {
        let p = T::from_u64(p).unwrap();
        if !fits(&p, &rest) {
            return Ok(m);
        }
        check(p, &mut rest);
    }
    let mut p = T::from_u64(small_primes().last().unwrap() + 2).unwrap();
    let two = T::from_u64(2).unwrap();
    while fits(&p, &rest) {
        check(p.clone(), &mut rest);
        p = p + two.clone();
    }
    Ok(m)
}

/// Minimality defect computed with `i128` when both values fit.
pub fn minimality_defect_big(a_val: &BigInt, b_val: &BigInt) -> Result<BigInt, LatticeError> {
    match (a_val.to_i128(), b_val.to_i128()) {
        (Some(x), Some(y)) if x.unsigned_abs() < (1u128 << 126) && y.unsigned_abs() < (1u128 << 126) => {
            minimality_defect(&x, &y).map(BigInt::from)
        }
        _ => minimality_defect(a_val, b_val),
    }
}

/// `H(A, B) / md^12`.
pub fn curve_height(a_val: &BigInt, b_val: &BigInt) -> Result<BigInt, LatticeError> {
    let md = minimality_defect_big(a_val, b_val)?;
    Ok(naive_height(a_val, b_val) / md.pow(12))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoundingBox {
    pub a_max: i64,
    pub b_max: i64,
}

/// `X^(1/d)` in floating point.
pub fn root_of_height(x: &BigInt, d: usize) -> f64 {
    (ln_big(x) / d as f64).exp()
}

/// Integer box `|a| <= a_max, 1 <= b <= b_max` containing every pair with
/// `H(a,b) <= X`.
pub fn bounding_box(spec: &FamilySpec, x: &BigInt, margin: f64) -> Result<BoundingBox, LatticeError> {
    if x < &BigInt::one() {
        return Err(LatticeError::BadHeight);
    }
    let (ru, rv) = region_extent::<f64>(spec)?;
    let scale = root_of_height(x, spec.d);
    let form = HeightForm::<f64>::new(spec);
    let ln_x = ln_big(x);
    let mut margin = margin.max(0.0);
    for _ in 0..6 {
        let a_max = ((1.0 + margin) * scale * ru).ceil() as i64;
        let b_max = ((1.0 + margin) * scale * rv).ceil().max(1.0) as i64;
        if box_boundary_clear(&form, spec.d, ln_x, a_max as f64, b_max as f64) {
            return Ok(BoundingBox { a_max, b_max });
        }
        margin = 2.0 * margin + 0.01;
    }
    Err(LatticeError::BoxCheck)
}

/// `H > X` on a sampling of the three box sides away from `v = 0`.
fn box_boundary_clear(form: &HeightForm<f64>, d: usize, ln_x: f64, a_max: f64, b_max: f64) -> bool {
    let samples = 2000;
    let above = |u: f64, v: f64| {
        let r = u.hypot(v);
        let h = form.on_circle(v.atan2(u));
        h.ln() + d as f64 * r.ln() > ln_x
    };
    (0..=samples).all(|k| {
        let s = k as f64 / samples as f64;
        above(a_max, s * b_max) && above(-a_max, s * b_max) && above(-a_max + 2.0 * s * a_max, b_max)
    })
}

fn gcd_i64(a: i64, b: i64) -> u64 {
    (a.unsigned_abs()).gcd(&b.unsigned_abs())
}

fn make_record(a: i64, b: i64, a_val: BigInt, b_val: BigInt, height: BigInt) -> Result<CurveRecord, LatticeError> {
    let md = minimality_defect_big(&a_val, &b_val)?;
    let four_a3 = BigInt::from(4) * &a_val * &a_val * &a_val;
    let nonsingular = !(four_a3 + BigInt::from(27) * &b_val * &b_val).is_zero();
    Ok(CurveRecord {
        a,
        b,
        md: md.to_u64().expect("minimality defect fits in u64"),
        coprime: gcd_i64(a, b) == 1,
        nonsingular,
        a_val,
        b_val,
        height,
    })
}

/// Every pair in the row `b` with `H(a,b) <= X`, ascending in `a`.
fn scan_row(spec: &FamilySpec, b: i64, a_max: i64, x: &BigInt) -> Result<Vec<CurveRecord>, LatticeError> {
    let bb = BigInt::from(b);
    // coefficients of A(., b), B(., b) as polynomials in a
    let row = |form: &crate::Form| -> Vec<BigInt> {
        let n = form.degree();
        form.coeffs().iter().enumerate().map(|(i, c)| c * bb.pow((n - i) as u32)).collect()
    };
    let ra = row(&spec.a);
    let rb = row(&spec.b);
    let horner = |c: &[BigInt], a: &BigInt| c.iter().rev().fold(BigInt::zero(), |acc, k| acc * a + k);
    let mut out = Vec::new();
    for a in -a_max..=a_max {
        let ab = BigInt::from(a);
        let a_val = horner(&ra, &ab);
        let b_val = horner(&rb, &ab);
        let h = naive_height(&a_val, &b_val);
        if &h <= x {
            out.push(make_record(a, b, a_val, b_val, h)?);
        }
    }
    Ok(out)
}

/// `F(X)`: all `(a, b)` with `b >= 1` and `H(a,b) <= X`, sorted by `(b, a)`.
pub fn enumerate_f(spec: &FamilySpec, x: &BigInt) -> Result<Vec<CurveRecord>, LatticeError> {
    let bx = bounding_box(spec, x, 0.02)?;
    enumerate_in_box(spec, x, bx)
}

/// Same as [`enumerate_f`] over an explicit box (no bounding logic).
pub fn enumerate_in_box(spec: &FamilySpec, x: &BigInt, bx: BoundingBox) -> Result<Vec<CurveRecord>, LatticeError> {
    let rows: Vec<Result<Vec<CurveRecord>, LatticeError>> =
        (1..=bx.b_max).into_par_iter().map(|b| scan_row(spec, b, bx.a_max, x)).collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// `C(X)`: coprime, nonsingular and minimal members of `F(X)`.
pub fn enumerate_c(spec: &FamilySpec, x: &BigInt) -> Result<Vec<CurveRecord>, LatticeError> {
    Ok(enumerate_f(spec, x)?.into_iter().filter(CurveRecord::in_c).collect())
}

fn smallest_prime_factor(n: u64) -> u64 {
    if n <= 1 {
        return u64::MAX;
    }
    for &p in small_primes() {
        if p * p > n {
            return n;
        }
        if n % p == 0 {
            return p;
        }
    }
    let mut p = small_primes().last().unwrap() + 2;
    while p * p <= n {
        if n % p == 0 {
            return p;
        }
        p += 2;
    }
    n
}

/// Whether a record survives the local conditions at every prime `<= z`.
/// Both conditions at `ell` fail exactly when `ell` divides `gcd(a,b)` or
/// the minimality defect.
pub fn in_dz(rec: &CurveRecord, z: u64) -> bool {
    smallest_prime_factor(gcd_i64(rec.a, rec.b)) > z && smallest_prime_factor(rec.md) > z
}

pub fn count_dz_records(records: &[CurveRecord], z: u64) -> u64 {
    records.iter().filter(|r| in_dz(r, z)).count() as u64
}

pub fn count_dz(spec: &FamilySpec, x: &BigInt, z: u64) -> Result<u64, LatticeError> {
    Ok(count_dz_records(&enumerate_f(spec, x)?, z))
}

pub fn summarize(x: &BigInt, records: &[CurveRecord]) -> CountSummary {
    let in_c: Vec<&CurveRecord> = records.iter().filter(|r| r.in_c()).collect();
    let distinct: HashSet<(&BigInt, &BigInt)> = in_c.iter().map(|r| (&r.a_val, &r.b_val)).collect();
    CountSummary {
        x: x.clone(),
        count_f: records.len() as u64,
        count_d: records.iter().filter(|r| r.in_d()).count() as u64,
        count_c: in_c.len() as u64,
        distinct_models: distinct.len() as u64,
    }
}

pub fn count_summary(spec: &FamilySpec, x: &BigInt) -> Result<CountSummary, LatticeError> {
    Ok(summarize(x, &enumerate_f(spec, x)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

/// External record row: big integers as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordRow {
    pub a: i64,
    pub b: i64,
    #[serde(rename = "A")]
    pub a_val: String,
    #[serde(rename = "B")]
    pub b_val: String,
    #[serde(rename = "H")]
    pub height: String,
    pub md: u64,
    pub in_c: bool,
}

impl From<&CurveRecord> for RecordRow {
    fn from(r: &CurveRecord) -> Self {
        RecordRow {
            a: r.a,
            b: r.b,
            a_val: r.a_val.to_string(),
            b_val: r.b_val.to_string(),
            height: r.height.to_string(),
            md: r.md,
            in_c: r.in_c(),
        }
    }
}

// serde's rename for the in_C key
#[derive(Serialize, Deserialize)]
struct RowWire {
    a: i64,
    b: i64,
    #[serde(rename = "A")]
    a_val: String,
    #[serde(rename = "B")]
    b_val: String,
    #[serde(rename = "H")]
    height: String,
    md: u64,
    #[serde(rename = "in_C")]
    in_c: bool,
}

impl From<&RecordRow> for RowWire {
    fn from(r: &RecordRow) -> Self {
        RowWire {
            a: r.a,
            b: r.b,
            a_val: r.a_val.clone(),
            b_val: r.b_val.clone(),
            height: r.height.clone(),
            md: r.md,
            in_c: r.in_c,
        }
    }
}

impl From<RowWire> for RecordRow {
    fn from(r: RowWire) -> Self {
        RecordRow { a: r.a, b: r.b, a_val: r.a_val, b_val: r.b_val, height: r.height, md: r.md, in_c: r.in_c }
    }
}

/// Writes rows in the order given (enumeration order is already `(b, a)`).
pub fn write_records<'a, W: Write>(
    records: impl IntoIterator<Item = &'a CurveRecord>,
    sink: W,
    format: RecordFormat,
) -> Result<usize, LatticeError> {
    let rows: Vec<RecordRow> = records.into_iter().map(RecordRow::from).collect();
    write_rows(&rows, sink, format)
}

pub fn write_rows<W: Write>(rows: &[RecordRow], mut sink: W, format: RecordFormat) -> Result<usize, LatticeError> {
    match format {
        RecordFormat::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut sink, &RowWire::from(r)).map_err(|e| LatticeError::Parse(e.to_string()))?;
                sink.write_all(b"\n")?;
            }
            sink.flush()?;
        }
        RecordFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
            w.write_record(["a", "b", "A", "B", "H", "md", "in_C"]).map_err(csv_err)?;
            for r in rows {
                w.serialize(RowWire::from(r)).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    Ok(rows.len())
}

fn csv_err(e: csv::Error) -> LatticeError {
    LatticeError::Parse(e.to_string())
}

pub fn read_records<R: BufRead>(source: R, format: RecordFormat) -> Result<Vec<RecordRow>, LatticeError> {
    match format {
        RecordFormat::Jsonl => source
            .lines()
            .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
            .map(|l| {
                let l = l?;
                serde_json::from_str::<RowWire>(&l).map(RecordRow::from).map_err(|e| LatticeError::Parse(e.to_string()))
            })
            .collect(),
        RecordFormat::Csv => {
            let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
            r.deserialize::<RowWire>().map(|row| row.map(RecordRow::from).map_err(csv_err)).collect()
        }
    }
}
