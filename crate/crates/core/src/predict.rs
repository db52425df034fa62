//! Leading constant, predicted-versus-actual counts, exponent fits and the
//! built-in verification suite.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::area::{area_polar, AreaError, AreaEstimate};
use crate::family::{builtin, j_invariant, Builtin, FamilySpec};
use crate::lattice::{count_dz_records, enumerate_f, minimality_defect, summarize, CountSummary, LatticeError};
use crate::localdensity::{
    count_roots_modp, density_closed, density_def, density_via_c, euler_product, excluded_full_scan,
    r_formula_f1, rational_to_f64, DefMethod, DensityError, DensitySource, EulerBracket, GoldenCache,
};
use crate::arith::primes_up_to;
use crate::poly::Side;
use crate::scalar::{ln_big, Real};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Area(#[from] AreaError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("height ladder must be strictly ascending")]
    LadderOrder,
    #[error("exponent fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("exponent fit needs positive values")]
    NonPositive,
    #[error("report output: {0}")]
    Output(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn scale(&self, k: f64) -> Interval {
        Interval { lo: self.lo * k, hi: self.hi * k }
    }
}

// one ulp of slack on each side after rounding a rational
fn widen(lo: f64, hi: f64) -> Interval {
    Interval { lo: lo * (1.0 - 4.0 * f64::EPSILON), hi: hi * (1.0 + 4.0 * f64::EPSILON) }
}

#[derive(Clone, Debug)]
pub struct LeadingConstant {
    pub constant: Interval,
    pub area: AreaEstimate<f64>,
    pub euler: EulerBracket,
}

/// `[euler.lower * (area - err), euler.upper * (area + err)]`.
pub fn leading_constant(
    spec: &FamilySpec,
    z: u64,
    tol: f64,
    cache: Option<&GoldenCache>,
) -> Result<LeadingConstant, PredictError> {
    let euler = euler_product(spec, z, DensitySource::Closed, cache)?;
    let area = area_polar::<f64>(spec, tol)?;
    let constant = widen(
        rational_to_f64(&euler.lower) * (area.value - area.err),
        rational_to_f64(&euler.upper) * (area.value + area.err),
    );
    Ok(LeadingConstant { constant, area, euler })
}

/// `X^(2/d)` as a float.
pub fn growth(x: &BigInt, d: usize) -> f64 {
    (2.0 * ln_big(x) / d as f64).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit<F> {
    pub slope: F,
    pub intercept: F,
    pub max_residual: F,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_exponent<F: Real>(points: &[(F, F)]) -> Result<ExponentFit<F>, PredictError> {
    if points.iter().any(|&(x, y)| x <= F::zero() || y <= F::zero()) {
        return Err(PredictError::NonPositive);
    }
    let logs: Vec<(F, F)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    fit_log_points(&logs)
}

/// Exponent fit of integer counts at big-integer heights.
pub fn fit_counts(points: &[(BigInt, u64)]) -> Result<ExponentFit<f64>, PredictError> {
    if points.iter().any(|(x, y)| *y == 0 || x <= &BigInt::zero()) {
        return Err(PredictError::NonPositive);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (ln_big(x), (*y as f64).ln())).collect();
    fit_log_points(&logs)
}

pub fn fit_log_points<F: Real>(logs: &[(F, F)]) -> Result<ExponentFit<F>, PredictError> {
    if logs.len() < 3 {
        return Err(PredictError::TooFewPoints(logs.len()));
    }
    let n = F::from_usize(logs.len()).unwrap();
    let mx = logs.iter().fold(F::zero(), |s, p| s + p.0) / n;
    let my = logs.iter().fold(F::zero(), |s, p| s + p.1) / n;
    let sxy = logs.iter().fold(F::zero(), |s, p| s + (p.0 - mx) * (p.1 - my));
    let sxx = logs.iter().fold(F::zero(), |s, p| s + (p.0 - mx) * (p.0 - mx));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = logs.iter().fold(F::zero(), |m, p| m.max((p.1 - intercept - slope * p.0).abs()));
    Ok(ExponentFit { slope, intercept, max_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderRow {
    #[serde(flatten)]
    pub counts: CountSummary,
    pub count_dz: u64,
    /// `Area * X^(2/d)` with the quadrature error.
    pub pred_f: Interval,
    /// Full constant times `X^(2/d)`.
    pub pred_c: Interval,
    /// `count_F / (Area X^(2/d))`
    pub ratio_f: f64,
    /// `count_C / mid(pred_c)`
    pub ratio_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PredictionReport {
    pub family: String,
    pub d: usize,
    pub z: u64,
    pub area: f64,
    pub area_err: f64,
    pub euler_lower: f64,
    pub euler_upper: f64,
    pub constant: Interval,
    pub rows: Vec<LadderRow>,
    pub exponent_fit_f: Option<ExponentFit<f64>>,
    pub exponent_fit_c: Option<ExponentFit<f64>>,
}

/// Counts along an ascending ladder of heights next to their predictions.
pub fn ratio_table(
    spec: &FamilySpec,
    ladder: &[BigInt],
    z: u64,
    tol: f64,
    cache: Option<&GoldenCache>,
) -> Result<PredictionReport, PredictError> {
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PredictError::LadderOrder);
    }
    let lc = leading_constant(spec, z, tol, cache)?;
    let area_iv = Interval { lo: lc.area.value - lc.area.err, hi: lc.area.value + lc.area.err };
    let rows: Vec<LadderRow> = ladder
        .par_iter()
        .map(|x| -> Result<LadderRow, PredictError> {
            let records = enumerate_f(spec, x)?;
            let counts = summarize(x, &records);
            let g = growth(x, spec.d);
            let pred_c = lc.constant.scale(g);
            Ok(LadderRow {
                count_dz: count_dz_records(&records, z),
                pred_f: area_iv.scale(g),
                pred_c,
                ratio_f: counts.count_f as f64 / (lc.area.value * g),
                ratio_c: counts.count_c as f64 / pred_c.mid(),
                counts,
            })
        })
        .collect::<Result<_, _>>()?;
    let fit = |f: fn(&LadderRow) -> u64| {
        let pts: Vec<(BigInt, u64)> = rows.iter().map(|r| (r.counts.x.clone(), f(r))).collect();
        fit_counts(&pts).ok()
    };
    Ok(PredictionReport {
        family: spec.name.clone(),
        d: spec.d,
        z,
        area: lc.area.value,
        area_err: lc.area.err,
        euler_lower: rational_to_f64(&lc.euler.lower),
        euler_upper: rational_to_f64(&lc.euler.upper),
        constant: lc.constant,
        exponent_fit_f: fit(|r| r.counts.count_f),
        exponent_fit_c: fit(|r| r.counts.count_c),
        rows,
    })
}

impl PredictionReport {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), PredictError> {
        let err = |e: csv::Error| PredictError::Output(e.to_string());
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["X", "count_F", "count_Dz", "count_C", "pred_lo", "pred_hi", "ratio"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.counts.x.to_string(),
                r.counts.count_f.to_string(),
                r.count_dz.to_string(),
                r.counts.count_c.to_string(),
                format!("{:e}", r.pred_c.lo),
                format!("{:e}", r.pred_c.hi),
                format!("{}", r.ratio_c),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| PredictError::Output(e.to_string()))
    }
}

/// Heights used by the built-in checks: the counting check compares the
/// two ends, the fit uses the whole ladder.
pub fn default_ladder(d: usize) -> Vec<BigInt> {
    let exps: &[u32] = if d <= 18 { &[27, 30, 33, 36, 39, 42, 45] } else { &[36, 40, 44, 48, 52, 56, 60] };
    exps.iter().map(|&e| BigInt::from(10).pow(e)).collect()
}

/// `|count_F / (Area X^(2/d)) - 1|`
pub fn davenport_deviation(spec: &FamilySpec, x: &BigInt, area: f64) -> Result<f64, PredictError> {
    let n = enumerate_f(spec, x)?.len() as f64;
    Ok((n / (area * growth(x, spec.d)) - 1.0).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub family: String,
    pub reference: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn big(s: &str) -> BigInt {
    s.parse().unwrap()
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Reference values a family is checked against.
struct Reference {
    invariants: [BigInt; 4],
    sigma: Vec<u64>,
    /// `(l, excluded pairs mod l^6 or None, d_l)`
    exceptional: Vec<(u64, Option<u64>, BigRational)>,
    legendre_formula: bool,
    davenport: (u32, u32),
}

fn reference(which: Builtin) -> Reference {
    match which {
        Builtin::F1 => Reference {
            invariants: [
                -(BigInt::from(2).pow(12) * BigInt::from(3).pow(10)),
                BigInt::from(2).pow(10) * BigInt::from(3).pow(8),
                BigInt::from(2).pow(16) * BigInt::from(3).pow(9),
                BigInt::from(2).pow(20) * BigInt::from(3).pow(12),
            ],
            sigma: vec![2, 3],
            exceptional: vec![(2, Some(2048), q(1, 2)), (3, Some(177_147), q(2, 3))],
            legendre_formula: true,
            davenport: (36, 45),
        },
        Builtin::F2 => Reference {
            invariants: [
                big("1128443962982400"),
                big("1128443962982400"),
                big("512000"),
                big("64000000"),
            ],
            sigma: vec![2, 3, 5],
            exceptional: vec![(2, None, q(1, 2)), (3, None, q(8, 9)), (5, None, q(116, 125))],
            legendre_formula: false,
            davenport: (48, 60),
        },
    }
}

fn sigma_checks(spec: &FamilySpec, r: &Reference) -> Vec<Check> {
    let got = spec.invariants.as_array();
    let inv_ok = got.iter().zip(&r.invariants).all(|(a, b)| *a == b);
    let sigma: Vec<u64> = spec.sigma.iter().map(|p| p.to_u64().unwrap_or(0)).collect();
    vec![
        Check::new(
            "sigma-invariants",
            inv_ok,
            format!("{:?}", got.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
        ),
        Check::new("sigma-set", sigma == r.sigma, format!("{sigma:?}")),
    ]
}

fn exceptional_checks(spec: &FamilySpec, r: &Reference) -> Vec<Check> {
    r.exceptional
        .iter()
        .map(|(ell, excluded, value)| {
            let name = format!("density-{ell}");
            let structured = match density_def(spec, *ell, DefMethod::Structured) {
                Ok(v) => v.value,
                Err(e) => return Check::new(&name, false, e.to_string()),
            };
            let mut ok = &structured == value;
            let mut detail = format!("structured {structured}");
            if let Some(n) = excluded {
                let scanned = excluded_full_scan(&spec.a, &spec.b, *ell);
                ok &= scanned == *n;
                detail += &format!(", scan excludes {scanned} of {}", ell.pow(12));
            }
            Check::new(&name, ok, detail)
        })
        .collect()
}

fn legendre_check(spec: &FamilySpec) -> Check {
    let c = spec.c.dehomogenize(Side::VOne);
    let mut bad = Vec::new();
    let mut max_r = 0;
    for ell in primes_up_to(999).into_iter().filter(|&l| l >= 5) {
        let scan = count_roots_modp(&c, ell);
        let formula = r_formula_f1(ell);
        match (scan, formula) {
            (Ok(s), Ok(f)) if s == f => max_r = max_r.max(s),
            _ => bad.push(ell),
        }
    }
    Check::new("legendre-formula", bad.is_empty() && max_r <= 4, format!("max r = {max_r}, mismatches {bad:?}"))
}

fn triple_check(spec: &FamilySpec) -> Check {
    let mut detail = Vec::new();
    let mut ok = true;
    for ell in [7u64, 11] {
        let s = density_def(spec, ell, DefMethod::Structured).map(|v| v.value);
        let c = density_via_c(spec, ell).map(|v| v.value);
        let k = density_closed(spec, ell, None).map(|v| v.value);
        match (s, c, k) {
            (Ok(s), Ok(c), Ok(k)) if s == c && c == k => detail.push(format!("d_{ell} = {s}")),
            (s, c, k) => {
                ok = false;
                detail.push(format!("l = {ell}: {s:?} / {c:?} / {k:?}"));
            }
        }
    }
    Check::new("triple-agreement", ok, detail.join(", "))
}

/// `j(A(a,b), B(a,b))` against the family's `j`-map over minimal members.
fn jmap_check(spec: &FamilySpec, sample: usize) -> Check {
    if spec.j_num.is_none() {
        return Check::new("jmap-identity", false, "family has no j-map");
    }
    let x = BigInt::from(10).pow(if spec.d <= 18 { 36 } else { 48 });
    let records = match enumerate_f(spec, &x) {
        Ok(r) => r,
        Err(e) => return Check::new("jmap-identity", false, e.to_string()),
    };
    let members: Vec<_> = records.iter().filter(|r| r.in_c()).take(sample).collect();
    let bad = members
        .iter()
        .filter(|r| {
            let j = j_invariant(&r.a_val, &r.b_val);
            let m = spec.jmap_value(&BigInt::from(r.a), &BigInt::from(r.b));
            !matches!((j, m), (Ok(j), Ok(m)) if j == m)
        })
        .count();
    Check::new(
        "jmap-identity",
        bad == 0 && !members.is_empty(),
        format!("{} members checked, {bad} mismatches", members.len()),
    )
}

fn davenport_check(spec: &FamilySpec, (lo, hi): (u32, u32)) -> Check {
    let run = || -> Result<(f64, f64), PredictError> {
        let area = area_polar::<f64>(spec, 1e-10)?.value;
        Ok((
            davenport_deviation(spec, &BigInt::from(10).pow(lo), area)?,
            davenport_deviation(spec, &BigInt::from(10).pow(hi), area)?,
        ))
    };
    match run() {
        Ok((dev_lo, dev_hi)) => Check::new(
            "davenport",
            dev_hi <= 0.05 && dev_hi < dev_lo,
            format!("deviation {dev_lo:.4} at 1e{lo}, {dev_hi:.4} at 1e{hi}"),
        ),
        Err(e) => Check::new("davenport", false, e.to_string()),
    }
}

/// Every reproducible value for the built-in family `reference_family`,
/// evaluated on `spec` (normally the same family). Each check is reported
/// on its own.
pub fn verify_paper(spec: &FamilySpec, reference_family: Builtin) -> VerifyReport {
    let r = reference(reference_family);
    let mut checks = sigma_checks(spec, &r);
    checks.extend(exceptional_checks(spec, &r));
    if r.legendre_formula {
        checks.push(legendre_check(spec));
    }
    checks.push(triple_check(spec));
    checks.push(jmap_check(spec, 200));
    checks.push(davenport_check(spec, r.davenport));
    VerifyReport { family: spec.name.clone(), reference: format!("{reference_family:?}"), checks }
}

/// Built-in family whose forms equal those of `spec`, if any.
pub fn matching_builtin(spec: &FamilySpec) -> Option<Builtin> {
    [Builtin::F1, Builtin::F2].into_iter().find(|&b| {
        let r = builtin(b);
        r.a == spec.a && r.b == spec.b
    })
}

/// Independent minimality re-check: the largest `m` with `m^4 | A`,
/// `m^6 | B`, found by trying every `m` up to the fourth (or sixth) root.
pub fn md_by_scan(a_val: &BigInt, b_val: &BigInt) -> u64 {
    let bound = if a_val.is_zero() {
        (b_val.to_f64().unwrap().abs().powf(1.0 / 6.0) + 2.0) as u64
    } else {
        (a_val.to_f64().unwrap().abs().powf(0.25) + 2.0) as u64
    };
    (1..=bound)
        .filter(|&m| {
            let m = BigInt::from(m);
            (a_val % m.pow(4)).is_zero() && (b_val % m.pow(6)).is_zero()
        })
        .max()
        .unwrap_or(1)
}

/// `md` from the lattice module, as a `u64`.
pub fn md_fast(a_val: &BigInt, b_val: &BigInt) -> Option<u64> {
    minimality_defect(a_val, b_val).ok()?.to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_power_law_is_exact() {
        for d in [18usize, 24] {
            let e = 2.0 / d as f64;
            let pts: Vec<(f64, f64)> = (27..=45).step_by(3).map(|k| {
                let x = 10f64.powi(k);
                (x, 3.7 * x.powf(e))
            }).collect();
            let fit = fit_exponent(&pts).unwrap();
            assert!((fit.slope - e).abs() < 1e-12, "{}", fit.slope);
            assert!(fit.max_residual < 1e-9);
        }
    }

    #[test]
    fn synthetic_fit_f32() {
        let pts: Vec<(f32, f32)> = (1..=6).map(|k| {
            let x = 10f32.powi(k * 5);
            (x, 2.0 * x.powf(1.0 / 9.0))
        }).collect();
        assert!((fit_exponent(&pts).unwrap().slope - 1.0 / 9.0).abs() < 1e-5);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_exponent(&[(1.0, 1.0), (2.0, 2.0)]), Err(PredictError::TooFewPoints(2))));
        assert!(matches!(fit_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(PredictError::NonPositive)));
    }

    #[test]
    fn constant_at_sigma_bound() {
        let f1 = builtin(Builtin::F1);
        let lc = leading_constant(&f1, 3, 1e-10, None).unwrap();
        let expect = (lc.area.value + lc.area.err) / 3.0;
        assert!((lc.constant.hi - expect).abs() <= 1e-12 * expect);
        assert!(lc.constant.lo < lc.constant.hi);
    }

    #[test]
    fn constant_nests_with_larger_cutoff() {
        let f2 = builtin(Builtin::F2);
        let a = leading_constant(&f2, 5, 1e-10, None).unwrap();
        let b = leading_constant(&f2, 2000, 1e-10, None).unwrap();
        assert!(a.constant.lo <= b.constant.lo && b.constant.hi <= a.constant.hi);
    }

    #[test]
    fn tiny_heights_give_zero_counts() {
        let f1 = builtin(Builtin::F1);
        let rep = ratio_table(&f1, &[BigInt::from(1), BigInt::from(1000)], 3, 1e-8, None).unwrap();
        assert!(rep.rows.iter().all(|r| r.counts.count_f == 0 && r.ratio_c == 0.0));
        assert!(rep.exponent_fit_f.is_none());
        assert!(ratio_table(&f1, &[BigInt::from(9), BigInt::from(3)], 3, 1e-8, None).is_err());
    }

    #[test]
    fn md_scan_agrees() {
        for (a, b) in [(1, 1), (-48, 0), (-15552, 0), (16, 64), (0, 729), (81 * 5, 729 * 7)] {
            let (a, b) = (BigInt::from(a), BigInt::from(b));
            assert_eq!(md_by_scan(&a, &b), md_fast(&a, &b).unwrap());
        }
    }
}

