//! Area of the real region `R = {v > 0, H(u,v) <= 1}` and related constants.
//!
//! The height form `H(u,v) = max(4|A|^3, 27|B|^2)` is homogeneous of degree
//! `d`, so `R` is star-shaped with radial boundary `r(theta) = H(theta)^(-1/d)`
//! and `Area(R) = 1/2 * int_0^pi H(theta)^(-2/d) dtheta`. A brute cell count
//! is kept alongside as an independent check of the quadrature.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::family::FamilySpec;
use crate::scalar::{big_to_real, Real};
use crate::Form;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AreaError {
    #[error("height form is not positive at theta = {theta} (region unbounded)")]
    NonPositiveHeight { theta: f64 },
    #[error("C vanishes on the unit circle at theta = {theta}")]
    CVanishes { theta: f64 },
    #[error("quadrature did not reach tolerance {tol:e} within {budget} evaluations")]
    Budget { tol: f64, budget: usize },
    #[error("tolerance must be positive")]
    BadTolerance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaMethod {
    PolarAdaptive,
    Grid,
}

impl AreaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AreaMethod::PolarAdaptive => "polar-adaptive",
            AreaMethod::Grid => "grid",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaEstimate<F> {
    pub value: F,
    pub err: F,
    pub method: AreaMethod,
    pub evaluations: usize,
}

/// `A` and `B` with coefficients rounded to `F`.
#[derive(Clone, Debug)]
pub struct HeightForm<F> {
    a: Vec<F>,
    b: Vec<F>,
    a_abs: Vec<F>,
    b_abs: Vec<F>,
    pub d: usize,
}

fn to_real_coeffs<F: Real>(p: &Form) -> Vec<F> {
    p.coeffs().iter().map(big_to_real).collect()
}

/// Homogeneous Horner in floating point; `c[i]` multiplies `u^i v^(n-i)`.
fn eval_form<F: Real>(c: &[F], u: F, v: F) -> F {
    let n = c.len() - 1;
    let mut acc = c[n];
    let mut vp = F::one();
    for i in (0..n).rev() {
        vp = vp * v;
        acc = acc * u + c[i] * vp;
    }
    acc
}

fn gamma<F: Real>(k: usize) -> F {
    let ke = F::from_usize(k).unwrap() * F::epsilon();
    ke / (F::one() - ke)
}

impl<F: Real> HeightForm<F> {
    pub fn new(spec: &FamilySpec) -> Self {
        Self::from_forms(&spec.a, &spec.b, spec.d)
    }

    pub fn from_forms(a: &Form, b: &Form, d: usize) -> Self {
        let a: Vec<F> = to_real_coeffs(a);
        let b: Vec<F> = to_real_coeffs(b);
        HeightForm {
            a_abs: a.iter().map(|x| x.abs()).collect(),
            b_abs: b.iter().map(|x| x.abs()).collect(),
            a,
            b,
            d,
        }
    }

    pub fn eval_ab(&self, u: F, v: F) -> (F, F) {
        (eval_form(&self.a, u, v), eval_form(&self.b, u, v))
    }

    pub fn height(&self, u: F, v: F) -> F {
        let (a, b) = self.eval_ab(u, v);
        let four = F::lit(4.0);
        let tw7 = F::lit(27.0);
        (four * a.abs().powi(3)).max(tw7 * b * b)
    }

    /// `H(u,v) <= 1`.
    pub fn inside(&self, u: F, v: F) -> bool {
        self.height(u, v) <= F::one()
    }

    /// Height on the unit circle together with a rounding-error bound from
    /// the coefficient magnitudes.
    pub fn on_circle_with_err(&self, theta: F) -> (F, F) {
        let (u, v) = (theta.cos(), theta.sin());
        let (a, b) = self.eval_ab(u, v);
        let (ua, va) = (u.abs(), v.abs());
        let ea = gamma::<F>(2 * self.a.len() + 2) * eval_form(&self.a_abs, ua, va);
        let eb = gamma::<F>(2 * self.b.len() + 2) * eval_form(&self.b_abs, ua, va);
        let four = F::lit(4.0);
        let tw7 = F::lit(27.0);
        let ha = four * a.abs().powi(3);
        let hb = tw7 * b * b;
        let ha_hi = four * (a.abs() + ea).powi(3);
        let hb_hi = tw7 * (b.abs() + eb).powi(2);
        let h = ha.max(hb);
        let err = (ha_hi - ha).max(hb_hi - hb) + F::lit(8.0) * F::epsilon() * h;
        (h, err)
    }

    pub fn on_circle(&self, theta: F) -> F {
        self.on_circle_with_err(theta).0
    }
}

/// Height form at angle `theta`; errors if it is not strictly positive.
pub fn h_form<F: Real>(spec: &FamilySpec, theta: F) -> Result<F, AreaError> {
    let h = HeightForm::<F>::new(spec).on_circle(theta);
    if h > F::zero() {
        Ok(h)
    } else {
        Err(AreaError::NonPositiveHeight { theta: theta.to_f64().unwrap() })
    }
}

/// Adaptive Simpson on `[lo, hi]` over `panels` equal starting panels,
/// each refined independently with its share of the tolerance. Returns
/// `(value, error estimate, evaluations)`.
pub fn adaptive_simpson<F: Real>(
    f: &(impl Fn(F) -> F + Sync),
    lo: F,
    hi: F,
    tol: F,
    panels: usize,
    budget: usize,
) -> Result<(F, F, usize), AreaError> {
    if !(tol > F::zero()) {
        return Err(AreaError::BadTolerance);
    }
    let n = F::from_usize(panels).unwrap();
    let width = (hi - lo) / n;
    let per_panel_tol = tol / n;
    let per_panel_budget = budget / panels;
    let results: Vec<Option<(F, F, usize)>> = (0..panels)
        .into_par_iter()
        .map(|k| {
            let a = lo + width * F::from_usize(k).unwrap();
            let b = if k + 1 == panels { hi } else { a + width };
            let fa = f(a);
            let fb = f(b);
            let m = (a + b) / F::lit(2.0);
            let fm = f(m);
            let whole = simpson(a, b, fa, fm, fb);
            let mut evals = 3;
            let mut err = F::zero();
            let v = refine(f, a, b, fa, fm, fb, whole, per_panel_tol, 48, &mut evals, &mut err, per_panel_budget)?;
            Some((v, err, evals))
        })
        .collect();
    let mut value = F::zero();
    let mut err = F::zero();
    let mut evals = 0;
    for r in results {
        let (v, e, k) = r.ok_or(AreaError::Budget { tol: tol.to_f64().unwrap(), budget })?;
        value = value + v;
        err = err + e;
        evals += k;
    }
    Ok((value, err, evals))
}

fn simpson<F: Real>(a: F, b: F, fa: F, fm: F, fb: F) -> F {
    (b - a) / F::lit(6.0) * (fa + F::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Real>(
    f: &impl Fn(F) -> F,
    a: F,
    b: F,
    fa: F,
    fm: F,
    fb: F,
    whole: F,
    tol: F,
    depth: u32,
    evals: &mut usize,
    err: &mut F,
    budget: usize,
) -> Option<F> {
    let two = F::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if *evals > budget {
        return None;
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let fifteen = F::lit(15.0);
    if depth == 0 || delta.abs() <= fifteen * tol {
        if depth == 0 && delta.abs() > fifteen * tol {
            return None;
        }
        *err = *err + delta.abs() / fifteen;
        return Some(left + right + delta / fifteen);
    }
    let l = refine(f, a, m, fa, flm, fm, left, tol / two, depth - 1, evals, err, budget)?;
    let r = refine(f, m, b, fm, frm, fb, right, tol / two, depth - 1, evals, err, budget)?;
    Some(l + r)
}

/// Area of `{v > 0, H <= 1}` for any positive degree-`d` form given by its
/// values on the unit circle.
pub fn polar_area_of<F: Real>(
    height_on_circle: &(impl Fn(F) -> (F, F) + Sync),
    d: usize,
    tol: F,
) -> Result<AreaEstimate<F>, AreaError> {
    let expo = -F::lit(2.0) / F::from_usize(d).unwrap();
    let half = F::lit(0.5);
    let bad = std::sync::Mutex::new(None);
    let worst_rel = std::sync::Mutex::new(F::zero());
    let integrand = |theta: F| {
        let (h, e) = height_on_circle(theta);
        if !(h > F::zero()) {
            *bad.lock().unwrap() = Some(theta.to_f64().unwrap());
            return F::zero();
        }
        let rel = e / h;
        let mut w = worst_rel.lock().unwrap();
        if rel > *w {
            *w = rel;
        }
        half * h.powf(expo)
    };
    let (value, quad_err, evaluations) =
        adaptive_simpson(&integrand, F::zero(), F::PI(), tol, 64, 50_000_000)?;
    if let Some(theta) = bad.into_inner().unwrap() {
        return Err(AreaError::NonPositiveHeight { theta });
    }
    // integrand relative error is at most (2/d) times that of H
    let rel = worst_rel.into_inner().unwrap() * (-expo);
    let err = quad_err + value.abs() * rel + F::lit(64.0) * F::epsilon() * value.abs();
    Ok(AreaEstimate { value, err, method: AreaMethod::PolarAdaptive, evaluations })
}

pub fn area_polar<F: Real>(spec: &FamilySpec, tol: F) -> Result<AreaEstimate<F>, AreaError> {
    let form = HeightForm::<F>::new(spec);
    polar_area_of(&|t| form.on_circle_with_err(t), spec.d, tol)
}

/// Extreme values of `f` on `[lo, hi]`: dense sampling then golden-section
/// refinement around the best samples.
pub fn extremize<F: Real>(f: &(impl Fn(F) -> F + Sync), lo: F, hi: F, samples: usize) -> (F, F) {
    let step = (hi - lo) / F::from_usize(samples).unwrap();
    let values: Vec<F> = (0..=samples).into_par_iter().map(|i| f(lo + step * F::from_usize(i).unwrap())).collect();
    let (mut imin, mut imax) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    let bracket = |i: usize| {
        let a = if i == 0 { lo } else { lo + step * F::from_usize(i - 1).unwrap() };
        let b = if i == samples { hi } else { lo + step * F::from_usize(i + 1).unwrap() };
        (a, b)
    };
    let (a, b) = bracket(imin);
    let min = golden(f, a, b, false).min(values[imin]);
    let (a, b) = bracket(imax);
    let max = golden(f, a, b, true).max(values[imax]);
    (min, max)
}

fn golden<F: Real>(f: &impl Fn(F) -> F, mut a: F, mut b: F, maximize: bool) -> F {
    let sign = if maximize { -F::one() } else { F::one() };
    let g = |x: F| sign * f(x);
    let inv_phi = F::lit(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = g(d);
        }
    }
    sign * fc.min(fd)
}

/// Largest `|u|` and largest `v` over `R`.
pub fn region_extent<F: Real>(spec: &FamilySpec) -> Result<(F, F), AreaError> {
    let form = HeightForm::<F>::new(spec);
    let dinv = F::one() / F::from_usize(spec.d).unwrap();
    let mut bad = None;
    for i in 0..=720 {
        let theta = F::PI() * F::from_usize(i).unwrap() / F::lit(720.0);
        if !(form.on_circle(theta) > F::zero()) {
            bad = Some(theta.to_f64().unwrap());
        }
    }
    if let Some(theta) = bad {
        return Err(AreaError::NonPositiveHeight { theta });
    }
    let radius = |t: F| form.on_circle(t).powf(-dinv);
    let (_, ru) = extremize(&|t: F| radius(t) * t.cos().abs(), F::zero(), F::PI(), 8192);
    let (_, rv) = extremize(&|t: F| radius(t) * t.sin(), F::zero(), F::PI(), 8192);
    Ok((ru, rv))
}

/// Cell count of `inside` on an `n x n` grid over `[-u_max, u_max] x [0, v_max]`.
/// The error is the area of cells whose corners disagree.
pub fn grid_area_of<F: Real>(
    inside: &(impl Fn(F, F) -> bool + Sync),
    u_max: F,
    v_max: F,
    n: usize,
) -> AreaEstimate<F> {
    let du = F::lit(2.0) * u_max / F::from_usize(n).unwrap();
    let dv = v_max / F::from_usize(n).unwrap();
    let half = F::lit(0.5);
    let corner_row = |j: usize| -> Vec<bool> {
        let v = dv * F::from_usize(j).unwrap();
        (0..=n).map(|i| inside(-u_max + du * F::from_usize(i).unwrap(), v)).collect()
    };
    let (centers, boundary) = (0..n)
        .into_par_iter()
        .map(|j| {
            let v = dv * (F::from_usize(j).unwrap() + half);
            let lower = corner_row(j);
            let upper = corner_row(j + 1);
            let mut c = 0usize;
            let mut b = 0usize;
            for i in 0..n {
                let u = -u_max + du * (F::from_usize(i).unwrap() + half);
                if v > F::zero() && inside(u, v) {
                    c += 1;
                }
                let k = [lower[i], lower[i + 1], upper[i], upper[i + 1]];
                if k.iter().any(|&x| x != k[0]) {
                    b += 1;
                }
            }
            (c, b)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    let cell = du * dv;
    AreaEstimate {
        value: cell * F::from_usize(centers).unwrap(),
        err: cell * F::from_usize(boundary).unwrap(),
        method: AreaMethod::Grid,
        evaluations: n * n + 2 * n * (n + 1),
    }
}

pub fn area_grid<F: Real>(spec: &FamilySpec, n: usize) -> Result<AreaEstimate<F>, AreaError> {
    assert!(n >= 16, "grid resolution must be at least 16");
    let (ru, rv) = region_extent::<F>(spec)?;
    let pad = F::lit(1.02);
    let form = HeightForm::<F>::new(spec);
    Ok(grid_area_of(&|u, v| form.inside(u, v), ru * pad, rv * pad, n))
}

/// Bracketing constants for `H / C^(d/r)` on the unit circle, with a
/// relative slack of `1e-8` applied outward.
pub fn comparison_constants_of<F: Real>(ratio_on_circle: &(impl Fn(F) -> F + Sync)) -> (F, F) {
    let (lo, hi) = extremize(ratio_on_circle, F::zero(), F::PI(), 20_000);
    let slack = F::lit(1e-8);
    (lo * (F::one() - slack), hi * (F::one() + slack))
}

pub fn height_comparison_constants<F: Real>(spec: &FamilySpec) -> Result<(F, F), AreaError> {
    let form = HeightForm::<F>::new(spec);
    let c: Vec<F> = to_real_coeffs(&spec.c);
    let expo = F::from_usize(spec.d).unwrap() / F::from_usize(spec.r).unwrap();
    for i in 0..=720 {
        let theta = F::PI() * F::from_usize(i).unwrap() / F::lit(720.0);
        if !(eval_form(&c, theta.cos(), theta.sin()) > F::zero()) {
            return Err(AreaError::CVanishes { theta: theta.to_f64().unwrap() });
        }
    }
    let ratio = |t: F| form.on_circle(t) / eval_form(&c, t.cos(), t.sin()).powf(expo);
    Ok(comparison_constants_of(&ratio))
}

/// External area report.
#[derive(Clone, Debug, Serialize)]
pub struct AreaReport {
    pub family: String,
    pub method: &'static str,
    pub value: f64,
    pub err: f64,
    pub evaluations: usize,
}

impl AreaReport {
    pub fn new(family: &str, est: &AreaEstimate<f64>) -> Self {
        AreaReport {
            family: family.to_string(),
            method: est.method.as_str(),
            value: est.value,
            err: est.err,
            evaluations: est.evaluations,
        }
    }
}
