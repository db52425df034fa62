mod common;

use entangle_census::family::{builtin, Builtin};
use entangle_census::lattice::{
    count_dz_records, enumerate_f, height_h, minimality_defect, read_records, write_rows, RecordFormat, RecordRow,
};
use entangle_census::poly::{self, count_real_roots, discriminant, resultant};
use entangle_census::UniPoly;
use entangle_census::Form;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn from_roots(roots: &[i64]) -> UniPoly {
    roots.iter().fold(UniPoly::new(vec![BigInt::one()]), |acc, &r| acc.mul(&UniPoly::from_i64(&[-r, 1])))
}

fn small_poly() -> impl Strategy<Value = Vec<i64>> {
    (1usize..5).prop_flat_map(|n| (prop::collection::vec(-9i64..=9, n), prop_oneof![-9i64..=-1, 1i64..=9]))
        .prop_map(|(mut low, lead)| {
            low.push(lead);
            low
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn resultant_is_product_of_root_differences(
        r in prop::collection::vec(-6i64..=6, 1..4),
        s in prop::collection::vec(-6i64..=6, 1..4),
    ) {
        let expect: BigInt = r.iter().flat_map(|x| s.iter().map(move |y| BigInt::from(x - y))).product();
        prop_assert_eq!(resultant(&from_roots(&r), &from_roots(&s)).unwrap(), expect);
    }

    #[test]
    fn resultant_antisymmetry_and_multiplicativity(f in small_poly(), g in small_poly(), h in small_poly()) {
        let (f, g, h) = (UniPoly::from_i64(&f), UniPoly::from_i64(&g), UniPoly::from_i64(&h));
        let (m, n) = (f.degree().unwrap(), g.degree().unwrap());
        let fg = resultant(&f, &g).unwrap();
        let gf = resultant(&g, &f).unwrap();
        prop_assert_eq!(if (m * n) % 2 == 1 { -gf } else { gf }, fg.clone());
        let prod = resultant(&f.mul(&h), &g).unwrap();
        prop_assert_eq!(prod, fg * resultant(&h, &g).unwrap());
    }

    #[test]
    fn resultant_same_in_every_scalar(f in small_poly(), g in small_poly()) {
        let big = resultant(&UniPoly::from_i64(&f), &UniPoly::from_i64(&g)).unwrap();
        let wide = resultant(&poly::UniPoly::<i128>::new(f.iter().map(|&c| c as i128).collect()),
                             &poly::UniPoly::<i128>::new(g.iter().map(|&c| c as i128).collect())).unwrap();
        prop_assert_eq!(big, BigInt::from(wide));
    }

    #[test]
    fn discriminant_of_monic_from_roots(r in prop::collection::vec(-8i64..=8, 2..5)) {
        let mut expect = BigInt::one();
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                expect *= BigInt::from(r[i] - r[j]).pow(2);
            }
        }
        prop_assert_eq!(discriminant(&from_roots(&r)).unwrap(), expect);
    }

    #[test]
    fn sturm_counts_distinct_roots(r in prop::collection::btree_set(-20i64..=20, 1..6), extra in 1i64..5) {
        let r: Vec<i64> = r.into_iter().collect();
        // a positive quadratic contributes no real roots
        let p = from_roots(&r).mul(&UniPoly::from_i64(&[extra, 0, 1]));
        prop_assert_eq!(count_real_roots(&p).unwrap(), r.len());
    }

    #[test]
    fn gcd_divides_both(f in small_poly(), g in small_poly(), h in small_poly()) {
        let h = UniPoly::from_i64(&h);
        let (f, g) = (UniPoly::from_i64(&f).mul(&h), UniPoly::from_i64(&g).mul(&h));
        let d = f.gcd(&g);
        prop_assert!(f.exact_div(&d).is_some());
        prop_assert!(g.exact_div(&d).is_some());
        prop_assert!(d.degree().unwrap() >= h.degree().unwrap());
    }

    #[test]
    fn form_eval_matches_monomials(a in -1000i64..=1000, b in -1000i64..=1000) {
        for spec in [builtin(Builtin::F1), builtin(Builtin::F2)] {
            let (ba, bb) = (BigInt::from(a), BigInt::from(b));
            prop_assert_eq!(spec.eval_a(&ba, &bb), common::eval_monomials(&spec.a, a, b));
            prop_assert_eq!(spec.eval_b(&ba, &bb), common::eval_monomials(&spec.b, a, b));
        }
    }

    #[test]
    fn height_is_homogeneous(a in -500i64..=500, b in 1i64..=500, lambda in 2i64..=7) {
        let spec = builtin(Builtin::F1);
        let h = height_h(&spec, &BigInt::from(a), &BigInt::from(b));
        let scaled = height_h(&spec, &BigInt::from(lambda * a), &BigInt::from(lambda * b));
        prop_assert_eq!(scaled, h * BigInt::from(lambda).pow(spec.d as u32));
    }

    #[test]
    fn planted_minimality_defect(m in 1i64..=30, a in -50i64..=50, b in -50i64..=50) {
        prop_assume!(a != 0 || b != 0);
        let a_val = a * m.pow(4);
        let b_val = b * m.pow(6);
        let md = minimality_defect(&(a_val as i128), &(b_val as i128)).unwrap();
        let oracle = common::md_exhaustive(&BigInt::from(a_val), &BigInt::from(b_val));
        prop_assert_eq!(md as u64, oracle);
        prop_assert_eq!(md % m as i128, 0);
    }

    #[test]
    fn records_round_trip(rows in prop::collection::vec(
        (any::<i64>(), any::<i64>(), any::<i128>(), any::<i128>(), any::<u128>(), any::<u64>(), any::<bool>()), 0..20)
    ) {
        let rows: Vec<RecordRow> = rows
            .into_iter()
            .map(|(a, b, av, bv, h, md, in_c)| RecordRow {
                a, b, a_val: av.to_string(), b_val: bv.to_string(), height: h.to_string(), md, in_c,
            })
            .collect();
        for format in [RecordFormat::Jsonl, RecordFormat::Csv] {
            let mut buf = Vec::new();
            prop_assert_eq!(write_rows(&rows, &mut buf, format).unwrap(), rows.len());
            prop_assert_eq!(read_records(buf.as_slice(), format).unwrap(), rows.clone());
        }
    }
}

fn eval_mod(f: &Form, a: i64, b: i64, m: &BigInt) -> BigInt {
    let v = common::eval_monomials(f, a, b) % m;
    if v.is_negative() {
        v + m
    } else {
        v
    }
}

/// Off the exceptional set, `l^4 | A` and `l^6 | B` force `l^4 | C`. Half the
/// samples are planted near roots of `C` mod `l^4` so the hypothesis holds
/// often enough to matter.
#[test]
fn divisibility_lemma_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for which in [Builtin::F1, Builtin::F2] {
        let spec = builtin(which);
        for ell in [7i64, 11] {
            assert!(!spec.in_sigma(ell as u64));
            let l4 = ell.pow(4);
            let l6 = ell.pow(6);
            let (m4, m6) = (BigInt::from(l4), BigInt::from(l6));
            let roots: Vec<i64> = (0..l4).filter(|&t| eval_mod(&spec.c, t, 1, &m4).is_zero()).collect();
            let mut hits = 0;
            for k in 0..10_000 {
                let (a, b) = if k % 2 == 0 || roots.is_empty() {
                    (rng.gen_range(0..l6), rng.gen_range(0..l6))
                } else {
                    let b = rng.gen_range(1..l6);
                    let t = roots[rng.gen_range(0..roots.len())];
                    ((t * b + l4 * rng.gen_range(0..ell * ell)) % l6, b)
                };
                if a % ell == 0 && b % ell == 0 {
                    continue;
                }
                let divisible = eval_mod(&spec.a, a, b, &m4).is_zero() && eval_mod(&spec.b, a, b, &m6).is_zero();
                if divisible {
                    hits += 1;
                    assert!(eval_mod(&spec.c, a, b, &m4).is_zero(), "{which:?} l={ell} (a,b)=({a},{b})");
                }
            }
            if roots.is_empty() {
                assert_eq!(hits, 0, "{which:?} l={ell}");
            } else {
                assert!(hits > 100, "{which:?} l={ell}: only {hits} samples met the hypothesis");
            }
        }
    }
}

/// Scaling `X` by `lambda^d` scales the lattice count by about `lambda^2`.
#[test]
fn count_scales_with_area() {
    let spec = builtin(Builtin::F1);
    let x = BigInt::from(10).pow(36);
    let base = enumerate_f(&spec, &x).unwrap().len() as f64;
    for lambda in [2u32, 3] {
        let scaled = enumerate_f(&spec, &(&x * BigInt::from(lambda).pow(spec.d as u32))).unwrap().len() as f64;
        let ratio = scaled / base / (lambda * lambda) as f64;
        assert!((ratio - 1.0).abs() < 0.05, "lambda {lambda}: ratio {ratio}");
    }
}

#[test]
fn dz_counts_fall_as_z_grows() {
    let spec = builtin(Builtin::F2);
    let recs = enumerate_f(&spec, &BigInt::from(10).pow(48)).unwrap();
    let c = recs.iter().filter(|r| r.in_c()).count() as u64;
    let counts: Vec<u64> = [1, 2, 3, 5, 7, 100, 10_000].iter().map(|&z| count_dz_records(&recs, z)).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert_eq!(counts[0], recs.len() as u64);
    assert!(*counts.last().unwrap() >= c);
}
