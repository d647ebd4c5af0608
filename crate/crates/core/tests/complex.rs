use morse_link::complex::*;
use morse_link::ring::CoefficientRing;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q() -> CoefficientRing {
    CoefficientRing::Rationals
}

#[test]
fn circle_a_decomposition() {
    let cx = circle_a_complex(CoefficientRing::Integers);
    let dec = cx.morse_inequality_decomposition(q()).unwrap();
    assert_eq!(dec.poincare, vec![1, 1]);
    assert_eq!(dec.q, vec![1, 0]);
    assert_eq!(dec.morse, vec![2, 2]);
    assert_eq!(cx.morse_inequality_decomposition(CoefficientRing::Integers).unwrap_err().code(), "NOT_A_FIELD");
}

#[test]
fn circle_a_dual_boundary() {
    let cx = circle_a_complex(CoefficientRing::Integers);
    let dual = cx.dual();
    let m1 = cx.index_of("m1").unwrap();
    let expected = cx.chain(&[("M2", 1), ("M1", -1)]).unwrap();
    assert_eq!(dual.d[m1].coeffs, expected.coeffs);
    assert_eq!(dual.generators[m1].degree, 1);
    assert_eq!(dual.generators[m1].level, -0.0);
    assert!(dual.validate().is_ok());
}

#[test]
fn pi_pairing_examples() {
    let cx = circle_a_complex(CoefficientRing::Integers);
    let r = CoefficientRing::Integers;
    let two_p = cx.chain(&[("M1", 2)]).unwrap();
    let three_p = cx.chain(&[("M1", 3)]).unwrap();
    // Π is defined between complementary degrees; for n = 1 a degree-0
    // dual chain on M1 pairs with a degree-1 chain on M1.
    let mut x = two_p.clone();
    x.degree = 0;
    assert_eq!(pi_pairing(1, r, &x, &three_p).unwrap(), scalar(6));
    let mut x = cx.chain(&[("M1", 1), ("M2", -1)]).unwrap();
    x.degree = 0;
    assert_eq!(pi_pairing(1, r, &x, &cx.chain(&[("M1", 1)]).unwrap()).unwrap(), scalar(1));
    let y = cx.chain(&[("m1", 1)]).unwrap();
    assert_eq!(pi_pairing(1, r, &x, &y).unwrap_err().code(), "DEGREE_MISMATCH");
}

#[test]
fn lambda_on_circle_a() {
    let cx = circle_a_complex(CoefficientRing::Integers);
    let mut x = cx.chain(&[("M1", 1), ("M2", -1)]).unwrap();
    x.degree = 0;
    let y = cx.chain(&[("m1", 1), ("m2", -1)]).unwrap();
    assert_eq!(lambda_pairing(&cx, &x, &y).unwrap(), scalar(1));
    assert_eq!(lambda_pairing(&cx, &Chain::zero(0), &y).unwrap(), scalar(0));
    let not_boundary = cx.chain(&[("m1", 1)]).unwrap();
    assert_eq!(lambda_pairing(&cx, &x, &not_boundary).unwrap_err().code(), "NOT_A_BOUNDARY");
}

#[test]
fn lambda_needs_ring_solutions_over_z() {
    let gens = vec![
        Generator { id: "a".into(), degree: 1, level: 2.0 },
        Generator { id: "b".into(), degree: 0, level: 1.0 },
    ];
    let cx = complex_from_entries(1, CoefficientRing::Integers, gens, &[("a", "b", 2)]).unwrap();
    let y = cx.chain(&[("b", 1)]).unwrap();
    let mut x = cx.chain(&[("a", 2)]).unwrap();
    x.degree = 0;
    assert_eq!(lambda_pairing(&cx, &x, &y).unwrap_err().code(), "UNSOLVABLE_OVER_RING");
}

#[test]
fn beta_on_circle_a() {
    let cx = circle_a_complex(CoefficientRing::Integers);
    assert_eq!(beta_alg_sup(&cx, 0), 2.0);
    assert_eq!(beta_alg_depth(&cx, 0, q()).unwrap(), 2.0);
    assert_eq!(beta_alg_depth(&cx, 0, CoefficientRing::Integers).unwrap_err().code(), "NOT_A_FIELD");
    let w = beta_alg_sup_witness(&cx, 0).unwrap();
    assert_eq!(level(&cx, &cx.apply_d(&w.a_plus)), 1.0);
}

#[test]
fn zero_differential_has_no_depth() {
    let gens = vec![
        Generator { id: "a".into(), degree: 1, level: 2.0 },
        Generator { id: "b".into(), degree: 0, level: 1.0 },
    ];
    let cx = complex_from_entries(1, q(), gens, &[]).unwrap();
    assert_eq!(beta_alg_sup(&cx, 0), 0.0);
    assert_eq!(beta_alg_depth(&cx, 0, q()).unwrap(), 0.0);
    let dec = cx.morse_inequality_decomposition(q()).unwrap();
    assert_eq!(dec.poincare, dec.morse);
}

#[test]
fn json_round_trip() {
    let cx = circle_a_complex(CoefficientRing::Integers);
    let back = FilteredComplex::from_json(&cx.to_json()).unwrap();
    assert_eq!(back, cx);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let cx = random_filtered_complex(&mut rng, 20, 6, CoefficientRing::ModP(5));
        assert_eq!(FilteredComplex::from_json(&cx.to_json()).unwrap(), cx);
    }
}

/// Generator signs that relate a complex to its double dual.
fn double_dual_sign(n: usize, k: usize) -> i64 {
    if (k * (n - k)) % 2 == 0 {
        1
    } else {
        -1
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_complexes_are_valid_and_dual_is_adjoint(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cx = random_filtered_complex(&mut rng, 20, 6, q());
        prop_assert!(cx.validate().is_ok());
        let dual = cx.dual();
        prop_assert!(dual.validate().is_ok());
        let n = cx.n;
        for (xi, xg) in dual.generators.iter().enumerate() {
            for (yi, yg) in cx.generators.iter().enumerate() {
                // x in dual degree n−k+1, y in degree k.
                if xg.degree + yg.degree != n + 1 {
                    continue;
                }
                let k = yg.degree;
                let x = dual.generator_chain(xi);
                let y = cx.generator_chain(yi);
                let lhs = pi_pairing(n, q(), &dual.apply_d(&x), &y).unwrap();
                let sign = if (n - k + 1) % 2 == 0 { 1 } else { -1 };
                let rhs = q().mul(&scalar(sign), &pi_pairing(n, q(), &x, &cx.apply_d(&y)).unwrap());
                prop_assert_eq!(lhs, rhs);
            }
        }
        // Double dual: identical degrees and levels; boundary agrees after
        // the generator sign change p ↦ (−1)^{|p|(n−|p|)} p.
        let dd = dual.dual();
        for (j, g) in cx.generators.iter().enumerate() {
            prop_assert_eq!(dd.generators[j].degree, g.degree);
            prop_assert_eq!(dd.generators[j].level, g.level);
            for (i, c) in &cx.d[j].coeffs {
                let s = double_dual_sign(n, g.degree) * double_dual_sign(n, cx.generators[*i].degree);
                prop_assert_eq!(dd.d[j].coeff(*i), q().mul(&scalar(s), c));
            }
        }
        if n % 2 == 1 {
            prop_assert_eq!(dd, cx);
        }
    }

    #[test]
    fn lambda_is_independent_of_primitive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cx = random_filtered_complex(&mut rng, 20, 6, q());
        let dual = cx.dual();
        for k in 0..cx.n {
            let top = cx.gens_in_degree(k + 1);
            let dual_top = dual.gens_in_degree(cx.n - k);
            for &a in &top {
                let y = cx.apply_d(&cx.generator_chain(a));
                if y.is_zero() {
                    continue;
                }
                // Second primitive: add every cycle of degree k+1 we can find.
                let mut z2 = cx.generator_chain(a);
                for &b in &top {
                    let c = cx.generator_chain(b);
                    if cx.apply_d(&c).is_zero() {
                        z2 = z2.add(&c, q());
                    }
                }
                for &w in &dual_top {
                    let x = dual.apply_d(&dual.generator_chain(w));
                    if x.is_zero() {
                        continue;
                    }
                    let l = lambda_pairing(&cx, &x, &y).unwrap();
                    prop_assert_eq!(l.clone(), pi_pairing(cx.n, q(), &x, &cx.generator_chain(a)).unwrap());
                    prop_assert_eq!(l, pi_pairing(cx.n, q(), &x, &z2).unwrap());
                }
            }
        }
    }

    #[test]
    fn morse_decomposition_balances(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ring in [q(), CoefficientRing::ModP(5)] {
            let cx = random_filtered_complex(&mut rng, 20, 6, ring);
            let dec = cx.morse_inequality_decomposition(ring).unwrap();
            for k in 0..=cx.n {
                let q_prev = if k == 0 { 0 } else { dec.q[k - 1] };
                prop_assert_eq!(dec.morse[k], dec.poincare[k] + dec.q[k] + q_prev);
            }
        }
    }

    #[test]
    fn sup_equals_depth(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ring in [q(), CoefficientRing::ModP(5)] {
            let cx = random_filtered_complex(&mut rng, 20, 6, ring);
            for k in 0..cx.n {
                let sup = beta_alg_sup(&cx, k);
                prop_assert_eq!(sup, beta_alg_depth(&cx, k, ring).unwrap());
                prop_assert_eq!(sup > 0.0, cx.rank_d(k + 1, ring) > 0);
            }
        }
    }
}
