use morse_link::complex::{circle_a_complex, scalar, FilteredComplex};
use morse_link::flow::{build_morse_data, trajectory_rows, FlowOptions, MorseData};
use morse_link::geometry::ManifoldModel;
use morse_link::ring::CoefficientRing;

fn betti(cx: &FilteredComplex) -> Vec<usize> {
    let q = CoefficientRing::Rationals;
    let rank = |k: usize| if k == 0 || k > cx.n { 0 } else { cx.rank_d(k, q) };
    (0..=cx.n).map(|k| cx.gens_in_degree(k).len() - rank(k) - rank(k + 1)).collect()
}

fn d_coeff(md: &MorseData, of: &str, at: &str) -> i64 {
    let c = md.cx_f.d[md.index_of(of).unwrap()].coeff(md.index_of(at).unwrap());
    if c == scalar(1) {
        1
    } else if c == scalar(-1) {
        -1
    } else {
        assert_eq!(c, scalar(0), "d {of} at {at}");
        0
    }
}

#[test]
fn circle_a_reproduces_fixture_complex() {
    let model = ManifoldModel::circle_union("circle-a", &[morse_link::geometry::circle_a_crits()]).unwrap();
    let md = build_morse_data(&model, &FlowOptions::default()).unwrap();
    assert_eq!(md.cx_f.d, circle_a_complex(CoefficientRing::Integers).d);
    assert_eq!(betti(&md.cx_f), vec![1, 1]);
    assert_eq!(md.trajectories.len(), 4);
    assert_eq!(md.neg_trajectories.len(), 4);
}

#[test]
fn torus_c_complex() {
    let md = build_morse_data(&ManifoldModel::torus_c(), &FlowOptions::default()).unwrap();
    assert_eq!(betti(&md.cx_f), vec![1, 2, 1]);
    assert_eq!(betti(&md.cx_neg), vec![1, 2, 1]);
    // Each saddle has two unstable and two stable branches.
    assert_eq!(md.trajectories.len(), 12);
    assert_eq!(md.neg_trajectories.len(), 12);
    // The two maxima cancel against s; the other saddles are cycles.
    assert_eq!(d_coeff(&md, "A", "s"), -d_coeff(&md, "B", "s"));
    assert_ne!(d_coeff(&md, "A", "s"), 0);
    for sad in ["s", "h", "v"] {
        assert!(md.cx_f.d[md.index_of(sad).unwrap()].is_zero(), "d {sad}");
    }
}

#[test]
fn sphere_b_complex() {
    let md = build_morse_data(&ManifoldModel::sphere_b(), &FlowOptions::default()).unwrap();
    assert_eq!(betti(&md.cx_f), vec![1, 0, 1]);
    assert_eq!(md.trajectories.len(), 4);
    assert_eq!(d_coeff(&md, "A", "s"), -d_coeff(&md, "B", "s"));
    assert_ne!(d_coeff(&md, "A", "s"), 0);
    assert!(md.cx_f.d[md.index_of("s").unwrap()].is_zero());
    let rows = trajectory_rows(&md);
    assert_eq!(rows.iter().filter(|r| r.function == "-f").count(), md.neg_trajectories.len());
}
