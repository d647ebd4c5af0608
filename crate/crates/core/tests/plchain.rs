use std::f64::consts::TAU;

use morse_link::geometry::{ManifoldModel, Point};
use morse_link::plchain::chain::*;
use morse_link::plchain::signs::sign_linksym;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus() -> ManifoldModel {
    ManifoldModel::torus_c()
}

fn p2(x: f64, y: f64) -> Point {
    Point::new(x, y, 0.0)
}

fn circle_pt(theta: f64) -> Point {
    Point::new(theta, 0.0, 0.0)
}

/// Closed polygon around c with the given radius; ccw when `ccw`.
fn torus_loop(c: (f64, f64), r: f64, ccw: bool, k: usize) -> PLChain {
    let mut pts: Vec<Point> = (0..=k).map(|i| {
        let a = TAU * (i % k) as f64 / k as f64;
        p2(c.0 + r * a.cos(), c.1 + r * a.sin())
    }).collect();
    if !ccw {
        pts.reverse();
    }
    PLChain::polyline(&pts, 1)
}

/// Small loop on the unit sphere around `axis`, ccw seen from outside.
fn sphere_loop(axis: Point, r: f64, ccw: bool, k: usize) -> PLChain {
    let axis = axis.normalize();
    let helper = if axis.z.abs() < 0.9 { Point::z() } else { Point::x() };
    let e1 = (helper - axis * axis.dot(&helper)).normalize();
    let e2 = axis.cross(&e1);
    let mut pts: Vec<Point> = (0..=k)
        .map(|i| {
            let a = TAU * (i % k) as f64 / k as f64;
            (axis * r.cos() + (e1 * a.cos() + e2 * a.sin()) * r.sin()).normalize()
        })
        .collect();
    if !ccw {
        pts.reverse();
    }
    PLChain::polyline(&pts, 1)
}

#[test]
fn segment_boundary_is_end_minus_start() {
    let m = torus();
    let seg = PLChain::polyline(&[p2(0.1, 0.1), p2(0.3, 0.2)], 1);
    let expected = {
        let mut c = PLChain::point(p2(0.3, 0.2), 1);
        c.extend(&PLChain::point(p2(0.1, 0.1), 1), -1);
        c
    };
    assert!(boundary_pl(&seg, &m).same_as(&expected, &m));
}

#[test]
fn closed_polygon_has_empty_boundary() {
    let m = torus();
    assert!(boundary_pl(&torus_loop((0.4, 0.6), 0.1, true, 9), &m).is_empty());
}

#[test]
fn annulus_boundary_is_two_opposite_loops() {
    let m = torus();
    let k = 16;
    let ring = |r: f64, i: usize| {
        let a = TAU * (i % k) as f64 / k as f64;
        p2(0.5 + r * a.cos(), 0.5 + r * a.sin())
    };
    let mut ann = PLChain::empty(2);
    for i in 0..k {
        ann.push(vec![ring(0.1, i), ring(0.2, i), ring(0.2, i + 1)], 1);
        ann.push(vec![ring(0.1, i), ring(0.2, i + 1), ring(0.1, i + 1)], 1);
    }
    let outer = PLChain::polyline(&(0..=k).map(|i| ring(0.2, i)).collect::<Vec<_>>(), 1);
    let inner = PLChain::polyline(&(0..=k).map(|i| ring(0.1, i)).collect::<Vec<_>>(), 1);
    let bd = boundary_pl(&ann, &m);
    assert!(bd.same_as(&outer.sub(&inner), &m));
    assert!(boundary_pl(&bd, &m).is_empty());
}

#[test]
fn cells_agree_across_periods() {
    let m = torus();
    let a = PLChain::polyline(&[p2(0.9, 0.5), p2(1.1, 0.5)], 1);
    let b = PLChain::polyline(&[p2(-0.1, 0.5), p2(0.1, 0.5)], 1);
    assert!(a.same_as(&b, &m));
    let reversed = PLChain::polyline(&[p2(1.1, 1.5), p2(0.9, 1.5)], 1);
    assert!(a.same_as(&reversed.scaled(-1), &m));
}

#[test]
fn json_round_trip() {
    let m = torus();
    let c = torus_loop((0.2, 0.3), 0.05, true, 5);
    let back = PLChain::from_json(&c.to_json(&m)).unwrap();
    assert!(back.same_as(&c, &m));
    assert!(PLChain::from_json("{\"dim\":1,\"cells\":[{\"vertices\":[[0.0]],\"multiplicity\":1}]}").is_err());
}

#[test]
fn axis_segments_cross_positively() {
    let m = torus();
    let x_axis = PLChain::polyline(&[p2(0.4, 0.5), p2(0.6, 0.5)], 1);
    let y_axis = PLChain::polyline(&[p2(0.5, 0.4), p2(0.5, 0.6)], 1);
    assert_eq!(intersection_number_raw(&x_axis, &y_axis, &m).unwrap(), 1);
    assert_eq!(intersection_number_raw(&y_axis, &x_axis, &m).unwrap(), -1);
    let far = PLChain::polyline(&[p2(0.1, 0.1), p2(0.2, 0.1)], 1);
    assert_eq!(intersection_number_raw(&far, &y_axis, &m).unwrap(), 0);
}

#[test]
fn meridian_meets_longitude_once() {
    let m = torus();
    let meridian = PLChain::polyline(&(0..=8).map(|i| p2(i as f64 / 8.0, 0.3)).collect::<Vec<_>>(), 1);
    let longitude = PLChain::polyline(&(0..=8).map(|i| p2(0.71, i as f64 / 8.0 + 0.01)).collect::<Vec<_>>(), 1);
    assert!(boundary_pl(&meridian, &m).is_empty());
    assert_eq!(intersection_number_raw(&meridian, &longitude, &m).unwrap(), 1);
    assert_eq!(bounding_chain(&meridian, &m, 0.1).unwrap_err().code(), "NOT_NULL_HOMOLOGOUS");
}

#[test]
fn opposite_meridians_bound() {
    let m = torus();
    let up = PLChain::polyline(&(0..=8).map(|i| p2(i as f64 / 8.0, 0.3)).collect::<Vec<_>>(), 1);
    let down = PLChain::polyline(&(0..=8).map(|i| p2(1.0 - i as f64 / 8.0, 0.6)).collect::<Vec<_>>(), 1);
    let mut b = up.clone();
    b.extend(&down, 1);
    let x = bounding_chain(&b, &m, 0.1).unwrap();
    assert!(boundary_pl(&x, &m).same_as(&b, &m));
    // The band between the loops covers y = 0.45 once, y = 0.8 not at all.
    let band = local_degree(&x, &p2(0.33, 0.45), &m).unwrap();
    let outside = local_degree(&x, &p2(0.33, 0.8), &m).unwrap();
    assert_eq!((band - outside).abs(), 1);
}

#[test]
fn circle_points_bound_an_arc() {
    let m = ManifoldModel::circle_union("c", &[morse_link::geometry::circle_a_crits()]).unwrap();
    let mut b = PLChain::point(circle_pt(1.0), 1);
    b.extend(&PLChain::point(circle_pt(2.5), 1), -1);
    let x = bounding_chain(&b, &m, 0.5).unwrap();
    assert!(boundary_pl(&x, &m).same_as(&b, &m));
    let mut unbalanced = b.clone();
    unbalanced.extend(&PLChain::point(circle_pt(4.0), 1), 1);
    assert_eq!(bounding_chain(&unbalanced, &m, 0.5).unwrap_err().code(), "NOT_NULL_HOMOLOGOUS");
}

#[test]
fn small_sphere_loop_bounds_a_disk() {
    let m = ManifoldModel::sphere_b();
    let b = sphere_loop(Point::new(0.3, -0.2, 0.6), 0.3, true, 24);
    for scale in [0.5, 0.1] {
        let x = bounding_chain(&b, &m, scale).unwrap();
        assert!(boundary_pl(&x, &m).same_as(&b, &m));
        x.check_nondegenerate(&m).unwrap();
    }
}

fn winding_2d(loop_: &PLChain, x: &Point) -> i64 {
    let mut total = 0.0;
    for c in &loop_.cells {
        let a = c.vertices[0] - x;
        let b = c.vertices[1] - x;
        total += c.multiplicity as f64 * (a.x * b.y - a.y * b.x).atan2(a.x * b.x + a.y * b.y);
    }
    (total / TAU).round() as i64
}

#[test]
fn circle_interleaved_points_link_once() {
    let m = ManifoldModel::circle_union("c", &[morse_link::geometry::circle_a_crits()]).unwrap();
    // +θ order: p2, r1, p1, r2.
    let mut plus = PLChain::point(circle_pt(0.5), -1);
    plus.extend(&PLChain::point(circle_pt(2.5), 1), 1);
    let mut minus = PLChain::point(circle_pt(1.5), 1);
    minus.extend(&PLChain::point(circle_pt(4.0), -1), 1);
    let lk = linking_number(&minus, &plus, &m, 0.5).unwrap();
    assert_eq!(lk, 1);
    assert_eq!(linking_number(&plus, &minus, &m, 0.5).unwrap(), i64::from(sign_linksym(1, 0)) * lk);
    let mut apart = PLChain::point(circle_pt(3.0), 1);
    apart.extend(&PLChain::point(circle_pt(4.0), -1), 1);
    assert_eq!(linking_number(&apart, &plus, &m, 0.5).unwrap(), 0);
    assert_eq!(linking_number(&PLChain::empty(0), &plus, &m, 0.5).unwrap(), 0);
}

#[test]
fn touching_carriers_are_rejected() {
    let m = torus();
    let lp = torus_loop((0.5, 0.5), 0.1, true, 8);
    let mut pts = PLChain::point(p2(0.6, 0.5), 1);
    pts.extend(&PLChain::point(p2(0.1, 0.1), -1), 1);
    assert_eq!(linking_number(&lp, &pts, &m, 0.1).unwrap_err().code(), "CARRIERS_INTERSECT");
}

fn random_torus_pair(rng: &mut ChaCha8Rng) -> (PLChain, PLChain) {
    loop {
        let c = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let r = rng.gen_range(0.05..0.3);
        let lp = torus_loop(c, r, rng.gen_bool(0.5), rng.gen_range(5..20));
        let p = p2(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let q = p2(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let clear = |x: &Point| lp.cells.iter().all(|cell| point_segment_distance(&torus(), x, &cell.vertices[0], &cell.vertices[1]) > 1e-3);
        if clear(&p) && clear(&q) {
            let mut pts = PLChain::point(p, 1);
            pts.extend(&PLChain::point(q, -1), 1);
            return (lp, pts);
        }
    }
}

/// Winding of a small loop around a torus point, using the lift nearest the
/// loop's first vertex.
fn torus_winding(lp: &PLChain, x: &Point) -> i64 {
    let a = lp.cells[0].vertices[0];
    let lift = Point::new(x.x + (a.x - x.x).round(), x.y + (a.y - x.y).round(), 0.0);
    let mut w = 0;
    for dx in -1..=1 {
        for dy in -1..=1 {
            w += winding_2d(lp, &(lift + Point::new(dx as f64, dy as f64, 0.0)));
        }
    }
    w
}

#[test]
fn torus_linking_matches_winding_and_is_symmetric() {
    let m = torus();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut nonzero = 0;
    for _ in 0..100 {
        let (lp, pts) = random_torus_pair(&mut rng);
        let p = pts.cells[0].vertices[0];
        let q = pts.cells[1].vertices[0];
        let oracle = torus_winding(&lp, &p) - torus_winding(&lp, &q);
        let lk = linking_number(&lp, &pts, &m, 0.05).unwrap();
        assert_eq!(lk, oracle);
        let back = linking_number(&pts, &lp, &m, 0.05).unwrap();
        assert_eq!(back, i64::from(sign_linksym(2, 0)) * lk);
        nonzero += usize::from(lk != 0);
    }
    assert!(nonzero > 10);
}

#[test]
fn sphere_linking_matches_winding_and_is_symmetric() {
    let m = ManifoldModel::sphere_b();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nonzero = 0;
    for _ in 0..100 {
        let axis = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if axis.norm() < 0.1 {
            continue;
        }
        let r = rng.gen_range(0.1..1.2);
        let ccw = rng.gen_bool(0.5);
        let lp = sphere_loop(axis, r, ccw, rng.gen_range(6..24));
        let p = fibonacci_sphere(97)[rng.gen_range(0..97)];
        let q = fibonacci_sphere(89)[rng.gen_range(0..89)];
        let angle = |x: &Point| x.dot(&axis.normalize()).clamp(-1.0, 1.0).acos();
        if (angle(&p) - r).abs() < 0.05 || (angle(&q) - r).abs() < 0.05 {
            continue;
        }
        // Inside the cap means positively encircled for a ccw loop.
        let inside = |x: &Point| i64::from(angle(x) < r) * if ccw { 1 } else { -1 };
        let mut pts = PLChain::point(p, 1);
        pts.extend(&PLChain::point(q, -1), 1);
        let lk = linking_number(&lp, &pts, &m, 0.2).unwrap();
        assert_eq!(lk, inside(&p) - inside(&q));
        assert_eq!(linking_number(&pts, &lp, &m, 0.2).unwrap(), i64::from(sign_linksym(2, 0)) * lk);
        nonzero += usize::from(lk != 0);
    }
    assert!(nonzero > 10);
}

#[test]
fn circle_linking_is_antisymmetric() {
    let m = ManifoldModel::circle_union("c", &[morse_link::geometry::circle_a_crits()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let mut thetas: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
        thetas.sort_by(f64::total_cmp);
        if thetas.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let mut plus = PLChain::point(circle_pt(thetas[0]), 1);
        plus.extend(&PLChain::point(circle_pt(thetas[rng.gen_range(1..4)]), -1), 1);
        let used: Vec<f64> = plus.vertices().map(|v| v.x).collect();
        let rest: Vec<f64> = thetas.iter().copied().filter(|t| !used.contains(t)).collect();
        let mut minus = PLChain::point(circle_pt(rest[0]), 1);
        minus.extend(&PLChain::point(circle_pt(rest[1]), -1), 1);
        let lk = linking_number(&minus, &plus, &m, 0.5).unwrap();
        assert_eq!(linking_number(&plus, &minus, &m, 0.5).unwrap(), i64::from(sign_linksym(1, 0)) * lk);
    }
}

#[test]
fn linking_ignores_the_bounding_chain() {
    let m = torus();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..40 {
        let (lp, pts) = random_torus_pair(&mut rng);
        let apexes = [p2(0.13, 0.87), p2(0.61, 0.29)];
        let mut seen = Vec::new();
        for apex in &apexes {
            for scale in [0.2, 0.05] {
                let x = bounding_chain_with_apex(&lp, &m, scale, apex).unwrap();
                match intersection_number_raw(&pts, &x, &m) {
                    Ok(v) => seen.push(v),
                    Err(e) => assert_eq!(e.code(), "NONTRANSVERSE_AFTER_JITTER"),
                }
            }
        }
        assert!(seen.windows(2).all(|w| w[0] == w[1]), "{seen:?}");
    }
}

proptest! {
    #[test]
    fn boundary_of_boundary_vanishes(seed in 0u64..10_000) {
        let m = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = PLChain::empty(2);
        for _ in 0..rng.gen_range(1..6) {
            let v: Vec<Point> = (0..3).map(|_| p2(rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5))).collect();
            c.push(v, rng.gen_range(-3..4));
        }
        let bd = boundary_pl(&c, &m);
        prop_assert!(boundary_pl(&bd, &m).is_empty());
    }

    #[test]
    fn reversing_an_argument_flips_the_intersection(seed in 0u64..10_000) {
        let m = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seg = |rng: &mut ChaCha8Rng| PLChain::polyline(&[p2(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)), p2(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))], 1);
        let (a, b) = (seg(&mut rng), seg(&mut rng));
        if let Ok(v) = intersection_number_raw(&a, &b, &m) {
            prop_assert_eq!(intersection_number_raw(&a.scaled(-1), &b, &m).unwrap(), -v);
            prop_assert_eq!(intersection_number_raw(&a, &b.scaled(-1), &m).unwrap(), -v);
        }
    }
}
