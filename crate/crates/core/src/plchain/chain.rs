//! Oriented PL chains on the model manifolds: canonical cells, boundary,
//! intersection numbers, cone bounding chains and linking numbers.
//!
//! Coordinates: circle unions use (θ, component, 0), the flat torus uses
//! unwrapped (x, y, 0) with period 1, the sphere uses points of the unit
//! sphere in R³ and every simplex stands for its radial projection.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Rotation3, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::orient::{point_sign, Oriented};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, ModelKind, Point};

/// Grid used to identify vertices when cancelling cells.
pub const SNAP: f64 = 1e-9;
/// Smallest |sin| of a crossing angle still treated as transverse.
pub const ANGLE_TOL: f64 = 1e-6;
/// Crossings closer than this (in cell parameters) to a cell's boundary are
/// not transverse.
const EDGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: Vec<Point>,
    pub multiplicity: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PLChain {
    pub dim: usize,
    pub cells: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct CellJson {
    vertices: Vec<Vec<f64>>,
    multiplicity: i64,
}

#[derive(Serialize, Deserialize)]
struct ChainJson {
    dim: usize,
    cells: Vec<CellJson>,
}

type CellKey = Vec<[i64; 3]>;

fn quantize(p: &Point) -> [i64; 3] {
    [(p.x / SNAP).round() as i64, (p.y / SNAP).round() as i64, (p.z / SNAP).round() as i64]
}

fn permutation_parity(order: &[usize]) -> i64 {
    let mut seen = vec![false; order.len()];
    let mut parity = 1;
    for i in 0..order.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = order[j];
            len += 1;
        }
        if len % 2 == 0 {
            parity = -parity;
        }
    }
    parity
}

impl PLChain {
    pub fn empty(dim: usize) -> Self {
        PLChain { dim, cells: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn point(x: Point, multiplicity: i64) -> Self {
        PLChain { dim: 0, cells: vec![Cell { vertices: vec![x], multiplicity }] }
    }

    /// Polyline through the given vertices, oriented along the list.
    pub fn polyline(points: &[Point], multiplicity: i64) -> Self {
        let cells = points.windows(2).map(|w| Cell { vertices: vec![w[0], w[1]], multiplicity }).collect();
        PLChain { dim: 1, cells }
    }

    pub fn push(&mut self, vertices: Vec<Point>, multiplicity: i64) {
        debug_assert_eq!(vertices.len(), self.dim + 1);
        self.cells.push(Cell { vertices, multiplicity });
    }

    pub fn extend(&mut self, other: &PLChain, factor: i64) {
        assert_eq!(self.dim, other.dim, "adding chains of different dimension");
        self.cells.extend(other.cells.iter().map(|c| Cell { vertices: c.vertices.clone(), multiplicity: c.multiplicity * factor }));
    }

    pub fn scaled(&self, factor: i64) -> PLChain {
        let mut out = PLChain::empty(self.dim);
        out.extend(self, factor);
        out
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Point> {
        self.cells.iter().flat_map(|c| c.vertices.iter())
    }

    /// Canonical key of a cell, its vertices in key order, and the sign
    /// relating the cell's vertex order to the key's. Translations by the
    /// periods give the same key.
    fn key(model: &ManifoldModel, vertices: &[Point]) -> (CellKey, Vec<Point>, i64) {
        let wrapped: Vec<[i64; 3]> = vertices.iter().map(|v| quantize(&model.wrap(v))).collect();
        let anchor_key = *wrapped.iter().min().expect("cell has vertices");
        let mut best: Option<(CellKey, Vec<Point>, i64)> = None;
        for (i, w) in wrapped.iter().enumerate() {
            if *w != anchor_key {
                continue;
            }
            let shift = model.wrap(&vertices[i]) - vertices[i];
            let moved: Vec<Point> = vertices.iter().map(|v| v + shift).collect();
            let q: Vec<[i64; 3]> = moved.iter().map(quantize).collect();
            let mut order: Vec<usize> = (0..moved.len()).collect();
            order.sort_by_key(|&j| q[j]);
            let key: CellKey = order.iter().map(|&j| q[j]).collect();
            if best.as_ref().map_or(true, |(k, _, _)| key < *k) {
                let verts = order.iter().map(|&j| moved[j]).collect();
                best = Some((key, verts, permutation_parity(&order)));
            }
        }
        best.expect("anchor exists")
    }

    /// Merges cells that agree up to order and period translation, and drops
    /// cancelled or degenerate ones.
    pub fn simplify(&self, model: &ManifoldModel) -> PLChain {
        let mut acc: BTreeMap<CellKey, (i64, Vec<Point>)> = BTreeMap::new();
        for c in &self.cells {
            let (key, verts, parity) = Self::key(model, &c.vertices);
            if key.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            acc.entry(key).or_insert((0, verts)).0 += c.multiplicity * parity;
        }
        let cells = acc
            .into_values()
            .filter(|(m, _)| *m != 0)
            .map(|(m, vertices)| Cell { vertices, multiplicity: m })
            .collect();
        PLChain { dim: self.dim, cells }
    }

    pub fn sub(&self, other: &PLChain) -> PLChain {
        let mut out = self.clone();
        out.extend(other, -1);
        out
    }

    /// True when the two chains agree after cancellation.
    pub fn same_as(&self, other: &PLChain, model: &ManifoldModel) -> bool {
        self.dim == other.dim && self.sub(other).simplify(model).is_empty()
    }

    pub fn to_json(&self, model: &ManifoldModel) -> String {
        let d = model.coord_dim();
        let j = ChainJson {
            dim: self.dim,
            cells: self
                .cells
                .iter()
                .map(|c| CellJson { vertices: c.vertices.iter().map(|v| v.as_slice()[..d].to_vec()).collect(), multiplicity: c.multiplicity })
                .collect(),
        };
        serde_json::to_string(&j).expect("chain serializes")
    }

    pub fn from_json(s: &str) -> Result<PLChain> {
        let j: ChainJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let mut cells = Vec::new();
        for c in j.cells {
            if c.vertices.len() != j.dim + 1 {
                return Err(Error::Parse(format!("a {}-cell needs {} vertices", j.dim, j.dim + 1)));
            }
            let mut vs = Vec::new();
            for v in c.vertices {
                if v.is_empty() || v.len() > 3 {
                    return Err(Error::Parse("vertex must have 1 to 3 coordinates".into()));
                }
                let mut p = Point::zeros();
                p.as_mut_slice()[..v.len()].copy_from_slice(&v);
                vs.push(p);
            }
            cells.push(Cell { vertices: vs, multiplicity: c.multiplicity });
        }
        Ok(PLChain { dim: j.dim, cells })
    }

    /// Smallest and largest value of f on the carrier, by dense sampling.
    pub fn f_range(&self, model: &ManifoldModel) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.cells {
            for x in sample_cell(model, &c.vertices, 32) {
                let v = model.f(&x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Axis-aligned bounding box of the vertices in model coordinates.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let mut it = self.vertices();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    /// Smallest distance from the carrier to a point, by sampling.
    pub fn distance_to(&self, model: &ManifoldModel, x: &Point) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| sample_cell(model, &c.vertices, 64))
            .map(|y| model.distance(&y, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest nonzero-volume check: every cell must span its dimension.
    pub fn check_nondegenerate(&self, model: &ManifoldModel) -> Result<()> {
        for c in &self.cells {
            if cell_volume(model, &c.vertices) <= 1e-12 && self.dim > 0 {
                return Err(Error::Parse(format!("degenerate {}-cell", self.dim)));
            }
        }
        Ok(())
    }
}

/// Point of a cell at the given barycentric weights.
pub fn cell_point(model: &ManifoldModel, vertices: &[Point], weights: &[f64]) -> Point {
    let p = vertices.iter().zip(weights).fold(Point::zeros(), |acc, (v, w)| acc + v * *w);
    model.retract(&p)
}

fn sample_cell(model: &ManifoldModel, vertices: &[Point], res: usize) -> Vec<Point> {
    match vertices.len() {
        1 => vec![vertices[0]],
        2 => (0..=res).map(|i| {
            let t = i as f64 / res as f64;
            cell_point(model, vertices, &[1.0 - t, t])
        }).collect(),
        _ => {
            let mut out = Vec::new();
            let r = res / 4 + 1;
            for i in 0..=r {
                for j in 0..=(r - i) {
                    let (a, b) = (i as f64 / r as f64, j as f64 / r as f64);
                    out.push(cell_point(model, vertices, &[1.0 - a - b, a, b]));
                }
            }
            out
        }
    }
}

fn cell_volume(model: &ManifoldModel, vertices: &[Point]) -> f64 {
    match vertices.len() {
        1 => 1.0,
        2 => (vertices[1] - vertices[0]).norm(),
        _ => {
            let (a, b) = (vertices[1] - vertices[0], vertices[2] - vertices[0]);
            match model.kind {
                ModelKind::EmbeddedSphere => 0.5 * a.cross(&b).norm(),
                _ => 0.5 * (a.x * b.y - a.y * b.x).abs(),
            }
        }
    }
}

/// Simplicial boundary with the outward-normal-first orientation.
pub fn boundary_pl(c: &PLChain, model: &ManifoldModel) -> PLChain {
    if c.dim == 0 {
        return PLChain::empty(0);
    }
    let mut out = PLChain::empty(c.dim - 1);
    for cell in &c.cells {
        for i in 0..cell.vertices.len() {
            let face: Vec<Point> = cell.vertices.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            let sign = if i % 2 == 0 { 1 } else { -1 };
            out.push(face, sign * cell.multiplicity);
        }
    }
    out.simplify(model)
}

pub fn is_cycle(c: &PLChain, model: &ManifoldModel) -> bool {
    boundary_pl(c, model).is_empty()
}

/// Tangent frame of a cell at one of its points, as columns in the tangent
/// basis at x.
pub fn cell_frame(model: &ManifoldModel, vertices: &[Point], x: &Point) -> Oriented {
    let n = model.n;
    if vertices.len() == 1 {
        return Oriented::point(n, 1);
    }
    let edges: Vec<Point> = vertices[1..].iter().map(|v| v - vertices[0]).collect();
    Oriented::new(model.tangent_matrix(x, &edges))
}

/// A transverse intersection point of two cells.
#[derive(Debug, Clone, Copy)]
pub struct CellHit {
    pub point: Point,
    /// Parameter of the hit along the first cell when it is a segment.
    pub s: f64,
}

/// Intersection points of a cell of dimension a with one of dimension n − a.
pub fn cell_intersections(model: &ManifoldModel, a: &[Point], b: &[Point]) -> Result<Vec<CellHit>> {
    let n = model.n;
    if a.len() - 1 + b.len() - 1 != n {
        return Err(Error::DegreeMismatch("cells of complementary dimension expected".into()));
    }
    match model.kind {
        ModelKind::CircleUnion => {
            let (pt, arc, swapped) = if a.len() == 1 { (a[0], b, false) } else { (b[0], a, true) };
            if pt.y != arc[0].y {
                return Ok(Vec::new());
            }
            let hits = arc_hits(pt.x, arc[0].x, arc[1].x)?;
            Ok(hits
                .into_iter()
                .map(|(theta, s)| CellHit { point: Point::new(theta, pt.y, 0.0), s: if swapped { s } else { 0.0 } })
                .collect())
        }
        ModelKind::FlatTorus => torus_hits(a, b),
        ModelKind::EmbeddedSphere => sphere_hits(a, b),
    }
}

/// Parameters s ∈ (0, 1) where the arc θ0 → θ1 passes θ (mod 2π).
fn arc_hits(theta: f64, t0: f64, t1: f64) -> Result<Vec<(f64, f64)>> {
    let per = std::f64::consts::TAU;
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let mut out = Vec::new();
    let mut k = ((lo - theta) / per).floor() as i64 - 1;
    loop {
        let th = theta + k as f64 * per;
        if th > hi + 1e-9 {
            break;
        }
        if hi - lo > 0.0 {
            let s = (th - t0) / (t1 - t0);
            if s > -EDGE_TOL && s < 1.0 + EDGE_TOL {
                if s < EDGE_TOL || s > 1.0 - EDGE_TOL {
                    return Err(Error::NontransverseAfterJitter);
                }
                out.push((th, s));
            }
        }
        k += 1;
    }
    Ok(out)
}

fn cross2(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn seg_seg_2d(p0: (f64, f64), p1: (f64, f64), q0: (f64, f64), q1: (f64, f64)) -> Result<Option<(f64, f64)>> {
    let r = (p1.0 - p0.0, p1.1 - p0.1);
    let s = (q1.0 - q0.0, q1.1 - q0.1);
    let den = cross2(r, s);
    let qp = (q0.0 - p0.0, q0.1 - p0.1);
    let scale = (r.0.hypot(r.1) * s.0.hypot(s.1)).max(1e-300);
    if den.abs() <= ANGLE_TOL * scale {
        // Parallel: only a problem if the segments overlap.
        if cross2(qp, r).abs() <= 1e-12 * scale.sqrt().max(1e-300) * r.0.hypot(r.1).max(1e-300) {
            let rr = r.0 * r.0 + r.1 * r.1;
            let t0 = (qp.0 * r.0 + qp.1 * r.1) / rr;
            let t1 = t0 + (s.0 * r.0 + s.1 * r.1) / rr;
            if t0.max(t1) >= 0.0 && t0.min(t1) <= 1.0 {
                return Err(Error::NontransverseAfterJitter);
            }
        }
        return Ok(None);
    }
    let t = cross2(qp, s) / den;
    let u = cross2(qp, r) / den;
    let inside = |x: f64| x > -EDGE_TOL && x < 1.0 + EDGE_TOL;
    if !(inside(t) && inside(u)) {
        return Ok(None);
    }
    if t < EDGE_TOL || t > 1.0 - EDGE_TOL || u < EDGE_TOL || u > 1.0 - EDGE_TOL {
        return Err(Error::NontransverseAfterJitter);
    }
    Ok(Some((t, u)))
}

/// Barycentric coordinates of x in the planar triangle (a, b, c).
fn barycentric(x: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<[f64; 3]> {
    let det = cross2((b.0 - a.0, b.1 - a.1), (c.0 - a.0, c.1 - a.1));
    if det.abs() < 1e-300 {
        return None;
    }
    let l1 = cross2((x.0 - a.0, x.1 - a.1), (c.0 - a.0, c.1 - a.1)) / det;
    let l2 = cross2((b.0 - a.0, b.1 - a.1), (x.0 - a.0, x.1 - a.1)) / det;
    Some([1.0 - l1 - l2, l1, l2])
}

fn classify_bary(l: [f64; 3]) -> Result<bool> {
    let tol = 1e-10;
    if l.iter().all(|&v| v > tol) {
        return Ok(true);
    }
    if l.iter().any(|&v| v < -tol) {
        return Ok(false);
    }
    Err(Error::NontransverseAfterJitter)
}

fn xy(p: &Point) -> (f64, f64) {
    (p.x, p.y)
}

fn torus_shifts(a: &[Point], b: &[Point]) -> Vec<Point> {
    let lo_hi = |c: &[Point]| {
        c.iter().fold((Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY)), |(lo, hi), v| (lo.inf(v), hi.sup(v)))
    };
    let (alo, ahi) = lo_hi(a);
    let (blo, bhi) = lo_hi(b);
    // Shift k applied to b overlaps a when blo + k ≤ ahi and bhi + k ≥ alo.
    let kx = ((alo.x - bhi.x).floor() as i64 - 1)..=((ahi.x - blo.x).ceil() as i64 + 1);
    let ky = ((alo.y - bhi.y).floor() as i64 - 1)..=((ahi.y - blo.y).ceil() as i64 + 1);
    let mut out = Vec::new();
    for i in kx {
        for j in ky.clone() {
            out.push(Point::new(i as f64, j as f64, 0.0));
        }
    }
    out
}

fn torus_hits(a: &[Point], b: &[Point]) -> Result<Vec<CellHit>> {
    let mut out = Vec::new();
    for k in torus_shifts(a, b) {
        let bs: Vec<Point> = b.iter().map(|v| v + k).collect();
        match (a.len(), bs.len()) {
            (2, 2) => {
                if let Some((t, _)) = seg_seg_2d(xy(&a[0]), xy(&a[1]), xy(&bs[0]), xy(&bs[1]))? {
                    out.push(CellHit { point: a[0] + (a[1] - a[0]) * t, s: t });
                }
            }
            (1, 3) | (3, 1) => {
                let (p, tri) = if a.len() == 1 { (a[0], &bs[..]) } else { (bs[0], a) };
                if let Some(l) = barycentric(xy(&p), xy(&tri[0]), xy(&tri[1]), xy(&tri[2])) {
                    if classify_bary(l)? {
                        let point = if a.len() == 1 { a[0] } else { bs[0] };
                        out.push(CellHit { point, s: 0.0 });
                    }
                }
            }
            _ => return Err(Error::DegreeMismatch("torus cells must be complementary".into())),
        }
    }
    Ok(out)
}

fn sphere_hits(a: &[Point], b: &[Point]) -> Result<Vec<CellHit>> {
    match (a.len(), b.len()) {
        (2, 2) => {
            let na = a[0].cross(&a[1]);
            let nb = b[0].cross(&b[1]);
            let d = na.cross(&nb);
            let scale = na.norm() * nb.norm();
            if d.norm() <= ANGLE_TOL * scale {
                if na.normalize().dot(&b[0]).abs() < 1e-12 && (arc_contains(a, &b[0]) || arc_contains(a, &b[1])) {
                    return Err(Error::NontransverseAfterJitter);
                }
                return Ok(Vec::new());
            }
            let mut out = Vec::new();
            for cand in [d.normalize(), -d.normalize()] {
                let (ta, tb) = (arc_param(a, &cand), arc_param(b, &cand));
                if let (Some(ta), Some(tb)) = (ta, tb) {
                    if ta < EDGE_TOL || ta > 1.0 - EDGE_TOL || tb < EDGE_TOL || tb > 1.0 - EDGE_TOL {
                        return Err(Error::NontransverseAfterJitter);
                    }
                    out.push(CellHit { point: cand, s: ta });
                }
            }
            Ok(out)
        }
        (1, 3) | (3, 1) => {
            let (p, tri) = if a.len() == 1 { (a[0], b) } else { (b[0], a) };
            let o = tri[0].dot(&tri[1].cross(&tri[2])).signum();
            if p.dot(&(tri[0] + tri[1] + tri[2])) <= 0.0 {
                return Ok(Vec::new());
            }
            let l = [
                o * p.dot(&tri[1].cross(&tri[2])),
                o * p.dot(&tri[2].cross(&tri[0])),
                o * p.dot(&tri[0].cross(&tri[1])),
            ];
            let norm = l.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
            let l = [l[0] / norm, l[1] / norm, l[2] / norm];
            if classify_bary(l)? {
                Ok(vec![CellHit { point: p, s: 0.0 }])
            } else {
                Ok(Vec::new())
            }
        }
        _ => Err(Error::DegreeMismatch("sphere cells must be complementary".into())),
    }
}

/// Parameter along the chord a0 → a1 whose radial projection is x, if x lies
/// on the (short) great arc between them.
fn arc_param(a: &[Point], x: &Point) -> Option<f64> {
    let (p, q) = (a[0], a[1]);
    // x ∝ (1 − t) p + t q with positive scale.
    let n = p.cross(&q);
    if n.norm() < 1e-300 || x.dot(&(p + q)) <= 0.0 {
        return None;
    }
    let cp = x.cross(&q).dot(&n) / n.norm_squared();
    let cq = p.cross(x).dot(&n) / n.norm_squared();
    if cp < -EDGE_TOL || cq < -EDGE_TOL {
        return None;
    }
    let t = cq / (cp + cq);
    (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&t).then_some(t)
}

fn arc_contains(a: &[Point], x: &Point) -> bool {
    arc_param(a, x).is_some()
}

/// Signed count ι(A, B) of a transverse intersection of an a-chain with an
/// (n−a)-chain: the count of the fiber product B ×_M A.
pub fn intersection_number_raw(a: &PLChain, b: &PLChain, model: &ManifoldModel) -> Result<i64> {
    if a.dim + b.dim != model.n {
        return Err(Error::DegreeMismatch(format!("dimensions {} + {} ≠ {}", a.dim, b.dim, model.n)));
    }
    let mut total = 0;
    for ca in &a.cells {
        for cb in &b.cells {
            for hit in cell_intersections(model, &ca.vertices, &cb.vertices)? {
                let fa = cell_frame(model, &ca.vertices, &hit.point);
                let fb = cell_frame(model, &cb.vertices, &hit.point);
                let s = point_sign(&fb, &fa).map_err(|_| Error::NontransverseAfterJitter)?;
                total += i64::from(s) * ca.multiplicity * cb.multiplicity;
            }
        }
    }
    Ok(total)
}

/// Rough diameter used to scale jitter offsets.
pub fn model_diameter(model: &ManifoldModel) -> f64 {
    match model.kind {
        ModelKind::CircleUnion => std::f64::consts::PI,
        ModelKind::FlatTorus => std::f64::consts::FRAC_1_SQRT_2,
        ModelKind::EmbeddedSphere => std::f64::consts::PI,
    }
}

/// Moves a chain by a small rigid motion of the model.
pub fn jitter_chain<R: Rng>(model: &ManifoldModel, c: &PLChain, rng: &mut R, size: f64) -> PLChain {
    let map: Box<dyn Fn(&Point) -> Point> = match model.kind {
        ModelKind::CircleUnion => {
            let d = rng.gen_range(-1.0..1.0) * size;
            Box::new(move |p: &Point| Point::new(p.x + d, p.y, p.z))
        }
        ModelKind::FlatTorus => {
            let (dx, dy) = (rng.gen_range(-1.0..1.0) * size, rng.gen_range(-1.0..1.0) * size);
            Box::new(move |p: &Point| Point::new(p.x + dx, p.y + dy, p.z))
        }
        ModelKind::EmbeddedSphere => {
            let axis = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let axis = if axis.norm() < 1e-6 { Point::z() } else { axis };
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), size);
            Box::new(move |p: &Point| (rot * p).normalize())
        }
    };
    PLChain {
        dim: c.dim,
        cells: c.cells.iter().map(|cell| Cell { vertices: cell.vertices.iter().map(|v| map(v)).collect(), multiplicity: cell.multiplicity }).collect(),
    }
}

/// Number of jitter retries before a nontransverse configuration is an error.
pub const JITTER_RETRIES: usize = 8;

/// ι(A, B), jittering A (seeded) when the configuration is not transverse.
pub fn intersection_number(a: &PLChain, b: &PLChain, model: &ManifoldModel, seed: u64) -> Result<i64> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut cur = a.clone();
    for _ in 0..=JITTER_RETRIES {
        match intersection_number_raw(&cur, b, model) {
            Err(Error::NontransverseAfterJitter) => {
                cur = jitter_chain(model, a, &mut rng, 1e-6 * model_diameter(model));
            }
            other => return other,
        }
    }
    Err(Error::NontransverseAfterJitter)
}

/// Default cone apex: a point of the model far from the chain's vertices.
pub fn default_apex(b: &PLChain, model: &ManifoldModel, component: usize) -> Point {
    let verts: Vec<Point> = b.vertices().copied().collect();
    let score = |x: &Point| verts.iter().map(|v| model.distance(x, v)).fold(f64::INFINITY, f64::min);
    let candidates: Vec<Point> = match model.kind {
        ModelKind::CircleUnion => (0..720).map(|i| Point::new(std::f64::consts::TAU * (i as f64 + 0.37) / 720.0, component as f64, 0.0)).collect(),
        ModelKind::FlatTorus => {
            let mut c = Vec::new();
            for i in 0..48 {
                for j in 0..48 {
                    c.push(Point::new((i as f64 + 0.37) / 48.0, (j as f64 + 0.61) / 48.0, 0.0));
                }
            }
            c
        }
        ModelKind::EmbeddedSphere => fibonacci_sphere(2000),
    };
    let mut best = candidates[0];
    let mut best_score = f64::NEG_INFINITY;
    for c in &candidates {
        let mut s = score(c);
        if model.kind == ModelKind::EmbeddedSphere && b.dim == 1 {
            // Keep cone triangles away from antipodal spans.
            let far = verts.iter().map(|v| model.distance(c, v)).fold(0.0f64, f64::max);
            if far > 2.6 {
                s -= 10.0;
            }
        }
        if s > best_score {
            best_score = s;
            best = *c;
        }
    }
    best
}

pub fn fibonacci_sphere(count: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Point::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Nearest lift of `o` to `v` on the torus.
fn nearest_lift(o: &Point, v: &Point) -> Point {
    Point::new(o.x + (v.x - o.x).round(), o.y + (v.y - o.y).round(), 0.0)
}

/// A chain X with ∂X = b, built as a cone from `apex` (subdivided so that
/// spokes are at most `mesh_scale` long).
pub fn bounding_chain_with_apex(b: &PLChain, model: &ManifoldModel, mesh_scale: f64, apex: &Point) -> Result<PLChain> {
    if !is_cycle(b, model) {
        return Err(Error::NotABoundary("chain has nonempty boundary".into()));
    }
    let b = b.simplify(model);
    let mut x = PLChain::empty(b.dim + 1);
    if b.is_empty() {
        return Ok(x);
    }
    match (model.kind, b.dim) {
        (ModelKind::CircleUnion, 0) => {
            let mut totals: BTreeMap<i64, i64> = BTreeMap::new();
            for c in &b.cells {
                *totals.entry(c.vertices[0].y as i64).or_default() += c.multiplicity;
            }
            if totals.values().any(|&t| t != 0) {
                return Err(Error::NotNullHomologous);
            }
            for c in &b.cells {
                let v = c.vertices[0];
                let o = Point::new(apex.x, v.y, 0.0);
                let mut end = v.x;
                while end <= o.x {
                    end += std::f64::consts::TAU;
                }
                while end > o.x + std::f64::consts::TAU {
                    end -= std::f64::consts::TAU;
                }
                let pieces = ((end - o.x) / mesh_scale).ceil().max(1.0) as usize;
                let pts: Vec<Point> = (0..=pieces).map(|i| Point::new(o.x + (end - o.x) * i as f64 / pieces as f64, v.y, 0.0)).collect();
                x.extend(&PLChain::polyline(&pts, c.multiplicity), 1);
            }
        }
        (ModelKind::FlatTorus | ModelKind::EmbeddedSphere, 0) => {
            let total: i64 = b.cells.iter().map(|c| c.multiplicity).sum();
            if total != 0 {
                return Err(Error::NotNullHomologous);
            }
            for c in &b.cells {
                let v = c.vertices[0];
                let pts = spoke(model, apex, &v, mesh_scale);
                x.extend(&PLChain::polyline(&pts, c.multiplicity), 1);
            }
        }
        (ModelKind::EmbeddedSphere, 1) => {
            let reach = b.vertices().map(|v| model.distance(apex, v)).fold(0.0f64, f64::max);
            let bands = (reach / mesh_scale).ceil().max(1.0) as usize;
            for c in &b.cells {
                cone_triangle(model, &mut x, apex, &c.vertices[0], &c.vertices[1], c.multiplicity, bands);
            }
        }
        (ModelKind::FlatTorus, 1) => {
            let (mut l1, mut l2) = (0i64, 0i64);
            for c in &b.cells {
                let (a, e) = (c.vertices[0], c.vertices[1]);
                let o_a = nearest_lift(apex, &a);
                // Torus cone triangles stay whole so the correction cells
                // below cancel against their spokes exactly.
                x.push(vec![o_a, a, e], c.multiplicity);
                let o_e = nearest_lift(apex, &e);
                let p = o_a - o_e;
                let (p1, p2) = (p.x.round() as i64, p.y.round() as i64);
                if p1 != 0 || p2 != 0 {
                    // Swap the spoke to e for the canonical one, leaving the
                    // closed loop from o_e to o_e + p behind.
                    x.push(vec![o_e, o_a, e], c.multiplicity);
                    if p1 != 0 && p2 != 0 {
                        let o = model.wrap(apex);
                        let c1 = o + Point::new(p1 as f64, 0.0, 0.0);
                        x.push(vec![o, c1, o + p], c.multiplicity);
                    }
                    l1 += c.multiplicity * p1;
                    l2 += c.multiplicity * p2;
                }
            }
            if l1 != 0 || l2 != 0 {
                return Err(Error::NotNullHomologous);
            }
        }
        _ => return Err(Error::Unsupported(format!("bounding chains of {}-cycles on {}", b.dim, model.name))),
    }
    let x = x.simplify(model);
    if !boundary_pl(&x, model).same_as(&b, model) {
        return Err(Error::NotNullHomologous);
    }
    Ok(x)
}

fn spoke(model: &ManifoldModel, o: &Point, v: &Point, mesh_scale: f64) -> Vec<Point> {
    match model.kind {
        ModelKind::FlatTorus => {
            let start = nearest_lift(o, v);
            let len = (v - start).norm();
            let pieces = (len / mesh_scale).ceil().max(1.0) as usize;
            (0..=pieces).map(|i| start + (v - start) * (i as f64 / pieces as f64)).collect()
        }
        _ => {
            let angle = model.distance(o, v);
            let pieces = (angle / mesh_scale).ceil().max(2.0) as usize;
            // Geodesic points, so long spokes never pass through the centre.
            let dir = model.displacement(o, v);
            let mut pts: Vec<Point> = (0..pieces).map(|i| model.exp(o, &(dir * (i as f64 / pieces as f64)))).collect();
            pts.push(*v);
            pts
        }
    }
}

/// Adds the cone triangle [o, a, e] split into `bands` strips along the
/// spokes. Spoke subdivision points depend only on the spoke, so
/// neighbouring triangles still cancel along shared spokes.
fn cone_triangle(model: &ManifoldModel, x: &mut PLChain, o: &Point, a: &Point, e: &Point, m: i64, bands: usize) {
    let at = |t: f64, v: &Point| model.retract(&(o + (v - o) * t));
    let mut prev_a = *o;
    let mut prev_e = *o;
    for i in 1..=bands {
        let t = i as f64 / bands as f64;
        let (na, ne) = if i == bands { (*a, *e) } else { (at(t, a), at(t, e)) };
        if i == 1 {
            x.push(vec![*o, na, ne], m);
        } else {
            x.push(vec![prev_a, na, ne], m);
            x.push(vec![prev_a, ne, prev_e], m);
        }
        prev_a = na;
        prev_e = ne;
    }
}

pub fn bounding_chain(b: &PLChain, model: &ManifoldModel, mesh_scale: f64) -> Result<PLChain> {
    let apex = default_apex(b, model, 0);
    bounding_chain_with_apex(b, model, mesh_scale, &apex)
}

/// Smallest distance between two carriers, by sampling.
pub fn carrier_distance(a: &PLChain, b: &PLChain, model: &ManifoldModel) -> f64 {
    let pa: Vec<Point> = a.cells.iter().flat_map(|c| sample_cell(model, &c.vertices, 16)).collect();
    let pb: Vec<Point> = b.cells.iter().flat_map(|c| sample_cell(model, &c.vertices, 16)).collect();
    let mut best = f64::INFINITY;
    for x in &pa {
        for y in &pb {
            best = best.min(model.distance(x, y));
        }
    }
    best
}

/// Linking number lk(b−, b+) = ι(b−, X) with ∂X = b+.
pub fn linking_number(b_minus: &PLChain, b_plus: &PLChain, model: &ManifoldModel, mesh_scale: f64) -> Result<i64> {
    if b_minus.dim + b_plus.dim + 1 != model.n {
        return Err(Error::DegreeMismatch(format!("dimensions {} and {} do not link in dimension {}", b_minus.dim, b_plus.dim, model.n)));
    }
    if b_minus.is_empty() || b_plus.is_empty() {
        return Ok(0);
    }
    if !is_cycle(b_minus, model) || !is_cycle(b_plus, model) {
        return Err(Error::NotABoundary("linking needs cycles".into()));
    }
    if carriers_meet(b_minus, b_plus, model) {
        return Err(Error::CarriersIntersect);
    }
    let lk = linking_with_apex(b_minus, b_plus, model, mesh_scale, None)?;
    if cfg!(debug_assertions) {
        // Independence of the bounding chain: refine and move the apex.
        let again = linking_with_apex(b_minus, b_plus, model, mesh_scale / 2.0, Some(1))?;
        debug_assert_eq!(lk, again, "linking number depends on the bounding chain");
    }
    Ok(lk)
}

fn carriers_meet(a: &PLChain, b: &PLChain, model: &ManifoldModel) -> bool {
    let (pts, other) = match (a.dim, b.dim) {
        (0, _) => (a, b),
        (_, 0) => (b, a),
        _ => return carrier_distance(a, b, model) < SNAP,
    };
    pts.vertices().any(|x| {
        other.cells.iter().any(|c| match c.vertices.len() {
            1 => model.distance(&c.vertices[0], x) < SNAP,
            2 => point_segment_distance(model, x, &c.vertices[0], &c.vertices[1]) < SNAP,
            _ => false,
        })
    })
}

/// Distance from x to a segment cell (chord distance on the sphere).
pub fn point_segment_distance(model: &ManifoldModel, x: &Point, a: &Point, b: &Point) -> f64 {
    let x = match model.kind {
        ModelKind::FlatTorus => nearest_lift(x, a),
        ModelKind::CircleUnion => {
            if x.y != a.y {
                return f64::INFINITY;
            }
            let per = std::f64::consts::TAU;
            let mid = 0.5 * (a.x + b.x);
            Point::new(x.x + ((mid - x.x) / per).round() * per, x.y, 0.0)
        }
        ModelKind::EmbeddedSphere => *x,
    };
    let d = b - a;
    let t = if d.norm_squared() > 0.0 { ((x - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t - x).norm()
}

fn linking_with_apex(b_minus: &PLChain, b_plus: &PLChain, model: &ManifoldModel, mesh_scale: f64, variant: Option<u64>) -> Result<i64> {
    let base = default_apex(b_plus, model, 0);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(variant.unwrap_or(0));
    let mut apex = base;
    if variant.is_some() {
        apex = jitter_chain(model, &PLChain::point(base, 1), &mut rng, 0.05).vertices().next().copied().unwrap_or(base);
    }
    for _ in 0..=JITTER_RETRIES {
        let x = if model.kind == ModelKind::CircleUnion {
            circle_bounding(b_plus, model, mesh_scale, &apex)?
        } else {
            bounding_chain_with_apex(b_plus, model, mesh_scale, &apex)?
        };
        match intersection_number_raw(b_minus, &x, model) {
            Err(Error::NontransverseAfterJitter) => {
                apex = jitter_chain(model, &PLChain::point(base, 1), &mut rng, 1e-3).vertices().next().copied().unwrap_or(base);
            }
            other => return other,
        }
    }
    Err(Error::NontransverseAfterJitter)
}

/// Circle unions need one apex per component.
fn circle_bounding(b: &PLChain, model: &ManifoldModel, mesh_scale: f64, apex: &Point) -> Result<PLChain> {
    let mut out = PLChain::empty(1);
    for comp in 0..model.components() {
        let part = PLChain {
            dim: 0,
            cells: b.cells.iter().filter(|c| c.vertices[0].y as usize == comp).cloned().collect(),
        };
        if part.is_empty() {
            continue;
        }
        let o = if comp == 0 { *apex } else { default_apex(&part, model, comp) };
        out.extend(&bounding_chain_with_apex(&part, model, mesh_scale, &o)?, 1);
    }
    Ok(out)
}

/// Local degree of a top-dimensional chain at a point off its codimension-one
/// skeleton.
pub fn local_degree(c: &PLChain, x: &Point, model: &ManifoldModel) -> Result<i64> {
    if c.dim != model.n {
        return Err(Error::DegreeMismatch("local degree needs a top-dimensional chain".into()));
    }
    intersection_number_raw(&PLChain::point(*x, 1), c, model)
}

/// Frame of the model orientation at x.
pub fn model_frame(model: &ManifoldModel) -> Oriented {
    Oriented::new(DMatrix::identity(model.n, model.n))
}
