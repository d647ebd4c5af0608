//! Flowlines through chains: the cap maps I_g, the two-chain maps
//! I_{g0,g1}, and entrywise checks of the identities relating them to d.

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{FlowField, MorseData, PathEnd, Trajectory};
use crate::complex::FilteredComplex;
use crate::error::{Error, Result};
use crate::geometry::{ModelKind, Point};
use crate::plchain::chain::{boundary_pl, cell_frame, cell_intersections, jitter_chain, local_degree, model_diameter, PLChain, ANGLE_TOL, JITTER_RETRIES};
use crate::plchain::orient::{point_sign, Oriented};

/// Integer map on all critical points of ±f: entry (q, p) is the
/// coefficient of q in the image of p.
pub type IntMap = DMatrix<i64>;

/// A flowline of ±f meeting a cell of a chain.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingEvent {
    pub source: usize,
    pub sink: usize,
    /// Time along the flowline (any increasing parameter on circles).
    pub time: f64,
    #[serde(skip)]
    pub point: Point,
    pub cell: usize,
    /// Local sign times the cell multiplicity.
    pub sign: i64,
}

#[derive(Debug, Clone)]
pub struct CapMap {
    pub v: usize,
    pub matrix: IntMap,
    pub events: Vec<CrossingEvent>,
}

/// Distance below which a hit is treated as landing on a vertex.
const VERTEX_TOL: f64 = 1e-9;

/// A flowline from p to q with what is needed to orient M̃(p, q) along it.
struct Flowline {
    p: usize,
    q: usize,
    branch: i8,
    entry_side: i8,
    samples: Vec<(f64, Point)>,
}

impl Flowline {
    fn from_trajectory(t: &Trajectory) -> Self {
        Flowline { p: t.source, q: t.sink, branch: t.branch, entry_side: t.entry_side, samples: t.samples.clone() }
    }

    fn moduli(&self, ff: &FlowField, x: &Point) -> Result<Oriented> {
        ff.moduli_tangent(self.p, self.q, self.branch, self.entry_side, x)
    }
}

fn fields(md: &MorseData, sign: i8) -> (FlowField<'_>, FlowField<'_>, &[Trajectory]) {
    if sign > 0 {
        (md.field(), md.neg_field(), &md.trajectories)
    } else {
        (md.neg_field(), md.field(), &md.neg_trajectories)
    }
}

fn check_clear(ff: &FlowField, g: &PLChain) -> Result<()> {
    for c in ff.crits {
        if g.distance_to(ff.model, &c.coords) <= c.radius {
            return Err(Error::ChainTooCloseToCritical(c.id.clone()));
        }
    }
    Ok(())
}

/// The flowline through x, from the maximum above it to the minimum below.
fn flowline_through(md: &MorseData, sign: i8, x: &Point) -> Result<Flowline> {
    let (fwd, back, _) = fields(md, sign);
    for c in fwd.crits {
        if md.model.distance(x, &c.coords) <= c.radius {
            return Err(Error::ChainTooCloseToCritical(c.id.clone()));
        }
    }
    if md.model.kind == ModelKind::CircleUnion {
        return Ok(circle_flowline(&fwd, x));
    }
    let down = fwd.integrate_from(x, None, &md.opts)?;
    let up = back.integrate_from(x, None, &md.opts)?;
    let (PathEnd::Sink(q), PathEnd::Sink(p)) = (&down.end, &up.end) else {
        // x sits on the stable or unstable manifold of a saddle.
        return Err(Error::NontransverseCrossing);
    };
    let mut samples: Vec<(f64, Point)> = up.samples.iter().rev().map(|(t, y)| (-t, *y)).collect();
    samples.extend(down.samples.iter().skip(1).copied());
    Ok(Flowline { p: *p, q: *q, branch: 0, entry_side: 0, samples })
}

/// On a circle the flowline through x is the slope arc between the
/// neighbouring critical points; its arc length serves as time.
fn circle_flowline(ff: &FlowField, x: &Point) -> Flowline {
    let tau = std::f64::consts::TAU;
    let dir = ff.v(x).x.signum();
    let ahead = |d: f64| {
        ff.crits
            .iter()
            .enumerate()
            .filter(|(_, c)| c.coords.y == x.y)
            .map(|(i, c)| (i, ((c.coords.x - x.x) * d).rem_euclid(tau)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("component has critical points")
    };
    let (q, dq) = ahead(dir);
    let (p, dp) = ahead(-dir);
    let at = |s: f64| Point::new(x.x + dir * s, x.y, 0.0);
    Flowline { p, q, branch: 0, entry_side: 0, samples: vec![(-dp, at(-dp)), (0.0, *x), (dq, at(dq))] }
}

fn tangent_column(ff: &FlowField, x: &Point, v: &Point) -> DVector<f64> {
    ff.model.to_tangent(x, v)
}

/// Hits of a flowline with the cells of a chain of complementary
/// dimension, in time order.
fn hits_along(ff: &FlowField, line: &Flowline, g: &PLChain) -> Result<Vec<CrossingEvent>> {
    let model = ff.model;
    let mut out = Vec::new();
    for w in line.samples.windows(2) {
        let ((t0, a), (t1, b)) = (w[0], w[1]);
        if (b - a).norm() == 0.0 {
            continue;
        }
        for (ci, cell) in g.cells.iter().enumerate() {
            let hits = cell_intersections(model, &[a, b], &cell.vertices).map_err(|_| Error::NontransverseCrossing)?;
            for hit in hits {
                if hit.s < VERTEX_TOL || hit.s > 1.0 - VERTEX_TOL {
                    return Err(Error::NontransverseCrossing);
                }
                if cell.vertices.len() > 1 && cell.vertices.iter().any(|v| model.distance(v, &hit.point) < VERTEX_TOL) {
                    return Err(Error::NontransverseCrossing);
                }
                if cell.vertices.len() == 2 {
                    let d = tangent_column(ff, &hit.point, &(b - a));
                    let e = tangent_column(ff, &hit.point, &(cell.vertices[1] - cell.vertices[0]));
                    let sine = (d[0] * e[1] - d[1] * e[0]) / (d.norm() * e.norm());
                    if sine.abs() < ANGLE_TOL {
                        return Err(Error::NontransverseCrossing);
                    }
                }
                out.push(CrossingEvent { source: line.p, sink: line.q, time: t0 + hit.s * (t1 - t0), point: hit.point, cell: ci, sign: cell.multiplicity });
            }
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

/// The map I_g on CM_*(±f): counts of V ×_g M̃(p, q) for |p| − |q| = n − v.
/// `sign_of_f` selects f (+1) or −f (−1). No jitter is applied.
pub fn cap_map(md: &MorseData, g: &PLChain, sign_of_f: i8) -> Result<CapMap> {
    let (ff, _, trajs) = fields(md, sign_of_f);
    let n = ff.n();
    let count = ff.crits.len();
    let mut matrix = IntMap::zeros(count, count);
    let mut events = Vec::new();
    if g.dim > n {
        return Err(Error::DegreeMismatch(format!("{}-chain on a {}-manifold", g.dim, n)));
    }
    if g.is_empty() {
        return Ok(CapMap { v: g.dim, matrix, events });
    }
    if g.dim == n {
        // M̃(p, p) is the positively oriented point p.
        for p in 0..count {
            let deg = local_degree(g, &ff.crits[p].coords, ff.model).map_err(|_| Error::NontransverseCrossing)?;
            matrix[(p, p)] += deg;
        }
        return Ok(CapMap { v: g.dim, matrix, events });
    }
    check_clear(&ff, g)?;
    if g.dim == 0 {
        for (ci, cell) in g.cells.iter().enumerate() {
            let x = cell.vertices[0];
            let line = flowline_through(md, sign_of_f, &x)?;
            let m = line.moduli(&ff, &x)?;
            let s = point_sign(&Oriented::point(n, 1), &m).map_err(|_| Error::NontransverseCrossing)?;
            let sign = i64::from(s) * cell.multiplicity;
            matrix[(line.q, line.p)] += sign;
            events.push(CrossingEvent { source: line.p, sink: line.q, time: 0.0, point: x, cell: ci, sign });
        }
        return Ok(CapMap { v: g.dim, matrix, events });
    }
    // v = n − 1 ≥ 1: crossings with the trajectories between adjacent indices.
    for t in trajs {
        let line = Flowline::from_trajectory(t);
        for mut e in hits_along(&ff, &line, g)? {
            let frame = cell_frame(ff.model, &g.cells[e.cell].vertices, &e.point);
            let m = line.moduli(&ff, &e.point)?;
            let s = point_sign(&frame, &m).map_err(|_| Error::NontransverseCrossing)?;
            e.sign *= i64::from(s);
            matrix[(t.sink, t.source)] += e.sign;
            events.push(e);
        }
    }
    Ok(CapMap { v: g.dim, matrix, events })
}

/// Linear map T_{x0}M → T_{x1}M of positive determinant sending v0 to v1.
/// Only its restriction to M̃ and its orientation class enter the signs, so
/// it stands in for the linearized flow.
fn transport(v0: &DVector<f64>, v1: &DVector<f64>) -> DMatrix<f64> {
    if v0.len() == 1 {
        return DMatrix::from_element(1, 1, v1[0] / v0[0]);
    }
    let r2 = v0.norm_squared();
    let (a, b) = ((v1[0] * v0[0] + v1[1] * v0[1]) / r2, (v1[1] * v0[0] - v1[0] * v0[1]) / r2);
    DMatrix::from_row_slice(2, 2, &[a, -b, b, a])
}

/// Sign of a point of (V0 × V1) ×_{M×M} (M̃(p, q) × (0, ∞)) under
/// E(γ, t) = (γ(0), γ(t)).
fn two_point_sign(w0: &Oriented, w1: &Oriented, b: &Oriented, v0: &DVector<f64>, v1: &DVector<f64>) -> Result<i8> {
    let n = v0.len();
    let (a0, a1) = (w0.dim(), w1.dim());
    let mut vb = DMatrix::zeros(2 * n, a0 + a1);
    vb.view_mut((0, 0), (n, a0)).copy_from(&w0.basis);
    vb.view_mut((n, a0), (n, a1)).copy_from(&w1.basis);
    let mut v = Oriented::new(vb);
    v.sign = w0.sign * w1.sign;
    let phi = transport(v0, v1);
    let m = b.dim();
    let mut eb = DMatrix::zeros(2 * n, m + 1);
    eb.view_mut((0, 0), (n, m)).copy_from(&b.basis);
    eb.view_mut((n, 0), (n, m)).copy_from(&(&phi * &b.basis));
    eb.view_mut((n, m), (n, 1)).copy_from(v1);
    let mut e = Oriented::new(eb);
    e.sign = b.sign;
    point_sign(&v, &e).map_err(|_| Error::NontransverseCrossing)
}

#[derive(Debug, Clone)]
pub struct TwoPointMap {
    pub matrix: IntMap,
    /// Number of (flowline, t) pairs counted.
    pub pairs: usize,
}

/// The map I_{g0,g1} on CM_*(±f): signed counts of flowlines γ from p to q
/// with γ(0) on g0 and γ(t) on g1 for some t > 0, where
/// |p| − |q| = 2n − v0 − v1 − 1. No jitter is applied.
pub fn two_point_map(md: &MorseData, g0: &PLChain, g1: &PLChain, sign_of_f: i8) -> Result<TwoPointMap> {
    let (ff, _, trajs) = fields(md, sign_of_f);
    let n = ff.n();
    let count = ff.crits.len();
    let mut out = TwoPointMap { matrix: IntMap::zeros(count, count), pairs: 0 };
    let (v0, v1) = (g0.dim, g1.dim);
    if v0 > n || v1 > n {
        return Err(Error::DegreeMismatch("chain dimension exceeds the model dimension".into()));
    }
    if g0.is_empty() || g1.is_empty() {
        return Ok(out);
    }
    check_clear(&ff, g0)?;
    check_clear(&ff, g1)?;
    let gap = (2 * n) as i64 - v0 as i64 - v1 as i64 - 1;
    if gap < 1 || gap > n as i64 {
        return Ok(out);
    }
    // Flowlines to examine, with the events on each chain.
    let mut lines: Vec<(Flowline, Vec<CrossingEvent>, Vec<CrossingEvent>)> = Vec::new();
    let point_event = |line: &Flowline, ci: usize, x: Point, mult: i64| CrossingEvent { source: line.p, sink: line.q, time: 0.0, point: x, cell: ci, sign: mult };
    if v0 == 0 && v1 + 1 == n {
        for (ci, cell) in g0.cells.iter().enumerate() {
            let x = cell.vertices[0];
            let line = flowline_through(md, sign_of_f, &x)?;
            let e1 = hits_along(&ff, &line, g1)?;
            let e0 = vec![point_event(&line, ci, x, cell.multiplicity)];
            lines.push((line, e0, e1));
        }
    } else if v1 == 0 && v0 + 1 == n {
        for (ci, cell) in g1.cells.iter().enumerate() {
            let x = cell.vertices[0];
            let line = flowline_through(md, sign_of_f, &x)?;
            let e0 = hits_along(&ff, &line, g0)?;
            let e1 = vec![point_event(&line, ci, x, cell.multiplicity)];
            lines.push((line, e0, e1));
        }
    } else if v0 + 1 == n && v1 + 1 == n {
        for t in trajs {
            let line = Flowline::from_trajectory(t);
            let e0 = hits_along(&ff, &line, g0)?;
            let e1 = hits_along(&ff, &line, g1)?;
            lines.push((line, e0, e1));
        }
    } else {
        // The remaining cases need a point on a trajectory of codimension
        // one, which a transverse configuration avoids.
        return Ok(out);
    }
    for (line, e0s, e1s) in &lines {
        for e0 in e0s {
            let b = line.moduli(&ff, &e0.point)?;
            let w0 = cell_frame(ff.model, &g0.cells[e0.cell].vertices, &e0.point);
            let vel0 = tangent_column(&ff, &e0.point, &ff.v(&e0.point));
            for e1 in e1s {
                if (e1.time - e0.time).abs() < 1e-12 {
                    return Err(Error::SimultaneousCrossing);
                }
                if e1.time < e0.time {
                    continue;
                }
                let w1 = cell_frame(ff.model, &g1.cells[e1.cell].vertices, &e1.point);
                let vel1 = tangent_column(&ff, &e1.point, &ff.v(&e1.point));
                let s = two_point_sign(&w0, &w1, &b, &vel0, &vel1)?;
                out.matrix[(line.q, line.p)] += i64::from(s) * e0.sign * e1.sign;
                out.pairs += 1;
            }
        }
    }
    Ok(out)
}

/// The fiber product g0 ×_M g1 as a chain, when it is zero-dimensional.
/// `None` means a top-dimensional product, whose cap map vanishes because
/// both carriers avoid the critical points.
pub fn fiber_product_chain(md: &MorseData, g0: &PLChain, g1: &PLChain) -> Result<Option<PLChain>> {
    let n = md.model.n;
    if g0.dim + g1.dim < n {
        return Ok(Some(PLChain::empty(0)));
    }
    let dim = g0.dim + g1.dim - n;
    if dim == n {
        return Ok(None);
    }
    if dim > 0 {
        return Err(Error::Unsupported(format!("{dim}-dimensional fiber products of chains")));
    }
    let mut out = PLChain::empty(0);
    for c0 in &g0.cells {
        for c1 in &g1.cells {
            for hit in cell_intersections(&md.model, &c0.vertices, &c1.vertices).map_err(|_| Error::NontransverseCrossing)? {
                let f0 = cell_frame(&md.model, &c0.vertices, &hit.point);
                let f1 = cell_frame(&md.model, &c1.vertices, &hit.point);
                let s = point_sign(&f0, &f1).map_err(|_| Error::NontransverseCrossing)?;
                out.push(vec![hit.point], i64::from(s) * c0.multiplicity * c1.multiplicity);
            }
        }
    }
    Ok(Some(out))
}

/// The boundary operator of ±f as an integer map on critical points.
pub fn d_matrix(md: &MorseData, sign_of_f: i8) -> IntMap {
    let cx: &FilteredComplex = if sign_of_f > 0 { &md.cx_f } else { &md.cx_neg };
    let crits = if sign_of_f > 0 { &md.crits } else { &md.neg_crits };
    let pos = |g: usize| crits.iter().position(|c| c.id == cx.generators[g].id).expect("generator is a critical point");
    let mut m = IntMap::zeros(crits.len(), crits.len());
    for (j, chain) in cx.d.iter().enumerate() {
        for (i, c) in &chain.coeffs {
            m[(pos(*i), pos(j))] = c.to_integer().to_i64().expect("boundary coefficients fit in i64");
        }
    }
    m
}

/// Outcome of an entrywise identity check.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub fixture: String,
    pub residual_max: i64,
    pub status: String,
    pub seed: u64,
    /// Jitter rounds needed before every term was transverse.
    pub jitter_rounds: usize,
}

impl IdentityReport {
    pub fn new(identity: &str, fixture: &str, residual: &IntMap, seed: u64, jitter_rounds: usize) -> Self {
        let residual_max = residual.iter().map(|v| v.abs()).max().unwrap_or(0);
        IdentityReport {
            identity: identity.into(),
            fixture: fixture.into(),
            residual_max,
            status: if residual_max == 0 { "pass" } else { "fail" }.into(),
            seed,
            jitter_rounds,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

fn is_transversality_failure(e: &Error) -> bool {
    matches!(e, Error::NontransverseCrossing | Error::SimultaneousCrossing | Error::NontransverseAfterJitter)
}

/// Runs `f` on the chains, moving all of them by fresh seeded rigid motions
/// of size 1e−6·diameter after each transversality failure.
pub fn with_jitter<T>(md: &MorseData, chains: &[PLChain], seed: u64, mut f: impl FnMut(&[PLChain]) -> Result<T>) -> Result<(T, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 1e-6 * model_diameter(&md.model);
    let mut cur = chains.to_vec();
    for round in 0..=JITTER_RETRIES {
        match f(&cur) {
            Err(e) if is_transversality_failure(&e) => {
                cur = chains.iter().map(|c| jitter_chain(&md.model, c, &mut rng, size)).collect();
                if round == JITTER_RETRIES {
                    return Err(Error::NontransverseCrossing);
                }
            }
            other => return other.map(|v| (v, round)),
        }
    }
    Err(Error::NontransverseCrossing)
}

/// I_g with the jitter protocol applied.
pub fn cap_map_seeded(md: &MorseData, g: &PLChain, sign_of_f: i8, seed: u64) -> Result<CapMap> {
    with_jitter(md, std::slice::from_ref(g), seed, |c| cap_map(md, &c[0], sign_of_f)).map(|r| r.0)
}

fn boundary_or_empty(md: &MorseData, g: &PLChain) -> PLChain {
    if g.dim == 0 {
        PLChain::empty(0)
    } else {
        boundary_pl(g, &md.model)
    }
}

fn sign_pow(e: usize) -> i64 {
    if e % 2 == 0 {
        1
    } else {
        -1
    }
}

/// I_{∂g} − d I_g + (−1)^{n−v} I_g d = 0 on CM_*(±f).
pub fn check_cap_leibniz(md: &MorseData, g: &PLChain, sign_of_f: i8, fixture: &str, seed: u64) -> Result<IdentityReport> {
    let n = md.model.n;
    let d = d_matrix(md, sign_of_f);
    let (res, rounds) = with_jitter(md, std::slice::from_ref(g), seed, |c| {
        let g = &c[0];
        let ig = cap_map(md, g, sign_of_f)?.matrix;
        let idg = cap_map(md, &boundary_or_empty(md, g), sign_of_f)?.matrix;
        Ok(idg - &d * &ig + (&ig * &d) * sign_pow(n - g.dim))
    })?;
    Ok(IdentityReport::new("igprop-ii", fixture, &res, seed, rounds))
}

/// Π(I_g x, y) = (−1)^{(n−v)(n−k)} Π(x, I_g y) for generators x of
/// CM(−f) and y of CM_k(f).
pub fn check_cap_adjoint(md: &MorseData, g: &PLChain, fixture: &str, seed: u64) -> Result<IdentityReport> {
    let n = md.model.n;
    let ((plus, minus), rounds) = with_jitter(md, std::slice::from_ref(g), seed, |c| Ok((cap_map(md, &c[0], 1)?.matrix, cap_map(md, &c[0], -1)?.matrix)))?;
    let count = md.crits.len();
    let mut res = IntMap::zeros(count, count);
    for p in 0..count {
        for q in 0..count {
            let k = md.crits[p].index;
            // Π(I_{−f} q, p) is the coefficient of p in I_{−f}(q).
            res[(q, p)] = minus[(p, q)] - sign_pow((n - g.dim) * (n - k)) * plus[(q, p)];
        }
    }
    Ok(IdentityReport::new("igprop-i", fixture, &res, seed, rounds))
}

/// Signed number of points of a 0-chain equals Π(M_{−f}, I_g M_f).
pub fn check_piint(md: &MorseData, g: &PLChain, fixture: &str, seed: u64) -> Result<IdentityReport> {
    if g.dim != 0 {
        return Err(Error::DegreeMismatch("point-count identity needs a 0-chain".into()));
    }
    let n = md.model.n;
    let (ig, rounds) = with_jitter(md, std::slice::from_ref(g), seed, |c| Ok(cap_map(md, &c[0], 1)?.matrix))?;
    let mut pairing = 0;
    for q in (0..md.crits.len()).filter(|&q| md.crits[q].index == 0) {
        for p in (0..md.crits.len()).filter(|&p| md.crits[p].index == n) {
            pairing += ig[(q, p)];
        }
    }
    let cardinality: i64 = g.cells.iter().map(|c| c.multiplicity).sum();
    let res = IntMap::from_element(1, 1, cardinality - pairing);
    Ok(IdentityReport::new("piint", fixture, &res, seed, rounds))
}

/// The six-term identity for I_{g0,g1} on CM_*(±f).
pub fn check_fundid(md: &MorseData, g0: &PLChain, g1: &PLChain, sign_of_f: i8, fixture: &str, seed: u64) -> Result<IdentityReport> {
    let n = md.model.n;
    let d = d_matrix(md, sign_of_f);
    let (v0, v1) = (g0.dim, g1.dim);
    let chains = [g0.clone(), g1.clone()];
    let (res, rounds) = with_jitter(md, &chains, seed, |c| {
        let (g0, g1) = (&c[0], &c[1]);
        let i01 = two_point_map(md, g0, g1, sign_of_f)?.matrix;
        let mut total = two_point_map(md, &boundary_or_empty(md, g0), g1, sign_of_f)?.matrix;
        total += two_point_map(md, g0, &boundary_or_empty(md, g1), sign_of_f)?.matrix * sign_pow(v0);
        total += (&i01 * &d) * sign_pow(v0 + v1);
        total += &d * &i01;
        let ig0 = cap_map(md, g0, sign_of_f)?.matrix;
        let ig1 = cap_map(md, g1, sign_of_f)?.matrix;
        total += (ig1 * ig0) * sign_pow(v0 * (n - v1));
        if let Some(prod) = fiber_product_chain(md, g0, g1)? {
            total += cap_map(md, &prod, sign_of_f)?.matrix * sign_pow(1 + n * (n - v1));
        }
        Ok(total)
    })?;
    Ok(IdentityReport::new("fundid", fixture, &res, seed, rounds))
}
