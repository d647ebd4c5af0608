//! PL unstable manifolds and the pseudoboundaries glued from them.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::complex::Chain;
use crate::error::{Error, Result};
use crate::flow::{FlowField, MorseData, Path, PathEnd, Trajectory};
use crate::geometry::{ManifoldModel, ModelKind, Point};
use crate::plchain::chain::{boundary_pl, cell_frame, is_cycle, PLChain};
use crate::plchain::orient::det_sign;

/// Sampling density of the PL approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    /// Shots around the unstable circle of an index-2 point.
    pub shots: usize,
    /// Polyline vertices closer than this to their predecessor are dropped.
    pub spacing: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { shots: 48, spacing: 0.02 }
    }
}

/// Angular offset of the extra shots on either side of a connection.
const SIDE_OFFSET: f64 = 1e-6;

pub(crate) fn flow(md: &MorseData, sign_of_f: i8) -> (FlowField<'_>, &[Trajectory]) {
    if sign_of_f > 0 {
        (md.field(), &md.trajectories)
    } else {
        (md.neg_field(), &md.neg_trajectories)
    }
}

/// Representative of x in the lift of the periodic coordinates nearest to
/// `anchor`.
fn lift(model: &ManifoldModel, anchor: &Point, x: &Point) -> Point {
    match model.kind {
        ModelKind::EmbeddedSphere => *x,
        _ => anchor + model.displacement(anchor, x),
    }
}

/// Polyline from `start` through the thinned samples, closed off at `end`,
/// with consecutive vertices in neighbouring lifts.
fn thin_polyline(ff: &FlowField, start: &Point, samples: &[(f64, Point)], end: &Point, spacing: f64) -> Vec<Point> {
    let model = ff.model;
    let mut out = vec![*start];
    for (_, x) in samples {
        let last = out[out.len() - 1];
        if model.distance(&last, x) >= spacing && model.distance(x, end) >= 0.5 * spacing {
            out.push(lift(model, &last, x));
        }
    }
    let last = out[out.len() - 1];
    out.push(lift(model, &last, end));
    out
}

/// Branch polylines of the unstable manifolds of index-1 points, computed
/// once so that every copy shares its vertices exactly.
struct Branches<'a> {
    ff: FlowField<'a>,
    trajs: &'a [Trajectory],
    spacing: f64,
    cache: HashMap<(usize, i8), Vec<Point>>,
}

impl<'a> Branches<'a> {
    fn new(md: &'a MorseData, sign_of_f: i8, spacing: f64) -> Self {
        let (ff, trajs) = flow(md, sign_of_f);
        Branches { ff, trajs, spacing, cache: HashMap::new() }
    }

    /// Polyline from q to the sink of its branch, starting at q's coordinates.
    fn get(&mut self, q: usize, branch: i8) -> Result<Vec<Point>> {
        if let Some(v) = self.cache.get(&(q, branch)) {
            return Ok(v.clone());
        }
        let t = self
            .trajs
            .iter()
            .find(|t| t.source == q && t.branch == branch)
            .ok_or_else(|| Error::UnpairableDelta(format!("no branch {branch} from {}", self.ff.crits[q].id)))?;
        let line = thin_polyline(&self.ff, &self.ff.crits[q].coords, &t.samples, &self.ff.crits[t.sink].coords, self.spacing);
        self.cache.insert((q, branch), line.clone());
        Ok(line)
    }
}

/// Translates a polyline so that its first vertex lands on `at` (a lift of
/// the same point).
fn moved_to(line: &[Point], at: &Point) -> Vec<Point> {
    let shift = at - line[0];
    line.iter().map(|v| v + shift).collect()
}

fn arclength_fractions(line: &[Point]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in line.windows(2) {
        acc.push(acc[acc.len() - 1] + (w[1] - w[0]).norm());
    }
    let total = acc[acc.len() - 1].max(1e-300);
    acc.iter().map(|a| a / total).collect()
}

/// Triangulates the strip between two polylines that share their first and
/// last vertices, oriented so that `a` to `b` is the positive angular side.
fn zipper(a: &[Point], b: &[Point], mult: i64, out: &mut PLChain) {
    let (sa, sb) = (arclength_fractions(a), arclength_fractions(b));
    let (mut i, mut j) = (0, 0);
    while i + 1 < a.len() || j + 1 < b.len() {
        let advance_a = j + 1 == b.len() || (i + 1 < a.len() && sa[i + 1] <= sb[j + 1]);
        if advance_a {
            out.push(vec![a[i], a[i + 1], b[j]], mult);
            i += 1;
        } else {
            out.push(vec![b[j], a[i], b[j + 1]], mult);
            j += 1;
        }
    }
}

fn exit_side(path: &Path, q: usize) -> Option<i8> {
    path.passes.iter().find(|p| p.crit == q).map(|p| p.exit_side)
}

/// Disk approximating the closure of W^u(p) for an index-2 point of a
/// surface.
fn unstable_disk(md: &MorseData, p: usize, res: &Resolution, branches: &mut Branches) -> Result<PLChain> {
    let ff = branches.ff.clone();
    let c = &ff.crits[p];
    let shoot = |angle: f64| -> Result<Option<(Path, Vec<Point>)>> {
        let path = ff.integrate_from(&ff.shot_start(p, angle), Some(p), &md.opts)?;
        match path.end {
            PathEnd::Sink(s) => {
                let line = thin_polyline(&ff, &c.coords, &path.samples, &ff.crits[s].coords, res.spacing);
                Ok(Some((path, line)))
            }
            PathEnd::Stalled(_) => Ok(None),
        }
    };
    // Fronts in angular order. A flagged front is followed by the slit
    // between the two sides of a connection, where no strip is laid.
    let mut events: Vec<(f64, Option<&Trajectory>)> = (0..res.shots).map(|j| (TAU * (j as f64 + 0.5) / res.shots as f64, None)).collect();
    for t in branches.trajs.iter().filter(|t| t.source == p) {
        events.push((t.param.rem_euclid(TAU), Some(t)));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut fronts: Vec<(Vec<Point>, bool)> = Vec::new();
    for (angle, conn) in events {
        match conn {
            None => {
                if let Some((_, line)) = shoot(angle)? {
                    fronts.push((line, false));
                }
            }
            Some(t) => {
                let q = t.sink;
                let conn_err = || Error::NontransverseConnection(format!("sides of {} to {}", c.id, ff.crits[q].id));
                let (before, before_line) = shoot(angle - SIDE_OFFSET)?.ok_or_else(conn_err)?;
                let (after, after_line) = shoot(angle + SIDE_OFFSET)?.ok_or_else(conn_err)?;
                let (left, right) = (exit_side(&before, q).ok_or_else(conn_err)?, exit_side(&after, q).ok_or_else(conn_err)?);
                if left != -right {
                    return Err(conn_err());
                }
                let base = thin_polyline(&ff, &c.coords, &t.samples, &ff.crits[q].coords, res.spacing);
                let at_q = base[base.len() - 1];
                let side = |branch: i8, branches: &mut Branches| -> Result<Vec<Point>> {
                    let mut line = base.clone();
                    line.extend(moved_to(&branches.get(q, branch)?, &at_q).into_iter().skip(1));
                    Ok(line)
                };
                fronts.push((before_line, false));
                fronts.push((side(left, branches)?, true));
                fronts.push((side(right, branches)?, false));
                fronts.push((after_line, false));
            }
        }
    }
    let mut disk = PLChain::empty(2);
    let count = fronts.len();
    for i in 0..count {
        let (a, slit) = &fronts[i];
        if *slit {
            continue;
        }
        zipper(a, &fronts[(i + 1) % count].0, 1, &mut disk);
    }
    let disk = disk.simplify(ff.model);
    // Orient by W^u(p): compare a fan triangle at p with the unstable frame.
    let fan = disk
        .cells
        .iter()
        .find(|cell| cell.vertices.iter().any(|v| ff.model.distance(v, &c.coords) < 1e-12))
        .ok_or_else(|| Error::Unsupported(format!("empty unstable disk at {}", c.id)))?;
    let frame = cell_frame(ff.model, &fan.vertices, &c.coords);
    let orientation = i64::from(det_sign(&frame.basis)) * fan.multiplicity.signum();
    let factor = if orientation == i64::from(c.unstable_sign()) { 1 } else { -1 };
    Ok(disk.scaled(factor))
}

/// PL approximation of the closure of W^u(p) for ±f, oriented by the
/// unstable frame: the point itself for index 0, the two branch arcs for
/// index 1, and a disk of flowline strips for index 2.
pub fn unstable_chain(md: &MorseData, sign_of_f: i8, p: usize, res: &Resolution) -> Result<PLChain> {
    let mut branches = Branches::new(md, sign_of_f, res.spacing);
    unstable_with(md, p, res, &mut branches)
}

fn unstable_with(md: &MorseData, p: usize, res: &Resolution, branches: &mut Branches) -> Result<PLChain> {
    let c = branches.ff.crits.get(p).ok_or_else(|| Error::DegreeMismatch(format!("no critical point {p}")))?.clone();
    match c.index {
        0 => Ok(PLChain::point(c.coords, 1)),
        1 => {
            let s = i64::from(c.unstable_frame.sign);
            let mut out = PLChain::polyline(&branches.get(p, 1)?, s);
            out.extend(&PLChain::polyline(&branches.get(p, -1)?, 1), -s);
            Ok(out)
        }
        2 if md.model.n == 2 => unstable_disk(md, p, res, branches),
        i => Err(Error::Unsupported(format!("unstable chains of index {i}"))),
    }
}

/// Y with ∂Y = b built from a Morse chain a of degree k + 1.
#[derive(Debug, Clone)]
pub struct Pseudoboundary {
    pub sign_of_f: i8,
    /// Degree of b.
    pub k: usize,
    pub y: PLChain,
    pub b: PLChain,
    /// Net boundary count z_q for each degree-k critical point with z_q ≠ 0.
    pub z: Vec<(usize, i64)>,
    /// Cancelled pairs of boundary trajectories, as indices into the
    /// trajectory list of ±f.
    pub pairs: Vec<(usize, usize)>,
    /// Σ z_q W^u(q), assembled from the unpaired boundary trajectories.
    pub glued: PLChain,
}

fn integer_coefficients(a: &Chain) -> Result<Vec<(usize, i64)>> {
    a.coeffs
        .iter()
        .map(|(g, c)| {
            if !c.is_integer() {
                return Err(Error::Unsupported(format!("non-integer coefficient {c}")));
            }
            c.to_integer().to_i64().map(|v| (*g, v)).ok_or_else(|| Error::Unsupported("coefficient overflow".into()))
        })
        .collect()
}

/// Builds Y from copies of the unstable chains of the generators of `a`
/// (a chain of the complex of ±f, degree k + 1 ∈ {1, 2}) and returns it
/// with its boundary b.
///
/// Boundary trajectories into each degree-k point q are listed with signs,
/// sorted by shooting parameter and paired greedily with opposite signs;
/// the z_q left over must be the coefficients of d a.
pub fn pseudoboundary_from_chain(md: &MorseData, sign_of_f: i8, a: &Chain, res: &Resolution) -> Result<Pseudoboundary> {
    let n = md.model.n;
    let top = a.degree;
    if top == 0 || top > 2 || top > n {
        return Err(Error::DegreeMismatch(format!("pseudoboundaries from degree {top} chains")));
    }
    let k = top - 1;
    let terms = integer_coefficients(a)?;
    let mut branches = Branches::new(md, sign_of_f, res.spacing);
    let crits = branches.ff.crits;
    for &(g, _) in &terms {
        if crits[g].index != top {
            return Err(Error::DegreeMismatch(format!("{} has index {}", crits[g].id, crits[g].index)));
        }
    }

    let mut y = PLChain::empty(top);
    for &(g, coeff) in &terms {
        y.extend(&unstable_with(md, g, res, &mut branches)?, coeff);
    }
    let y = y.simplify(&md.model);
    let b = boundary_pl(&y, &md.model);

    // Δa: signed boundary trajectories per degree-k point.
    let trajs = branches.trajs;
    let mut per_q: BTreeMap<usize, Vec<(f64, i64, usize)>> = BTreeMap::new();
    for &(g, coeff) in &terms {
        for (ti, t) in trajs.iter().enumerate().filter(|(_, t)| t.source == g) {
            let entry = per_q.entry(t.sink).or_default();
            for _ in 0..coeff.unsigned_abs() {
                entry.push((t.param, coeff.signum() * i64::from(t.sign), ti));
            }
        }
    }
    let cx = if sign_of_f > 0 { &md.cx_f } else { &md.cx_neg };
    let mut da = Chain::zero(k);
    for &(g, coeff) in &terms {
        da = da.add(&cx.d[g].scale(&cx.ring.from_i64(coeff), cx.ring), cx.ring);
    }
    let mut pairs = Vec::new();
    let mut z = Vec::new();
    for (&q, list) in per_q.iter_mut() {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut open: Vec<(i64, usize)> = Vec::new();
        for &(_, s, ti) in list.iter() {
            if let Some(pos) = open.iter().position(|o| o.0 == -s) {
                let (_, other) = open.remove(pos);
                pairs.push((other, ti));
            } else {
                open.push((s, ti));
            }
        }
        let net: i64 = open.iter().map(|o| o.0).sum();
        if net != 0 {
            z.push((q, net));
        }
    }
    for q in (0..crits.len()).filter(|&q| crits[q].index == k) {
        let want = da.coeff(q).to_integer().to_i64().unwrap_or(i64::MAX);
        let got = z.iter().find(|e| e.0 == q).map_or(0, |e| e.1);
        if want != got {
            return Err(Error::UnpairableDelta(crits[q].id.clone()));
        }
    }
    let mut glued = PLChain::empty(k);
    for &(q, zq) in &z {
        glued.extend(&unstable_with(md, q, res, &mut branches)?, zq);
    }
    let glued = glued.simplify(&md.model);
    Ok(Pseudoboundary { sign_of_f, k, y, b, z, pairs, glued })
}

/// Properties of a constructed pseudoboundary b = ∂Y.
#[derive(Debug, Clone, Serialize)]
pub struct ChainconstructReport {
    pub fixture: String,
    pub sign_of_f: i8,
    pub k: usize,
    /// ∂b = ∅.
    pub closed: bool,
    /// Largest distance from a vertex of b to the unstable chains of the
    /// points of index ≤ k.
    pub containment_error: f64,
    /// b agrees cell by cell with Σ z_q W^u(q).
    pub multiplicities_match: bool,
    /// max ±f on b minus max ±f(q) over the q with z_q ≠ 0.
    pub level_error: f64,
    pub status: String,
}

impl ChainconstructReport {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

/// Checks a pseudoboundary against the unstable chains it was glued from.
/// `level_tol` bounds the level error (0 demands exact agreement).
pub fn check_chainconstruct(md: &MorseData, pb: &Pseudoboundary, res: &Resolution, fixture: &str, level_tol: f64) -> Result<ChainconstructReport> {
    let model = &md.model;
    let (ff, _) = flow(md, pb.sign_of_f);
    let closed = pb.b.is_empty() || is_cycle(&pb.b, model);
    let mut support: Vec<Point> = Vec::new();
    for q in (0..ff.crits.len()).filter(|&q| ff.crits[q].index <= pb.k) {
        support.extend(unstable_chain(md, pb.sign_of_f, q, res)?.vertices().copied());
    }
    let containment_error = pb
        .b
        .vertices()
        .map(|v| support.iter().map(|s| model.distance(v, s)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let multiplicities_match = pb.b.same_as(&pb.glued, model);
    let level_error = match pb.b.f_range(model) {
        None => 0.0,
        Some((lo, hi)) => {
            let on_b = if pb.sign_of_f > 0 { hi } else { -lo };
            let expected = pb.z.iter().map(|&(q, _)| ff.crits[q].value).fold(f64::NEG_INFINITY, f64::max);
            on_b - expected
        }
    };
    let ok = closed && containment_error <= 1e-9 && multiplicities_match && level_error.abs() <= level_tol;
    Ok(ChainconstructReport {
        fixture: fixture.into(),
        sign_of_f: pb.sign_of_f,
        k: pb.k,
        closed,
        containment_error,
        multiplicities_match,
        level_error,
        status: if ok { "pass" } else { "fail" }.into(),
    })
}
