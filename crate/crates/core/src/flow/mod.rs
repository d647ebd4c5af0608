//! Negative gradient flow: adaptive integration, signed counting of
//! connecting trajectories by shooting and bisection, and assembly of the
//! Morse complexes of f and −f.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::complex::{make_complex, FilteredComplex, Generator};
use crate::error::{Error, Result};
use crate::geometry::{CriticalPoint, ManifoldModel, Point};
use crate::linalg::Matrix;
use crate::plchain::orient::{fiber_product_in_target, point_sign, relative_sign, Oriented};
use crate::ring::CoefficientRing;

mod cap;
pub use cap::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Local error tolerance of the Runge–Kutta pair.
    pub tol: f64,
    pub max_steps: usize,
    /// Shots around the unstable circle of an index-2 source.
    pub samples: usize,
    /// Bisection stops once the parameter bracket is narrower than this.
    pub bisect_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: 1e-10, max_steps: 400_000, samples: 720, bisect_tol: 1e-10 }
    }
}

/// Critical point data for −f: same location, complementary index, and
/// W^u_{−f}(p) := W^s_f(p).
pub fn negate_critical(c: &CriticalPoint, n: usize) -> CriticalPoint {
    let eigenvalues: Vec<f64> = c.eigenvalues.iter().rev().map(|l| -l).collect();
    let eigenvectors: Vec<Point> = c.eigenvectors.iter().rev().copied().collect();
    let unstable = c.stable_frame.clone();
    let mut stable = c.unstable_frame.clone();
    if point_sign(&unstable, &stable) != Ok(1) {
        stable = stable.reversed();
    }
    CriticalPoint {
        id: c.id.clone(),
        coords: c.coords,
        index: n - c.index,
        value: -c.value,
        eigenvalues,
        eigenvectors,
        unstable_frame: unstable,
        stable_frame: stable,
        radius: c.radius,
    }
}

/// The flow of ±f on a model together with the critical data of ±f.
#[derive(Debug, Clone)]
pub struct FlowField<'a> {
    pub model: &'a ManifoldModel,
    pub crits: &'a [CriticalPoint],
    /// +1 for f, −1 for −f.
    pub sign: f64,
    /// Radius around index-(1..n−1) points inside which passes are recorded.
    pass_radius: Vec<f64>,
    /// Step cap keeping the explicit scheme stable near critical points,
    /// where the error estimate alone lets the step grow without bound.
    h_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathEnd {
    /// Entered the trivialization ball of a local minimum of ±f.
    Sink(usize),
    /// Stalled inside the pass ball of a saddle (trajectory on its stable
    /// manifold).
    Stalled(usize),
}

/// A pass through the neighbourhood of a saddle: which saddle and on which
/// side of its stable manifold the path left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pass {
    pub crit: usize,
    pub exit_side: i8,
    /// Side along the stable direction on entry.
    pub entry_side: i8,
    /// Sample index of the closest approach.
    pub closest: usize,
    pub closest_dist: f64,
}

#[derive(Debug, Clone)]
pub struct Path {
    pub samples: Vec<(f64, Point)>,
    pub passes: Vec<Pass>,
    pub end: PathEnd,
}

impl Path {
    /// Sink plus saddle sides: constant in the starting point except across
    /// stable manifolds of saddles (and at tangencies with pass balls).
    fn label(&self) -> Vec<(usize, i8)> {
        let mut l: Vec<(usize, i8)> = self.passes.iter().map(|p| (p.crit, p.exit_side)).collect();
        match self.end {
            PathEnd::Sink(q) => l.push((q, 0)),
            PathEnd::Stalled(q) => l.push((q, 2)),
        }
        l
    }
}

/// Trajectory connecting two critical points of ±f.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    #[serde(skip)]
    pub samples: Vec<(f64, Point)>,
    pub source: usize,
    pub sink: usize,
    /// Orientation sign of the point of M(p, q).
    pub sign: i8,
    /// Shooting parameter: branch ±1 for index-1 sources, angle otherwise.
    pub param: f64,
    /// Branch of W^u(p) when |p| = 1, else 0.
    pub branch: i8,
    /// Side of W^s(q) along its stable frame when |q| = n − 1 ≥ 1, else 0.
    pub entry_side: i8,
}

/// Dormand–Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl<'a> FlowField<'a> {
    pub fn new(model: &'a ManifoldModel, crits: &'a [CriticalPoint], sign: f64) -> Self {
        let pass_radius = crits
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let nearest = crits
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, o)| model.distance(&c.coords, &o.coords))
                    .fold(f64::INFINITY, f64::min);
                (0.25 * nearest).min(0.05).max(c.radius)
            })
            .collect();
        let stiff = crits.iter().flat_map(|c| c.eigenvalues.iter()).fold(1.0f64, |m, l| m.max(l.abs()));
        FlowField { model, crits, sign, pass_radius, h_max: 1.0 / stiff }
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn f(&self, x: &Point) -> f64 {
        self.sign * self.model.f(x)
    }

    /// Vector field of the flow (−∇(±f)).
    pub fn v(&self, x: &Point) -> Point {
        self.model.grad(x) * (-self.sign)
    }

    pub fn pass_radius(&self, i: usize) -> f64 {
        self.pass_radius[i]
    }

    /// One Dormand–Prince step: the fifth-order point and the local error.
    fn step(&self, x: &Point, h: f64) -> (Point, f64) {
        let mut k = [Point::zeros(); 7];
        k[0] = self.v(x);
        for s in 1..7 {
            let mut y = *x;
            for j in 0..s {
                y += k[j] * (h * A[s - 1][j]);
            }
            k[s] = self.v(&y);
        }
        let mut y5 = *x;
        let mut y4 = *x;
        for s in 0..7 {
            y5 += k[s] * (h * B5[s]);
            y4 += k[s] * (h * B4[s]);
        }
        (y5, (y5 - y4).norm())
    }

    /// Integrates from x0 until the path enters the trivialization ball of a
    /// minimum of ±f (ignoring `source` until the path has left its pass
    /// ball), recording saddle passes.
    pub fn integrate_from(&self, x0: &Point, source: Option<usize>, opts: &FlowOptions) -> Result<Path> {
        let n = self.n();
        let mut x = self.model.retract(x0);
        let mut t = 0.0;
        let speed = self.v(&x).norm();
        if speed == 0.0 {
            return Err(Error::StepLimitExceeded(x.iter().copied().collect()));
        }
        let mut h = (1e-3 / speed).min(self.h_max);
        let mut samples = vec![(t, x)];
        let mut passes: Vec<Pass> = Vec::new();
        let mut inside: Option<(usize, usize, f64, usize, i8)> = None; // crit, closest idx, closest dist, steps inside, entry side
        let mut source_live = source;
        let mut fx = self.f(&x);
        for _ in 0..opts.max_steps {
            let (y, err) = self.step(&x, h);
            let err = err / opts.tol;
            if !err.is_finite() {
                return Err(Error::LeftDomain(x.iter().copied().collect()));
            }
            if err > 1.0 {
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                continue;
            }
            let y = self.model.retract(&y);
            let fy = self.f(&y);
            if fy > fx + 1e-12 * (1.0 + fx.abs()) {
                return Err(Error::LeftDomain(y.iter().copied().collect()));
            }
            t += h;
            x = y;
            fx = fy;
            samples.push((t, x));
            h *= (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
            h = h.min(self.h_max).min(0.05 / self.v(&x).norm().max(1e-300));

            if let Some(s) = source_live {
                if self.model.distance(&x, &self.crits[s].coords) > self.pass_radius[s] {
                    source_live = None;
                }
            }
            for (i, c) in self.crits.iter().enumerate() {
                if Some(i) == source_live {
                    continue;
                }
                let d = self.model.distance(&x, &c.coords);
                if c.index == 0 && d < c.radius {
                    return Ok(Path { samples, passes, end: PathEnd::Sink(i) });
                }
                if c.index == 0 || c.index == n || Some(i) == source {
                    continue;
                }
                let r = self.pass_radius[i];
                match inside {
                    Some((ci, ref mut best, ref mut bd, ref mut steps, _)) if ci == i => {
                        *steps += 1;
                        if d < *bd {
                            *bd = d;
                            *best = samples.len() - 1;
                        }
                        if d > r {
                            let (_, best, bd, _, entry) = inside.take().unwrap();
                            let disp = self.model.displacement(&c.coords, &x);
                            let u = c.unstable_vectors(self.model)[0];
                            passes.push(Pass { crit: i, exit_side: sgn(u.dot(&disp)), entry_side: entry, closest: best, closest_dist: bd });
                        } else if *steps > 20_000 || d < 1e-12 {
                            return Ok(Path { samples, passes, end: PathEnd::Stalled(i) });
                        }
                    }
                    None if d <= r => {
                        let disp = self.model.displacement(&c.coords, &x);
                        let s = c.stable_vectors(self.model)[0];
                        inside = Some((i, samples.len() - 1, d, 0, sgn(s.dot(&disp))));
                    }
                    _ => {}
                }
            }
        }
        Err(Error::StepLimitExceeded(x.iter().copied().collect()))
    }

    /// Starting point on the small unstable sphere of p: branch ±1 for index
    /// 1, angle for index 2.
    pub fn shot_start(&self, p: usize, param: f64) -> Point {
        let c = &self.crits[p];
        let eps = 0.5 * c.radius;
        let u = c.unstable_vectors(self.model);
        let v = if c.index == 1 { u[0] * (param * eps) } else { (u[0] * param.cos() + u[1] * param.sin()) * eps };
        self.model.exp(&c.coords, &v)
    }

    /// Oriented tangent space of W^u(p) at a point x of a trajectory.
    fn unstable_tangent(&self, p: usize, branch: i8, x: &Point) -> Oriented {
        let n = self.n();
        let c = &self.crits[p];
        if c.index == n {
            let mut o = Oriented::new(DMatrix::identity(n, n));
            o.sign = c.unstable_sign();
            o
        } else {
            let v = self.model.to_tangent(x, &self.v(x)).normalize() * f64::from(branch);
            Oriented::new(DMatrix::from_column_slice(n, 1, v.as_slice()))
        }
    }

    /// Oriented tangent space of W^s(q) at x.
    fn stable_tangent(&self, q: usize, entry_side: i8, x: &Point) -> Oriented {
        let n = self.n();
        let c = &self.crits[q];
        if c.index == 0 {
            let mut o = Oriented::new(DMatrix::identity(n, n));
            o.sign = c.stable_sign();
            o
        } else {
            let v = self.model.to_tangent(x, &self.v(x)).normalize() * (-f64::from(entry_side));
            Oriented::new(DMatrix::from_column_slice(n, 1, v.as_slice()))
        }
    }

    /// Orientation of the trajectory space M̃(p, q) at x, in tangent
    /// coordinates, as the fiber product W^u(p) ×_M W^s(q).
    pub fn moduli_tangent(&self, p: usize, q: usize, branch: i8, entry_side: i8, x: &Point) -> Result<Oriented> {
        let u = self.unstable_tangent(p, branch, x);
        let s = self.stable_tangent(q, entry_side, x);
        fiber_product_in_target(&u.basis, u.sign, &s.basis, s.sign)
            .map_err(|_| Error::NontransverseConnection(format!("{} to {}", self.crits[p].id, self.crits[q].id)))
    }

    /// Sign of a point of M(p, q) = M̃(p, q)/R: the R-generator −∇f comes
    /// last, so for |p| − |q| = 1 the sign compares M̃ with the flow.
    pub fn trajectory_sign(&self, p: usize, q: usize, branch: i8, entry_side: i8, x: &Point) -> Result<i8> {
        let m = self.moduli_tangent(p, q, branch, entry_side, x)?;
        let v = self.model.to_tangent(x, &self.v(x));
        let gen = Oriented::new(DMatrix::from_column_slice(self.n(), 1, v.as_slice()));
        Ok(relative_sign(&m, &gen))
    }
}

fn sgn(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Integrates the negative gradient flow of f from x0 until it reaches a
/// minimum.
pub fn integrate(model: &ManifoldModel, crits: &[CriticalPoint], x0: &Point, tol: f64) -> Result<Path> {
    let ff = FlowField::new(model, crits, 1.0);
    let opts = FlowOptions { tol, ..FlowOptions::default() };
    ff.integrate_from(x0, None, &opts)
}

const SHOT_OFFSET: f64 = 0.318_309_886_183_790_7;

/// Result of shooting from one source.
struct Connection {
    sink: usize,
    param: f64,
    branch: i8,
    entry_side: i8,
    samples: Vec<(f64, Point)>,
}

fn truncate_at(path: &Path, pass: &Pass) -> Vec<(f64, Point)> {
    path.samples[..=pass.closest].to_vec()
}

/// All trajectories leaving `p` that end at a critical point one index
/// lower, found by shooting and bisection.
fn shoot_from(ff: &FlowField, p: usize, opts: &FlowOptions) -> Result<Vec<Connection>> {
    let n = ff.n();
    let c = &ff.crits[p];
    let mut out = Vec::new();
    if c.index == 0 {
        return Ok(out);
    }
    if c.index == 1 {
        for branch in [1i8, -1] {
            let path = ff.integrate_from(&ff.shot_start(p, f64::from(branch)), Some(p), opts)?;
            if let Some(pass) = path.passes.iter().find(|s| s.closest_dist < ff.crits[s.crit].radius) {
                return Err(Error::NontransverseConnection(format!("{} to {}", c.id, ff.crits[pass.crit].id)));
            }
            match path.end {
                PathEnd::Sink(q) => out.push(Connection { sink: q, param: f64::from(branch), branch, entry_side: 0, samples: path.samples }),
                PathEnd::Stalled(q) => {
                    return Err(Error::NontransverseConnection(format!("{} to {}", c.id, ff.crits[q].id)));
                }
            }
        }
        return Ok(out);
    }
    assert_eq!(c.index, 2, "index-{} sources need a higher-dimensional model", c.index);
    debug_assert_eq!(n, 2);
    let m = opts.samples;
    // Offset so that no shot starts on a symmetry plane of a model.
    let params: Vec<f64> = (0..m).map(|i| TAU * (i as f64 + SHOT_OFFSET) / m as f64).collect();
    let paths: Vec<Path> = params.iter().map(|&a| ff.integrate_from(&ff.shot_start(p, a), Some(p), opts)).collect::<Result<_>>()?;
    for i in 0..m {
        let (a0, a1) = (params[i], if i + 1 == m { params[0] + TAU } else { params[i + 1] });
        let j = (i + 1) % m;
        if paths[i].label() != paths[j].label() {
            bisect(ff, p, a0, a1, paths[i].clone(), paths[j].clone(), opts, 0, &mut out)?;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn bisect(ff: &FlowField, p: usize, a0: f64, a1: f64, l: Path, r: Path, opts: &FlowOptions, depth: usize, out: &mut Vec<Connection>) -> Result<()> {
    let (ll, rl) = (l.label(), r.label());
    if ll == rl {
        return Ok(());
    }
    let first_diff = ll.iter().zip(&rl).position(|(a, b)| a != b).unwrap_or(ll.len().min(rl.len()));
    // A genuine crossing of W^s(q): both sides pass q, leaving on opposite
    // unstable branches.
    let crossing = match (ll.get(first_diff), rl.get(first_diff)) {
        (Some(&(qa, sa)), Some(&(qb, sb))) if qa == qb && sa != sb && sa != 0 && sb != 0 && sa != 2 && sb != 2 => Some(qa),
        _ => None,
    };
    let mid = 0.5 * (a0 + a1);
    if a1 - a0 < opts.bisect_tol || mid <= a0 || mid >= a1 || depth > 80 {
        if let Some(q) = crossing {
            let pass = l.passes[first_diff];
            out.push(Connection { sink: q, param: mid, branch: 0, entry_side: pass.entry_side, samples: truncate_at(&l, &pass) });
        }
        // Otherwise the label change came from grazing a pass ball.
        return Ok(());
    }
    let m = ff.integrate_from(&ff.shot_start(p, mid), Some(p), opts)?;
    if let PathEnd::Stalled(q) = m.end {
        let pass_side = m.samples.len() - 1;
        let entry = {
            let disp = ff.model.displacement(&ff.crits[q].coords, &m.samples[pass_side].1);
            sgn(ff.crits[q].stable_vectors(ff.model)[0].dot(&disp))
        };
        out.push(Connection { sink: q, param: mid, branch: 0, entry_side: entry, samples: m.samples });
        return Ok(());
    }
    bisect(ff, p, a0, mid, l, m.clone(), opts, depth + 1, out)?;
    bisect(ff, p, mid, a1, m, r, opts, depth + 1, out)
}

/// Signed count m_f(p, q) and the trajectories realizing it.
pub fn count_flowlines(ff: &FlowField, p: usize, q: usize, opts: &FlowOptions) -> Result<(i64, Vec<Trajectory>)> {
    let (cp, cq) = (&ff.crits[p], &ff.crits[q]);
    if cp.index != cq.index + 1 {
        return Err(Error::DegreeMismatch(format!("|{}| − |{}| ≠ 1", cp.id, cq.id)));
    }
    let all = trajectories_from(ff, p, opts)?;
    let trajs: Vec<Trajectory> = all.into_iter().filter(|t| t.sink == q).collect();
    Ok((trajs.iter().map(|t| i64::from(t.sign)).sum(), trajs))
}

fn trajectories_from(ff: &FlowField, p: usize, opts: &FlowOptions) -> Result<Vec<Trajectory>> {
    let conns = shoot_from(ff, p, opts)?;
    let mut out = Vec::new();
    for c in conns {
        if ff.crits[c.sink].index + 1 != ff.crits[p].index {
            continue;
        }
        let x = sign_point(&c.samples);
        let sign = ff.trajectory_sign(p, c.sink, c.branch, c.entry_side, &x)?;
        out.push(Trajectory { samples: c.samples, source: p, sink: c.sink, sign, param: c.param, branch: c.branch, entry_side: c.entry_side });
    }
    Ok(out)
}

/// A sample well inside the trajectory, away from both ends.
fn sign_point(samples: &[(f64, Point)]) -> Point {
    samples[samples.len() / 2].1
}

/// Trajectories into each saddle found by integrating the reversed flow
/// from its two stable branches; used to cross-check shooting.
fn ascend_into(ff: &FlowField, q: usize, opts: &FlowOptions) -> Result<Vec<(usize, i8)>> {
    let reversed: Vec<CriticalPoint> = ff.crits.iter().map(|c| negate_critical(c, ff.n())).collect();
    let back = FlowField::new(ff.model, &reversed, -ff.sign);
    let c = &ff.crits[q];
    let s = c.stable_vectors(ff.model);
    let mut out = Vec::new();
    if s.len() != 1 {
        return Ok(out);
    }
    for side in [1i8, -1] {
        let start = ff.model.exp(&c.coords, &(s[0] * (f64::from(side) * 0.5 * c.radius)));
        let path = back.integrate_from(&start, Some(q), opts)?;
        match path.end {
            PathEnd::Sink(p) => {
                let x = sign_point(&path.samples);
                out.push((p, ff.trajectory_sign(p, q, 0, side, &x)?));
            }
            PathEnd::Stalled(r) => return Err(Error::NontransverseConnection(format!("{} to {}", ff.crits[r].id, c.id))),
        }
    }
    Ok(out)
}

/// Morse complex of ±f from the trajectory counts, over ℤ.
fn complex_from_counts(n: usize, crits: &[CriticalPoint], trajs: &[Trajectory]) -> Result<FilteredComplex> {
    let gens: Vec<Generator> = crits.iter().map(|c| Generator { id: c.id.clone(), degree: c.index, level: c.value }).collect();
    let mut counts: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for t in trajs {
        *counts.entry((t.source, t.sink)).or_default() += i64::from(t.sign);
    }
    let mut mats = BTreeMap::new();
    for k in 1..=n {
        let cols: Vec<usize> = (0..crits.len()).filter(|&i| crits[i].index == k).collect();
        let rows: Vec<usize> = (0..crits.len()).filter(|&i| crits[i].index == k - 1).collect();
        let mut m = Matrix::zeros(rows.len(), cols.len());
        for (cj, &p) in cols.iter().enumerate() {
            for (ri, &q) in rows.iter().enumerate() {
                if let Some(&v) = counts.get(&(p, q)) {
                    m.data[ri][cj] = crate::complex::scalar(v);
                }
            }
        }
        mats.insert(k, m);
    }
    make_complex(n, CoefficientRing::Integers, gens, &mats)
}

#[derive(Debug, Clone)]
pub struct MorseData {
    pub model: ManifoldModel,
    pub crits: Vec<CriticalPoint>,
    pub neg_crits: Vec<CriticalPoint>,
    pub trajectories: Vec<Trajectory>,
    pub neg_trajectories: Vec<Trajectory>,
    pub cx_f: FilteredComplex,
    pub cx_neg: FilteredComplex,
    pub opts: FlowOptions,
}

impl MorseData {
    pub fn field(&self) -> FlowField<'_> {
        FlowField::new(&self.model, &self.crits, 1.0)
    }

    pub fn neg_field(&self) -> FlowField<'_> {
        FlowField::new(&self.model, &self.neg_crits, -1.0)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.crits.iter().position(|c| c.id == id)
    }
}

fn all_trajectories(ff: &FlowField, opts: &FlowOptions) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for p in 0..ff.crits.len() {
        out.extend(trajectories_from(ff, p, opts)?);
    }
    // Cross-check every count into an index-(n−1) saddle of a surface.
    if ff.n() == 2 {
        for q in (0..ff.crits.len()).filter(|&q| ff.crits[q].index == 1) {
            let mut shot: Vec<(usize, i8)> = out.iter().filter(|t| t.sink == q).map(|t| (t.source, t.sign)).collect();
            let mut back = ascend_into(ff, q, opts)?;
            shot.sort();
            back.sort();
            if shot != back {
                return Err(Error::BisectionFailed(format!("shooting found {shot:?} into {}, ascent found {back:?}", ff.crits[q].id)));
            }
        }
    }
    Ok(out)
}

pub fn build_morse_data(model: &ManifoldModel, opts: &FlowOptions) -> Result<MorseData> {
    let crits = crate::geometry::locate_critical_points(model, 1e-12)?;
    build_morse_data_with(model, crits, opts)
}

pub fn build_morse_data_with(model: &ManifoldModel, crits: Vec<CriticalPoint>, opts: &FlowOptions) -> Result<MorseData> {
    let n = model.n;
    let neg_crits: Vec<CriticalPoint> = crits.iter().map(|c| negate_critical(c, n)).collect();
    let trajectories = all_trajectories(&FlowField::new(model, &crits, 1.0), opts)?;
    let neg_trajectories = all_trajectories(&FlowField::new(model, &neg_crits, -1.0), opts)?;
    let cx_f = complex_from_counts(n, &crits, &trajectories)?;
    let cx_neg = complex_from_counts(n, &neg_crits, &neg_trajectories)?;
    for (cx, _) in [(&cx_f, "f"), (&cx_neg, "-f")] {
        if !cx.apply_d(&cx.fundamental_cycle()).is_zero() {
            return Err(Error::DSquaredNonzero { degree: n });
        }
    }
    let dual = cx_f.dual();
    for (j, g) in cx_f.generators.iter().enumerate() {
        if dual.d[j] != cx_neg.d[j] {
            let i = dual.d[j].coeffs.keys().chain(cx_neg.d[j].coeffs.keys()).find(|i| dual.d[j].coeff(**i) != cx_neg.d[j].coeff(**i)).copied().unwrap_or(j);
            return Err(Error::DualmViolation { p: cx_f.generators[i].id.clone(), q: g.id.clone() });
        }
    }
    Ok(MorseData { model: model.clone(), crits, neg_crits, trajectories, neg_trajectories, cx_f, cx_neg, opts: *opts })
}

/// CSV row of the trajectory database.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub function: &'static str,
    pub source: String,
    pub sink: String,
    pub sign: i8,
    pub samples: usize,
}

pub fn trajectory_rows(md: &MorseData) -> Vec<TrajectoryRow> {
    let mut rows = Vec::new();
    for (name, crits, trajs) in [("f", &md.crits, &md.trajectories), ("-f", &md.neg_crits, &md.neg_trajectories)] {
        for t in trajs {
            rows.push(TrajectoryRow { function: name, source: crits[t.source].id.clone(), sink: crits[t.sink].id.clone(), sign: t.sign, samples: t.samples.len() });
        }
    }
    rows
}
