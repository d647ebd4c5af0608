//! Model manifolds carrying explicit Morse functions, and their critical
//! points with oriented unstable and stable frames.
//!
//! Points are stored as `Vector3` in model coordinates:
//! circle unions use (θ, component, 0), the flat torus (x, y, 0) with period
//! 1 in both, and the sphere its embedding in R³. Tangent vectors are kept
//! in ambient coordinates; `tangent_basis` gives an oriented orthonormal
//! frame of T_xM, which is where all orientation computations happen.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plchain::orient::{point_sign, Oriented};

pub type Point = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CircleUnion,
    FlatTorus,
    EmbeddedSphere,
}

/// A critical point of a circle component, listed in +θ order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleCrit {
    pub id: String,
    pub is_max: bool,
    pub value: f64,
}

/// Circle component with its critical points placed so that |f''| is the
/// same at every critical point: the arc between neighbours with values v, w
/// has length proportional to sqrt|v − w|, and f is a half-cosine blend on it.
#[derive(Debug, Clone, PartialEq)]
struct CircleLayout {
    ids: Vec<String>,
    theta: Vec<f64>,
    value: Vec<f64>,
    is_max: Vec<bool>,
}

impl CircleLayout {
    fn new(crits: &[CircleCrit]) -> Result<Self> {
        let m = crits.len();
        if m < 2 || m % 2 == 1 {
            return Err(Error::InvalidConfig("a circle component needs an even number ≥ 2 of critical points".into()));
        }
        for i in 0..m {
            let (a, b) = (&crits[i], &crits[(i + 1) % m]);
            if a.is_max == b.is_max {
                return Err(Error::InvalidConfig(format!("{} and {} do not alternate", a.id, b.id)));
            }
            let ok = if a.is_max { a.value > b.value } else { a.value < b.value };
            if !ok {
                return Err(Error::InvalidConfig(format!("slope from {} to {} is not monotone", a.id, b.id)));
            }
        }
        let lengths: Vec<f64> = (0..m).map(|i| (crits[(i + 1) % m].value - crits[i].value).abs().sqrt()).collect();
        let total: f64 = lengths.iter().sum();
        let mut theta = Vec::with_capacity(m);
        let mut acc = 0.0;
        for l in &lengths {
            theta.push(acc);
            acc += l / total * TAU;
        }
        Ok(CircleLayout {
            ids: crits.iter().map(|c| c.id.clone()).collect(),
            theta,
            value: crits.iter().map(|c| c.value).collect(),
            is_max: crits.iter().map(|c| c.is_max).collect(),
        })
    }

    /// Segment containing θ (already reduced to [0, 2π)), with its start,
    /// length and value jump.
    fn segment(&self, th: f64) -> (usize, f64, f64, f64) {
        let m = self.theta.len();
        let i = match self.theta.binary_search_by(|t| t.total_cmp(&th)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let end = if i + 1 == m { TAU } else { self.theta[i + 1] };
        let dv = self.value[(i + 1) % m] - self.value[i];
        (i, self.theta[i], end - self.theta[i], dv)
    }

    /// f, f', f'' at θ.
    fn eval(&self, th: f64) -> (f64, f64, f64) {
        let th = th.rem_euclid(TAU);
        let (i, start, len, dv) = self.segment(th);
        let u = PI * (th - start) / len;
        let k = PI / len;
        (
            self.value[i] + dv * (1.0 - u.cos()) / 2.0,
            dv * k * u.sin() / 2.0,
            dv * k * k * u.cos() / 2.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ModelFunction {
    Circle(Vec<CircleLayout>),
    /// cos 2πx + cos 2πy plus a periodized Gaussian bump.
    Torus { amp: f64, sigma: f64, center: [f64; 2] },
    /// 1 + z plus a Gaussian bump in the ambient distance.
    Sphere { amp: f64, sigma: f64, center: Point },
}

/// A declared critical point used to name located points and to check the
/// census.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredCritical {
    pub id: String,
    pub index: usize,
    pub near: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldModel {
    pub name: String,
    pub kind: ModelKind,
    pub n: usize,
    func: ModelFunction,
    pub declared: Vec<DeclaredCritical>,
}

/// Parameters accepted for builtin models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub seed: u64,
    pub m: usize,
    pub amplitude: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { seed: 7, m: 3, amplitude: None }
    }
}

pub const SPHERE_B_AMP: f64 = 0.445_986_568_974_435_3;
pub const SPHERE_B_COLAT: f64 = 1.830_350_449_272_495_6;
pub const SPHERE_B_SIGMA: f64 = 0.1;

pub const TORUS_C_AMP: f64 = 1.0;
pub const TORUS_C_SIGMA: f64 = 0.05;
pub const TORUS_C_CENTER: [f64; 2] = [0.27, 0.22];

/// Distinct multiples of 1/64 for random circle values.
fn quantize(v: f64) -> f64 {
    (v * 64.0).round() / 64.0
}

/// Critical data of a random circle with m maxima and m minima alternating
/// in +θ order, named M1, m1, M2, m2, ...
pub fn random_circle_crits<R: Rng>(rng: &mut R, m: usize) -> Vec<CircleCrit> {
    let mut used: Vec<f64> = Vec::new();
    let mut fresh = |rng: &mut R, lo: f64, hi: f64| loop {
        let v = quantize(rng.gen_range(lo..hi));
        if v >= lo && !used.contains(&v) {
            used.push(v);
            return v;
        }
    };
    let mins: Vec<f64> = (0..m).map(|_| fresh(rng, 0.0, 8.0)).collect();
    let maxs: Vec<f64> = (0..m)
        .map(|i| {
            let base = mins[i].max(mins[(i + m - 1) % m]);
            let lift = rng.gen_range(0.1..5.0);
            fresh(rng, base + 1.0 / 64.0, base + lift + 1.0 / 32.0)
        })
        .collect();
    let mut out = Vec::with_capacity(2 * m);
    for i in 0..m {
        out.push(CircleCrit { id: format!("M{}", i + 1), is_max: true, value: maxs[i] });
        out.push(CircleCrit { id: format!("m{}", i + 1), is_max: false, value: mins[i] });
    }
    out
}

pub fn circle_a_crits() -> Vec<CircleCrit> {
    let c = |id: &str, is_max, value| CircleCrit { id: id.into(), is_max, value };
    vec![c("M1", true, 4.0), c("m1", false, 0.0), c("M2", true, 3.0), c("m2", false, 1.0)]
}

impl ManifoldModel {
    /// Union of circles, one per component.
    pub fn circle_union(name: &str, components: &[Vec<CircleCrit>]) -> Result<Self> {
        let layouts = components.iter().map(|c| CircleLayout::new(c)).collect::<Result<Vec<_>>>()?;
        let mut declared = Vec::new();
        for (ci, lay) in layouts.iter().enumerate() {
            for i in 0..lay.theta.len() {
                declared.push(DeclaredCritical {
                    id: lay.ids[i].clone(),
                    index: usize::from(lay.is_max[i]),
                    near: [lay.theta[i], ci as f64, 0.0],
                });
            }
        }
        let mut ids: Vec<&String> = declared.iter().map(|d| &d.id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != declared.len() {
            return Err(Error::InvalidConfig("critical point ids must be unique".into()));
        }
        Ok(ManifoldModel { name: name.into(), kind: ModelKind::CircleUnion, n: 1, func: ModelFunction::Circle(layouts), declared })
    }

    pub fn torus_c() -> Self {
        Self::torus("torus-c", TORUS_C_AMP)
    }

    fn torus(name: &str, amp: f64) -> Self {
        let d = |id: &str, index, x, y| DeclaredCritical { id: id.into(), index, near: [x, y, 0.0] };
        ManifoldModel {
            name: name.into(),
            kind: ModelKind::FlatTorus,
            n: 2,
            func: ModelFunction::Torus { amp, sigma: TORUS_C_SIGMA, center: TORUS_C_CENTER },
            declared: vec![
                d("A", 2, 0.0, 0.0),
                d("B", 2, 0.2523, 0.2031),
                d("s", 1, 0.2069, 0.1638),
                d("h", 1, 0.5, 0.0),
                d("v", 1, 0.0, 0.5),
                d("m", 0, 0.5, 0.5),
            ],
        }
    }

    pub fn sphere_b() -> Self {
        let c = Point::new(SPHERE_B_COLAT.sin(), 0.0, SPHERE_B_COLAT.cos());
        let at = |t: f64| [t.sin(), 0.0, t.cos()];
        let d = |id: &str, index, near| DeclaredCritical { id: id.into(), index, near };
        ManifoldModel {
            name: "sphere-b".into(),
            kind: ModelKind::EmbeddedSphere,
            n: 2,
            func: ModelFunction::Sphere { amp: SPHERE_B_AMP, sigma: SPHERE_B_SIGMA, center: c },
            declared: vec![
                d("A", 2, [0.0, 0.0, 1.0]),
                d("B", 2, at(1.808_003_222_258_479)),
                d("s", 1, at(1.618_267_286_792_989)),
                d("m", 0, [0.0, 0.0, -1.0]),
            ],
        }
    }

    /// Height function on the round sphere: two critical points.
    pub fn round_sphere() -> Self {
        let d = |id: &str, index, z| DeclaredCritical { id: id.into(), index, near: [0.0, 0.0, z] };
        ManifoldModel {
            name: "round-sphere".into(),
            kind: ModelKind::EmbeddedSphere,
            n: 2,
            func: ModelFunction::Sphere { amp: 0.0, sigma: 1.0, center: Point::new(1.0, 0.0, 0.0) },
            declared: vec![d("N", 2, 1.0), d("S", 0, -1.0)],
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        match self.kind {
            ModelKind::CircleUnion | ModelKind::FlatTorus => 0,
            ModelKind::EmbeddedSphere => 2,
        }
    }

    /// Point of a circle component on the slope from its critical point
    /// `segment` (in +θ order) to the next one, at the given level, which
    /// must lie strictly between the two critical values.
    pub fn circle_slope_point(&self, component: usize, segment: usize, value: f64) -> Result<Point> {
        let ModelFunction::Circle(layouts) = &self.func else {
            return Err(Error::Unsupported("slope points exist only on circle models".into()));
        };
        let lay = layouts.get(component).ok_or_else(|| Error::InvalidConfig(format!("no component {component}")))?;
        let m = lay.theta.len();
        if segment >= m {
            return Err(Error::InvalidConfig(format!("no segment {segment} on component {component}")));
        }
        let (lo, hi) = (lay.value[segment], lay.value[(segment + 1) % m]);
        let t = (value - lo) / (hi - lo);
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidConfig(format!("level {value} is not strictly inside the slope from {lo} to {hi}")));
        }
        let end = if segment + 1 == m { TAU } else { lay.theta[segment + 1] };
        let len = end - lay.theta[segment];
        let u = (1.0 - 2.0 * t).acos();
        Ok(Point::new(lay.theta[segment] + u * len / PI, component as f64, 0.0))
    }

    /// Number of circle components (1 for connected surfaces).
    pub fn components(&self) -> usize {
        match &self.func {
            ModelFunction::Circle(l) => l.len(),
            _ => 1,
        }
    }

    /// Periods of the model coordinates (None where no wrapping applies).
    pub fn periods(&self) -> [Option<f64>; 3] {
        match self.kind {
            ModelKind::CircleUnion => [Some(TAU), None, None],
            ModelKind::FlatTorus => [Some(1.0), Some(1.0), None],
            ModelKind::EmbeddedSphere => [None, None, None],
        }
    }

    /// Number of model coordinates used in serialized chains.
    pub fn coord_dim(&self) -> usize {
        match self.kind {
            ModelKind::CircleUnion | ModelKind::FlatTorus => 2,
            ModelKind::EmbeddedSphere => 3,
        }
    }

    pub fn f(&self, x: &Point) -> f64 {
        match &self.func {
            ModelFunction::Circle(l) => l[x.y as usize].eval(x.x).0,
            ModelFunction::Torus { amp, sigma, center } => {
                let (dx, dy) = (wrap_half(x.x - center[0]), wrap_half(x.y - center[1]));
                (TAU * x.x).cos() + (TAU * x.y).cos() + amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
            ModelFunction::Sphere { amp, sigma, center } => {
                1.0 + x.z + amp * (-(x - center).norm_squared() / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Riemannian gradient as an ambient tangent vector.
    pub fn grad(&self, x: &Point) -> Point {
        match &self.func {
            ModelFunction::Circle(l) => Point::new(l[x.y as usize].eval(x.x).1, 0.0, 0.0),
            ModelFunction::Torus { amp, sigma, center } => {
                let (dx, dy) = (wrap_half(x.x - center[0]), wrap_half(x.y - center[1]));
                let s2 = sigma * sigma;
                let e = amp * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                Point::new(-TAU * (TAU * x.x).sin() - e * dx / s2, -TAU * (TAU * x.y).sin() - e * dy / s2, 0.0)
            }
            ModelFunction::Sphere { .. } => {
                let g = self.sphere_euclid_grad(x);
                g - x * x.dot(&g)
            }
        }
    }

    fn sphere_euclid_grad(&self, x: &Point) -> Point {
        let ModelFunction::Sphere { amp, sigma, center } = &self.func else { unreachable!() };
        let s2 = sigma * sigma;
        let d = x - center;
        let e = amp * (-d.norm_squared() / (2.0 * s2)).exp();
        Point::new(0.0, 0.0, 1.0) - d * (e / s2)
    }

    /// Riemannian Hessian in the tangent basis at x.
    pub fn hessian(&self, x: &Point) -> DMatrix<f64> {
        match &self.func {
            ModelFunction::Circle(l) => DMatrix::from_element(1, 1, l[x.y as usize].eval(x.x).2),
            ModelFunction::Torus { amp, sigma, center } => {
                let (dx, dy) = (wrap_half(x.x - center[0]), wrap_half(x.y - center[1]));
                let s2 = sigma * sigma;
                let e = amp * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                let k = TAU * TAU;
                let hxx = -k * (TAU * x.x).cos() + e * (dx * dx / (s2 * s2) - 1.0 / s2);
                let hyy = -k * (TAU * x.y).cos() + e * (dy * dy / (s2 * s2) - 1.0 / s2);
                let hxy = e * dx * dy / (s2 * s2);
                DMatrix::from_row_slice(2, 2, &[hxx, hxy, hxy, hyy])
            }
            ModelFunction::Sphere { amp, sigma, center } => {
                let s2 = sigma * sigma;
                let d = x - center;
                let e = amp * (-d.norm_squared() / (2.0 * s2)).exp();
                let g = self.sphere_euclid_grad(x);
                let radial = x.dot(&g);
                let [e1, e2] = self.tangent_pair(x);
                let basis = [e1, e2];
                let mut h = DMatrix::zeros(2, 2);
                for i in 0..2 {
                    for j in 0..2 {
                        let (u, v) = (basis[i], basis[j]);
                        let euclid = e * (u.dot(&d) * v.dot(&d) / (s2 * s2) - u.dot(&v) / s2);
                        h[(i, j)] = euclid - radial * u.dot(&v);
                    }
                }
                h
            }
        }
    }

    fn tangent_pair(&self, x: &Point) -> [Point; 2] {
        match self.kind {
            ModelKind::CircleUnion => [Point::x(), Point::zeros()],
            ModelKind::FlatTorus => [Point::x(), Point::y()],
            ModelKind::EmbeddedSphere => {
                let a = if x.z.abs() < 0.9 { Point::z() } else { Point::x() };
                let e1 = (a - x * a.dot(x)).normalize();
                [e1, x.cross(&e1)]
            }
        }
    }

    /// Oriented orthonormal basis of T_xM (first n entries are meaningful).
    pub fn tangent_basis(&self, x: &Point) -> Vec<Point> {
        self.tangent_pair(x)[..self.n].to_vec()
    }

    /// Components of an ambient tangent vector in the tangent basis at x.
    pub fn to_tangent(&self, x: &Point, v: &Point) -> DVector<f64> {
        let b = self.tangent_basis(x);
        DVector::from_iterator(self.n, b.iter().map(|e| e.dot(v)))
    }

    pub fn from_tangent(&self, x: &Point, c: &[f64]) -> Point {
        self.tangent_basis(x).iter().zip(c).fold(Point::zeros(), |acc, (e, ci)| acc + e * *ci)
    }

    /// Matrix whose columns are the given ambient vectors in tangent
    /// coordinates at x.
    pub fn tangent_matrix(&self, x: &Point, vs: &[Point]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, vs.len());
        for (j, v) in vs.iter().enumerate() {
            m.set_column(j, &self.to_tangent(x, v));
        }
        m
    }

    /// Exponential map (exact on all shipped models).
    pub fn exp(&self, x: &Point, v: &Point) -> Point {
        match self.kind {
            ModelKind::CircleUnion => Point::new(x.x + v.x, x.y, 0.0),
            ModelKind::FlatTorus => Point::new(x.x + v.x, x.y + v.y, 0.0),
            ModelKind::EmbeddedSphere => {
                let t = v - x * x.dot(v);
                let r = t.norm();
                if r < 1e-300 {
                    *x
                } else {
                    (x * r.cos() + t * (r.sin() / r)).normalize()
                }
            }
        }
    }

    /// Projects an ambient point back onto the model.
    pub fn retract(&self, x: &Point) -> Point {
        match self.kind {
            ModelKind::EmbeddedSphere => x.normalize(),
            _ => *x,
        }
    }

    /// Canonical representative (coordinates reduced by the periods).
    pub fn wrap(&self, x: &Point) -> Point {
        let p = self.periods();
        let mut out = *x;
        for i in 0..3 {
            if let Some(per) = p[i] {
                out[i] = out[i].rem_euclid(per);
            }
        }
        out
    }

    /// Tangent vector at x pointing to y along the shortest path. Infinite
    /// between different circle components.
    pub fn displacement(&self, x: &Point, y: &Point) -> Point {
        match self.kind {
            ModelKind::CircleUnion => {
                if x.y != y.y {
                    return Point::new(f64::INFINITY, 0.0, 0.0);
                }
                Point::new(wrap_sym(y.x - x.x, TAU), 0.0, 0.0)
            }
            ModelKind::FlatTorus => Point::new(wrap_half(y.x - x.x), wrap_half(y.y - x.y), 0.0),
            ModelKind::EmbeddedSphere => {
                // atan2 keeps the angle accurate for nearby points.
                let angle = x.cross(y).norm().atan2(x.dot(y));
                let t = y - x * x.dot(y);
                let tn = t.norm();
                if tn < 1e-300 {
                    return Point::zeros();
                }
                t * (angle / tn)
            }
        }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        self.displacement(x, y).norm()
    }

    /// Metric in the tangent basis (flat or induced, so orthonormal).
    pub fn metric(&self, _x: &Point) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    /// Uniformly spread sample point for property checks.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Point {
        match self.kind {
            ModelKind::CircleUnion => Point::new(rng.gen_range(0.0..TAU), rng.gen_range(0..self.components()) as f64, 0.0),
            ModelKind::FlatTorus => Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0),
            ModelKind::EmbeddedSphere => loop {
                let v = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let r = v.norm();
                if r > 0.1 && r <= 1.0 {
                    return v / r;
                }
            },
        }
    }

    /// Seed grid with neighbour lists, 256 samples per dimension.
    fn seed_grid(&self) -> (Vec<Point>, Vec<Vec<usize>>) {
        match &self.func {
            ModelFunction::Circle(layouts) => {
                let mut pts = Vec::new();
                let mut nbrs = Vec::new();
                for (c, lay) in layouts.iter().enumerate() {
                    let k = 256.max(64 * lay.theta.len());
                    let base = pts.len();
                    for j in 0..k {
                        pts.push(Point::new(TAU * (j as f64 + 0.5) / k as f64, c as f64, 0.0));
                        nbrs.push(vec![base + (j + k - 1) % k, base + (j + 1) % k]);
                    }
                }
                (pts, nbrs)
            }
            _ => {
                let k = 256;
                let mut pts = Vec::with_capacity(k * k);
                let mut nbrs = Vec::with_capacity(k * k);
                let sphere = self.kind == ModelKind::EmbeddedSphere;
                for i in 0..k {
                    for j in 0..k {
                        pts.push(if sphere {
                            let t = PI * (i as f64 + 0.5) / k as f64;
                            let p = TAU * j as f64 / k as f64;
                            Point::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
                        } else {
                            Point::new(i as f64 / k as f64, j as f64 / k as f64, 0.0)
                        });
                        let mut nb = Vec::with_capacity(8);
                        for di in [-1i64, 0, 1] {
                            for dj in [-1i64, 0, 1] {
                                if di == 0 && dj == 0 {
                                    continue;
                                }
                                let ii = i as i64 + di;
                                if sphere && !(0..k as i64).contains(&ii) {
                                    continue;
                                }
                                let ii = ii.rem_euclid(k as i64) as usize;
                                let jj = (j as i64 + dj).rem_euclid(k as i64) as usize;
                                nb.push(ii * k + jj);
                            }
                        }
                        nbrs.push(nb);
                    }
                }
                (pts, nbrs)
            }
        }
    }
}

/// Reduces to [−1/2, 1/2).
pub fn wrap_half(d: f64) -> f64 {
    (d + 0.5).rem_euclid(1.0) - 0.5
}

/// Reduces to [−per/2, per/2).
pub fn wrap_sym(d: f64, per: f64) -> f64 {
    (d + per / 2.0).rem_euclid(per) - per / 2.0
}

pub fn builtin_model(name: &str, params: &ModelParams) -> Result<ManifoldModel> {
    match name.to_ascii_lowercase().as_str() {
        "circle-a" => ManifoldModel::circle_union("circle-a", &[circle_a_crits()]),
        "circle-random" => {
            if params.m == 0 {
                return Err(Error::InvalidConfig("circle-random needs m ≥ 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let crits = random_circle_crits(&mut rng, params.m);
            ManifoldModel::circle_union(&format!("circle-random-{}-{}", params.seed, params.m), &[crits])
        }
        "torus-c" => Ok(match params.amplitude {
            Some(a) => ManifoldModel::torus("torus-c", a),
            None => ManifoldModel::torus_c(),
        }),
        "sphere-b" => Ok(ManifoldModel::sphere_b()),
        "round-sphere" => Ok(ManifoldModel::round_sphere()),
        _ => Err(Error::UnknownModel(name.into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub id: String,
    pub coords: Point,
    pub index: usize,
    pub value: f64,
    /// Hessian eigenvalues, ascending, and matching unit eigenvectors in
    /// ambient coordinates.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Point>,
    /// Orientation of W^u at the point, in tangent coordinates.
    pub unstable_frame: Oriented,
    /// Orientation of W^s, chosen so that W^u ×_M W^s is a positive point.
    pub stable_frame: Oriented,
    /// Radius of the ball on which the quadratic normal form holds.
    pub radius: f64,
}

impl CriticalPoint {
    /// Unstable frame vectors in ambient coordinates.
    pub fn unstable_vectors(&self, model: &ManifoldModel) -> Vec<Point> {
        frame_vectors(model, &self.coords, &self.unstable_frame)
    }

    pub fn stable_vectors(&self, model: &ManifoldModel) -> Vec<Point> {
        frame_vectors(model, &self.coords, &self.stable_frame)
    }

    /// Sign attached to a zero-dimensional unstable or stable frame, or
    /// orientation sign of a full-dimensional one against the model.
    pub fn unstable_sign(&self) -> i8 {
        frame_sign(&self.unstable_frame)
    }

    pub fn stable_sign(&self) -> i8 {
        frame_sign(&self.stable_frame)
    }
}

fn frame_sign(o: &Oriented) -> i8 {
    if o.dim() == 0 {
        o.sign
    } else if o.dim() == o.ambient() {
        crate::plchain::orient::det_sign(&o.basis) * o.sign
    } else {
        o.sign
    }
}

fn frame_vectors(model: &ManifoldModel, x: &Point, o: &Oriented) -> Vec<Point> {
    (0..o.dim())
        .map(|j| {
            let c: Vec<f64> = o.basis.column(j).iter().copied().collect();
            model.from_tangent(x, &c)
        })
        .collect()
}

/// Census row for CSV export.
#[derive(Debug, Clone, Serialize)]
pub struct CensusRow {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub index: usize,
    pub value: f64,
}

pub fn census_rows(crits: &[CriticalPoint]) -> Vec<CensusRow> {
    crits
        .iter()
        .map(|c| CensusRow { id: c.id.clone(), x: c.coords.x, y: c.coords.y, z: c.coords.z, index: c.index, value: c.value })
        .collect()
}

const DEGENERACY_TOL: f64 = 1e-8;
const NORMAL_FORM_TOL: f64 = 1e-4;

fn newton(model: &ManifoldModel, start: Point, tol: f64) -> Option<Point> {
    let mut x = start;
    for _ in 0..60 {
        let g = model.to_tangent(&x, &model.grad(&x));
        if g.norm() < tol {
            return Some(x);
        }
        let h = model.hessian(&x);
        let step = h.lu().solve(&g)?;
        let mut step = -step;
        let cap = 0.05;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let v = model.from_tangent(&x, step.as_slice());
        x = model.exp(&x, &v);
    }
    let g = model.to_tangent(&x, &model.grad(&x));
    (g.norm() < tol).then_some(x)
}

/// Finds every critical point by dense seeding and Newton iteration, checks
/// nondegeneracy and the declared census, and attaches frames and
/// trivialization radii. Points come back in the model's declared order.
pub fn locate_critical_points(model: &ManifoldModel, tol: f64) -> Result<Vec<CriticalPoint>> {
    let (pts, nbrs) = model.seed_grid();
    let g2: Vec<f64> = pts.iter().map(|p| model.grad(p).norm_squared()).collect();
    let mut found: Vec<Point> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if nbrs[i].iter().any(|&j| g2[j] < g2[i]) {
            continue;
        }
        if let Some(x) = newton(model, *p, tol) {
            let x = model.wrap(&x);
            if found.iter().all(|y| model.distance(&x, y) > 1e-7) {
                found.push(x);
            }
        }
    }
    let mut located = Vec::with_capacity(found.len());
    for x in found {
        let h = model.hessian(&x);
        let eig = SymmetricEigen::new(h.clone());
        if eig.eigenvalues.iter().any(|l| l.abs() < DEGENERACY_TOL) {
            return Err(Error::DegenerateCriticalPoint(x.iter().copied().collect()));
        }
        let grad_norm = model.grad(&x).norm();
        if grad_norm >= 1e-10 {
            return Err(Error::CensusMismatch(format!("gradient {grad_norm:e} at a located point")));
        }
        located.push((x, eig));
    }
    if located.len() != model.declared.len() {
        return Err(Error::CensusMismatch(format!("found {} critical points, declared {}", located.len(), model.declared.len())));
    }
    let mut out = Vec::with_capacity(located.len());
    let mut taken = vec![false; located.len()];
    for d in &model.declared {
        let near = Point::new(d.near[0], d.near[1], d.near[2]);
        let best = (0..located.len())
            .filter(|&i| !taken[i])
            .min_by(|&a, &b| model.distance(&located[a].0, &near).total_cmp(&model.distance(&located[b].0, &near)))
            .ok_or_else(|| Error::CensusMismatch(format!("no point for {}", d.id)))?;
        taken[best] = true;
        let (x, eig) = &located[best];
        let index = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
        if index != d.index || model.distance(x, &near) > 0.05 {
            return Err(Error::CensusMismatch(format!("{} expected index {} near {:?}", d.id, d.index, d.near)));
        }
        out.push(build_critical(model, &d.id, *x, eig));
    }
    let euler: i64 = out.iter().map(|c| if c.index % 2 == 0 { 1 } else { -1 }).sum();
    if euler != model.euler_characteristic() {
        return Err(Error::CensusMismatch(format!("alternating count {euler}")));
    }
    let radii: Vec<f64> = (0..out.len()).map(|i| trivialization_radius(model, &out, i)).collect();
    for (c, r) in out.iter_mut().zip(radii) {
        c.radius = r;
    }
    Ok(out)
}

fn build_critical(model: &ManifoldModel, id: &str, x: Point, eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> CriticalPoint {
    let n = model.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let tangent_vecs: Vec<DVector<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let index = eigenvalues.iter().filter(|l| **l < 0.0).count();
    let cols = |range: std::ops::Range<usize>| {
        let mut m = DMatrix::zeros(n, range.len());
        for (j, i) in range.enumerate() {
            m.set_column(j, &tangent_vecs[i]);
        }
        m
    };
    let mut unstable = if index == 0 { Oriented::point(n, 1) } else { Oriented::new(cols(0..index)) };
    if index == n && crate::plchain::orient::det_sign(&unstable.basis) < 0 {
        unstable.basis.column_mut(0).neg_mut();
    } else if index > 0 && index < n {
        // Fixed but arbitrary choice: the largest ambient component positive.
        let v = model.from_tangent(&x, unstable.basis.column(0).as_slice());
        let big = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        if v[big] < 0.0 {
            unstable.basis.column_mut(0).neg_mut();
        }
    }
    let mut stable = if index == n { Oriented::point(n, 1) } else { Oriented::new(cols(index..n)) };
    if point_sign(&unstable, &stable) != Ok(1) {
        stable = stable.reversed();
    }
    let eigenvectors = tangent_vecs.iter().map(|v| model.from_tangent(&x, v.as_slice())).collect();
    CriticalPoint {
        id: id.into(),
        coords: x,
        index,
        value: model.f(&x),
        eigenvalues,
        eigenvectors,
        unstable_frame: unstable,
        stable_frame: stable,
        radius: 0.0,
    }
}

/// Largest radius (halving from a model-dependent start) on which
/// |f − f(p) − ½ uᵀHu| ≤ 1e−4·|x|², where x are the normal-form
/// coordinates x_i = sqrt(|λ_i|/2)·u_i.
fn trivialization_radius(model: &ManifoldModel, crits: &[CriticalPoint], i: usize) -> f64 {
    let c = &crits[i];
    let nearest = crits
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, o)| model.distance(&c.coords, &o.coords))
        .fold(f64::INFINITY, f64::min);
    let mut r = (0.3 * nearest).min(0.25);
    for _ in 0..60 {
        if normal_form_holds(model, c, r) {
            return r;
        }
        r /= 2.0;
    }
    r
}

pub fn normal_form_error(model: &ManifoldModel, c: &CriticalPoint, u: &[f64]) -> (f64, f64) {
    let v = c.eigenvectors.iter().zip(u).fold(Point::zeros(), |acc, (e, ui)| acc + e * *ui);
    let x = model.exp(&c.coords, &v);
    let quad: f64 = c.eigenvalues.iter().zip(u).map(|(l, ui)| 0.5 * l * ui * ui).sum();
    let scale: f64 = c.eigenvalues.iter().zip(u).map(|(l, ui)| 0.5 * l.abs() * ui * ui).sum();
    ((model.f(&x) - c.value - quad).abs(), scale)
}

pub fn normal_form_holds(model: &ManifoldModel, c: &CriticalPoint, r: f64) -> bool {
    let dirs = if model.n == 1 { 2 } else { 16 };
    for frac in [1.0, 0.5, 0.25] {
        for k in 0..dirs {
            let a = TAU * k as f64 / dirs as f64;
            let u: Vec<f64> = if model.n == 1 { vec![r * frac * a.cos().signum()] } else { vec![r * frac * a.cos(), r * frac * a.sin()] };
            let (err, scale) = normal_form_error(model, c, &u);
            if err > NORMAL_FORM_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// Largest relative mismatch between the gradient and centered finite
/// differences of f over random points and directions.
pub fn gradient_consistency<R: Rng>(model: &ManifoldModel, rng: &mut R, samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = model.random_point(rng);
        let c: Vec<f64> = (0..model.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = model.from_tangent(&x, &c).normalize();
        let h = 1e-5;
        let fd = (model.f(&model.exp(&x, &(d * h))) - model.f(&model.exp(&x, &(d * -h)))) / (2.0 * h);
        let an = model.grad(&x).dot(&d);
        let scale = model.grad(&x).norm().max(1.0);
        worst = worst.max((fd - an).abs() / scale);
    }
    worst
}
