//! Linking of pseudoboundaries against the Morse complex: the linking
//! identity, link matrices, pseudoboundaries glued from unstable manifolds,
//! witnesses for the geometric link separation, and an exact oracle for
//! circles.

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::complex::{lambda_pairing, Chain};
use crate::error::{Error, Result};
use crate::flow::{cap_map, two_point_map, with_jitter, IntMap, MorseData};
use crate::geometry::{ModelKind, Point};
use crate::linalg::{self, Matrix};
use crate::plchain::chain::{carrier_distance, is_cycle, linking_number, PLChain, SNAP};
use crate::ring::CoefficientRing;

mod beta;
mod oracle;
mod unstable;

pub use beta::*;
pub use oracle::*;
pub use unstable::*;

/// Mesh scale of the cone chains used for linking numbers.
pub const LINK_MESH: f64 = 0.1;

/// b+ of dimension k and b− of dimension n − k − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPair {
    pub b_plus: PLChain,
    pub b_minus: PLChain,
    pub k: usize,
}

impl LinkPair {
    pub fn new(b_plus: PLChain, b_minus: PLChain, n: usize) -> Result<Self> {
        if b_plus.dim + b_minus.dim + 1 != n {
            return Err(Error::DegreeMismatch(format!("dimensions {} and {} do not link in dimension {n}", b_plus.dim, b_minus.dim)));
        }
        let k = b_plus.dim;
        Ok(LinkPair { b_plus, b_minus, k })
    }

    /// Both chains are cycles, their carriers are disjoint, and neither
    /// comes within the trivialization radius of a critical point.
    pub fn check_admissible(&self, md: &MorseData) -> Result<()> {
        let model = &md.model;
        for b in [&self.b_plus, &self.b_minus] {
            if !is_cycle(b, model) {
                return Err(Error::NotABoundary("pair member has nonempty boundary".into()));
            }
            for c in &md.crits {
                if !b.is_empty() && b.distance_to(model, &c.coords) <= c.radius {
                    return Err(Error::ChainTooCloseToCritical(c.id.clone()));
                }
            }
        }
        if !self.b_plus.is_empty() && !self.b_minus.is_empty() && carrier_distance(&self.b_plus, &self.b_minus, model) < SNAP {
            return Err(Error::CarriersIntersect);
        }
        Ok(())
    }

    /// min f on b− minus max f on b+, or None when either is empty.
    pub fn separation(&self, md: &MorseData) -> Option<f64> {
        let (_, hi) = self.b_plus.f_range(&md.model)?;
        let (lo, _) = self.b_minus.f_range(&md.model)?;
        Some(lo - hi)
    }
}

fn sign_pow(e: usize) -> i64 {
    if e % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign in front of the correction term: (−1)^{(n−k)(k+1)}.
pub fn correction_sign(n: usize, k: usize) -> i64 {
    sign_pow((n - k) * (k + 1))
}

/// Sum of the critical points of ±f of top index, as a column.
fn fundamental_column(md: &MorseData, sign_of_f: i8) -> IntMap {
    let n = md.model.n;
    let top = if sign_of_f > 0 { n } else { 0 };
    IntMap::from_fn(md.crits.len(), 1, |i, _| i64::from(md.crits[i].index == top))
}

fn column_chain(md: &MorseData, col: &IntMap, degree: usize) -> Chain {
    let ring = md.cx_f.ring;
    let mut c = Chain::zero(degree);
    for (i, v) in col.iter().enumerate() {
        if *v != 0 {
            c.add_term(i, &ring.from_i64(*v), ring);
        }
    }
    c
}

/// Π(M_{−f}, I_{b+,b−} M_f) from a two-point map on CM(f).
fn pi_of_fundamentals(md: &MorseData, m: &IntMap) -> i64 {
    let n = md.model.n;
    let mut s = 0;
    for q in (0..md.crits.len()).filter(|&q| md.crits[q].index == 0) {
        for p in (0..md.crits.len()).filter(|&p| md.crits[p].index == n) {
            s += m[(q, p)];
        }
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSummary {
    pub plus_cells: usize,
    pub minus_cells: usize,
    pub max_f_plus: Option<f64>,
    pub min_f_minus: Option<f64>,
}

impl WitnessSummary {
    pub fn of(md: &MorseData, pair: &LinkPair) -> Self {
        WitnessSummary {
            plus_cells: pair.b_plus.cells.len(),
            minus_cells: pair.b_minus.cells.len(),
            max_f_plus: pair.b_plus.f_range(&md.model).map(|r| r.1),
            min_f_minus: pair.b_minus.f_range(&md.model).map(|r| r.0),
        }
    }
}

/// Both sides of the linking identity for one pair.
#[derive(Debug, Clone, Serialize)]
pub struct LinkReport {
    pub theorem: String,
    pub fixture: String,
    pub k: usize,
    /// Λ(I_{b−} M_{−f}, I_{b+} M_f).
    pub lhs: i64,
    /// lk(b−, b+) − (−1)^{(n−k)(k+1)} Π(M_{−f}, I_{b+,b−} M_f).
    pub rhs: i64,
    pub residual: i64,
    pub lk: i64,
    pub correction: i64,
    /// I_{b+} M_f and I_{b−} M_{−f} both lie in the image of d.
    pub caps_are_boundaries: bool,
    pub witnesses: WitnessSummary,
    pub seed: u64,
    pub jitter_rounds: usize,
    pub status: String,
}

impl LinkReport {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

/// Evaluates both sides of the linking identity on an admissible pair.
pub fn check_linklink(md: &MorseData, pair: &LinkPair, fixture: &str, seed: u64) -> Result<LinkReport> {
    pair.check_admissible(md)?;
    let n = md.model.n;
    let k = pair.k;
    let lk = linking_number(&pair.b_minus, &pair.b_plus, &md.model, LINK_MESH)?;
    let chains = [pair.b_plus.clone(), pair.b_minus.clone()];
    let ((plus, minus, two), rounds) = with_jitter(md, &chains, seed, |c| {
        Ok((cap_map(md, &c[0], 1)?.matrix, cap_map(md, &c[1], -1)?.matrix, two_point_map(md, &c[0], &c[1], 1)?.matrix))
    })?;
    let y = column_chain(md, &(plus * fundamental_column(md, 1)), k);
    let x = column_chain(md, &(minus * fundamental_column(md, -1)), n - k - 1);
    let (lhs, caps_are_boundaries) = match lambda_pairing(&md.cx_f, &x, &y) {
        Ok(v) => (v.to_integer().to_i64().unwrap_or(i64::MAX), true),
        Err(Error::NotABoundary(_)) => (0, false),
        Err(e) => return Err(e),
    };
    let correction = pi_of_fundamentals(md, &two);
    let rhs = lk - correction_sign(n, k) * correction;
    let residual = lhs - rhs;
    let ok = caps_are_boundaries && residual == 0;
    Ok(LinkReport {
        theorem: "linklink".into(),
        fixture: fixture.into(),
        k,
        lhs,
        rhs,
        residual,
        lk,
        correction,
        caps_are_boundaries,
        witnesses: WitnessSummary::of(md, pair),
        seed,
        jitter_rounds: rounds,
        status: if ok { "pass" } else { "fail" }.into(),
    })
}

/// Π(M_{−f}, I_{b+,b−} M_f) with the jitter protocol.
pub fn correction_term(md: &MorseData, b_plus: &PLChain, b_minus: &PLChain, seed: u64) -> Result<i64> {
    let chains = [b_plus.clone(), b_minus.clone()];
    let (m, _) = with_jitter(md, &chains, seed, |c| Ok(two_point_map(md, &c[0], &c[1], 1)?.matrix))?;
    Ok(pi_of_fundamentals(md, &m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMatrix {
    /// Row i, column j: lk(b_{j,−}, b_{i,+}) minus the signed correction.
    pub entries: Vec<Vec<i64>>,
    /// Correction terms Π(M_{−f}, I_{b_{i,+},b_{j,−}} M_f).
    pub corrections: Vec<Vec<i64>>,
    pub rank: usize,
}

/// Link matrix of two families and its rank over `field`.
pub fn link_matrix(md: &MorseData, plus: &[PLChain], minus: &[PLChain], field: CoefficientRing, seed: u64) -> Result<LinkMatrix> {
    field.require_field()?;
    let n = md.model.n;
    let mut entries = Vec::with_capacity(plus.len());
    let mut corrections = Vec::with_capacity(plus.len());
    for bp in plus {
        let (mut row, mut corr_row) = (Vec::with_capacity(minus.len()), Vec::with_capacity(minus.len()));
        for bm in minus {
            let pair = LinkPair::new(bp.clone(), bm.clone(), n)?;
            pair.check_admissible(md)?;
            let lk = linking_number(bm, bp, &md.model, LINK_MESH)?;
            let corr = correction_term(md, bp, bm, seed)?;
            row.push(lk - correction_sign(n, pair.k) * corr);
            corr_row.push(corr);
        }
        entries.push(row);
        corrections.push(corr_row);
    }
    let rank = integer_rank(&entries, minus.len(), field);
    Ok(LinkMatrix { entries, corrections, rank })
}

/// Rank over a field of an integer matrix given by rows.
pub fn integer_rank(rows: &[Vec<i64>], cols: usize, field: CoefficientRing) -> usize {
    if rows.is_empty() || cols == 0 {
        return 0;
    }
    let mut m = Matrix::zeros(rows.len(), cols);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            m.data[i][j] = field.from_i64(*v);
        }
    }
    linalg::rank(&m, field)
}

/// Seeded near-identity map moving each ball of radius 4r around a
/// critical point (r its trivialization radius) rigidly by a random tangent
/// vector of length 3r, tapering to the identity at 8r.
#[derive(Debug, Clone)]
pub struct Displacement {
    moves: Vec<(Point, f64, Point)>,
}

impl Displacement {
    pub fn random<R: Rng>(md: &MorseData, rng: &mut R) -> Self {
        let moves = md
            .crits
            .iter()
            .map(|c| {
                let basis = md.model.tangent_basis(&c.coords);
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let dir = if md.model.n == 1 {
                    basis[0] * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    basis[0] * angle.cos() + basis[1] * angle.sin()
                };
                (c.coords, c.radius, dir * (3.0 * c.radius))
            })
            .collect();
        Displacement { moves }
    }

    pub fn apply_point(&self, model: &crate::geometry::ManifoldModel, x: &Point) -> Point {
        let mut shift = Point::zeros();
        for (center, r, v) in &self.moves {
            let d = model.distance(center, x);
            let w = ((8.0 * r - d) / (4.0 * r)).clamp(0.0, 1.0);
            if w > 0.0 {
                shift += v * w;
            }
        }
        if shift.is_zero() {
            return *x;
        }
        match model.kind {
            ModelKind::EmbeddedSphere => model.exp(x, &(shift - x * x.dot(&shift))),
            _ => model.exp(x, &shift),
        }
    }

    pub fn apply(&self, md: &MorseData, c: &PLChain) -> PLChain {
        let mut out = PLChain::empty(c.dim);
        for cell in &c.cells {
            out.push(cell.vertices.iter().map(|v| self.apply_point(&md.model, v)).collect(), cell.multiplicity);
        }
        out
    }
}

/// Integer multiple of a rational chain with all denominators cleared.
pub fn clear_denominators(c: &Chain) -> Chain {
    use num_integer::Integer;
    let l = c.coeffs.values().fold(num_bigint::BigInt::from(1), |acc, v| acc.lcm(v.denom()));
    let mut out = Chain::zero(c.degree);
    for (g, v) in &c.coeffs {
        out.coeffs.insert(*g, v * num_rational::BigRational::from_integer(l.clone()));
    }
    out
}

/// Integer chain with the symmetric representatives of the coefficients
/// of a chain over ℤ/p (identity over ℤ and ℚ when already integral).
pub fn lift_chain(c: &Chain, ring: CoefficientRing) -> Chain {
    match ring {
        CoefficientRing::Rationals => clear_denominators(c),
        _ => {
            let mut out = Chain::zero(c.degree);
            for (g, v) in &c.coeffs {
                let l = ring.lift_symmetric(v);
                if !l.is_zero() {
                    out.coeffs.insert(*g, num_rational::BigRational::from_integer(l));
                }
            }
            out
        }
    }
}
