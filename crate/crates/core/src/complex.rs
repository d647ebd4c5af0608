//! Filtered chain complexes over exact rings, the Π and Λ pairings, Morse
//! inequality bookkeeping and the two computations of boundary depth.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::ring::{CoefficientRing, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub degree: usize,
    pub level: f64,
}

/// Sparse combination of generators of one degree. Keys index the owning
/// complex's generator list; a complex and its dual share the list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chain {
    pub degree: usize,
    pub coeffs: BTreeMap<usize, Scalar>,
}

impl Chain {
    pub fn zero(degree: usize) -> Self {
        Chain { degree, coeffs: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, g: usize) -> Scalar {
        self.coeffs.get(&g).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn add_term(&mut self, g: usize, c: &Scalar, ring: CoefficientRing) {
        let v = ring.add(&self.coeff(g), c);
        if v.is_zero() {
            self.coeffs.remove(&g);
        } else {
            self.coeffs.insert(g, v);
        }
    }

    pub fn add(&self, other: &Chain, ring: CoefficientRing) -> Chain {
        let mut out = self.clone();
        for (g, c) in &other.coeffs {
            out.add_term(*g, c, ring);
        }
        out
    }

    pub fn scale(&self, s: &Scalar, ring: CoefficientRing) -> Chain {
        let mut out = Chain::zero(self.degree);
        for (g, c) in &self.coeffs {
            out.add_term(*g, &ring.mul(s, c), ring);
        }
        out
    }

    pub fn neg(&self, ring: CoefficientRing) -> Chain {
        self.scale(&ring.from_i64(-1), ring)
    }

    /// Coordinates in the given ordered basis of generator indices.
    pub fn to_vec(&self, basis: &[usize]) -> Vec<Scalar> {
        basis.iter().map(|g| self.coeff(*g)).collect()
    }

    pub fn from_vec(degree: usize, basis: &[usize], v: &[Scalar], ring: CoefficientRing) -> Chain {
        let mut out = Chain::zero(degree);
        for (g, c) in basis.iter().zip(v) {
            out.add_term(*g, c, ring);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    pub n: usize,
    pub ring: CoefficientRing,
    pub generators: Vec<Generator>,
    /// `d[j]` is the boundary of generator j.
    pub d: Vec<Chain>,
}

/// Morse polynomial, Poincaré polynomial and the correction polynomial,
/// each as a coefficient list indexed by degree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseDecomposition {
    pub morse: Vec<usize>,
    pub poincare: Vec<usize>,
    pub q: Vec<usize>,
}

/// Builds a complex from per-degree boundary matrices. `boundary[k]` has
/// rows indexed by the degree-(k−1) generators and columns by the degree-k
/// generators, both in the order they appear in `generators`.
pub fn make_complex(
    n: usize,
    ring: CoefficientRing,
    generators: Vec<Generator>,
    boundary: &BTreeMap<usize, Matrix>,
) -> Result<FilteredComplex> {
    let mut seen = HashSet::new();
    for g in &generators {
        if !seen.insert(g.id.clone()) {
            return Err(Error::Parse(format!("duplicate generator id {}", g.id)));
        }
        if g.degree > n {
            return Err(Error::DegreeMismatch(format!("generator {} has degree {} > n = {n}", g.id, g.degree)));
        }
    }
    let by_degree = |k: usize| -> Vec<usize> { (0..generators.len()).filter(|&i| generators[i].degree == k).collect() };
    let mut d: Vec<Chain> =
        generators.iter().map(|g| Chain::zero(g.degree.saturating_sub(1))).collect();
    for (&k, m) in boundary {
        if k == 0 || k > n {
            if m.is_zero() {
                continue;
            }
            return Err(Error::DegreeMismatch(format!("boundary matrix in degree {k}")));
        }
        let (rows, cols) = (by_degree(k - 1), by_degree(k));
        if m.rows != rows.len() || m.cols != cols.len() {
            return Err(Error::DegreeMismatch(format!(
                "d_{k} is {}x{}, expected {}x{}",
                m.rows,
                m.cols,
                rows.len(),
                cols.len()
            )));
        }
        for (j, &col) in cols.iter().enumerate() {
            for (i, &row) in rows.iter().enumerate() {
                d[col].add_term(row, &m.data[i][j], ring);
            }
        }
    }
    let cx = FilteredComplex { n, ring, generators, d };
    cx.validate()?;
    Ok(cx)
}

/// Convenience constructor from (column id, row id, coefficient) triples.
pub fn complex_from_entries(
    n: usize,
    ring: CoefficientRing,
    generators: Vec<Generator>,
    entries: &[(&str, &str, i64)],
) -> Result<FilteredComplex> {
    let index: BTreeMap<&str, usize> = generators.iter().enumerate().map(|(i, g)| (g.id.as_str(), i)).collect();
    let mut d: Vec<Chain> = generators.iter().map(|g| Chain::zero(g.degree.saturating_sub(1))).collect();
    for (col, row, c) in entries {
        let (&j, &i) = index
            .get(col)
            .zip(index.get(row))
            .ok_or_else(|| Error::Parse(format!("unknown generator in entry ({col}, {row})")))?;
        if generators[i].degree + 1 != generators[j].degree {
            return Err(Error::DegreeMismatch(format!("entry ({col}, {row})")));
        }
        d[j].add_term(i, &ring.from_i64(*c), ring);
    }
    let cx = FilteredComplex { n, ring, generators, d };
    cx.validate()?;
    Ok(cx)
}

/// Filtration level of a chain: the largest generator level in its support,
/// −∞ for the zero chain.
pub fn level(cx: &FilteredComplex, c: &Chain) -> f64 {
    c.coeffs.keys().map(|&g| cx.generators[g].level).fold(f64::NEG_INFINITY, f64::max)
}

impl FilteredComplex {
    pub fn validate(&self) -> Result<()> {
        for (j, g) in self.generators.iter().enumerate() {
            for (&i, c) in &self.d[j].coeffs {
                if self.generators[i].degree + 1 != g.degree {
                    return Err(Error::DegreeMismatch(format!("d({}) contains {}", g.id, self.generators[i].id)));
                }
                if self.ring.normalize(c.clone()) != *c {
                    return Err(Error::Parse(format!("coefficient {c} not reduced in {}", self.ring)));
                }
            }
            if level(self, &self.d[j]) >= g.level {
                return Err(Error::FiltrationViolation { id: g.id.clone() });
            }
        }
        for j in 0..self.generators.len() {
            if !self.apply_d(&self.d[j]).is_zero() {
                return Err(Error::DSquaredNonzero { degree: self.generators[j].degree });
            }
        }
        Ok(())
    }

    pub fn gens_in_degree(&self, k: usize) -> Vec<usize> {
        (0..self.generators.len()).filter(|&i| self.generators[i].degree == k).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn generator_chain(&self, g: usize) -> Chain {
        let mut c = Chain::zero(self.generators[g].degree);
        c.add_term(g, &self.ring.one(), self.ring);
        c
    }

    /// Chain from (id, coefficient) pairs; all ids must share one degree.
    pub fn chain(&self, terms: &[(&str, i64)]) -> Result<Chain> {
        let mut out: Option<Chain> = None;
        for (id, c) in terms {
            let g = self.index_of(id).ok_or_else(|| Error::Parse(format!("unknown generator {id}")))?;
            let deg = self.generators[g].degree;
            let ch = out.get_or_insert_with(|| Chain::zero(deg));
            if ch.degree != deg {
                return Err(Error::DegreeMismatch(format!("{id} has degree {deg}")));
            }
            ch.add_term(g, &self.ring.from_i64(*c), self.ring);
        }
        out.ok_or_else(|| Error::Parse("empty chain".into()))
    }

    pub fn apply_d(&self, c: &Chain) -> Chain {
        let mut out = Chain::zero(c.degree.saturating_sub(1));
        for (&g, a) in &c.coeffs {
            for (&h, b) in &self.d[g].coeffs {
                out.add_term(h, &self.ring.mul(a, b), self.ring);
            }
        }
        out
    }

    /// Matrix of d_k: rows are degree-(k−1) generators, columns degree-k.
    pub fn boundary_matrix(&self, k: usize) -> Matrix {
        let cols = self.gens_in_degree(k);
        let rows = if k == 0 { Vec::new() } else { self.gens_in_degree(k - 1) };
        Matrix::from_columns(rows.len(), &cols.iter().map(|&j| self.d[j].to_vec(&rows)).collect::<Vec<_>>())
    }

    /// Sum of the top-degree generators.
    pub fn fundamental_cycle(&self) -> Chain {
        let mut c = Chain::zero(self.n);
        for g in self.gens_in_degree(self.n) {
            c.add_term(g, &self.ring.one(), self.ring);
        }
        c
    }

    pub fn with_ring(&self, ring: CoefficientRing) -> FilteredComplex {
        let d = self
            .d
            .iter()
            .map(|c| {
                let mut out = Chain::zero(c.degree);
                for (g, v) in &c.coeffs {
                    out.add_term(*g, &ring.normalize(v.clone()), ring);
                }
                out
            })
            .collect();
        FilteredComplex { n: self.n, ring, generators: self.generators.clone(), d }
    }

    /// Solves d z = y in the complex's ring; NOT_A_BOUNDARY when no
    /// solution exists over the field of fractions, UNSOLVABLE_OVER_RING when
    /// one exists only there.
    pub fn primitive(&self, y: &Chain) -> Result<Chain> {
        let k = y.degree + 1;
        if k > self.n {
            return if y.is_zero() { Ok(Chain::zero(k)) } else { Err(Error::NotABoundary("top degree".into())) };
        }
        let rows = self.gens_in_degree(y.degree);
        let cols = self.gens_in_degree(k);
        let m = self.boundary_matrix(k);
        let b = y.to_vec(&rows);
        let field = self.ring.field_of_fractions();
        match linalg::solve_in_ring(&m, &b, self.ring) {
            Some(z) => Ok(Chain::from_vec(k, &cols, &z, self.ring)),
            None if linalg::solve(&m, &b, field).is_some() => Err(Error::UnsolvableOverRing),
            None => Err(Error::NotABoundary(format!("degree-{} chain", y.degree))),
        }
    }

    pub fn rank_d(&self, k: usize, field: CoefficientRing) -> usize {
        if k == 0 || k > self.n {
            return 0;
        }
        linalg::rank(&self.with_ring(field).boundary_matrix(k), field)
    }

    /// Complex of −f on the same generators: degrees k ↦ n−k, levels
    /// negated, and d_{−f} q = Σ_p (−1)^{n−|q|} m_f(p,q) p.
    pub fn dual(&self) -> FilteredComplex {
        let generators: Vec<Generator> = self
            .generators
            .iter()
            .map(|g| Generator { id: g.id.clone(), degree: self.n - g.degree, level: -g.level })
            .collect();
        let mut d: Vec<Chain> = generators.iter().map(|g| Chain::zero(g.degree.saturating_sub(1))).collect();
        for (p, dp) in self.d.iter().enumerate() {
            for (&q, m) in &dp.coeffs {
                let sign = if (self.n - self.generators[q].degree) % 2 == 0 { 1 } else { -1 };
                d[q].add_term(p, &self.ring.mul(&self.ring.from_i64(sign), m), self.ring);
            }
        }
        FilteredComplex { n: self.n, ring: self.ring, generators, d }
    }

    pub fn morse_inequality_decomposition(&self, field: CoefficientRing) -> Result<MorseDecomposition> {
        field.require_field()?;
        let morse: Vec<usize> = (0..=self.n).map(|k| self.gens_in_degree(k).len()).collect();
        let ranks: Vec<usize> = (0..=self.n + 1).map(|k| self.rank_d(k, field)).collect();
        let q: Vec<usize> = (0..=self.n).map(|k| ranks[k + 1]).collect();
        let poincare: Vec<usize> = (0..=self.n).map(|k| morse[k] - ranks[k] - ranks[k + 1]).collect();
        Ok(MorseDecomposition { morse, poincare, q })
    }
}

/// Π(x, y) = Σ_p a_p b_p for x in degree n−k of the dual and y in degree k.
pub fn pi_pairing(n: usize, ring: CoefficientRing, x: &Chain, y: &Chain) -> Result<Scalar> {
    if x.degree + y.degree != n && !(x.is_zero() || y.is_zero()) {
        return Err(Error::DegreeMismatch(format!("Π of degrees {} and {} with n = {n}", x.degree, y.degree)));
    }
    let mut s = Scalar::zero();
    for (g, a) in &x.coeffs {
        if let Some(b) = y.coeffs.get(g) {
            s = ring.add(&s, &ring.mul(a, b));
        }
    }
    Ok(s)
}

/// Λ(x, y) = Π(x, z) for any z with d_f z = y. `cx` is the complex of f;
/// x lives in the dual complex.
pub fn lambda_pairing(cx: &FilteredComplex, x: &Chain, y: &Chain) -> Result<Scalar> {
    if x.is_zero() || y.is_zero() {
        return Ok(Scalar::zero());
    }
    if x.degree + y.degree + 1 != cx.n {
        return Err(Error::DegreeMismatch(format!("Λ of degrees {} and {} with n = {}", x.degree, y.degree, cx.n)));
    }
    let dual = cx.dual();
    // x must itself be a boundary; its primitive also feeds the debug cross-check.
    let w = dual.primitive(x)?;
    let z = cx.primitive(y)?;
    let value = pi_pairing(cx.n, cx.ring, x, &z)?;
    if cfg!(debug_assertions) {
        let k = y.degree;
        let sign = cx.ring.from_i64(if (cx.n - k) % 2 == 0 { 1 } else { -1 });
        let alt = cx.ring.mul(&sign, &pi_pairing(cx.n, cx.ring, &w, y)?);
        debug_assert_eq!(value, alt, "Λ disagrees between the two formulas");
    }
    Ok(value)
}

/// Basis of Im(d) ∩ (span of generators at level ≤ threshold), as pairs
/// (primitive coordinates, boundary coordinates).
fn filtered_image(
    m: &Matrix,
    row_levels: &[f64],
    threshold: f64,
    field: CoefficientRing,
) -> Vec<(Vec<Scalar>, Vec<Scalar>)> {
    let high: Vec<usize> = (0..m.rows).filter(|&i| row_levels[i] > threshold).collect();
    let constraint = m.select_rows(&high);
    let mut out: Vec<(Vec<Scalar>, Vec<Scalar>)> = Vec::new();
    let mut images: Vec<Vec<Scalar>> = Vec::new();
    for c in linalg::kernel(&constraint, field) {
        let y = m.mul_vec(&c, field);
        if y.iter().all(|v| v.is_zero()) || linalg::in_span(&images, &y, field) {
            continue;
        }
        images.push(y.clone());
        out.push((c, y));
    }
    out
}

fn sorted_levels(levels: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = levels.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

/// A pair (a_plus, a_minus) realizing the algebraic link separation:
/// a_plus in degree k+1 of f, a_minus in degree n−k of −f, with
/// Λ(d_{−f} a_minus, d_f a_plus) ≠ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaWitness {
    pub value: f64,
    pub a_plus: Chain,
    pub a_minus: Chain,
    pub lambda: Scalar,
}

/// Sup of {0} ∪ {−ℓ_{−f}(x) − ℓ_f(y) : Λ(x,y) ≠ 0} over x ∈ Im d_{−f},
/// y ∈ Im d_{f,k+1}, together with a witness when the sup is positive.
///
/// The value only depends on the level thresholds of x and y, so it is
/// enough to test, for each pair of thresholds, whether Λ vanishes
/// identically on the two filtered images. Over Z the search runs over Q.
pub fn beta_alg_sup_witness(cx: &FilteredComplex, k: usize) -> Option<BetaWitness> {
    let field = cx.ring.field_of_fractions();
    let cx = cx.with_ring(field);
    if k + 1 > cx.n {
        return None;
    }
    let dual = cx.dual();
    let top = cx.gens_in_degree(k + 1);
    let bottom = cx.gens_in_degree(k);
    let m = cx.boundary_matrix(k + 1);
    // Dual differential from f-degree k (dual degree n−k) to f-degree k+1.
    let m_dual = dual.boundary_matrix(cx.n - k);
    let bottom_levels: Vec<f64> = bottom.iter().map(|&g| cx.generators[g].level).collect();
    let top_dual_levels: Vec<f64> = top.iter().map(|&g| dual.generators[g].level).collect();

    let mut best: Option<BetaWitness> = None;
    for lam in sorted_levels(bottom_levels.iter().copied()) {
        let ys = filtered_image(&m, &bottom_levels, lam, field);
        if ys.is_empty() {
            continue;
        }
        for mu in sorted_levels(top_dual_levels.iter().copied()) {
            let value = -mu - lam;
            if best.as_ref().is_some_and(|b| b.value >= value) {
                continue;
            }
            let xs = filtered_image(&m_dual, &top_dual_levels, mu, field);
            'search: for (w, x) in &xs {
                for (z, _) in &ys {
                    // Λ(x, d z) = Π(x, z): x and z both sit on the degree-(k+1) generators.
                    let s = x.iter().zip(z).fold(Scalar::zero(), |acc, (a, b)| field.add(&acc, &field.mul(a, b)));
                    if !s.is_zero() {
                        best = Some(BetaWitness {
                            value,
                            a_plus: Chain::from_vec(k + 1, &top, z, field),
                            a_minus: Chain::from_vec(cx.n - k, &bottom, w, field),
                            lambda: s,
                        });
                        break 'search;
                    }
                }
            }
        }
    }
    best.filter(|b| b.value > 0.0)
}

pub fn beta_alg_sup(cx: &FilteredComplex, k: usize) -> f64 {
    beta_alg_sup_witness(cx, k).map_or(0.0, |w| w.value)
}

/// Boundary depth: the least β ≥ 0 such that every boundary at level ≤ λ
/// has a primitive at level ≤ λ + β.
pub fn beta_alg_depth(cx: &FilteredComplex, k: usize, field: CoefficientRing) -> Result<f64> {
    field.require_field()?;
    if k + 1 > cx.n {
        return Ok(0.0);
    }
    let cx = cx.with_ring(field);
    let top = cx.gens_in_degree(k + 1);
    let bottom = cx.gens_in_degree(k);
    let m = cx.boundary_matrix(k + 1);
    let bottom_levels: Vec<f64> = bottom.iter().map(|&g| cx.generators[g].level).collect();
    let top_levels: Vec<f64> = top.iter().map(|&g| cx.generators[g].level).collect();
    let mut beta: f64 = 0.0;
    for lam in sorted_levels(bottom_levels.iter().copied()) {
        let ys: Vec<Vec<Scalar>> = filtered_image(&m, &bottom_levels, lam, field).into_iter().map(|p| p.1).collect();
        if ys.is_empty() {
            continue;
        }
        let need = sorted_levels(top_levels.iter().copied())
            .into_iter()
            .find(|&nu| {
                let cols: Vec<Vec<Scalar>> =
                    (0..top.len()).filter(|&j| top_levels[j] <= nu).map(|j| m.column(j)).collect();
                ys.iter().all(|y| linalg::in_span(&cols, y, field))
            })
            .expect("every boundary has a primitive at the top level");
        beta = beta.max(need - lam);
    }
    Ok(beta)
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    dimension: usize,
    ring: String,
    generators: Vec<Generator>,
    boundary: BTreeMap<String, Vec<(String, String, String)>>,
}

impl FilteredComplex {
    pub fn to_json(&self) -> String {
        let mut boundary: BTreeMap<String, Vec<(String, String, String)>> = BTreeMap::new();
        for (j, g) in self.generators.iter().enumerate() {
            if g.degree == 0 {
                continue;
            }
            let entries = boundary.entry(g.degree.to_string()).or_default();
            for (i, c) in &self.d[j].coeffs {
                entries.push((self.generators[*i].id.clone(), g.id.clone(), self.ring.format_scalar(c)));
            }
        }
        let doc = ComplexJson { dimension: self.n, ring: self.ring.to_string(), generators: self.generators.clone(), boundary };
        serde_json::to_string_pretty(&doc).expect("complex serializes")
    }

    pub fn from_json(s: &str) -> Result<FilteredComplex> {
        let doc: ComplexJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let ring = CoefficientRing::parse(&doc.ring)?;
        let index: BTreeMap<String, usize> =
            doc.generators.iter().enumerate().map(|(i, g)| (g.id.clone(), i)).collect();
        let mut d: Vec<Chain> = doc.generators.iter().map(|g| Chain::zero(g.degree.saturating_sub(1))).collect();
        for (deg, entries) in &doc.boundary {
            let deg: usize = deg.parse().map_err(|_| Error::Parse(format!("bad degree key {deg}")))?;
            for (row, col, c) in entries {
                let (i, j) = match (index.get(row), index.get(col)) {
                    (Some(i), Some(j)) => (*i, *j),
                    _ => return Err(Error::Parse(format!("unknown generator in ({row}, {col})"))),
                };
                if doc.generators[j].degree != deg || doc.generators[i].degree + 1 != deg {
                    return Err(Error::DegreeMismatch(format!("entry ({row}, {col}) under degree {deg}")));
                }
                d[j].add_term(i, &ring.parse_scalar(c)?, ring);
            }
        }
        let cx = FilteredComplex { n: doc.dimension, ring, generators: doc.generators, d };
        cx.validate()?;
        Ok(cx)
    }
}

/// Random valid filtered complex: a direct sum of elementary pieces
/// (pairs a → b with level(a) > level(b), plus lone generators) conjugated
/// by random filtration-preserving unitriangular base changes. Every
/// filtered complex over a field arises this way.
pub fn random_filtered_complex<R: Rng>(rng: &mut R, max_gens: usize, max_n: usize, ring: CoefficientRing) -> FilteredComplex {
    let n = rng.gen_range(1..=max_n);
    let count = rng.gen_range(1..=max_gens);
    let mut generators: Vec<Generator> = (0..count)
        .map(|i| Generator {
            id: format!("g{i}"),
            degree: rng.gen_range(0..=n),
            level: f64::from(rng.gen_range(0..400)) / 8.0,
        })
        .collect();
    // Base differential: random pairings.
    let mut d: Vec<Chain> = generators.iter().map(|g| Chain::zero(g.degree.saturating_sub(1))).collect();
    let mut used = vec![false; count];
    for a in 0..count {
        if used[a] || generators[a].degree == 0 || !rng.gen_bool(0.6) {
            continue;
        }
        let candidates: Vec<usize> = (0..count)
            .filter(|&b| {
                !used[b] && b != a && generators[b].degree + 1 == generators[a].degree && generators[b].level < generators[a].level
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let b = candidates[rng.gen_range(0..candidates.len())];
        used[a] = true;
        used[b] = true;
        let unit = loop {
            let u = rng.gen_range(-2i64..=2);
            if u != 0 && !ring.from_i64(u).is_zero() && (ring.is_field() || u.abs() == 1) {
                break u;
            }
        };
        d[a].add_term(b, &ring.from_i64(unit), ring);
    }
    // Unitriangular base changes e'_j = e_j + Σ_{level_i < level_j} c_ij e_i
    // per degree; the new differential is T^{-1} D T.
    let mut t: Vec<Chain> = (0..count).map(|j| {
        let mut c = Chain::zero(generators[j].degree);
        c.add_term(j, &ring.one(), ring);
        c
    }).collect();
    for j in 0..count {
        for i in 0..count {
            if generators[i].degree == generators[j].degree && generators[i].level < generators[j].level && rng.gen_bool(0.3) {
                let c = rng.gen_range(-2i64..=2);
                t[j].add_term(i, &ring.from_i64(c), ring);
            }
        }
    }
    let apply = |d: &Vec<Chain>, c: &Chain| -> Chain {
        let mut out = Chain::zero(c.degree.saturating_sub(1));
        for (&g, a) in &c.coeffs {
            for (&h, b) in &d[g].coeffs {
                out.add_term(h, &ring.mul(a, b), ring);
            }
        }
        out
    };
    // T^{-1} on a chain: solve T u = v by back substitution in level order.
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| generators[a].level.total_cmp(&generators[b].level));
    let t_inv = |v: &Chain| -> Chain {
        let mut rest = v.clone();
        let mut u = Chain::zero(v.degree);
        for &j in order.iter().rev() {
            let c = rest.coeff(j);
            if c.is_zero() {
                continue;
            }
            u.add_term(j, &c, ring);
            rest = rest.add(&t[j].scale(&ring.neg(&c), ring), ring);
        }
        debug_assert!(rest.is_zero());
        u
    };
    let new_d: Vec<Chain> = (0..count).map(|j| t_inv(&apply(&d, &t[j]))).collect();
    // Shuffle the generator order so that nothing depends on it.
    let mut perm: Vec<usize> = (0..count).collect();
    for i in (1..count).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut inverse = vec![0; count];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let shuffled_gens: Vec<Generator> = perm.iter().map(|&old| generators[old].clone()).collect();
    let shuffled_d: Vec<Chain> = perm
        .iter()
        .map(|&old| {
            let mut c = Chain::zero(new_d[old].degree);
            for (g, v) in &new_d[old].coeffs {
                c.add_term(inverse[*g], v, ring);
            }
            c
        })
        .collect();
    generators = shuffled_gens;
    d = shuffled_d;
    let cx = FilteredComplex { n, ring, generators, d };
    debug_assert!(cx.validate().is_ok());
    cx
}

/// The four-generator complex of the fixture circle: maxima M1 (4), M2 (3),
/// minima m1 (0), m2 (1), with dM1 = m1 − m2 and dM2 = m2 − m1.
pub fn circle_a_complex(ring: CoefficientRing) -> FilteredComplex {
    let gens = vec![
        Generator { id: "M1".into(), degree: 1, level: 4.0 },
        Generator { id: "m1".into(), degree: 0, level: 0.0 },
        Generator { id: "M2".into(), degree: 1, level: 3.0 },
        Generator { id: "m2".into(), degree: 0, level: 1.0 },
    ];
    complex_from_entries(1, ring, gens, &[("M1", "m1", 1), ("M1", "m2", -1), ("M2", "m2", 1), ("M2", "m1", -1)])
        .expect("fixture complex is valid")
}

/// Scalar helper for callers that work with machine integers.
pub fn scalar(v: i64) -> Scalar {
    BigRational::from_integer(BigInt::from(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_of_chains() {
        let cx = circle_a_complex(CoefficientRing::Integers);
        assert_eq!(level(&cx, &Chain::zero(0)), f64::NEG_INFINITY);
        assert_eq!(level(&cx, &cx.chain(&[("m1", 1), ("m2", -1)]).unwrap()), 1.0);
        assert_eq!(level(&cx, &cx.chain(&[("M1", 5)]).unwrap()), 4.0);
    }

    #[test]
    fn filtration_violation_is_reported() {
        let gens = vec![
            Generator { id: "M1".into(), degree: 1, level: 0.0 },
            Generator { id: "m1".into(), degree: 0, level: 0.0 },
        ];
        let err = complex_from_entries(1, CoefficientRing::Integers, gens, &[("M1", "m1", 1)]).unwrap_err();
        assert_eq!(err.code(), "FILTRATION_VIOLATION");
    }

    #[test]
    fn d_squared_is_checked() {
        let gens = vec![
            Generator { id: "a".into(), degree: 2, level: 3.0 },
            Generator { id: "b".into(), degree: 1, level: 2.0 },
            Generator { id: "c".into(), degree: 0, level: 1.0 },
        ];
        let err = complex_from_entries(2, CoefficientRing::Integers, gens, &[("a", "b", 1), ("b", "c", 1)]).unwrap_err();
        assert_eq!(err.code(), "D_SQUARED_NONZERO");
    }

    #[test]
    fn witness_search_beats_single_generator_search() {
        // d P1 = q1, d P2 = q1 + q2. The deepest boundary is q1 (level 0),
        // whose only primitive P1 sits at level 10.
        let gens = vec![
            Generator { id: "P1".into(), degree: 1, level: 10.0 },
            Generator { id: "P2".into(), degree: 1, level: 5.0 },
            Generator { id: "q1".into(), degree: 0, level: 0.0 },
            Generator { id: "q2".into(), degree: 0, level: 1.0 },
        ];
        let cx = complex_from_entries(1, CoefficientRing::Rationals, gens, &[("P1", "q1", 1), ("P2", "q1", 1), ("P2", "q2", 1)])
            .unwrap();
        assert_eq!(beta_alg_depth(&cx, 0, CoefficientRing::Rationals).unwrap(), 10.0);
        assert_eq!(beta_alg_sup(&cx, 0), 10.0);
    }
}
