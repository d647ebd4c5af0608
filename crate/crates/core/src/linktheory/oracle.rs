//! Exact answers on unions of circles from the cyclic order of marked
//! points, with no flow integration. The pipeline is checked against these.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{beta_geom_search, correction_term, LinkPair, SearchStrategy, LINK_MESH};
use crate::complex::{beta_alg_sup, complex_from_entries, lambda_pairing, Chain, FilteredComplex, Generator};
use crate::error::{Error, Result};
use crate::flow::{build_morse_data, cap_map, two_point_map, FlowOptions, IntMap, MorseData};
use crate::geometry::{random_circle_crits, CircleCrit, ManifoldModel};
use crate::plchain::chain::{linking_number, PLChain};
use crate::ring::CoefficientRing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkTag {
    Max,
    Min,
    /// Point of b+.
    Plus,
    /// Point of b−.
    Minus,
    /// Point of an extra 0-chain whose cap map is reported.
    Probe,
}

fn one() -> i64 {
    1
}

/// A critical point or a signed marked point, listed in +θ order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub tag: MarkTag,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default = "one")]
    pub sign: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CircleComponent {
    pub marks: Vec<Mark>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CircleConfig {
    #[serde(default)]
    pub name: String,
    pub components: Vec<CircleComponent>,
}

/// A marked point after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedMark {
    pub tag: MarkTag,
    pub value: f64,
    pub sign: i64,
    pub component: usize,
    /// Slope from critical point `segment` to `segment + 1` (cyclically).
    pub segment: usize,
    /// Position in +θ order on the component, critical points included.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentView {
    /// Critical points in +θ order, starting with the first one listed.
    pub crits: Vec<CircleCrit>,
    /// Position of each critical point in +θ order.
    pub crit_order: Vec<usize>,
    pub marks: Vec<PlacedMark>,
}

impl ComponentView {
    fn max_and_min(&self, segment: usize) -> (usize, usize, i64) {
        let m = self.crits.len();
        let (a, b) = (segment, (segment + 1) % m);
        // σ = +1 when the flow runs along +θ on this slope.
        if self.crits[a].is_max {
            (a, b, 1)
        } else {
            (b, a, -1)
        }
    }
}

impl CircleConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks alternation and monotonicity, places every marked point on
    /// its slope and fills in missing critical ids.
    pub fn analyze(&self) -> Result<Vec<ComponentView>> {
        if self.components.is_empty() {
            return Err(Error::InvalidConfig("no components".into()));
        }
        let mut ids = BTreeSet::new();
        let mut views = Vec::new();
        for (ci, comp) in self.components.iter().enumerate() {
            let first = comp
                .marks
                .iter()
                .position(|m| matches!(m.tag, MarkTag::Max | MarkTag::Min))
                .ok_or_else(|| Error::InvalidConfig(format!("component {ci} has no critical points")))?;
            let len = comp.marks.len();
            let rotated: Vec<&Mark> = (0..len).map(|i| &comp.marks[(first + i) % len]).collect();
            let mut crits = Vec::new();
            let mut crit_order = Vec::new();
            let mut pending = Vec::new();
            for (order, mark) in rotated.iter().enumerate() {
                if !mark.value.is_finite() {
                    return Err(Error::InvalidConfig(format!("non-finite value on component {ci}")));
                }
                match mark.tag {
                    MarkTag::Max | MarkTag::Min => {
                        let is_max = mark.tag == MarkTag::Max;
                        let id = mark.id.clone().unwrap_or_else(|| format!("{}{}_{}", if is_max { "M" } else { "m" }, crits.len() + 1, ci + 1));
                        if !ids.insert(id.clone()) {
                            return Err(Error::InvalidConfig(format!("duplicate id {id}")));
                        }
                        crits.push(CircleCrit { id, is_max, value: mark.value });
                        crit_order.push(order);
                    }
                    tag => {
                        if mark.sign == 0 {
                            return Err(Error::InvalidConfig(format!("zero sign on component {ci}")));
                        }
                        pending.push(PlacedMark { tag, value: mark.value, sign: mark.sign, component: ci, segment: crits.len() - 1, order });
                    }
                }
            }
            let m = crits.len();
            if m < 2 || m % 2 == 1 {
                return Err(Error::InvalidConfig(format!("component {ci} needs an even number ≥ 2 of critical points")));
            }
            for i in 0..m {
                let (a, b) = (&crits[i], &crits[(i + 1) % m]);
                if a.is_max == b.is_max {
                    return Err(Error::InvalidConfig(format!("{} and {} do not alternate", a.id, b.id)));
                }
                if (a.is_max && a.value <= b.value) || (!a.is_max && a.value >= b.value) {
                    return Err(Error::InvalidConfig(format!("slope from {} to {} is not monotone", a.id, b.id)));
                }
            }
            // Along each slope the marked values must move strictly from one
            // end's value to the other's.
            let mut last: Option<(usize, f64)> = None;
            for p in &pending {
                let (a, b) = (&crits[p.segment], &crits[(p.segment + 1) % m]);
                let (lo, hi) = if a.value < b.value { (a.value, b.value) } else { (b.value, a.value) };
                if p.value <= lo || p.value >= hi {
                    return Err(Error::InvalidConfig(format!("value {} is not strictly inside the slope from {} to {}", p.value, a.id, b.id)));
                }
                let prev = match last {
                    Some((s, v)) if s == p.segment => v,
                    _ => a.value,
                };
                let descending = a.is_max;
                if (descending && p.value >= prev) || (!descending && p.value <= prev) {
                    return Err(Error::InvalidConfig(format!("marked values between {} and {} are out of order", a.id, b.id)));
                }
                last = Some((p.segment, p.value));
            }
            views.push(ComponentView { crits, crit_order, marks: pending });
        }
        Ok(views)
    }

    pub fn model(&self) -> Result<ManifoldModel> {
        let views = self.analyze()?;
        let name = if self.name.is_empty() { "circle-oracle" } else { &self.name };
        ManifoldModel::circle_union(name, &views.iter().map(|v| v.crits.clone()).collect::<Vec<_>>())
    }
}

/// The three 0-chains of a configuration realized on its model.
#[derive(Debug, Clone)]
pub struct ConfigChains {
    pub plus: PLChain,
    pub minus: PLChain,
    pub probe: PLChain,
}

pub fn config_chains(views: &[ComponentView], model: &ManifoldModel) -> Result<ConfigChains> {
    let mut out = ConfigChains { plus: PLChain::empty(0), minus: PLChain::empty(0), probe: PLChain::empty(0) };
    for v in views {
        for p in &v.marks {
            let x = model.circle_slope_point(p.component, p.segment, p.value)?;
            let target = match p.tag {
                MarkTag::Plus => &mut out.plus,
                MarkTag::Minus => &mut out.minus,
                _ => &mut out.probe,
            };
            target.push(vec![x], p.sign);
        }
    }
    Ok(out)
}

/// Sparse map keyed by (source id, target id).
pub type IdMap = BTreeMap<(String, String), i64>;

fn bump(map: &mut IdMap, source: &str, target: &str, v: i64) {
    let e = map.entry((source.to_string(), target.to_string())).or_insert(0);
    *e += v;
    if *e == 0 {
        map.remove(&(source.to_string(), target.to_string()));
    }
}

#[derive(Debug, Clone)]
pub struct CircleOracle {
    /// Morse complex of f over ℤ.
    pub complex: FilteredComplex,
    /// (source, sink, sign) for f and for −f.
    pub flowlines: Vec<(String, String, i64)>,
    pub neg_flowlines: Vec<(String, String, i64)>,
    /// None when b+ or b− has a nonzero sum on some component.
    pub lk: Option<i64>,
    pub cap_plus: IdMap,
    pub cap_minus: IdMap,
    pub cap_probe: IdMap,
    pub two_point: IdMap,
    /// None when a cap image is not a boundary.
    pub lambda: Option<i64>,
    pub correction: i64,
    pub beta_alg: f64,
    pub beta_geom: f64,
    /// min f on b− and max f on b+.
    pub min_f_minus: Option<f64>,
    pub max_f_plus: Option<f64>,
}

/// lk on one circle from signed points keyed by position: the 1-chain
/// bounded by b+ is integrated along +θ and evaluated on b−.
fn lk_cyclic(plus: &[(usize, i64)], minus: &[(usize, i64)]) -> i64 {
    let mut events: Vec<(usize, bool, i64)> = plus.iter().map(|&(o, s)| (o, true, s)).chain(minus.iter().map(|&(o, s)| (o, false, s))).collect();
    events.sort();
    let mut c = 0;
    let mut lk = 0;
    for (_, is_plus, s) in events {
        if is_plus {
            c -= s;
        } else {
            lk += s * c;
        }
    }
    lk
}

/// Best separation of a linked pair of two-point chains on one circle.
/// Each point sits next to a critical point on one of its two sides; the
/// slots list those positions in +θ order with their limiting values.
fn beta_geom_component(v: &ComponentView) -> f64 {
    let m = v.crits.len();
    let slots: Vec<f64> = (0..2 * m).map(|s| v.crits[((s + 1) / 2) % m].value).collect();
    let mut best = f64::NEG_INFINITY;
    let count = slots.len();
    for a in 0..count {
        for b in a + 1..count {
            for c in 0..count {
                for d in c + 1..count {
                    if [c, d].iter().any(|x| *x == a || *x == b) {
                        continue;
                    }
                    if lk_cyclic(&[(a, 1), (b, -1)], &[(c, 1), (d, -1)]) == 0 {
                        continue;
                    }
                    best = best.max(slots[c].min(slots[d]) - slots[a].max(slots[b]));
                }
            }
        }
    }
    best
}

/// Evaluates every quantity on the configuration by combinatorics of the
/// cyclic order alone.
pub fn circle_oracle(config: &CircleConfig) -> Result<CircleOracle> {
    let views = config.analyze()?;
    let ring = CoefficientRing::Integers;
    let mut generators = Vec::new();
    let mut flowlines = Vec::new();
    let mut neg_flowlines = Vec::new();
    for v in &views {
        let m = v.crits.len();
        for (i, c) in v.crits.iter().enumerate() {
            generators.push(Generator { id: c.id.clone(), degree: usize::from(c.is_max), level: c.value });
            let (next, prev) = (&v.crits[(i + 1) % m], &v.crits[(i + m - 1) % m]);
            let lines = if c.is_max { &mut flowlines } else { &mut neg_flowlines };
            lines.push((c.id.clone(), next.id.clone(), 1));
            lines.push((c.id.clone(), prev.id.clone(), -1));
        }
    }
    let entries: Vec<(&str, &str, i64)> = flowlines.iter().map(|(s, t, e)| (s.as_str(), t.as_str(), *e)).collect();
    let complex = complex_from_entries(1, ring, generators, &entries)?;

    let mut cap_plus = IdMap::new();
    let mut cap_minus = IdMap::new();
    let mut cap_probe = IdMap::new();
    let mut two_point = IdMap::new();
    let mut correction = 0;
    let mut lk = Some(0);
    let mut beta_geom = f64::NEG_INFINITY;
    let (mut min_f_minus, mut max_f_plus): (Option<f64>, Option<f64>) = (None, None);
    for v in &views {
        let of = |tag| v.marks.iter().filter(move |p| p.tag == tag);
        for p in v.marks.iter() {
            let (mx, mn, _) = v.max_and_min(p.segment);
            let (mx, mn) = (&v.crits[mx].id, &v.crits[mn].id);
            match p.tag {
                MarkTag::Plus => {
                    bump(&mut cap_plus, mx, mn, p.sign);
                    max_f_plus = Some(max_f_plus.map_or(p.value, |x| x.max(p.value)));
                }
                MarkTag::Minus => {
                    bump(&mut cap_minus, mn, mx, p.sign);
                    min_f_minus = Some(min_f_minus.map_or(p.value, |x| x.min(p.value)));
                }
                MarkTag::Probe => bump(&mut cap_probe, mx, mn, p.sign),
                _ => {}
            }
        }
        // A b+ point above a b− point on the same slope, in flow order.
        for x in of(MarkTag::Plus) {
            for y in of(MarkTag::Minus).filter(|y| y.segment == x.segment) {
                let (mx, mn, sigma) = v.max_and_min(x.segment);
                let x_first = if sigma > 0 { x.order < y.order } else { x.order > y.order };
                if x_first {
                    let e = sigma * x.sign * y.sign;
                    bump(&mut two_point, &v.crits[mx].id, &v.crits[mn].id, e);
                    correction += e;
                }
            }
        }
        let plus: Vec<(usize, i64)> = of(MarkTag::Plus).map(|p| (p.order, p.sign)).collect();
        let minus: Vec<(usize, i64)> = of(MarkTag::Minus).map(|p| (p.order, p.sign)).collect();
        let closed = |pts: &[(usize, i64)]| pts.iter().map(|p| p.1).sum::<i64>() == 0;
        lk = match lk {
            Some(total) if closed(&plus) && closed(&minus) => Some(total + lk_cyclic(&plus, &minus)),
            _ => None,
        };
        beta_geom = beta_geom.max(beta_geom_component(v));
    }

    // Λ(I_{b−} M_{−f}, I_{b+} M_f) with M_f the sum of the maxima and
    // M_{−f} the sum of the minima.
    let chain = |map: &IdMap| -> Result<Chain> {
        let mut c = Chain::zero(0);
        for ((_, t), e) in map {
            let g = complex.index_of(t).ok_or_else(|| Error::InvalidConfig(format!("unknown id {t}")))?;
            c.add_term(g, &ring.from_i64(*e), ring);
        }
        Ok(c)
    };
    let y = chain(&cap_plus)?;
    let x = chain(&cap_minus)?;
    let lambda = match lambda_pairing(&complex, &x, &y) {
        Ok(v) => v.to_integer().to_i64(),
        Err(Error::NotABoundary(_)) => None,
        Err(e) => return Err(e),
    };
    let beta_alg = beta_alg_sup(&complex, 0);
    Ok(CircleOracle {
        complex,
        flowlines,
        neg_flowlines,
        lk,
        cap_plus,
        cap_minus,
        cap_probe,
        two_point,
        lambda,
        correction,
        beta_alg,
        beta_geom: beta_geom.max(0.0),
        min_f_minus,
        max_f_plus,
    })
}

/// Numbers of marked points drawn by [`random_circle_config`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkCounts {
    /// Each pair is a +1 and a −1 point on one component.
    pub plus_pairs: usize,
    pub minus_pairs: usize,
    pub probes: usize,
}

/// A random configuration. Marked values stay in the middle 80% of their
/// slope so the points keep clear of the critical points.
pub fn random_circle_config<R: Rng>(rng: &mut R, components: usize, maxima: usize, counts: MarkCounts) -> CircleConfig {
    let comps: Vec<Vec<CircleCrit>> = (0..components)
        .map(|ci| {
            let mut crits = random_circle_crits(rng, maxima.max(1));
            if components > 1 {
                for c in &mut crits {
                    c.id = format!("{}_{}", c.id, ci + 1);
                }
            }
            crits
        })
        .collect();
    // (component, segment, t in (0, 1) from the segment start, tag, sign)
    let mut marks: Vec<(usize, usize, f64, MarkTag, i64)> = Vec::new();
    let draw = |rng: &mut R, marks: &mut Vec<(usize, usize, f64, MarkTag, i64)>, ci: usize, tag: MarkTag, sign: i64| loop {
        let seg = rng.gen_range(0..comps[ci].len());
        let t = (rng.gen_range(0.1..0.9) * 1024.0_f64).round() / 1024.0;
        if !marks.iter().any(|m| m.0 == ci && m.1 == seg && m.2 == t) {
            marks.push((ci, seg, t, tag, sign));
            return;
        }
    };
    for (tag, pairs) in [(MarkTag::Plus, counts.plus_pairs), (MarkTag::Minus, counts.minus_pairs)] {
        for _ in 0..pairs {
            let ci = rng.gen_range(0..components);
            draw(rng, &mut marks, ci, tag, 1);
            draw(rng, &mut marks, ci, tag, -1);
        }
    }
    for _ in 0..counts.probes {
        let ci = rng.gen_range(0..components);
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        draw(rng, &mut marks, ci, MarkTag::Probe, sign);
    }
    marks.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    let components = comps
        .iter()
        .enumerate()
        .map(|(ci, crits)| {
            let m = crits.len();
            let mut out = Vec::new();
            for (seg, c) in crits.iter().enumerate() {
                out.push(Mark { tag: if c.is_max { MarkTag::Max } else { MarkTag::Min }, value: c.value, id: Some(c.id.clone()), sign: 1 });
                let (v0, v1) = (c.value, crits[(seg + 1) % m].value);
                for mk in marks.iter().filter(|mk| mk.0 == ci && mk.1 == seg) {
                    out.push(Mark { tag: mk.3, value: v0 + mk.2 * (v1 - v0), id: None, sign: mk.4 });
                }
            }
            CircleComponent { marks: out }
        })
        .collect();
    CircleConfig { name: "random-circles".into(), components }
}

/// The configuration realized by the flow pipeline.
pub struct CirclePipeline {
    pub md: MorseData,
    pub chains: ConfigChains,
}

impl CirclePipeline {
    pub fn build(config: &CircleConfig, opts: &FlowOptions) -> Result<Self> {
        let views = config.analyze()?;
        let model = config.model()?;
        let chains = config_chains(&views, &model)?;
        let md = build_morse_data(&model, opts)?;
        Ok(CirclePipeline { md, chains })
    }
}

fn id_map(md: &MorseData, m: &IntMap, sign_of_f: i8) -> IdMap {
    let crits = if sign_of_f > 0 { &md.crits } else { &md.neg_crits };
    let mut out = IdMap::new();
    for q in 0..m.nrows() {
        for p in 0..m.ncols() {
            if m[(q, p)] != 0 {
                out.insert((crits[p].id.clone(), crits[q].id.clone()), m[(q, p)]);
            }
        }
    }
    out
}

fn flowline_set(md: &MorseData, sign_of_f: i8) -> Vec<(String, String, i64)> {
    let (crits, trajs) = if sign_of_f > 0 { (&md.crits, &md.trajectories) } else { (&md.neg_crits, &md.neg_trajectories) };
    let mut out: Vec<_> = trajs.iter().map(|t| (crits[t.source].id.clone(), crits[t.sink].id.clone(), i64::from(t.sign))).collect();
    out.sort();
    out
}

/// Every quantity where the pipeline disagrees with the oracle, by name.
pub fn compare_with_pipeline(oracle: &CircleOracle, pipe: &CirclePipeline, seed: u64) -> Result<Vec<String>> {
    let md = &pipe.md;
    let ch = &pipe.chains;
    let mut bad = Vec::new();
    for (i, g) in oracle.complex.generators.iter().enumerate() {
        let j = md.index_of(&g.id).ok_or_else(|| Error::InvalidConfig(format!("pipeline lacks {}", g.id)))?;
        for (h, other) in oracle.complex.generators.iter().enumerate() {
            let Some(l) = md.index_of(&other.id) else { continue };
            if oracle.complex.d[i].coeff(h) != md.cx_f.d[j].coeff(l) {
                bad.push(format!("d({}) at {}", g.id, other.id));
            }
        }
    }
    let sorted = |mut v: Vec<(String, String, i64)>| {
        v.sort();
        v
    };
    if sorted(oracle.flowlines.clone()) != flowline_set(md, 1) {
        bad.push("flowlines of f".into());
    }
    if sorted(oracle.neg_flowlines.clone()) != flowline_set(md, -1) {
        bad.push("flowlines of -f".into());
    }
    if id_map(md, &cap_map(md, &ch.plus, 1)?.matrix, 1) != oracle.cap_plus {
        bad.push("cap of b+".into());
    }
    if id_map(md, &cap_map(md, &ch.minus, -1)?.matrix, -1) != oracle.cap_minus {
        bad.push("cap of b-".into());
    }
    if id_map(md, &cap_map(md, &ch.probe, 1)?.matrix, 1) != oracle.cap_probe {
        bad.push("cap of probes".into());
    }
    if id_map(md, &two_point_map(md, &ch.plus, &ch.minus, 1)?.matrix, 1) != oracle.two_point {
        bad.push("two-point map".into());
    }
    if correction_term(md, &ch.plus, &ch.minus, seed)? != oracle.correction {
        bad.push("correction term".into());
    }
    if let Some(lk) = oracle.lk {
        if !ch.plus.is_empty() && !ch.minus.is_empty() && linking_number(&ch.minus, &ch.plus, &md.model, LINK_MESH)? != lk {
            bad.push("linking number".into());
        }
    }
    if beta_alg_sup(&md.cx_f, 0) != oracle.beta_alg {
        bad.push("algebraic separation".into());
    }
    let strategy = SearchStrategy { seed, ..SearchStrategy::default() };
    let geom = beta_geom_search(md, 0, &strategy)?.bound;
    if (geom - oracle.beta_geom).abs() > 1e-12 {
        bad.push(format!("geometric separation {geom} vs {}", oracle.beta_geom));
    }
    if oracle.lk.is_some() && !ch.plus.is_empty() && !ch.minus.is_empty() {
        let pair = LinkPair::new(ch.plus.clone(), ch.minus.clone(), 1)?;
        if (pair.separation(md).unwrap_or(f64::NAN) - (oracle.min_f_minus.unwrap_or(0.0) - oracle.max_f_plus.unwrap_or(0.0))).abs() > 1e-9 {
            bad.push("separation".into());
        }
    }
    Ok(bad)
}
