//! Suites, β tables and exports behind the `morselink` binary.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use morse_link::complex::FilteredComplex;
use morse_link::flow::{
    build_morse_data, check_cap_adjoint, check_cap_leibniz, check_fundid, check_piint, trajectory_rows, FlowOptions, IdentityReport, MorseData,
};
use morse_link::geometry::{builtin_model, ModelKind, ModelParams, Point};
use morse_link::linktheory::{
    check_linklink, circle_oracle, compare_with_pipeline, random_admissible_pair, verify_alggeom, verify_main2, witness_pair, CircleConfig, CirclePipeline,
    Displacement, IdMap, LinkPair, Resolution, SearchStrategy,
};
use morse_link::plchain::chain::{PLChain, JITTER_RETRIES};
use morse_link::ring::CoefficientRing;
use morse_link::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Dualm,
    Linklink,
    Alggeom,
    Main2,
    All,
}

/// Everything a run depends on. The TOML config file mirrors these fields;
/// command-line flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub params: ModelParams,
    pub ring: String,
    /// Degrees k to check; empty means every k with k + 1 ≤ n.
    pub degrees: Vec<usize>,
    /// Tolerance for real-valued comparisons; unset means 0 on circles and
    /// 0.05 on surfaces.
    pub tol: Option<f64>,
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub out: Option<PathBuf>,
    /// Random pairs tried per degree by the linking and separation suites.
    pub random_pairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "circle-a".into(),
            params: ModelParams::default(),
            ring: "Q".into(),
            degrees: Vec::new(),
            tol: None,
            seed: 0,
            suites: vec![Suite::All],
            out: None,
            random_pairs: 3,
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&s)
    }

    /// Selected suites in run order.
    pub fn suite_list(&self) -> Vec<Suite> {
        let all = [Suite::Identities, Suite::Dualm, Suite::Linklink, Suite::Alggeom, Suite::Main2];
        if self.suites.is_empty() || self.suites.contains(&Suite::All) {
            return all.to_vec();
        }
        all.into_iter().filter(|s| self.suites.contains(s)).collect()
    }
}

/// A built model with the settings derived from a run config.
pub struct Fixture {
    pub md: MorseData,
    pub ring: CoefficientRing,
    pub tol: f64,
    pub degrees: Vec<usize>,
}

impl Fixture {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let ring = CoefficientRing::parse(&cfg.ring)?;
        let model = builtin_model(&cfg.model, &cfg.params)?;
        let md = build_morse_data(&model, &FlowOptions::default())?;
        let n = md.model.n;
        let tol = cfg.tol.unwrap_or(if md.model.kind == ModelKind::CircleUnion { 0.0 } else { 0.05 });
        let degrees = if cfg.degrees.is_empty() { (0..n).collect() } else { cfg.degrees.clone() };
        if let Some(k) = degrees.iter().find(|&&k| k + 1 > n) {
            return Err(Error::DegreeMismatch(format!("degree {k} has no linking partner in dimension {n}")));
        }
        Ok(Fixture { md, ring, tol, degrees })
    }

    pub fn name(&self) -> &str {
        &self.md.model.name
    }
}

/// Common envelope of every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub theorem: String,
    pub fixture: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub ring: String,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub lhs: Value,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub rhs: Value,
    pub residual: Value,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub witnesses: Value,
    pub detail: Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn file_name(&self, index: usize) -> String {
        match self.k {
            Some(k) => format!("{index:02}-{}-k{k}.json", self.theorem),
            None => format!("{index:02}-{}.json", self.theorem),
        }
    }
}

fn status(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.into()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Seeds for the individual checks, all derived from the run seed.
fn sub_seed(seed: u64, salt: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)).gen()
}

fn clear_point<R: Rng>(md: &MorseData, rng: &mut R) -> Point {
    loop {
        let x = md.model.random_point(rng);
        if md.crits.iter().all(|c| md.model.distance(&x, &c.coords) > 3.0 * c.radius) {
            return x;
        }
    }
}

/// Three clear points with random signs.
pub fn probe_points<R: Rng>(md: &MorseData, rng: &mut R) -> PLChain {
    let mut c = PLChain::empty(0);
    for _ in 0..3 {
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        c.push(vec![clear_point(md, rng)], sign);
    }
    c
}

/// A short geodesic arc keeping clear of every critical point.
pub fn probe_arc<R: Rng>(md: &MorseData, rng: &mut R) -> PLChain {
    let model = &md.model;
    let mut scale = 1.0;
    for attempt in 1.. {
        // Crowded circles may leave no room for a long arc.
        if attempt % 50 == 0 {
            scale *= 0.5;
        }
        let x = clear_point(md, rng);
        let basis = model.tangent_basis(&x);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = scale * if model.n == 1 { rng.gen_range(0.3..1.5) } else { rng.gen_range(0.2..0.6) };
        let dir = if model.n == 1 { basis[0] * angle.cos().signum() } else { basis[0] * angle.cos() + basis[1] * angle.sin() };
        let pieces = 8;
        let pts: Vec<Point> = (0..=pieces).map(|i| model.exp(&x, &(dir * (len * f64::from(i) / f64::from(pieces))))).collect();
        let arc = PLChain::polyline(&pts, 1);
        if md.crits.iter().all(|c| arc.distance_to(model, &c.coords) > 3.0 * c.radius) {
            return arc;
        }
    }
    unreachable!()
}

fn identity_report(fx: &Fixture, name: &str, seed: u64, parts: Vec<IdentityReport>) -> Report {
    let residual = parts.iter().map(|r| r.residual_max).max().unwrap_or(0);
    let ok = !parts.is_empty() && parts.iter().all(IdentityReport::passed);
    Report {
        theorem: name.into(),
        fixture: fx.name().into(),
        k: None,
        ring: "Z".into(),
        seed,
        status: status(ok),
        lhs: Value::Null,
        rhs: Value::Null,
        residual: json!(residual),
        witnesses: Value::Null,
        detail: json!({ "checks": parts.len(), "jitter_rounds": parts.iter().map(|r| r.jitter_rounds).collect::<Vec<_>>() }),
    }
}

fn complex_report(fx: &Fixture, seed: u64) -> Report {
    let mut failures = Vec::new();
    for (label, cx) in [("f", &fx.md.cx_f), ("-f", &fx.md.cx_neg)] {
        if let Err(e) = cx.validate() {
            failures.push(format!("{label}: {}", e.code()));
        }
        if !cx.apply_d(&cx.fundamental_cycle()).is_zero() {
            failures.push(format!("{label}: fundamental chain is not a cycle"));
        }
    }
    Report {
        theorem: "complex".into(),
        fixture: fx.name().into(),
        k: None,
        ring: "Z".into(),
        seed,
        status: status(failures.is_empty()),
        lhs: Value::Null,
        rhs: Value::Null,
        residual: json!(failures.len()),
        witnesses: Value::Null,
        detail: json!({ "generators": fx.md.crits.len(), "failures": failures }),
    }
}

/// Complex invariants and the cap identities on seeded probe chains.
pub fn identities_suite(fx: &Fixture, seed: u64) -> Result<Vec<Report>> {
    let md = &fx.md;
    let name = fx.name();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 1));
    let points = probe_points(md, &mut rng);
    let arcs = [probe_arc(md, &mut rng), probe_arc(md, &mut rng)];
    let mut out = vec![complex_report(fx, seed)];

    let mut adjoint = Vec::new();
    let mut leibniz = Vec::new();
    for (i, g) in [&points, &arcs[0], &arcs[1]].into_iter().enumerate() {
        adjoint.push(check_cap_adjoint(md, g, name, sub_seed(seed, 10 + i as u64))?);
        for sign in [1, -1] {
            leibniz.push(check_cap_leibniz(md, g, sign, name, sub_seed(seed, 20 + i as u64))?);
        }
    }
    out.push(identity_report(fx, "igprop-i", seed, adjoint));
    out.push(identity_report(fx, "igprop-ii", seed, leibniz));
    out.push(identity_report(fx, "piint", seed, vec![check_piint(md, &points, name, sub_seed(seed, 30))?]));
    let mut fundid = Vec::new();
    for (i, (g0, g1)) in [(&points, &arcs[0]), (&arcs[0], &points), (&arcs[0], &arcs[1])].into_iter().enumerate() {
        for sign in [1, -1] {
            fundid.push(check_fundid(md, g0, g1, sign, name, sub_seed(seed, 40 + i as u64))?);
        }
    }
    out.push(identity_report(fx, "fundid", seed, fundid));
    Ok(out)
}

/// m_{−f}(q, p) = (−1)^{n−|q|} m_f(p, q) entry by entry.
pub fn dualm_suite(fx: &Fixture, seed: u64) -> Report {
    let md = &fx.md;
    let n = md.model.n;
    let (cf, cn) = (&md.cx_f, &md.cx_neg);
    let mut checked = 0;
    let mut bad = Vec::new();
    for (p, gp) in cf.generators.iter().enumerate() {
        for (q, gq) in cf.generators.iter().enumerate().filter(|(_, gq)| gq.degree + 1 == gp.degree) {
            let sign = cf.ring.from_i64(if (n - gq.degree) % 2 == 0 { 1 } else { -1 });
            checked += 1;
            if cn.d[q].coeff(p) != cf.ring.mul(&sign, &cf.d[p].coeff(q)) {
                bad.push(format!("({}, {})", gq.id, gp.id));
            }
        }
    }
    Report {
        theorem: "dualm".into(),
        fixture: fx.name().into(),
        k: None,
        ring: "Z".into(),
        seed,
        status: status(bad.is_empty()),
        lhs: Value::Null,
        rhs: Value::Null,
        residual: json!(bad.len()),
        witnesses: Value::Null,
        detail: json!({ "entries": checked, "mismatches": bad }),
    }
}

/// The displaced witness pair (when the separation is positive) and random
/// admissible pairs.
fn linklink_pairs(fx: &Fixture, cfg: &RunConfig, k: usize, seed: u64) -> Result<Vec<LinkPair>> {
    let md = &fx.md;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 100 + k as u64));
    let mut pairs = Vec::new();
    if let Some(w) = witness_pair(md, k, &Resolution::default())? {
        // Redraw the displacement until both chains clear every critical point.
        for _ in 0..=JITTER_RETRIES {
            let phi = Displacement::random(md, &mut rng);
            let pair = LinkPair::new(phi.apply(md, &w.pair.b_plus), phi.apply(md, &w.pair.b_minus), md.model.n)?;
            if pair.check_admissible(md).is_ok() {
                pairs.push(pair);
                break;
            }
        }
    }
    for _ in 0..cfg.random_pairs {
        if let Some(p) = random_admissible_pair(md, k, &mut rng, 50) {
            pairs.push(p);
        }
    }
    Ok(pairs)
}

pub fn linklink_suite(fx: &Fixture, cfg: &RunConfig, k: usize, seed: u64) -> Result<Report> {
    let md = &fx.md;
    let pairs = linklink_pairs(fx, cfg, k, seed)?;
    let mut reports = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        reports.push(check_linklink(md, pair, fx.name(), sub_seed(seed, 200 + i as u64))?);
    }
    let ok = !reports.is_empty() && reports.iter().all(|r| r.passed());
    Ok(Report {
        theorem: "linklink".into(),
        fixture: fx.name().into(),
        k: Some(k),
        ring: "Z".into(),
        seed,
        status: status(ok),
        lhs: to_value(&reports.iter().map(|r| r.lhs).collect::<Vec<_>>()),
        rhs: to_value(&reports.iter().map(|r| r.rhs).collect::<Vec<_>>()),
        residual: json!(reports.iter().map(|r| r.residual.abs()).max().unwrap_or(0)),
        witnesses: to_value(&reports.iter().map(|r| &r.witnesses).collect::<Vec<_>>()),
        detail: json!({
            "lk": reports.iter().map(|r| r.lk).collect::<Vec<_>>(),
            "correction": reports.iter().map(|r| r.correction).collect::<Vec<_>>(),
            "caps_are_boundaries": reports.iter().all(|r| r.caps_are_boundaries),
        }),
    })
}

pub fn alggeom_suite(fx: &Fixture, cfg: &RunConfig, k: usize, seed: u64) -> Result<Report> {
    let strategy = SearchStrategy { random_pairs: cfg.random_pairs, seed: sub_seed(seed, 300 + k as u64), ..SearchStrategy::default() };
    let r = verify_alggeom(&fx.md, k, fx.tol, &strategy)?;
    Ok(Report {
        theorem: "alggeom".into(),
        fixture: fx.name().into(),
        k: Some(k),
        ring: "Q".into(),
        seed,
        status: r.status.clone(),
        lhs: json!(r.beta_alg),
        rhs: json!(r.beta_geom_lower),
        residual: json!(r.residual),
        witnesses: json!({ "separation": r.witness_separation, "lk": r.witness_lk, "lambda": r.witness_lambda }),
        detail: to_value(&r),
    })
}

pub fn main2_suite(fx: &Fixture, k: usize, seed: u64) -> Result<Report> {
    let field = fx.ring.field_of_fractions();
    let r = verify_main2(&fx.md, k, field, sub_seed(seed, 400 + k as u64), &Resolution::default())?;
    Ok(Report {
        theorem: "main2".into(),
        fixture: fx.name().into(),
        k: Some(k),
        ring: field.to_string(),
        seed,
        status: r.status.clone(),
        lhs: json!(r.rank_l),
        rhs: json!(r.rank_d),
        residual: json!(r.rank_d as i64 - r.rank_l as i64),
        witnesses: to_value(&r.link_matrix),
        detail: to_value(&r),
    })
}

/// Runs the selected suites in a fixed order.
pub fn run_verify(cfg: &RunConfig) -> Result<Vec<Report>> {
    let fx = Fixture::build(cfg)?;
    let seed = cfg.seed;
    let mut out = Vec::new();
    for suite in cfg.suite_list() {
        match suite {
            Suite::Identities => out.extend(identities_suite(&fx, seed)?),
            Suite::Dualm => out.push(dualm_suite(&fx, seed)),
            Suite::Linklink => {
                for &k in &fx.degrees {
                    out.push(linklink_suite(&fx, cfg, k, seed)?);
                }
            }
            Suite::Alggeom => {
                for &k in &fx.degrees {
                    out.push(alggeom_suite(&fx, cfg, k, seed)?);
                }
            }
            Suite::Main2 => {
                for &k in &fx.degrees {
                    out.push(main2_suite(&fx, k, seed)?);
                }
            }
            Suite::All => unreachable!("expanded by suite_list"),
        }
    }
    Ok(out)
}

pub fn report_json(r: &Report) -> String {
    serde_json::to_string_pretty(r).expect("reports serialize") + "\n"
}

pub fn write_reports(dir: &Path, reports: &[Report]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err)?;
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let path = dir.join(r.file_name(i + 1));
            fs::write(&path, report_json(r)).map_err(io_err)?;
            Ok(path)
        })
        .collect()
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("io: {e}"))
}

/// One row of the separation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaRow {
    pub k: usize,
    /// rank d_{f,k+1} over the run's field.
    pub q_k: usize,
    pub beta_alg: f64,
    pub beta_geom_lower: f64,
    pub witness_lk: Option<i64>,
    pub witness_separation: Option<f64>,
    pub candidates: usize,
    pub linked: usize,
}

pub fn beta_rows(cfg: &RunConfig) -> Result<Vec<BetaRow>> {
    let fx = Fixture::build(cfg)?;
    let field = fx.ring.field_of_fractions();
    let q = fx.md.cx_f.morse_inequality_decomposition(field)?.q;
    fx.degrees
        .iter()
        .map(|&k| {
            let strategy = SearchStrategy { random_pairs: cfg.random_pairs, seed: sub_seed(cfg.seed, 300 + k as u64), ..SearchStrategy::default() };
            let r = verify_alggeom(&fx.md, k, fx.tol, &strategy)?;
            Ok(BetaRow {
                k,
                q_k: q[k],
                beta_alg: r.beta_alg,
                beta_geom_lower: r.beta_geom_lower,
                witness_lk: r.witness_lk,
                witness_separation: r.witness_separation,
                candidates: r.candidates,
                linked: r.linked,
            })
        })
        .collect()
}

pub fn beta_csv(rows: &[BetaRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn trajectories_csv(md: &MorseData) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in trajectory_rows(md) {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Writes both complexes, the trajectory table and the witness chains.
pub fn export(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let fx = Fixture::build(cfg)?;
    let md = &fx.md;
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut witnesses = Vec::new();
    for &k in &fx.degrees {
        if let Some(w) = witness_pair(md, k, &Resolution::default())? {
            let chain = |c: &PLChain| serde_json::from_str::<Value>(&c.to_json(&md.model)).expect("chain json");
            witnesses.push(json!({ "k": k, "lk": w.lk, "b_plus": chain(&w.pair.b_plus), "b_minus": chain(&w.pair.b_minus) }));
        }
    }
    let files: [(&str, String); 4] = [
        ("complex_f.json", md.cx_f.to_json()),
        ("complex_neg.json", md.cx_neg.to_json()),
        ("trajectories.csv", trajectories_csv(md)?),
        ("witnesses.json", serde_json::to_string_pretty(&witnesses).expect("json") + "\n"),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err)?;
            Ok(path)
        })
        .collect()
}

pub fn read_complex(path: &Path) -> Result<FilteredComplex> {
    FilteredComplex::from_json(&fs::read_to_string(path).map_err(io_err)?)
}

fn id_entries(m: &IdMap) -> Vec<(String, String, i64)> {
    m.iter().map(|((s, t), v)| (s.clone(), t.clone(), *v)).collect()
}

/// Oracle values for a circle configuration and every quantity where the
/// flow pipeline disagrees.
pub fn oracle_report(config: &CircleConfig, seed: u64) -> Result<Report> {
    let o = circle_oracle(config)?;
    let pipe = CirclePipeline::build(config, &FlowOptions::default())?;
    let bad = compare_with_pipeline(&o, &pipe, seed)?;
    let balanced = match (o.lk, o.lambda) {
        (Some(lk), Some(l)) => l == lk + o.correction,
        _ => true,
    };
    Ok(Report {
        theorem: "circle-oracle".into(),
        fixture: pipe.md.model.name.clone(),
        k: Some(0),
        ring: "Z".into(),
        seed,
        status: status(bad.is_empty() && balanced && o.beta_alg == o.beta_geom),
        lhs: json!(o.lambda),
        rhs: json!(o.lk.map(|lk| lk + o.correction)),
        residual: json!(bad.len()),
        witnesses: Value::Null,
        detail: json!({
            "lk": o.lk,
            "correction": o.correction,
            "beta_alg": o.beta_alg,
            "beta_geom": o.beta_geom,
            "cap_plus": id_entries(&o.cap_plus),
            "cap_minus": id_entries(&o.cap_minus),
            "cap_probe": id_entries(&o.cap_probe),
            "two_point": id_entries(&o.two_point),
            "mismatches": bad,
        }),
    })
}
