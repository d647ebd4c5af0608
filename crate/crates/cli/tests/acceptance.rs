//! Acceptance run: one PASS/FAIL line per criterion with its wall time.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use morse_link::complex::{beta_alg_depth, beta_alg_sup, random_filtered_complex, FilteredComplex};
use morse_link::flow::{build_morse_data, check_cap_adjoint, check_cap_leibniz, check_fundid, check_piint, FlowOptions, IdentityReport, MorseData};
use morse_link::geometry::{builtin_model, ModelKind, ModelParams, Point};
use morse_link::linktheory::{
    check_chainconstruct, check_linklink, circle_oracle, compare_with_pipeline, kronecker_system, link_matrix, pseudoboundary_from_chain,
    random_admissible_pair, random_circle_config, rank_bound_holds, verify_alggeom, verify_main2, witness_pair, CircleConfig, CirclePipeline,
    LinkPair, MarkCounts, Resolution, SearchStrategy,
};
use morse_link::plchain::chain::PLChain;
use morse_link::plchain::signs::{sign_rule_suite, sign_table_coherent};
use morse_link::ring::CoefficientRing;
use morse_link_cli::{beta_csv, beta_rows, dualm_suite, export, probe_arc, probe_points, report_json, run_verify, Fixture, RunConfig};

type Outcome = Result<String, String>;

fn lift<T>(r: morse_link::Result<T>, ctx: &str) -> Result<T, String> {
    r.map_err(|e| format!("{ctx}: {e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const BUILTINS: [&str; 5] = ["circle-a", "circle-random", "torus-c", "sphere-b", "round-sphere"];

fn builtin(name: &str) -> &'static MorseData {
    static CACHE: OnceLock<Vec<MorseData>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        BUILTINS
            .iter()
            .map(|name| build_morse_data(&builtin_model(name, &ModelParams::default()).expect("builtin"), &FlowOptions::default()).expect("flow"))
            .collect()
    });
    &all[BUILTINS.iter().position(|b| *b == name).expect("known builtin")]
}

/// Marked circles in the style of the oracle tests: every configuration
/// carries b+ and b−, and probes when asked.
fn marked_config(seed: u64, probes: bool) -> CircleConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = rng.gen_range(1..=2);
    let maxima = rng.gen_range(1..=3);
    let counts = MarkCounts {
        plus_pairs: rng.gen_range(1..=2),
        minus_pairs: rng.gen_range(1..=2),
        probes: if probes { rng.gen_range(1..=3) } else { 0 },
    };
    random_circle_config(&mut rng, comps, maxima, counts)
}

fn pipeline(cfg: &CircleConfig) -> Result<CirclePipeline, String> {
    lift(CirclePipeline::build(cfg, &FlowOptions::default()), &cfg.name)
}

fn complex_invariants(cx: &FilteredComplex, label: &str) -> Result<(), String> {
    lift(cx.validate(), label)?;
    ensure(cx.apply_d(&cx.fundamental_cycle()).is_zero(), || format!("{label}: d of the fundamental chain is nonzero"))
}

fn c1_complex_invariants() -> Outcome {
    for name in BUILTINS {
        let md = builtin(name);
        complex_invariants(&md.cx_f, &format!("{name} f"))?;
        complex_invariants(&md.cx_neg, &format!("{name} -f"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut gens = 0;
    for i in 0..1000 {
        let comps = rng.gen_range(1..=3);
        let maxima = rng.gen_range(1..=5);
        let cfg = random_circle_config(&mut rng, comps, maxima, MarkCounts { plus_pairs: 0, minus_pairs: 0, probes: 0 });
        let pipe = pipeline(&cfg)?;
        complex_invariants(&pipe.md.cx_f, &format!("config {i} f"))?;
        complex_invariants(&pipe.md.cx_neg, &format!("config {i} -f"))?;
        complex_invariants(&lift(circle_oracle(&cfg), "oracle")?.complex, &format!("config {i} oracle"))?;
        gens += pipe.md.crits.len();
    }
    Ok(format!("{} builtins, 1000 configs, {gens} generators", BUILTINS.len()))
}

fn c2_boundary_depth() -> Outcome {
    let mut degrees = 0;
    let mut positive = 0;
    for ring in [CoefficientRing::Rationals, CoefficientRing::mod_p(5).unwrap()] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..1000 {
            let cx = random_filtered_complex(&mut rng, 20, 6, ring);
            ensure(cx.generators.len() <= 20 && cx.n <= 6, || format!("complex {i} too large"))?;
            for k in 0..cx.n {
                let sup = beta_alg_sup(&cx, k);
                let depth = lift(beta_alg_depth(&cx, k, ring), "depth")?;
                ensure(sup == depth, || format!("{ring} complex {i} k={k}: sup {sup} depth {depth}"))?;
                let rank = cx.rank_d(k + 1, ring);
                ensure((sup > 0.0) == (rank > 0), || format!("{ring} complex {i} k={k}: beta {sup} rank {rank}"))?;
                degrees += 1;
                positive += usize::from(rank > 0);
            }
        }
    }
    Ok(format!("2000 complexes, {degrees} degrees, {positive} with positive rank"))
}

fn c3_sign_rules() -> Outcome {
    ensure(sign_table_coherent(4), || "sign table incoherent".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let checks = sign_rule_suite(&mut rng, 4);
    let bad: Vec<_> = checks.iter().filter(|c| !c.holds()).collect();
    ensure(bad.is_empty(), || format!("{} of {} failed, first {:?}", bad.len(), checks.len(), bad[0]))?;
    let mut rules: Vec<_> = checks.iter().map(|c| c.rule).collect();
    rules.sort();
    rules.dedup();
    Ok(format!("{} tuples over {} rules", checks.len(), rules.len()))
}

fn dualm_on(cfg: &RunConfig) -> Result<usize, String> {
    let fx = lift(Fixture::build(cfg), &cfg.model)?;
    let r = dualm_suite(&fx, 0);
    ensure(r.passed(), || format!("{}: {}", cfg.model, report_json(&r)))?;
    Ok(r.detail["entries"].as_u64().unwrap_or(0) as usize)
}

fn c4_dualm() -> Outcome {
    let mut entries = 0;
    let mut fixtures = 0;
    for model in ["circle-a", "torus-c", "sphere-b"] {
        entries += dualm_on(&RunConfig { model: model.into(), ..RunConfig::default() })?;
        fixtures += 1;
    }
    for seed in 0..20 {
        let params = ModelParams { seed, m: 2 + (seed as usize % 4), amplitude: None };
        entries += dualm_on(&RunConfig { model: "circle-random".into(), params, ..RunConfig::default() })?;
        fixtures += 1;
    }
    Ok(format!("{fixtures} fixtures, {entries} entries"))
}

fn all_zero(parts: &[IdentityReport], ctx: &str) -> Result<usize, String> {
    match parts.iter().find(|r| !r.passed() || r.residual_max != 0) {
        Some(r) => Err(format!("{ctx}: {} residual {}", r.identity, r.residual_max)),
        None => Ok(parts.len()),
    }
}

fn identity_checks(md: &MorseData, singles: &[&PLChain], pairs: &[(&PLChain, &PLChain)], points: &[&PLChain], ctx: &str) -> Result<usize, String> {
    let name = md.model.name.as_str();
    let mut parts = Vec::new();
    for (i, g) in singles.iter().enumerate() {
        parts.push(lift(check_cap_adjoint(md, g, name, i as u64), ctx)?);
        for sign in [1, -1] {
            parts.push(lift(check_cap_leibniz(md, g, sign, name, i as u64), ctx)?);
        }
    }
    for (i, g) in points.iter().enumerate() {
        parts.push(lift(check_piint(md, g, name, i as u64), ctx)?);
    }
    for (i, (g0, g1)) in pairs.iter().enumerate() {
        for sign in [1, -1] {
            parts.push(lift(check_fundid(md, g0, g1, sign, name, i as u64), ctx)?);
        }
    }
    all_zero(&parts, ctx)
}

fn torus_arc(a: (f64, f64), b: (f64, f64), pieces: usize) -> PLChain {
    let pts: Vec<Point> = (0..=pieces)
        .map(|i| {
            let s = i as f64 / pieces as f64;
            Point::new(a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1), 0.0)
        })
        .collect();
    PLChain::polyline(&pts, 1)
}

fn sphere_ring(colat: f64, count: usize) -> PLChain {
    let pts: Vec<Point> = (0..=count)
        .map(|i| {
            let a = std::f64::consts::TAU * (i % count) as f64 / count as f64;
            Point::new(colat.sin() * a.cos(), colat.sin() * a.sin(), colat.cos())
        })
        .collect();
    PLChain::polyline(&pts, 1)
}

fn sphere_meridian(lon: f64, from: f64, to: f64, count: usize) -> PLChain {
    let pts: Vec<Point> = (0..=count)
        .map(|i| {
            let t = from + (to - from) * i as f64 / count as f64;
            Point::new(t.sin() * lon.cos(), t.sin() * lon.sin(), t.cos())
        })
        .collect();
    PLChain::polyline(&pts, 1)
}

fn c5_cap_identities() -> Outcome {
    let mut checks = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..200 {
        let cfg = marked_config(5000 + seed, true);
        let oracle = lift(circle_oracle(&cfg), "oracle")?;
        let pipe = pipeline(&cfg)?;
        let bad = lift(compare_with_pipeline(&oracle, &pipe, seed), "compare")?;
        ensure(bad.is_empty(), || format!("config {seed}: pipeline differs from oracle in {bad:?}"))?;
        let (md, ch) = (&pipe.md, &pipe.chains);
        let arc = probe_arc(md, &mut rng);
        let ctx = format!("config {seed}");
        checks += identity_checks(
            md,
            &[&ch.plus, &ch.minus, &ch.probe, &arc],
            &[(&ch.plus, &ch.minus), (&ch.probe, &ch.plus), (&ch.probe, &arc), (&arc, &ch.minus)],
            &[&ch.probe],
            &ctx,
        )?;
    }

    // Hand-placed surface configurations.
    let torus = builtin("torus-c");
    let g0 = torus_arc((0.05, 0.6), (0.95, 0.7), 7);
    let g1 = torus_arc((0.6, 0.05), (0.7, 0.9), 5);
    let torus_points = probe_points(torus, &mut ChaCha8Rng::seed_from_u64(4));
    checks += identity_checks(torus, &[&g0, &g1], &[(&g0, &g1), (&g1, &g0), (&torus_points, &g1)], &[&torus_points], "torus arcs")?;
    let upper = torus_arc((0.4, 0.2), (0.6, 0.22), 2);
    let lower = torus_arc((0.6, 0.35), (0.4, 0.33), 3);
    checks += identity_checks(torus, &[&upper, &lower], &[(&upper, &lower), (&lower, &upper)], &[], "torus stacked arcs")?;
    let mut region = PLChain::empty(2);
    region.push(vec![Point::new(0.1, 0.1, 0.0), Point::new(0.9, 0.15, 0.0), Point::new(0.5, 0.9, 0.0)], 1);
    checks += identity_checks(torus, &[&region], &[(&torus_points, &region)], &[], "torus region")?;

    let sphere = builtin("sphere-b");
    let ring = sphere_ring(0.8f64.asin(), 24);
    let meridian = sphere_meridian(0.3, 0.3, 2.7, 12);
    checks += identity_checks(sphere, &[&ring, &meridian], &[(&ring, &meridian), (&meridian, &ring)], &[], "sphere ring and meridian")?;
    let sphere_points = probe_points(sphere, &mut ChaCha8Rng::seed_from_u64(6));
    checks += identity_checks(sphere, &[&sphere_points], &[(&sphere_points, &meridian)], &[&sphere_points], "sphere points")?;
    Ok(format!("200 circle inputs and 5 surface configurations, {checks} identity checks"))
}

fn c6_linking_identity() -> Outcome {
    let mut corrected = 0;
    let mut separated = 0;
    let mut linked = 0;
    for seed in 0..500 {
        let cfg = marked_config(6000 + seed, false);
        let o = lift(circle_oracle(&cfg), "oracle")?;
        let (Some(lk), Some(lambda)) = (o.lk, o.lambda) else {
            return Err(format!("config {seed}: oracle left lk or Λ undefined"));
        };
        ensure(lambda == lk + o.correction, || format!("config {seed}: oracle Λ {lambda} lk {lk} corr {}", o.correction))?;
        let pipe = pipeline(&cfg)?;
        let pair = lift(LinkPair::new(pipe.chains.plus.clone(), pipe.chains.minus.clone(), 1), "pair")?;
        let r = lift(check_linklink(&pipe.md, &pair, "random", seed), "linklink")?;
        ensure(r.passed() && r.residual == 0, || format!("config {seed}: {r:?}"))?;
        ensure(r.lk == lk && r.correction == o.correction, || format!("config {seed}: pipeline lk {} corr {} vs oracle {lk} {}", r.lk, r.correction, o.correction))?;
        if o.min_f_minus.unwrap() > o.max_f_plus.unwrap() {
            separated += 1;
            ensure(o.correction == 0 && r.correction == 0, || format!("config {seed}: separated pair with correction"))?;
        }
        corrected += usize::from(o.correction != 0);
        linked += usize::from(lk != 0);
    }
    ensure(corrected >= 50, || format!("only {corrected} pairs with a nonzero correction"))?;
    Ok(format!("500 pairs, {corrected} with nonzero correction, {separated} separated, {linked} linked"))
}

fn c7_separation() -> Outcome {
    let mut positive = 0;
    for seed in 0..50 {
        let cfg = marked_config(7000 + seed, false);
        let o = lift(circle_oracle(&cfg), "oracle")?;
        ensure(o.beta_alg == o.beta_geom, || format!("config {seed}: alg {} geom {}", o.beta_alg, o.beta_geom))?;
        let pipe = pipeline(&cfg)?;
        let r = lift(verify_alggeom(&pipe.md, 0, 0.0, &SearchStrategy::default()), "alggeom")?;
        ensure(r.passed() && r.beta_alg == o.beta_alg, || format!("config {seed}: oracle {} pipeline {r:?}", o.beta_alg))?;
        if o.beta_alg > 0.0 {
            ensure(r.witness_separation == Some(o.beta_geom), || format!("config {seed}: witness {:?} oracle {}", r.witness_separation, o.beta_geom))?;
            positive += 1;
        }
    }
    let mut surfaces = Vec::new();
    for (name, expected) in [("sphere-b", Some(0.2)), ("torus-c", None)] {
        let md = builtin(name);
        let strategy = SearchStrategy { random_pairs: 50, seed: 7, ..SearchStrategy::default() };
        let r = lift(verify_alggeom(md, 1, 0.05, &strategy), name)?;
        let sep = r.witness_separation.ok_or_else(|| format!("{name}: no witness"))?;
        ensure(r.passed() && (sep - r.beta_alg).abs() <= 0.05, || format!("{name}: {r:?}"))?;
        if let Some(e) = expected {
            ensure((r.beta_alg - e).abs() <= 0.05, || format!("{name}: beta {} expected {e}", r.beta_alg))?;
        }
        surfaces.push(format!("{name} {:.4}/{sep:.4}", r.beta_alg));
    }
    Ok(format!("50 circles ({positive} positive), {}", surfaces.join(", ")))
}

/// Families of random admissible pairs; returns how many were checked.
fn random_families(md: &MorseData, k: usize, field: CoefficientRing, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..4 {
        let pairs: Vec<LinkPair> = (0..3).filter_map(|_| random_admissible_pair(md, k, &mut rng, 50)).collect();
        let plus: Vec<PLChain> = pairs.iter().map(|p| p.b_plus.clone()).collect();
        let minus: Vec<PLChain> = pairs.iter().map(|p| p.b_minus.clone()).collect();
        // Cross pairs may meet; those families are not admissible.
        let Ok(l) = link_matrix(md, &plus, &minus, field, seed) else { continue };
        ensure(rank_bound_holds(md, k, &l.entries, minus.len(), field), || format!("{}: rank bound broken by {:?}", md.model.name, l.entries))?;
        checked += 1;
    }
    Ok(checked)
}

fn c8_main2() -> Outcome {
    let res = Resolution::default();
    let mut fixtures: Vec<(String, &MorseData)> = vec![("circle-a".into(), builtin("circle-a"))];
    let pipes: Vec<CirclePipeline> = (0..20).map(|s| pipeline(&marked_config(8000 + s, false))).collect::<Result<_, _>>()?;
    for (i, p) in pipes.iter().enumerate() {
        fixtures.push((format!("config {i}"), &p.md));
    }
    let mut families = 0;
    let mut full_rank = 0;
    for field in [CoefficientRing::Rationals, CoefficientRing::mod_p(2).unwrap()] {
        for (i, (label, md)) in fixtures.iter().enumerate() {
            let r = lift(verify_main2(md, 0, field, i as u64, &res), label)?;
            ensure(r.passed() && r.corrections_zero && r.rank_l == r.rank_d, || format!("{label} {field}: {r:?}"))?;
            ensure(rank_bound_holds(md, 0, &r.link_matrix, r.link_matrix.first().map_or(0, Vec::len), field), || format!("{label}: witness family"))?;
            families += 1 + random_families(md, 0, field, 80 + i as u64)?;
            full_rank += usize::from(r.rank_d > 0);
        }
    }
    Ok(format!("{} fixtures over Q and Z/2, {full_rank} with positive rank, {families} families", fixtures.len()))
}

fn chainconstruct_all(md: &MorseData, chains: &[(i8, morse_link::complex::Chain)], tol: f64, ctx: &str) -> Result<usize, String> {
    let res = Resolution::default();
    for (sign, a) in chains {
        let pb = lift(pseudoboundary_from_chain(md, *sign, a, &res), ctx)?;
        let r = lift(check_chainconstruct(md, &pb, &res, ctx, tol), ctx)?;
        ensure(r.passed(), || format!("{ctx}: {r:?}"))?;
    }
    Ok(chains.len())
}

fn generator_chains(md: &MorseData) -> Vec<(i8, morse_link::complex::Chain)> {
    let mut out = Vec::new();
    for sign in [1i8, -1] {
        let cx = if sign > 0 { &md.cx_f } else { &md.cx_neg };
        for (g, gen) in cx.generators.iter().enumerate().filter(|(_, g)| g.degree > 0) {
            let mut c = cx.generator_chain(g);
            c.degree = gen.degree;
            out.push((sign, c));
        }
    }
    out
}

fn system_chains(md: &MorseData) -> Result<Vec<(i8, morse_link::complex::Chain)>, String> {
    let mut out = Vec::new();
    for k in 0..md.model.n {
        let (plus, minus) = lift(kronecker_system(md, k, CoefficientRing::Rationals), "system")?;
        out.extend(plus.into_iter().map(|a| (1, a)));
        out.extend(minus.into_iter().map(|a| (-1, a)));
        if let Some(w) = lift(witness_pair(md, k, &Resolution::default()), "witness")? {
            out.push((1, w.a_plus));
            out.push((-1, w.a_minus));
        }
    }
    Ok(out)
}

fn c9_chainconstruct() -> Outcome {
    let mut count = 0;
    for name in BUILTINS {
        let md = builtin(name);
        let tol = if md.model.kind == ModelKind::CircleUnion { 0.0 } else { 1e-3 };
        count += chainconstruct_all(md, &generator_chains(md), tol, name)?;
        count += chainconstruct_all(md, &system_chains(md)?, tol, name)?;
    }
    for seed in 0..20 {
        let pipe = pipeline(&marked_config(9000 + seed, false))?;
        let ctx = format!("config {seed}");
        count += chainconstruct_all(&pipe.md, &generator_chains(&pipe.md), 0.0, &ctx)?;
        count += chainconstruct_all(&pipe.md, &system_chains(&pipe.md)?, 0.0, &ctx)?;
    }
    Ok(format!("{count} pseudoboundaries"))
}

fn scratch_dir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("morselink-acceptance-{}-{label}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn c10_determinism() -> Outcome {
    let mut bytes = 0;
    let configs = [
        RunConfig { model: "circle-a".into(), seed: 3, ..RunConfig::default() },
        RunConfig { model: "sphere-b".into(), seed: 4, ..RunConfig::default() },
        RunConfig { model: "circle-random".into(), params: ModelParams { seed: 9, m: 4, amplitude: None }, seed: 5, ..RunConfig::default() },
    ];
    for cfg in &configs {
        let render = || -> Result<String, String> {
            let reports = lift(run_verify(cfg), &cfg.model)?;
            let mut s: String = reports.iter().map(report_json).collect();
            s += &lift(beta_csv(&lift(beta_rows(cfg), "beta")?), "csv")?;
            Ok(s)
        };
        let (a, b) = (render()?, render()?);
        ensure(a == b, || format!("{}: reports differ between runs", cfg.model))?;
        bytes += a.len();
    }
    let cfg = &configs[0];
    let (da, db) = (scratch_dir("a"), scratch_dir("b"));
    let fa = lift(export(cfg, &da), "export")?;
    let fb = lift(export(cfg, &db), "export")?;
    for (a, b) in fa.iter().zip(&fb) {
        let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
        ensure(x == y, || format!("{} differs between runs", a.display()))?;
        bytes += x.len();
    }
    let _ = std::fs::remove_dir_all(&da);
    let _ = std::fs::remove_dir_all(&db);
    Ok(format!("{} configurations and one export, {bytes} bytes compared", configs.len()))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("complex invariants", 30, c1_complex_invariants),
        ("boundary depth equals best pairing gap", 60, c2_boundary_depth),
        ("sign rules", 1, c3_sign_rules),
        ("dual flowline signs", 120, c4_dualm),
        ("cap identities", 180, c5_cap_identities),
        ("linking identity", 60, c6_linking_identity),
        ("algebraic vs geometric separation", 300, c7_separation),
        ("rank of link matrices", 60, c8_main2),
        ("pseudoboundary construction", 120, c9_chainconstruct),
        ("determinism", 60, c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (tag, detail) = match (&outcome, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the {limit} s limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        failed += usize::from(tag == "FAIL");
        println!("{tag} {:>2} {name}: {detail} [{:.2} s, limit {limit} s]", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
