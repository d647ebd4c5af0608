use std::path::PathBuf;
use std::process::Command;

use morse_link::linktheory::CircleConfig;
use morse_link_cli::{identities_suite, read_complex, run_verify, Fixture, RunConfig, Suite};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morselink"))
}

fn scratch(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("morselink-cli-{}-{label}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn verify_circle_a_writes_nine_passing_reports() {
    let out = scratch("verify");
    let run = bin().args(["verify", "--model", "circle-a", "--out"]).arg(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let mut files: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(
        files,
        [
            "01-complex.json",
            "02-igprop-i.json",
            "03-igprop-ii.json",
            "04-piint.json",
            "05-fundid.json",
            "06-dualm.json",
            "07-linklink-k0.json",
            "08-alggeom-k0.json",
            "09-main2-k0.json"
        ]
    );
    for f in &files {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(f)).unwrap()).unwrap();
        assert_eq!(v["status"], "pass", "{f}");
        assert_eq!(v["fixture"], "circle-a");
    }
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn unknown_model_exits_with_code_two() {
    let run = bin().args(["verify", "--model", "klein-bottle"]).output().unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).starts_with("error[UNKNOWN_MODEL]"));
}

#[test]
fn degree_beyond_the_dimension_is_rejected() {
    let run = bin().args(["verify", "--model", "circle-a", "--degree", "1"]).output().unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn sphere_identities_hold_exactly() {
    let run = bin().args(["verify", "--model", "sphere-b", "--suite", "identities", "--tol", "0"]).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).contains("5 reports"));
}

#[test]
fn beta_table_for_circle_a() {
    let run = bin().args(["beta", "--model", "circle-a"]).output().unwrap();
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let field = |name: &str| rows[0].get(headers.iter().position(|h| h == name).unwrap()).unwrap().to_string();
    assert_eq!(field("k"), "0");
    assert_eq!(field("q_k"), "1");
    assert_eq!(field("beta_alg").parse::<f64>().unwrap(), 2.0);
    assert_eq!(field("beta_geom_lower").parse::<f64>().unwrap(), 2.0);
}

#[test]
fn export_round_trips_the_complexes() {
    let out = scratch("export");
    let run = bin().args(["export", "--model", "torus-c", "--out"]).arg(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let cfg = RunConfig { model: "torus-c".into(), ..RunConfig::default() };
    let fx = Fixture::build(&cfg).unwrap();
    assert_eq!(read_complex(&out.join("complex_f.json")).unwrap(), fx.md.cx_f);
    assert_eq!(read_complex(&out.join("complex_neg.json")).unwrap(), fx.md.cx_neg);
    let mut reader = csv::Reader::from_path(out.join("trajectories.csv")).unwrap();
    let sign_col = reader.headers().unwrap().iter().position(|h| h == "sign").unwrap();
    let signs: Vec<i64> = reader.records().map(|r| r.unwrap()[sign_col].parse().unwrap()).collect();
    assert_eq!(signs.len(), 24);
    assert!(signs.iter().all(|s| s.abs() == 1));
    let witnesses: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("witnesses.json")).unwrap()).unwrap();
    // Only degree 1 has a positive separation.
    assert_eq!(witnesses.as_array().unwrap().len(), 1);
    assert_eq!(witnesses[0]["k"], 1);
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn identical_seeds_give_identical_output() {
    let run = || bin().args(["verify", "--model", "circle-random", "--model-seed", "4", "--maxima", "4", "--seed", "11"]).output().unwrap().stdout;
    assert_eq!(run(), run());
    let cfg = RunConfig { model: "circle-a".into(), seed: 11, suites: vec![Suite::Linklink, Suite::Main2], ..RunConfig::default() };
    assert_eq!(run_verify(&cfg).unwrap(), run_verify(&cfg).unwrap());
}

#[test]
fn identities_hold_for_many_probe_seeds() {
    let fx = Fixture::build(&RunConfig::default()).unwrap();
    for seed in 0..20 {
        for r in identities_suite(&fx, seed).unwrap() {
            assert!(r.passed(), "seed {seed}: {r:?}");
        }
    }
}

#[test]
fn config_file_and_flags_combine() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, "model = \"circle-random\"\nseed = 2\nsuites = [\"dualm\"]\n\n[params]\nseed = 5\nm = 4\n").unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.params.m, 4);
    assert_eq!(cfg.suite_list(), vec![Suite::Dualm]);
    let run = bin().arg("verify").arg("--config").arg(&path).args(["--suite", "alggeom"]).output().unwrap();
    assert!(run.status.success());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("PASS alggeom circle-random-5-4 k=0"), "{stdout}");
    assert!(!stdout.contains("dualm"));
    assert!(RunConfig::from_toml("modle = \"circle-a\"").is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn oracle_subcommand_reports_agreement() {
    let dir = scratch("oracle");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("marks.toml");
    let text = r#"
name = "two-maxima"

[[components]]
marks = [
  { tag = "max", id = "M1", value = 4.0 },
  { tag = "plus", value = 2.0 },
  { tag = "min", id = "m1", value = 0.0 },
  { tag = "minus", value = 2.5 },
  { tag = "max", id = "M2", value = 3.0 },
  { tag = "plus", value = 2.0, sign = -1 },
  { tag = "min", id = "m2", value = 1.0 },
  { tag = "minus", value = 3.5, sign = -1 },
]
"#;
    CircleConfig::from_toml(text).unwrap();
    std::fs::write(&path, text).unwrap();
    let run = bin().arg("oracle").arg(&path).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
    let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["status"], "pass");
    assert_eq!(v["detail"]["beta_alg"], 2.0);
    std::fs::write(&path, "[[components]]\nmarks = [{ tag = \"plus\", value = 1.0 }]\n").unwrap();
    assert_eq!(bin().arg("oracle").arg(&path).output().unwrap().status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}
