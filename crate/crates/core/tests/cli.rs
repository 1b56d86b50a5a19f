use std::path::Path;
use std::process::{Command, Output};

use isospec::io::{jmap_to_json, load_jmap};
use isospec::jmap::{is_isospectral_pair, JMap};
use isospec::su_algebra::{cayley, random_su};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn isospec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isospec"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_pair(dir: &Path, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = JMap::random(&mut rng, 3).unwrap();
    let a = cayley(&random_su(&mut rng, 3));
    let conj = j.conjugate_by(&a).unwrap();
    std::fs::write(dir.join("j.json"), jmap_to_json(&j)).unwrap();
    std::fs::write(dir.join("conj.json"), jmap_to_json(&conj)).unwrap();
    let other = JMap::random(&mut rng, 3).unwrap();
    std::fs::write(dir.join("other.json"), jmap_to_json(&other)).unwrap();
    ("j.json".into(), "conj.json".into())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_steps_zero_writes_one_member() {
    let dir = tempfile::tempdir().unwrap();
    let out = isospec(&["generate", "--steps", "0", "--out", "fam"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.path().join("fam/manifest.json"));
    assert_eq!(manifest["members"].as_array().unwrap().len(), 1);
    assert!(manifest["pairs"].as_array().unwrap().is_empty());
    assert!(dir.path().join("fam/member_000.json").exists());
}

#[test]
fn generate_rejects_small_m() {
    let dir = tempfile::tempdir().unwrap();
    let out = isospec(&["generate", "--m", "2"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("m must be ≥ 3"));
}

#[test]
fn generate_family_is_pairwise_isospectral() {
    let dir = tempfile::tempdir().unwrap();
    let out = isospec(&["generate", "--m", "3", "--steps", "4", "--seed", "3", "--out", "fam"], dir.path());
    assert_eq!(code(&out), 0);
    let manifest = read_json(&dir.path().join("fam/manifest.json"));
    let pairs = manifest["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 10);
    assert!(pairs.iter().all(|p| p["isospectral"] == Value::Bool(true)));
    let members: Vec<JMap> = (0..5)
        .map(|i| load_jmap(&dir.path().join(format!("fam/member_{i:03}.json"))).unwrap())
        .collect();
    for i in 0..5 {
        for k in i + 1..5 {
            assert!(is_isospectral_pair(&members[i], &members[k], 1e-8).unwrap());
        }
    }
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = isospec(&["generate", "--steps", "2", "--seed", "5", "--out", name], dir.path());
        assert_eq!(code(&out), 0);
    }
    for file in ["manifest.json", "member_000.json", "member_001.json", "member_002.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (j, conj) = write_pair(dir.path(), 1);
    let fast = ["--samples", "20", "--mu-range", "1"];

    let mut args = vec!["verify", &j, &j, "--out", "self.json"];
    args.extend(fast);
    assert_eq!(code(&isospec(&args, dir.path())), 0);

    let mut args = vec!["verify", &j, &conj, "--out", "conj.report.json"];
    args.extend(fast);
    assert_eq!(code(&isospec(&args, dir.path())), 0);
    let report = read_json(&dir.path().join("conj.report.json"));
    assert_eq!(report["metadata"]["info"]["certificate"]["outcome"], "Inconclusive");

    let mut args = vec!["verify", &j, "other.json", "--out", "other.report.json"];
    args.extend(fast);
    assert_eq!(code(&isospec(&args, dir.path())), 2);
    let report = read_json(&dir.path().join("other.report.json"));
    let iso = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "isospectral")
        .unwrap();
    assert_eq!(iso["passed"], Value::Bool(false));
}

#[test]
fn verify_reports_schema_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (j, _) = write_pair(dir.path(), 2);
    std::fs::write(dir.path().join("bad.json"), r#"{"m": 3, "j1": [], "j2": []}"#).unwrap();
    let out = isospec(&["verify", &j, "bad.json"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("j1"));
    let out = isospec(&["verify", &j, "missing.json"], dir.path());
    assert_eq!(code(&out), 1);
    let out = isospec(&["verify", &j], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (j, conj) = write_pair(dir.path(), 4);
    for out in ["r1.json", "r2.json"] {
        let args = ["verify", &j, &conj, "--samples", "10", "--mu-range", "1", "--seed", "7", "--out", out];
        assert_eq!(code(&isospec(&args, dir.path())), 0);
    }
    assert_eq!(
        std::fs::read(dir.path().join("r1.json")).unwrap(),
        std::fs::read(dir.path().join("r2.json")).unwrap()
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (j, _) = write_pair(dir.path(), 6);
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"samples": 7, "mu_range": 1, "seed": 3, "timestamp": "2024-01-01T00:00:00Z"}"#,
    )
    .unwrap();
    let args = ["--config", "cfg.json", "verify", &j, &j, "--seed", "11", "--out", "r.json"];
    assert_eq!(code(&isospec(&args, dir.path())), 0);
    let meta = &read_json(&dir.path().join("r.json"))["metadata"];
    assert_eq!(meta["samples"], 7);
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["timestamp"], "2024-01-01T00:00:00Z");
    assert_eq!(meta["tolerances"]["intertwining"], 1e-8);

    std::fs::write(dir.path().join("badcfg.json"), r#"{"samples": 0}"#).unwrap();
    let out = isospec(&["--config", "badcfg.json", "verify", &j, &j], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn orbit_stratum_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = isospec(&["orbit", "--a", "0.5", "--b", "0.5", "--cutoff", "10"], dir.path());
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let area = v["area"].as_f64().unwrap();
    assert!((area - std::f64::consts::PI.powi(2) / 2f64.sqrt()).abs() < 1e-10);
    assert!((v["angle"]["closed_form"].as_f64().unwrap() - 1.910633).abs() < 1e-6);

    std::fs::write(
        dir.path().join("x.json"),
        r#"{"u": [[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]], "v": [[0.0, 0.5], [-0.5, 0.0]]}"#,
    )
    .unwrap();
    let out = isospec(&["orbit", "--point", "x.json", "--cutoff", "10"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let w: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((w["area"].as_f64().unwrap() - area).abs() < 1e-12);

    assert_eq!(code(&isospec(&["orbit", "--a", "0.8", "--b", "0.8"], dir.path())), 1);
    std::fs::write(
        dir.path().join("sing.json"),
        r#"{"u": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]], "v": [[0.0, 0.0], [0.0, 0.0]]}"#,
    )
    .unwrap();
    let out = isospec(&["orbit", "--point", "sing.json"], dir.path());
    assert_eq!(code(&out), 1);
    assert_eq!(code(&isospec(&["orbit"], dir.path())), 1);
}

#[test]
fn certify_outputs_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let (j, conj) = write_pair(dir.path(), 8);
    let out = isospec(&["certify", &j, &conj], dir.path());
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["certificate"]["outcome"], "Inconclusive");
    assert_eq!(v["generic"]["left"], true);
}
