use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cfal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfal")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const EXACT: &str = r#"{"mode":"exact","fixture":{"name":"table1"},"algorithm":"vc_active","m":40,"n":30,"trials":2,"seed":3}"#;
const PASSIVE: &str = r#"{"mode":"exact","fixture":{"name":"consistency"},"algorithm":"passive","m":50,"n":60,"trials":2,"seed":11}"#;
const LINEAR: &str = r#"{"mode":"linear","linear":{"world":{"n_points":1200},"policy":"uncertainty"},"algorithm":"vc_active","m":0,"n":0,"c_grid":[0.01],"eta_grid":[0.001],"trials":1,"seed":2}"#;

#[test]
fn run_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", EXACT);
    let out = dir.path().join("curves.csv");
    let o = cfal(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("algorithm,params,trial,labels_used,test_error\n"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("curves.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (i, body) in [EXACT, PASSIVE, LINEAR].iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        let a = cfal(&["run", &cfg]);
        let b = cfal(&["run", &cfg]);
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "config {i}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", EXACT);
    let a = cfal(&["run", &cfg, "--seed", "3"]);
    let b = cfal(&["run", &cfg]);
    assert_eq!(a.stdout, b.stdout);
    let c = cfal(&["run", &cfg, "--seed", "4", "--trials", "5"]);
    assert!(c.status.success());
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sweep_writes_table_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"mode":"exact","fixture":{"name":"table1"},"algorithm":"vc_active","gamma1":[1,4,16],"m":40,"n":30,"trials":2,"seed":3}"#,
    );
    let out = dir.path().join("sweep.csv");
    let o = cfal(&["sweep", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(&out).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert_eq!(table.matches(",true").count(), 1);
    assert!(dir.path().join("sweep.csv.curves.csv").exists());
    assert!(dir.path().join("sweep.csv.meta.json").exists());
}

#[test]
fn ablation_flag_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", EXACT);
    assert!(cfal(&["run", &cfg, "--ablate", "clipping,debias"]).status.success());
    assert_eq!(cfal(&["run", &cfg, "--ablate", "warp"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "a.json", r#"{"mode":"exact","bogus":1}"#);
    assert_eq!(cfal(&["run", &unknown]).status.code(), Some(2));
    let bad_fixture = write_config(
        dir.path(),
        "b.json",
        r#"{"mode":"exact","fixture":{"name":"table1","alpha":0.9},"algorithm":"passive","m":10,"n":10}"#,
    );
    assert_eq!(cfal(&["run", &bad_fixture]).status.code(), Some(2));
    assert_eq!(cfal(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(cfal(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(cfal(&["world", "atlantis"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", EXACT);
    let o = cfal(&["run", &cfg, "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_single_suite_passes() {
    let o = cfal(&["verify", "decomposability"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("decomposability,PASS"));
}

#[test]
fn world_dump_round_trips() {
    let o = cfal(&["world", "table1", "--dump"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let mass: Vec<f64> = serde_json::from_value(doc["mass"].clone()).unwrap();
    assert!((mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    // A dumped world can be fed back as a custom fixture.
    let dir = tempfile::tempdir().unwrap();
    let custom = serde_json::json!({"name": "custom", "world": doc});
    let p = write_config(dir.path(), "w.json", &custom.to_string());
    let again = cfal(&["world", &p, "--dump"]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn linear_world_summary() {
    let o = cfal(&["world", "linear", "--seed", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["dim"], 30);
}
