use std::process::{Command, Output};

const FREE: &str = r#"{"type":"fourier","data":[]}"#;
const RANK_ONE: &str = r#"{"type":"fourier","data":[{"n":1,"v1":[0.4,0],"v2":[0,0]}],"resolution":256}"#;

fn manakov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manakov")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn bad_json_exits_2() {
    let out = manakov(&["scan", "--potential", "{not json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid potential"));
}

#[test]
fn missing_file_and_bad_interval_exit_2() {
    assert_eq!(manakov(&["scan", "--potential", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(manakov(&["scan", "--potential", FREE, "--interval", "3,1"]).status.code(), Some(2));
    assert_eq!(manakov(&["scan", "--potential", FREE, "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn free_scan_has_no_gaps() {
    let out = manakov(&["scan", "--potential", FREE, "--interval", "-10,10", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["data"]["gaps"].as_array().unwrap().len(), 0);
    let rows = v["data"]["rows"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["multiplicity"] == 3));
    assert_eq!(v["metadata"]["resolution"], 512);
}

#[test]
fn rank_one_scan_csv_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let p = path.to_str().unwrap();
    let out = manakov(&["scan", "--potential", RANK_ONE, "--interval", "-5,5", "--out", p]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("lambda,disc,disc_im,phi,t_abs,multiplicity,unimodular,boundary\n"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scan.csv.meta.json")).unwrap()).unwrap();
    // the plane wave e^{2 pi i x} opens one gap of width 2|a| at pi
    let gaps = meta["data"]["gaps"].as_array().unwrap();
    let wide: Vec<_> = gaps.iter().filter(|g| g["width"].as_f64().unwrap() > 1e-3).collect();
    assert_eq!(wide.len(), 1);
    assert!((wide[0]["width"].as_f64().unwrap() - 0.8).abs() < 1e-3);
}

#[test]
fn free_eigen_gives_triples_at_pi_n() {
    let v = json(&manakov(&["eigen", "--potential", FREE, "--window", "5,10", "--format", "json"]));
    let rows = v["data"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 18);
    for r in rows {
        let n = r["n"].as_f64().unwrap();
        assert!((r["re"].as_f64().unwrap() - std::f64::consts::PI * n).abs() < 1e-4);
        assert!(r["im"].as_f64().unwrap().abs() < 1e-4);
    }
}

#[test]
fn verify_exit_codes() {
    let out = manakov(&["verify", "--potential", RANK_ONE, "--real-points", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("zs-reduction"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn free_qmomentum_is_zero() {
    let v = json(&manakov(&["qmomentum", "--potential", FREE, "--interval", "-5,5", "--scales", "1", "--format", "json"]));
    assert_eq!(v["data"]["integral"]["value"], 0.0);
    assert!(v["data"]["ratio_integral"].is_null());
    assert!(v["data"]["rows"].as_array().unwrap().iter().all(|r| r["q_avg"] == 0.0));
}

#[test]
fn output_is_deterministic() {
    let args = ["scan", "--potential", RANK_ONE, "--interval", "-4,4", "--format", "json"];
    assert_eq!(manakov(&args).stdout, manakov(&args).stdout);
}

#[test]
fn sheets_for_rank_one() {
    let out = manakov(&["sheets", "--potential", RANK_ONE, "--interval", "-5,5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().nth(1).unwrap().starts_with("2,"));
}
