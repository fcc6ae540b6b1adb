use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn henon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_henon"))
        .args(args)
        .env("HENON_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn constants_defaults_to_three_alphas() {
    let o = henon(&["constants", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["thresholds"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["multiplicity"], 5);
    assert_eq!(rows[0]["case1_max_n"], 2);
    assert_eq!(rows[0]["case2_max_n"], 3);
    assert_eq!(rows[0]["max_regions"], 4);
    assert_eq!(rows[0]["guaranteed_quasiradial"], 2);
    assert!(stdout(&o).contains("\"kappa\": 5.18699047313942"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(henon(&["constants", "--alpha=-1"]).status.code(), Some(2));
    assert_eq!(henon(&["constants", "--alpha", "0,x"]).status.code(), Some(2));
    assert_eq!(henon(&["solve", "--n", "0"]).status.code(), Some(2));
    assert_eq!(henon(&["solve", "--p", "10,20"]).status.code(), Some(2));
    assert_eq!(henon(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(henon(&["report", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn radial_writes_profile_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = henon(&["radial", "--alpha", "0", "--p", "10", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let rec = json_file(&dir.path().join("radial_a0_p10.json"));
    for key in ["p", "alpha", "interior_zero", "central_value", "dirichlet_energy", "p_energy", "target"] {
        assert!(rec[key].is_number(), "{key}");
    }
    let csv = fs::read_to_string(dir.path().join("radial_a0_p10.csv")).unwrap();
    assert!(csv.starts_with("r,value\n"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "alpha = 0,1\n# comment\n").unwrap();
    let v: Value = serde_json::from_str(&stdout(&henon(&["constants", "--json", "--config", cfg.to_str().unwrap()]))).unwrap();
    assert_eq!(v["thresholds"].as_array().unwrap().len(), 2);
    let v: Value = serde_json::from_str(&stdout(&henon(&[
        "constants",
        "--json",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "2",
    ])))
    .unwrap();
    assert_eq!(v["thresholds"][0]["multiplicity"], 10);
    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(henon(&["constants", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn solve_classify_morse_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = henon(&[
        "solve", "--alpha", "0", "--p", "5", "--n", "2", "--nr", "32", "--ntheta", "16", "--restarts", "1", "--init", "two-bump",
        "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let field = dir.path().join("solution_a0_p5_n2_field.csv");
    let side = json_file(&dir.path().join("solution_a0_p5_n2_field.json"));
    assert_eq!(side["n"], 2);
    assert_eq!(side["N_r"], 32);
    assert_eq!(side["N_theta"], 16);
    let rec = json_file(&dir.path().join("solution_a0_p5_n2.json"));
    assert_eq!(rec["converged"], true);

    let o = henon(&["classify", field.to_str().unwrap(), "--json", "--out", out]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["region_count"], 4);
    assert_eq!(v["case"], "case1");
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(dir.path().join("labels.csv")).unwrap().starts_with("r,theta,label\n"));

    let v: Value = serde_json::from_str(&stdout(&henon(&["morse", field.to_str().unwrap(), "--json"]))).unwrap();
    assert_eq!(v["subspace"], "n-invariant");
    assert!(v["negative_count"].as_u64().unwrap() >= 2);
}

#[test]
fn sweep_is_reproducible_and_reported() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &str| -> Vec<String> {
        ["sweep", "--alpha", "0", "--p", "5", "--n", "2..3", "--nr", "32", "--ntheta", "16", "--restarts", "2", "--out", d]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let a_out = a.path().to_str().unwrap();
    let o = henon(&args(a_out).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", String::from_utf8_lossy(&o.stderr));
    let phase = fs::read_to_string(a.path().join("phase.csv")).unwrap();
    assert!(phase.starts_with("alpha,p,n,case,regions,m_n,p_energy,predicted_admissible,consistent\n"));
    assert_eq!(phase.lines().count(), 3);
    let manifest = json_file(&a.path().join("manifest.json"));
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 2);
    assert!(manifest["run_id"].as_str().unwrap().ends_with("-0"));
    for n in [2, 3] {
        assert!(a.path().join(format!("cell_a0_p5_n{n}.json")).exists());
        assert!(a.path().join(format!("cell_a0_p5_n{n}_field.csv")).exists());
    }

    let manifest_path = a.path().join("manifest.json");
    let o = henon(&["sweep", "--manifest", manifest_path.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0) | Some(4)));
    assert_eq!(phase, fs::read_to_string(b.path().join("phase.csv")).unwrap());

    fs::write(a.path().join("cell_a0_p5_n9.json"), "{ not json").unwrap();
    let o = henon(&["report", a_out]);
    assert_eq!(o.status.code(), Some(0));
    let md = fs::read_to_string(a.path().join("report.md")).unwrap();
    assert!(md.contains("## Morse counts"));
    assert!(md.contains("corrupt cell file"));
    let csv = fs::read_to_string(a.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("table,alpha,p,n,item,observed,expected,status\n"));
}
