use std::path::Path;
use std::process::{Command, Output};

use nusid::harness::preset;
use serde_json::json;

fn nusid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nusid")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_subcommand() {
    let o = nusid(&["bounds", "--T", "104", "--p-miss", "0.25"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("N=78"), "{}", stdout(&o));
    assert!(stdout(&o).contains("bound=0.205922"));

    let o = nusid(&["bounds", "--T", "600", "--Tr", "12"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("sigma_max=3.464102"));

    assert_eq!(nusid(&["bounds", "--T", "600", "--Tr", "7"]).status.code(), Some(2));
    assert_eq!(nusid(&["bounds", "--T", "10", "--p-miss", "1.5"]).status.code(), Some(2));
}

#[test]
fn config_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(nusid(&["run", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1, \"surprise\": true}").unwrap();
    assert_eq!(nusid(&["run", bad.to_str().unwrap()]).status.code(), Some(2));

    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "k,u,y\n0,1,2\n1,1,3\n").unwrap();
    let path = csv.to_str().unwrap();
    assert!(nusid(&["ingest", path, "--time", "k", "--inputs", "u", "--outputs", "y"]).status.success());
    let o = nusid(&["ingest", path, "--outputs", "w"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[data]"));
}

#[test]
fn simulate_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&preset("e1").unwrap().to_json()).unwrap();
    v["reps"] = json!(2);
    v["scheme"]["p_miss"] = json!([0.0, 0.5]);
    v["estimation"]["hyper"]["max_iters"] = json!(50);
    let config = dir.path().join("c.json");
    std::fs::write(&config, v.to_string()).unwrap();
    let config = config.to_str().unwrap();

    let data = dir.path().join("rep0.csv");
    let o = nusid(&["simulate", config, "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("rep0.meta.json").exists());
    let o = nusid(&["ingest", data.to_str().unwrap(), "--time", "k", "--inputs", "u0", "--outputs", "z0"]);
    assert!(stdout(&o).contains("104 rows"), "{}", stdout(&o));

    let out = dir.path().join("res");
    let o = nusid(&["run", config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("p0.50"));
    for f in ["config.json", "reps.csv", "summary.csv", "bounds.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let merged = dir.path().join("merged");
    let o = nusid(&["report", out.to_str().unwrap(), "--out", merged.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
        std::fs::read_to_string(Path::new(&merged).join("summary.csv")).unwrap()
    );
}
