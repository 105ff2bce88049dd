use std::process::{Command, Output};

use serde_json::Value;

fn quadtherm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadtherm"))
        .args(args)
        .env_remove("QUADTHERM_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_appendix_reports_the_derivatives() {
    let out = quadtherm(&["verify-appendix"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["dP"].as_f64().unwrap(), -16.0);
    assert_eq!(v["result"]["dPt"].as_f64().unwrap(), 24.0);
    for r in v["result"]["fd_check_residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() <= 1e-4);
    }
    assert_eq!(v["config"]["precision_bits"], 106);
}

#[test]
fn pressure_at_zero_is_log_two() {
    let out = quadtherm(&["pressure", "--c", "-2", "--t", "0", "--tree-depth", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config={"));
    assert_eq!(lines.next().unwrap(), "t,estimate,error_bar,depth,leaves,flagged");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((row[1].parse::<f64>().unwrap() - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(quadtherm(&["pressure", "--nonsense"]).status.code(), Some(1));
    assert_eq!(quadtherm(&["--help"]).status.code(), Some(0));
    // Ratio exactly 1: neither convergence nor divergence can be shown.
    let out = quadtherm(&["series", "--kind", "poincare", "--t", "0", "--p", "0.6931471805599453", "--tree-depth", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(quadtherm(&["verify-appendix", "--precision", "8"]).status.code(), Some(1));
}

#[test]
fn outputs_are_reproducible() {
    let args = ["pressure", "--t", "-1,0.5,2", "--tree-depth", "12", "--mode", "real"];
    assert_eq!(quadtherm(&args).stdout, quadtherm(&args).stdout);
    let args = ["render", "puzzle", "--depth", "2", "--which", "minus_beta", "--gmin", "1e-4"];
    let a = quadtherm(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, quadtherm(&args).stdout);
    let v = json_of(&a);
    let angles: Vec<&str> = v["result"].as_array().unwrap().iter().filter_map(|l| l["angle"].as_str()).collect();
    assert_eq!(angles, vec!["5/12", "7/12"]);
}

#[test]
fn config_layers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"precision_bits": 160, "tree_depth": 9}"#).unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_quadtherm"));
        cmd.arg("verify-appendix").args(extra);
        match env {
            Some(v) => cmd.env("QUADTHERM_PRECISION_BITS", v),
            None => cmd.env_remove("QUADTHERM_PRECISION_BITS"),
        };
        json_of(&cmd.output().unwrap())["config"].clone()
    };
    assert_eq!(run(&[], Some("128"))["precision_bits"], 128);
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["--config", c], Some("128"))["precision_bits"], 160);
    assert_eq!(run(&["--config", c], Some("128"))["tree_depth"], 9);
    assert_eq!(run(&["--config", c, "--precision", "200"], Some("128"))["precision_bits"], 200);
}

#[test]
fn julia_image_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.pgm");
    let out = quadtherm(&["render", "julia", "--c", "0", "--res", "40x30", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n# config="));
    let header_end = bytes.windows(8).position(|w| w == b"\n40 30\n2").unwrap();
    let body = &bytes[header_end + "\n40 30\n255\n".len()..];
    assert_eq!(body.len(), 40 * 30);
    assert_eq!(quadtherm(&["render", "julia"]).status.code(), Some(1));
}
