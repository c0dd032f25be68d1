use clap::Parser;
use tds_certify::cli::{run, Cli, Outcome, EXIT_INDETERMINATE, EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK};
use tds_certify::Error;

fn go(args: &[&str]) -> Result<Outcome, Error> {
    let mut v = vec!["tds-certify"];
    v.extend_from_slice(args);
    run(&Cli::try_parse_from(v).expect("arguments parse"))
}

fn code(args: &[&str]) -> i32 {
    match go(args) {
        Ok(o) => o.code,
        Err(e) => tds_certify::cli::exit_code_for(&e),
    }
}

#[test]
fn single_order_row() {
    let out = go(&["max-delay", "--example", "1", "--n", "2..2", "--format", "csv"]).unwrap();
    let lines: Vec<&str> = out.text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("2,0.604"));
}

#[test]
fn json_dash_is_null() {
    let out = go(&["max-delay", "--example", "2", "--n", "1", "--scan", "0.05:0.1:0.05", "--h", "1,2"]);
    assert!(matches!(out, Err(Error::Input(_))));
    let out = go(&["max-delay", "--example", "1", "--n", "1", "--h", "0.7,1", "--format", "json"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out.text).unwrap();
    assert!(v[0]["h_max"].is_null());
}

#[test]
fn output_is_byte_identical() {
    let args = ["nstar", "--example", "2", "--h", "0.1,0.5", "--format", "json"];
    assert_eq!(go(&args).unwrap().text, go(&args).unwrap().text);
    let args = ["certificate", "--example", "1", "--h", "0.5", "--n", "1", "--mode", "solver"];
    assert_eq!(go(&args).unwrap().text, go(&args).unwrap().text);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["roots", "--example", "1", "--h", "0.5"]), EXIT_OK);
    assert_eq!(code(&["roots", "--example", "1", "--h", "0.7"]), EXIT_NEGATIVE);
    assert_eq!(code(&["certificate", "--example", "1", "--h", "0.7", "--n", "1"]), EXIT_NEGATIVE);
    assert_eq!(code(&["roots", "--example", "9"]), EXIT_INPUT);
    assert_eq!(code(&["nstar", "--example", "1", "--n", "3..1"]), EXIT_INPUT);
    assert_eq!(code(&["roots"]), EXIT_INPUT);
}

#[test]
fn ill_posed_kernel_is_indeterminate() {
    let sys = tds_certify::model::builtin_example(3, Some(5.0), 0.1).unwrap();
    let h = tds_certify::spectrum::crossing_delay(&sys, 0.05, 1.0, 1e-12).unwrap().unwrap();
    let hs = format!("{h}");
    assert_eq!(code(&["lyap-check", "--example", "3", "--lambda", "5", "--h", &hs]), EXIT_INDETERMINATE);
}

#[test]
fn system_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"A": [[1]], "Ad": [[-2]], "h": 0.3}"#).unwrap();
    let out = go(&["lyap-check", "--system", good.to_str().unwrap()]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out.text).unwrap();
    assert!(v["residuals"]["ode"].as_f64().unwrap() < 1e-7);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"A": [[1]], "Ad": [[-2, 0]], "h": 0.3}"#).unwrap();
    assert_eq!(code(&["roots", "--system", bad.to_str().unwrap()]), EXIT_INPUT);
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{not json").unwrap();
    assert_eq!(code(&["certificate", "--system", junk.to_str().unwrap()]), EXIT_INPUT);
}

#[test]
fn converse_certificate_round_trips_through_eigen_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = go(&["certificate", "--example", "1", "--h", "0.3", "--n", "10", "--mode", "converse"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out.text).unwrap();
    assert!(v["report"]["margins"]["phi_plus"].as_f64().unwrap() > 0.0);
    let path = dir.path().join("cert.json");
    std::fs::write(&path, v["certificate"].to_string()).unwrap();
    let again = go(&[
        "certificate", "--example", "1", "--h", "0.3", "--backend", "eigen-check",
        "--certificate", path.to_str().unwrap(),
    ])
    .unwrap();
    assert_eq!(again.code, EXIT_OK);
}

#[test]
fn region_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = go(&[
        "region", "--grid", "1:3:2,0.2:0.4:2", "--n", "1", "--out", dir.path().to_str().unwrap(),
    ])
    .unwrap();
    assert_eq!(out.code, EXIT_OK);
    let region = std::fs::read_to_string(dir.path().join("region.csv")).unwrap();
    assert!(region.starts_with("lambda,h,n,verdict,margin,oracle\n"));
    assert_eq!(region.lines().count(), 5);
    let nstar = std::fs::read_to_string(dir.path().join("nstar.csv")).unwrap();
    assert!(nstar.starts_with("lambda,h,Nstar,illposed\n"));
    assert_eq!(code(&["region", "--grid", "1:3:0,0.2:0.4:2"]), EXIT_INPUT);
}
