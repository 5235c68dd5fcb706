use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dwellcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwellcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bound_cert(dir: &Path, system: &str, k: &str, mu: &str) -> (Output, String) {
    let cert = dir.join("cert.json");
    let cert = cert.to_str().unwrap().to_owned();
    let out = dwellcert(&[
        "bound", "--system", system, "--K", k, "--mu", mu, "--cert", &cert,
    ]);
    (out, cert)
}

#[test]
fn bound_verify_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (out, cert) = bound_cert(dir.path(), "example1", "20", "1.4");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("tau_a"), "{text}");
    assert!(text.contains("verified    yes"), "{text}");

    let out = dwellcert(&["verify", "--cert", &cert]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASSED"));

    let traj = dir.path().join("traj");
    let out = dwellcert(&[
        "simulate",
        "--cert",
        &cert,
        "--seeds",
        "2",
        "--out-dir",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}{}",
        stdout(&out),
        stderr(&out)
    );
    let csv = fs::read_to_string(traj.join("trajectory_seed0.csv")).unwrap();
    assert!(csv.starts_with("t,mode,x1,x2,V_active\n"), "{}", &csv[..40]);
}

#[test]
fn json_report_has_bound_fields() {
    let out = dwellcert(&[
        "--format", "json", "bound", "--system", "example1", "--K", "10", "--mu", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["alpha"].as_f64().unwrap() > 0.0);
    assert!(v["tau_a"].as_f64().unwrap() > 0.0);
    assert_eq!(v["num_vars"], 161);
    assert_eq!(v["verified"], true);
}

#[test]
fn common_lyapunov_function_reports_arbitrary_switching() {
    let out = dwellcert(&["bound", "--system", "example2", "--K", "21", "--mu", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("arbitrary switching"));
}

#[test]
fn nonpositive_alpha_exits_two() {
    let out = dwellcert(&["bound", "--system", "example1", "--K", "10", "--mu", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert!(stdout(&out).contains("not positive"));
}

#[test]
fn malformed_matrix_names_the_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"n":2,"modes":[{"name":"A1","matrix":[[-1,0],[0,-1]]},{"name":"Bent","matrix":[[1,0]]}]}"#,
    )
    .unwrap();
    let out = dwellcert(&[
        "bound",
        "--system",
        path.to_str().unwrap(),
        "--K",
        "5",
        "--mu",
        "1.2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Bent"), "{}", stderr(&out));
}

#[test]
fn missing_system_exits_one() {
    let out = dwellcert(&[
        "bound",
        "--system",
        "no-such-system.json",
        "--K",
        "5",
        "--mu",
        "1.2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn truncated_certificate_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cert) = bound_cert(dir.path(), "example1", "8", "1.5");
    let text = fs::read_to_string(&cert).unwrap();
    let cut = dir.path().join("cut.json");
    fs::write(&cut, &text[..text.len() / 2]).unwrap();
    let out = dwellcert(&["verify", "--cert", cut.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("byte offset"), "{}", stderr(&out));
}

#[test]
fn tampered_certificate_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cert) = bound_cert(dir.path(), "example1", "8", "1.5");
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    let alpha = v["alpha"].as_f64().unwrap();
    v["alpha"] = serde_json::json!(2.0 * alpha);
    fs::write(&cert, serde_json::to_string(&v).unwrap()).unwrap();
    let out = dwellcert(&["verify", "--cert", &cert]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAILED"));
}

#[test]
fn sweep_writes_csv_and_refines() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = dwellcert(&[
        "sweep",
        "--system",
        "example1",
        "--K",
        "10",
        "--mu-min",
        "1.2",
        "--mu-max",
        "1.6",
        "--mu-step",
        "0.1",
        "--refine",
        "6",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("refined"));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mu,alpha,tau_a,status"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn sweep_without_certificate_exits_two() {
    let out = dwellcert(&[
        "sweep",
        "--system",
        "example1",
        "--K",
        "6",
        "--mu-min",
        "1",
        "--mu-max",
        "1.01",
        "--mu-step",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
}

#[test]
fn empty_grid_exits_one() {
    let out = dwellcert(&[
        "sweep", "--system", "example1", "--K", "6", "--mu-min", "2", "--mu-max", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
