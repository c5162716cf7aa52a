use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn itrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itrm")).args(args).output().unwrap()
}

fn corpus(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "corpus", &format!("{name}.itrm")]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_omega_plus_one() {
    let o = itrm(&["run", "--program", &corpus("omega-plus-one")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "halted output=0 clock=w^{1}*1+1\n");
}

#[test]
fn run_reset_demo_and_verify_its_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let cert = cert.to_str().unwrap();
    let o = itrm(&["run", "--program", &corpus("reset-demo"), "--cert", cert]);
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(stdout(&o), "diverges cert=(0, w^{1}*1)\n");

    let v = itrm(&["verify", "--cert", cert, "--program", &corpus("reset-demo")]);
    assert_eq!(v.status.code(), Some(0));

    let text = fs::read_to_string(cert).unwrap();
    let tampered = text.replacen("\"clock_a\": \"0\"", "\"clock_a\": \"1\"", 1);
    assert_ne!(text, tampered);
    fs::write(cert, tampered).unwrap();
    let v = itrm(&["verify", "--cert", cert, "--program", &corpus("reset-demo")]);
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn malformed_inputs_exit_with_usage_status() {
    let o = itrm(&["run", "--program", &corpus("reset-demo"), "--oracle", "finite:{1,"]);
    assert_eq!(o.status.code(), Some(2));
    let o = itrm(&["run", "--program", "/nonexistent/program.itrm"]);
    assert_eq!(o.status.code(), Some(2));
    let o = itrm(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = itrm(&["run", "--program", &corpus("reset-demo"), "--budget-steps", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn assembly_errors_name_file_and_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.itrm");
    fs::write(&path, "registers 2\ninc 0\njeq 0 1 nowhere\n").unwrap();
    let o = itrm(&["run", "--program", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.itrm:3:"), "{err}");
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn budget_exhaustion_has_its_own_status() {
    let o = itrm(&["run", "--program", &corpus("epoch-counter"), "--budget-level", "1"]);
    assert_eq!(o.status.code(), Some(11));
    assert!(stdout(&o).starts_with("budget-exhausted"));
}

#[test]
fn enum_zero_is_the_empty_program() {
    let o = itrm(&["enum", "--index", "0", "--registers", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "registers 1\n");
}

#[test]
fn scan_report_partitions_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = itrm(&["scan", "--registers", "1", "--bound", "100", "--report", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o2 = itrm(&[
        "scan",
        "--registers",
        "1",
        "--bound",
        "100",
        "--jobs",
        "1",
        "--report",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o2.status.code(), Some(0));
    let ra = fs::read_to_string(&a).unwrap();
    assert_eq!(ra, fs::read_to_string(&b).unwrap());
    let report: serde_json::Value = serde_json::from_str(&ra).unwrap();
    let c = &report["counts"];
    let sum = c["halted"].as_u64().unwrap() + c["diverges"].as_u64().unwrap() + c["unknown"].as_u64().unwrap();
    assert_eq!(sum, 100);
    assert_eq!(report["entries"].as_array().unwrap().len(), 100);
}

#[test]
fn trace_writes_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let o = itrm(&["trace", "--program", &corpus("omega-plus-one"), "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    let last = text.lines().last().unwrap();
    assert_eq!(last, r#"{"clock":"w^{1}*1+1","pc":4,"registers":[0,0,0,0],"event":"halt"}"#);
    let again = dir.path().join("u.jsonl");
    itrm(&["trace", "--program", &corpus("omega-plus-one"), "--trace", again.to_str().unwrap()]);
    assert_eq!(text, fs::read_to_string(&again).unwrap());
    let limits = text.lines().filter(|l| l.contains("\"event\":\"limit\"")).count();
    assert_eq!(limits, 1);
}

#[test]
fn cli_emitted_certificates_verify_for_meta_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let cert = cert.to_str().unwrap();
    let o = itrm(&["run", "--program", &corpus("epoch-counter"), "--cert", cert]);
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(stdout(&o), "diverges cert=(0, w^{2}*1)\n");
    let v = itrm(&["verify", "--cert", cert, "--program", &corpus("epoch-counter")]);
    assert_eq!(v.status.code(), Some(0));
    let v = itrm(&["verify", "--cert", cert, "--program", &corpus("epoch-counter"), "--oracle", "naturals"]);
    assert_eq!(v.status.code(), Some(0), "the program never reads its oracle");
}
