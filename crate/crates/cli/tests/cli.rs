use std::path::Path;
use std::process::{Command, Output};

fn willmore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_willmore")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, level: &str) -> std::path::PathBuf {
    let mesh = dir.join("bumpy.off");
    let out = willmore(&["generate", "--lmax", "4", "--eps", "0.08", "--seed", "7", "--level", level, "--out", s(&mesh)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    mesh
}

#[test]
fn generate_writes_mesh_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate(dir.path(), "2");
    assert!(std::fs::read_to_string(&mesh).unwrap().starts_with("OFF"));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bumpy.json")).unwrap()).unwrap();
    assert_eq!(side["spec"]["seed"], 7);
    assert_eq!(side["vertices"], 162);
    assert!(side["tracefree_energy"].as_f64().unwrap() > 0.0);
}

#[test]
fn measure_reports_functionals() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate(dir.path(), "2");
    let out = willmore(&["measure", "--in", s(&mesh), "--json"]);
    assert!(out.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((rec["area"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    let text = willmore(&["measure", "--in", s(&mesh)]);
    assert!(String::from_utf8(text.stdout).unwrap().contains("willmore"));
}

#[test]
fn flow_writes_trace_and_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate(dir.path(), "2");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"max_steps": 5, "remesh_every": 0}"#).unwrap();
    let (trace, done) = (dir.path().join("t.csv"), dir.path().join("done.obj"));
    let out = willmore(&["flow", "--in", s(&mesh), "--config", s(&cfg), "--trace", s(&trace), "--out", s(&done)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("step,t,dt,area"));
    assert_eq!(csv.lines().count(), 7);
    assert!(std::fs::read_to_string(&done).unwrap().contains("\nf "));

    let fit = willmore(&["fit-sphere", "--in", s(&done)]);
    assert!(fit.status.success());
    assert!(String::from_utf8(fit.stdout).unwrap().contains("radius"));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = willmore(&["measure", "--in", s(&dir.path().join("missing.off"))]);
    assert_eq!(out.status.code(), Some(1));

    let mesh = generate(dir.path(), "1");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"maxSteps": 5}"#).unwrap();
    let out = willmore(&["flow", "--in", s(&mesh), "--config", s(&cfg), "--out", s(&dir.path().join("x.off"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let fam = |bounds: &str| {
        let p = dir.path().join("fam.json");
        std::fs::write(
            &p,
            format!(r#"{{"perturbation": {{"lmax": 4, "seed": 7, "eps": 0.2, "level": 2}}, "rungs": 2, "bounds": {bounds}}}"#),
        )
        .unwrap();
        p
    };
    let lax = fam(r#"{"spread": 1e9}"#);
    let out = willmore(&["verify", "stability", "--family", s(&lax), "--report", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert!(dir.path().join("r.csv").exists() && dir.path().join("r.svg").exists());

    let strict = fam(r#"{"spread": 1.0}"#);
    let out = willmore(&["verify", "stability", "--family", s(&strict), "--report", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn verify_deficit_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("fam.json");
    std::fs::write(&fam, r#"{"perturbation": {"lmax": 4, "seed": 7, "eps": 0.2, "level": 3}}"#).unwrap();
    let report = dir.path().join("deficit.json");
    let out = willmore(&["verify", "deficit", "--family", s(&fam), "--report", s(&report)]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    let csv = std::fs::read_to_string(dir.path().join("deficit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
