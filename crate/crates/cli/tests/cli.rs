use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qbra(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbra"))
        .args(args)
        .env("QBRA_OUT", out)
        .env("QBRA_JOBS", "2")
        .output()
        .expect("spawn qbra")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn capacity_reports_interior_diamond_load() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbra(&["capacity", "--topology", "diamond", "--sizes", "2,2,2", "--rho", "0.3,0.3,0.3,0.3,0.3,0.3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "interior");
    assert!((v["load_factor"].as_f64().unwrap() - 1.0 / 0.9).abs() < 1e-9);
    assert_eq!(v["weights"].as_array().unwrap().len(), 3);
}

#[test]
fn capacity_rejects_wrong_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbra(&["capacity", "--topology", "broken-diamond", "--rho", "0.1,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho"), "{}", stderr(&o));
}

#[test]
fn cover_finds_broken_diamond_signature() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbra(&["cover", "--topology", "broken-diamond"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["unique"], true);
    assert_eq!(v["instability_signature"], true);
    assert_eq!(v["schedules"].as_array().unwrap().len(), 4);
}

#[test]
fn duplicate_writes_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c5x2.toml");
    let o = qbra(&["duplicate", "--topology", "cycle", "--n", "5", "--k", "1", "--out", file.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&file).unwrap();
    assert!(text.starts_with("n = 10"), "{text}");
    assert!(stderr(&o).contains("maximal schedules 5 -> 5"), "{}", stderr(&o));
}

#[test]
fn fluid_diamond_drains_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbra(&["fluid", "--preset", "diamond-stable", "--seeds", "1..=5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("diamond-stable/summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "within_bound").unwrap();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row.split(',').nth(col), Some("true"), "{row}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--preset", "paper-sec6", "--seeds", "1,2", "--horizon", "5000"];
    assert!(qbra(&args, a.path()).status.success());
    assert!(qbra(&args, b.path()).status.success());
    let run = |d: &Path| d.join("paper-sec6");
    let mut names: Vec<_> = fs::read_dir(run(a.path())).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 4);
    for name in names {
        if name == "manifest.json" {
            continue;
        }
        let x = fs::read(run(a.path()).join(&name)).unwrap();
        let y = fs::read(run(b.path()).join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn manifest_hashes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbra(&["fastmix", "--seeds", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("diamond-fastmix");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "fastmix");
    let files = m["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "seed-1.trajectory.csv"));
    for f in files {
        let path = run.join(f["path"].as_str().unwrap());
        assert!(path.is_file(), "{}", path.display());
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "name = \"bad\"\nengine = \"fluid\"\nhorizon = 10.0\nseeds = [1]\n\n[topology]\nbuiltin = \"cycle\"\nn = 5\n\n[dynamics]\nlambda = [0.3, 0.3]\n",
    )
    .unwrap();
    let o = qbra(&["fluid", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));
}

#[test]
fn seed_failure_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("start.toml");
    fs::write(
        &cfg,
        "name = \"start\"\nengine = \"fluid\"\nhorizon = 10.0\nseeds = [1, 2]\n\n[topology]\nbuiltin = \"broken-diamond\"\n\n[dynamics]\nlambda = [0.3]\n\n[fluid]\nstart = 7\n",
    )
    .unwrap();
    let o = qbra(&["fluid", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    let run = dir.path().join("start");
    let summary = fs::read_to_string(run.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.contains(",failed")).count(), 2, "{summary}");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn analyze_writes_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbra(&["analyze", "--m", "2,3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("analyze/constants.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(stdout(&o).contains("alpha_2"));
    assert!(dir.path().join("analyze/manifest.json").is_file());
}
