use std::path::Path;
use std::process::Command;

use nsshape_core::mesh::{load_mesh, MeshFormat};

fn nsshape(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nsshape"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.ini");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SHORT: &str = "[problem]\nalpha = 0.1\nt_final = 0.1\ndt = 0.05\n";

#[test]
fn solve_with_empty_mesh_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.txt"), "").unwrap();
    let cfg = write_config(dir.path(), &format!("{SHORT}[mesh]\npath = empty.txt\n"));
    let out = nsshape(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\nalpha = -1\n");
    let out = nsshape(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.alpha"));
}

#[test]
fn solve_writes_mesh_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SHORT}target = none\n[mesh]\nobstacle = circle\nh = 0.078\nh_outer = 0.19\n"),
    );
    let out_dir = dir.path().join("solve");
    let out = nsshape(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--snapshots", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = load_mesh(out_dir.join("mesh.txt"), MeshFormat::Native).unwrap();
    for k in 0..=2 {
        let vtk = std::fs::read_to_string(out_dir.join(format!("state_{k:04}.vtk"))).unwrap();
        assert!(vtk.contains(&format!("POINTS {} double", mesh.nodes().len())));
    }
    let csv = std::fs::read_to_string(out_dir.join("solve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn optimize_writes_one_record_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{SHORT}[mesh]\nh = 0.1\nh_outer = 0.2\ndonor_h = 0.078\ndonor_h_outer = 0.19\n[optimizer]\niterations = 2\n"
    );
    let cfg = write_config(dir.path(), &body);
    let out_dir = dir.path().join("opt");
    let out = nsshape(&["optimize", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let history = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "iter,J,grad_norm,step,area,min_quality,seconds");
    assert_eq!(lines.len(), 3);
    for name in ["mesh_0001.txt", "mesh_0002.txt", "mesh_final.txt"] {
        load_mesh(out_dir.join(name), MeshFormat::Native).unwrap();
    }
    assert!(out_dir.join("donor.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 2);

    let donor = out_dir.join("donor.json");
    let cached = body.replace("[optimizer]", &format!("donor_cache = {}\n[optimizer]", donor.display()));
    let cfg = write_config(dir.path(), &cached);
    let again = dir.path().join("again");
    let out = nsshape(&["optimize", "--config", &cfg, "--out", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!again.join("donor.json").exists());
    let first = |d: &Path| std::fs::read_to_string(d.join("history.csv")).unwrap().lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    assert_eq!(first(&out_dir), first(&again));
}

#[test]
fn identical_configs_give_identical_histories() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SHORT}[mesh]\nh = 0.1\nh_outer = 0.2\ndonor_h = 0.078\ndonor_h_outer = 0.19\n[optimizer]\niterations = 2\n");
    let cfg = write_config(dir.path(), &body);
    let strip = |dir: &Path| -> Vec<String> {
        std::fs::read_to_string(dir.join("history.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = nsshape(&["optimize", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn verify_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "{SHORT}target = rotating_bc\n[mesh]\nobstacle = circle\nh = 0.078\nh_outer = 0.19\n[verify]\ntracking_tolerance = 1e-12\nvorticity_tolerance = 1e-12\n"
        ),
    );
    let out_dir = dir.path().join("v");
    let out = nsshape(&["verify", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("verify.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "probe,eps,adjoint,fd,rel_err");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("tracking:radial,"));
}

#[test]
fn exhausted_morph_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "{SHORT}[mesh]\nh = 0.1\nh_outer = 0.2\ndonor_h = 0.078\ndonor_h_outer = 0.19\n[optimizer]\niterations = 1\ninitial_step = 1e12\nmax_retries = 0\n"
        ),
    );
    let out = nsshape(&["optimize", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
