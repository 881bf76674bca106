use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obstacle-shape"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Values of `column` in a CSV written by the binary.
fn column(file: &Path, column: &str) -> Vec<f64> {
    let text = fs::read_to_string(file).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|c| *c == column).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn help_succeeds_and_unknown_commands_are_usage_errors() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["--version"]).status.code(), Some(0));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["mesh"]).status.code(), Some(1));
    assert_eq!(cli(&["mesh", "--out", "x", "--set", "no.such.key=1"]).status.code(), Some(1));
}

#[test]
fn mesh_is_written_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.mesh"), dir.path().join("b.mesh"));
    for file in [&a, &b] {
        let out = cli(&["mesh", "--set", "discretization.h=0.1", "--out", path(file)]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    let text = fs::read(&a).unwrap();
    assert!(text.starts_with(b"obsmesh 1\n"));
    assert_eq!(text, fs::read(&b).unwrap());
}

#[test]
fn nonpositive_mesh_size_is_rejected_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["mesh", "--set", "discretization.h=0", "--out", path(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("discretization.h"));
}

#[test]
fn solve_reports_contact_for_the_default_load_and_none_without_load() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = dir.path().join("loaded");
    let out = cli(&["solve", "--set", "discretization.h=0.1", "--out", path(&loaded)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(!stdout(&out).contains("|contact set| = 0,"));
    assert!(column(&loaded.join("state.csv"), "contact").contains(&1.0));
    assert!(loaded.join("state.vtk").exists() && loaded.join("levelset.csv").exists());

    let free = dir.path().join("free");
    let out = cli(&["solve", "--set", "physics.f=0", "--set", "discretization.h=0.1", "--out", path(&free)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout(&out).contains("|contact set| = 0,"));
    assert!(column(&free.join("state.csv"), "contact").iter().all(|&c| c == 0.0));
}

#[test]
fn solve_on_a_missing_mesh_names_the_file() {
    let out = cli(&["solve", "--mesh", "/nonexistent/disk.mesh"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/disk.mesh"));
}

#[test]
fn solve_reads_mesh_and_control_files() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("disk.mesh");
    assert!(cli(&["mesh", "--set", "discretization.h=0.2", "--out", path(&mesh)]).status.success());
    let control = dir.path().join("control.csv");
    let rows: Vec<String> = (0..8).map(|k| format!("{k},{},{}", k as f64 * 0.785, 1.5 + 0.1 * k as f64)).collect();
    fs::write(&control, format!("k,theta_k,a_k\n{}\n", rows.join("\n"))).unwrap();
    let out = cli(&[
        "solve",
        "--mesh",
        path(&mesh),
        "--control",
        path(&control),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // The state converts back to the same VTK file through the export command.
    let vtk = dir.path().join("again.vtk");
    let out = cli(&[
        "export",
        "vtk",
        "--mesh",
        path(&mesh),
        "--state",
        path(&dir.path().join("state.csv")),
        "--out",
        path(&vtk),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(fs::read(&vtk).unwrap(), fs::read(dir.path().join("state.vtk")).unwrap());
}

#[test]
fn optimize_improves_on_the_initial_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "optimize",
        "--set",
        "optimizer.max_feval=30",
        "--out",
        path(dir.path()),
        "--check-gradient",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    for variant in ["standard", "weak_wolfe"] {
        let best = column(&dir.path().join(format!("{variant}_trace.csv")), "bestJ");
        assert_eq!(best.len(), 30);
        assert!(best.last().unwrap() < &best[0]);
        assert_eq!(column(&dir.path().join(format!("{variant}_control.csv")), "a_k").len(), 30);
    }
    assert!(stdout(&out).contains("directional derivative"));

    // The written configuration reproduces the run.
    let again = dir.path().join("again");
    let out = cli(&[
        "optimize",
        "--config",
        path(&dir.path().join("config.txt")),
        "--variant",
        "standard",
        "--out",
        path(&again),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(
        fs::read(again.join("standard_trace.csv")).unwrap(),
        fs::read(dir.path().join("standard_trace.csv")).unwrap()
    );
}

#[test]
fn budget_of_one_gives_a_single_trace_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "optimize",
        "--variant",
        "weak_wolfe",
        "--set",
        "optimizer.max_feval=1",
        "--set",
        "discretization.h=0.2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(column(&dir.path().join("weak_wolfe_trace.csv"), "bestJ").len(), 1);
    assert!(!dir.path().join("standard_trace.csv").exists());
}

#[test]
fn pchip_demo_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pchip.csv");
    let out = cli(&["pchip-demo", "--range", "-0.5,1.0", "--samples", "41", "--out", path(&file)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let a = column(&file, "a");
    assert_eq!(a.len(), 41);
    assert_eq!((a[0], a[40]), (-0.5, 1.0));
    assert_eq!(cli(&["pchip-demo", "--samples", "1", "--out", path(&file)]).status.code(), Some(1));
}

#[test]
fn compare_aligns_traces_of_different_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("short_trace.csv"), dir.path().join("long_trace.csv"));
    fs::write(&a, "feval,J,bestJ,gradnorm,step\n1,5,5,1,0\n2,4,4,1,1\n").unwrap();
    fs::write(&b, "feval,J,bestJ,gradnorm,step\n1,5,5,1,0\n2,6,5,1,1\n3,3,3,1,1\n").unwrap();
    let out_file = dir.path().join("compare.csv");
    let out = cli(&["export", "compare", "--out", path(&out_file), path(&a), path(&b)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(fs::read_to_string(&out_file).unwrap(), "feval,short,long\n1,5e0,5e0\n2,4e0,5e0\n3,4e0,3e0\n");

    fs::write(&a, "feval,J\n1,5\n").unwrap();
    let out = cli(&["export", "compare", "--out", path(&out_file), path(&a)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bestJ"));
}
